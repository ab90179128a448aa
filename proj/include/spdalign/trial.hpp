#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace spdalign {

/// Heel-strike class labels.
inline constexpr int kNonAdaptive = 0;
inline constexpr int kAdaptive = 1;

const char* label_name(int label);
int label_from_name(const std::string& name);

/// One window of multichannel signal, channels x samples (microvolts).
class Trial {
public:
    explicit Trial(Eigen::MatrixXd data);

    /// Spatially filtered signal; a single filter row is allowed.
    static Trial filtered(Eigen::MatrixXd data);

    Eigen::Index channels() const noexcept { return data_.rows(); }
    Eigen::Index samples() const noexcept { return data_.cols(); }
    const Eigen::MatrixXd& data() const noexcept { return data_; }

private:
    struct filtered_t {};
    Trial(Eigen::MatrixXd data, filtered_t);
    Eigen::MatrixXd data_;
};

/// All labelled windows of one subject under one condition.
struct TrialSet {
    std::string subject_id;
    std::string condition;
    std::vector<std::string> channel_names;
    std::vector<Trial> trials;
    std::vector<int> labels;

    std::size_t size() const noexcept { return trials.size(); }
    Eigen::Index channels() const noexcept {
        return static_cast<Eigen::Index>(channel_names.size());
    }

    /// Throws InvalidInput if trials/labels/channel names disagree.
    void validate() const;
};

}  // namespace spdalign
