#include "spdalign/trial.hpp"

#include "spdalign/error.hpp"

namespace spdalign {

const char* label_name(int label) {
    switch (label) {
        case kAdaptive: return "adaptive";
        case kNonAdaptive: return "non_adaptive";
        default: throw InvalidInput("unknown label " + std::to_string(label));
    }
}

int label_from_name(const std::string& name) {
    if (name == "adaptive") return kAdaptive;
    if (name == "non_adaptive") return kNonAdaptive;
    throw DataError("unknown label name '" + name + "'");
}

Trial::Trial(Eigen::MatrixXd data) : data_(std::move(data)) {
    if (data_.rows() < 2) throw InvalidInput("Trial: need at least 2 channels");
    if (data_.cols() < 2) throw InvalidInput("Trial: need at least 2 samples");
    if (!data_.allFinite()) throw InvalidInput("Trial: non-finite samples");
}

Trial::Trial(Eigen::MatrixXd data, filtered_t) : data_(std::move(data)) {
    if (data_.rows() < 1) throw InvalidInput("Trial: filtered signal has no rows");
    if (data_.cols() < 2) throw InvalidInput("Trial: need at least 2 samples");
    if (!data_.allFinite()) throw InvalidInput("Trial: non-finite samples");
}

Trial Trial::filtered(Eigen::MatrixXd data) { return Trial(std::move(data), filtered_t{}); }

void TrialSet::validate() const {
    if (trials.size() != labels.size()) {
        throw InvalidInput("TrialSet " + subject_id + ": " + std::to_string(trials.size()) +
                           " trials but " + std::to_string(labels.size()) + " labels");
    }
    for (const auto& t : trials) {
        if (t.channels() != channels()) {
            throw InvalidInput("TrialSet " + subject_id + ": trial channel count " +
                               std::to_string(t.channels()) + " != " +
                               std::to_string(channels()) + " channel names");
        }
    }
}

}  // namespace spdalign
