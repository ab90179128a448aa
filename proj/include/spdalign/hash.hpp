#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace spdalign {

/// Incremental SHA-256. Matrices are fed as (rows, cols, column-major doubles).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(const void* data, std::size_t size);
    Sha256& update(std::string_view text);
    Sha256& update(double value);
    Sha256& update(std::int64_t value);
    Sha256& update(const Eigen::MatrixXd& m);
    Sha256& update(const Eigen::VectorXd& v);

    /// Lowercase hex; the object cannot be updated afterwards.
    std::string hex_digest();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace spdalign
