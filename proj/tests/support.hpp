#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "spdalign/spd.hpp"

namespace spdalign::test {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
    }
    return m;
}

/// Q diag(exp(u)) Q^T with u uniform in [-spread, spread].
inline Eigen::MatrixXd random_spd_matrix(Eigen::Index n, std::mt19937_64& rng,
                                         double spread = 1.0) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, n, rng));
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    std::uniform_real_distribution<double> u(-spread, spread);
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = std::exp(u(rng));
    Eigen::MatrixXd c = q * d.asDiagonal() * q.transpose();
    return 0.5 * (c + c.transpose());
}

inline SpdMatrix random_spd(Eigen::Index n, std::mt19937_64& rng, double spread = 1.0) {
    return SpdMatrix(random_spd_matrix(n, rng, spread));
}

inline Eigen::MatrixXd random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
    const Eigen::MatrixXd a = gaussian(n, n, rng);
    return 0.5 * (a + a.transpose());
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("spdalign_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace spdalign::test
