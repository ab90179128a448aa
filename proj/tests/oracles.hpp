#pragma once

// Reference computations written independently of the library, shared by the
// unit tests and the acceptance binary.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace spdalign::test {

// Ledoit & Wolf (2004), lemmas 3.2-3.4, written out with explicit loops:
// m = <S, I>, d^2 = ||S - m I||^2, bbar^2 = n^-2 sum_k ||x_k x_k' - S||^2,
// b^2 = min(bbar^2, d^2), gamma = b^2 / d^2. ||A||^2 = tr(A A') / p.
inline double reference_lw_gamma(const Eigen::MatrixXd& e) {
    const auto p = e.rows();
    const auto n = e.cols();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) s(i, j) += e(i, k) * e(j, k) / static_cast<double>(n);
        }
    }
    double m = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) m += s(i, i) / static_cast<double>(p);
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double v = s(i, j) - (i == j ? m : 0.0);
            d2 += v * v / static_cast<double>(p);
        }
    }
    double bbar2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) {
                const double v = e(i, k) * e(j, k) - s(i, j);
                acc += v * v / static_cast<double>(p);
            }
        }
        bbar2 += acc / static_cast<double>(n * n);
    }
    const double b2 = std::min(bbar2, d2);
    return b2 / d2;
}

// Midranks of |d| by direct counting.
inline std::vector<double> midranks(const std::vector<double>& d) {
    std::vector<double> r(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double below = 0.0;
        double equal = 0.0;
        for (double x : d) {
            if (std::fabs(x) < std::fabs(d[i])) below += 1.0;
            if (std::fabs(x) == std::fabs(d[i])) equal += 1.0;
        }
        r[i] = below + (equal + 1.0) / 2.0;
    }
    return r;
}

// Two-sided exact Wilcoxon p by walking all 2^n sign patterns. Zeros must
// already be removed.
inline double enumerated_wilcoxon_p(const std::vector<double>& d, double& w_plus) {
    const std::vector<double> r = midranks(d);
    w_plus = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) w_plus += r[i];
    }
    const std::size_t patterns = std::size_t{1} << d.size();
    double upper = 0.0;
    double lower = 0.0;
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if ((mask >> i) & 1U) w += r[i];
        }
        if (w >= w_plus - 1e-9) upper += 1.0;
        if (w <= w_plus + 1e-9) lower += 1.0;
    }
    return std::min(1.0, 2.0 * std::min(upper, lower) / static_cast<double>(patterns));
}

// Closed-form two-sided Student t tails for 1 and 2 degrees of freedom.
inline double t_tail_df1(double t) { return 1.0 - 2.0 / std::numbers::pi * std::atan(std::fabs(t)); }
inline double t_tail_df2(double t) { return 1.0 - std::fabs(t) / std::sqrt(2.0 + t * t); }

}  // namespace spdalign::test
