#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spdalign {

/// Mean, sample sd (n-1) and a two-sided 95% t-interval.
struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

Summary summarize(std::span<const double> values);

struct TTestResult {
    double t;
    double df;
    double p;  // two-sided
};

/// One-sample t-test of the differences against 0 (the paired t-test).
TTestResult paired_t_test(std::span<const double> differences);

struct WilcoxonResult {
    double w_plus;  // sum of ranks of positive differences
    double p;       // two-sided
    std::size_t n;  // non-zero differences used
    bool exact;
};

/// Zeros are dropped, ties get midranks. Exact enumeration of the sign-flip
/// distribution for n <= 25, normal approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

struct LillieforsResult {
    double statistic;
    double p;
    std::size_t replicates;
};

/// Kolmogorov-Smirnov distance to the fitted normal, p-value from a seeded
/// Monte Carlo null of the same sample size.
LillieforsResult lilliefors(std::span<const double> sample, std::size_t replicates = 100'000,
                            std::uint64_t seed = 0);

struct PairedTests {
    double lilliefors_statistic;
    double lilliefors_p;
    double t;
    double t_p;
    double w;
    double wilcoxon_p;
    std::string chosen_test;  // "paired_t" or "wilcoxon"
    double chosen_p;
};

/// Lilliefors on a - b; paired t-test when p >= alpha, Wilcoxon otherwise.
/// Requires n >= 5 and non-constant differences.
PairedTests paired_tests(std::span<const double> a, std::span<const double> b,
                         std::size_t replicates = 100'000, std::uint64_t seed = 0,
                         double alpha = 0.05);

struct LineFit {
    double a;  // intercept
    double b;  // slope
};

struct CurveFit {
    LineFit linear;       // y = a + b N
    LineFit logarithmic;  // y = a + b ln N
    std::vector<double> predict_at;
    std::vector<double> linear_predictions;
    std::vector<double> log_predictions;
};

/// Least-squares linear and logarithmic fits of (N, score) points.
CurveFit fit_performance_curves(std::span<const double> n, std::span<const double> score,
                                std::span<const double> predict_at = {});

}  // namespace spdalign
