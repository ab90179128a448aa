#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "spdalign/error.hpp"
#include "oracles.hpp"
#include "spdalign/stats.hpp"

using namespace spdalign;

using spdalign::test::enumerated_wilcoxon_p;
using spdalign::test::t_tail_df1;
using spdalign::test::t_tail_df2;

TEST_CASE("paired t-test on differences 1, 2, 3") {
    const std::vector<double> d{1.0, 2.0, 3.0};
    const TTestResult r = paired_t_test(d);
    CHECK(r.t == doctest::Approx(std::sqrt(12.0)).epsilon(1e-12));
    CHECK(std::abs(r.t - 3.4641) < 1e-4);
    CHECK(r.df == 2.0);
    CHECK(std::abs(r.p - t_tail_df2(r.t)) < 1e-10);
    CHECK(std::abs(r.p - 0.0742) < 1e-4);

    const std::vector<double> two{1.0, 4.0};
    const TTestResult s = paired_t_test(two);
    CHECK(s.df == 1.0);
    CHECK(std::abs(s.p - t_tail_df1(s.t)) < 1e-10);
}

TEST_CASE("exact Wilcoxon on differences 1, 2, 3") {
    const std::vector<double> d{1.0, 2.0, 3.0};
    const WilcoxonResult w = wilcoxon_signed_rank(d);
    double w_ref = 0.0;
    const double p_ref = enumerated_wilcoxon_p(d, w_ref);
    CHECK(w.w_plus == 6.0);
    CHECK(w_ref == 6.0);
    CHECK(w.exact);
    CHECK(std::abs(w.p - 0.25) < 1e-12);
    CHECK(std::abs(p_ref - 0.25) < 1e-12);
}

TEST_CASE("exact Wilcoxon against sign-pattern enumeration, with ties and zeros") {
    std::mt19937_64 rng(60);
    std::uniform_int_distribution<int> small(-6, 6);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 12);
        std::vector<double> d;
        while (d.size() < n) {
            const int v = small(rng);
            d.push_back(static_cast<double>(v) * 0.5);
        }
        std::vector<double> nonzero;
        for (double x : d) {
            if (x != 0.0) nonzero.push_back(x);
        }
        if (nonzero.empty()) continue;
        const WilcoxonResult w = wilcoxon_signed_rank(d);
        double w_ref = 0.0;
        const double p_ref = enumerated_wilcoxon_p(nonzero, w_ref);
        CHECK(w.n == nonzero.size());
        CHECK(w.w_plus == doctest::Approx(w_ref).epsilon(1e-12));
        CHECK(std::abs(w.p - p_ref) < 1e-12);
        CHECK(w.p >= 0.0);
        CHECK(w.p <= 1.0);
    }
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(wilcoxon_signed_rank(zeros), InvalidInput);
}

TEST_CASE("sign flip leaves two-sided p-values unchanged") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0.3, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> d(8 + static_cast<std::size_t>(trial));
        for (auto& x : d) x = g(rng);
        std::vector<double> flipped = d;
        for (auto& x : flipped) x = -x;
        const TTestResult a = paired_t_test(d);
        const TTestResult b = paired_t_test(flipped);
        CHECK(a.p == b.p);
        CHECK(a.t == -b.t);
        CHECK(a.p >= 0.0);
        CHECK(a.p <= 1.0);
        CHECK(wilcoxon_signed_rank(d).p == doctest::Approx(wilcoxon_signed_rank(flipped).p).epsilon(1e-12));
    }
    // Large-n branch.
    std::vector<double> big(40);
    for (auto& x : big) x = g(rng);
    const WilcoxonResult wb = wilcoxon_signed_rank(big);
    CHECK_FALSE(wb.exact);
    CHECK(wb.p >= 0.0);
    CHECK(wb.p <= 1.0);
}

TEST_CASE("paired_tests selection and errors") {
    const std::vector<double> a{0.8, 0.7, 0.9, 0.85, 0.75, 0.95, 0.8, 0.82};
    CHECK_THROWS_AS(paired_tests(a, a, 1000, 1), InvalidInput);
    const std::vector<double> shorter{1.0, 2.0};
    CHECK_THROWS_AS(paired_tests(a, shorter, 1000, 1), InvalidInput);
    const std::vector<double> four{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(paired_tests(four, four, 1000, 1), InvalidInput);

    std::vector<double> b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= 0.01 * static_cast<double>(i + 1);
    const PairedTests r = paired_tests(a, b, 20'000, 3);
    CHECK(r.lilliefors_p >= 0.0);
    CHECK(r.lilliefors_p <= 1.0);
    CHECK(r.chosen_test == (r.lilliefors_p >= 0.05 ? "paired_t" : "wilcoxon"));
    CHECK(r.chosen_p == (r.chosen_test == "paired_t" ? r.t_p : r.wilcoxon_p));

    // Strongly skewed differences are rejected as non-normal.
    std::vector<double> c(18, 0.0);
    std::vector<double> e(18, 0.0);
    for (std::size_t i = 0; i < 18; ++i) e[i] = i < 15 ? 0.01 * static_cast<double>(i) : 10.0 * static_cast<double>(i);
    const PairedTests s = paired_tests(e, c, 20'000, 4);
    CHECK(s.lilliefors_p < 0.05);
    CHECK(s.chosen_test == "wilcoxon");
}

TEST_CASE("Lilliefors Monte Carlo p is stable across seeds") {
    std::mt19937_64 rng(62);
    std::normal_distribution<double> g;
    std::vector<double> sample(18);
    for (auto& x : sample) x = g(rng);
    sample[0] += 1.5;
    double lo = 1.0;
    double hi = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const LillieforsResult r = lilliefors(sample, 100'000, seed);
        lo = std::min(lo, r.p);
        hi = std::max(hi, r.p);
        CHECK(r.replicates == 100'000);
    }
    CHECK(hi - lo <= 0.01);

    // The statistic is the KS distance to N(mean, sd).
    const std::vector<double> x{-1.0, 0.0, 1.0, 2.0};
    const double m = 0.5;
    const double sd = std::sqrt(5.0 / 3.0);
    double dmax = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double f = 0.5 * std::erfc(-(x[i] - m) / (sd * std::sqrt(2.0)));
        dmax = std::max({dmax, (static_cast<double>(i) + 1.0) / 4.0 - f, f - static_cast<double>(i) / 4.0});
    }
    CHECK(lilliefors(x, 100, 0).statistic == doctest::Approx(dmax).epsilon(1e-12));
    CHECK_THROWS_AS(lilliefors(std::vector<double>{1.0, 2.0}, 100, 0), InvalidInput);
}

TEST_CASE("summary statistics") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    const Summary s = summarize(v);
    CHECK(s.n == 3);
    CHECK(s.mean == 2.0);
    CHECK(s.sd == doctest::Approx(1.0).epsilon(1e-15));
    // t_{0.975, 2} = 4.302652729...
    CHECK(s.ci_high - s.mean == doctest::Approx(4.302652729911275 / std::sqrt(3.0)).epsilon(1e-9));
    CHECK(s.mean - s.ci_low == doctest::Approx(s.ci_high - s.mean).epsilon(1e-15));
}

TEST_CASE("performance curve fits") {
    const std::vector<double> n{1.0, 2.0, 3.0};
    const CurveFit lin = fit_performance_curves(n, n);
    CHECK(std::abs(lin.linear.a) < 1e-12);
    CHECK(std::abs(lin.linear.b - 1.0) < 1e-12);

    const std::vector<double> sizes{5.0, 9.0, 15.0, 17.0};
    std::vector<double> y;
    for (double s : sizes) y.push_back(2.0 + 3.0 * std::log(s));
    const std::vector<double> at{20.0, 30.0};
    const CurveFit lg = fit_performance_curves(sizes, y, at);
    CHECK(std::abs(lg.logarithmic.a - 2.0) < 1e-10);
    CHECK(std::abs(lg.logarithmic.b - 3.0) < 1e-10);
    REQUIRE(lg.log_predictions.size() == 2);
    CHECK(std::abs(lg.log_predictions[1] - (2.0 + 3.0 * std::log(30.0))) < 1e-9);

    std::mt19937_64 rng(63);
    std::uniform_real_distribution<double> u(1.0, 40.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xs(7);
        std::vector<double> ys(7);
        for (std::size_t i = 0; i < 7; ++i) {
            xs[i] = u(rng);
            ys[i] = u(rng);
        }
        const CurveFit f = fit_performance_curves(xs, ys);
        double r_lin_1 = 0.0;
        double r_lin_n = 0.0;
        double r_log_1 = 0.0;
        double r_log_n = 0.0;
        for (std::size_t i = 0; i < 7; ++i) {
            const double rl = ys[i] - (f.linear.a + f.linear.b * xs[i]);
            const double rg = ys[i] - (f.logarithmic.a + f.logarithmic.b * std::log(xs[i]));
            r_lin_1 += rl;
            r_lin_n += rl * xs[i];
            r_log_1 += rg;
            r_log_n += rg * std::log(xs[i]);
        }
        CHECK(std::abs(r_lin_1) < 1e-8);
        CHECK(std::abs(r_lin_n) < 1e-8);
        CHECK(std::abs(r_log_1) < 1e-8);
        CHECK(std::abs(r_log_n) < 1e-8);
    }

    const std::vector<double> same{4.0, 4.0, 4.0};
    CHECK_THROWS_AS(fit_performance_curves(same, n), InvalidInput);
}
