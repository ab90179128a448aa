#include "spdalign/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "spdalign/error.hpp"

namespace spdalign {

namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v, double mean) {
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double two_sided_t(double t, double df) {
    boost::math::students_t dist(df);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

double ks_normal_distance(std::vector<double> x) {
    const auto n = x.size();
    const double m = mean_of(x);
    const double s = sd_of(x, m);
    std::sort(x.begin(), x.end());
    const boost::math::normal_distribution<double> phi;
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = boost::math::cdf(phi, (x[i] - m) / s);
        d = std::max({d, static_cast<double>(i + 1) / static_cast<double>(n) - f,
                      f - static_cast<double>(i) / static_cast<double>(n)});
    }
    return d;
}

}  // namespace

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = values.size();
    if (values.empty()) return s;
    s.mean = mean_of(values);
    s.ci_low = s.ci_high = s.mean;
    if (values.size() < 2) return s;
    s.sd = sd_of(values, s.mean);
    const double df = static_cast<double>(values.size() - 1);
    const double q = boost::math::quantile(boost::math::students_t(df), 0.975);
    const double half = q * s.sd / std::sqrt(static_cast<double>(values.size()));
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    return s;
}

TTestResult paired_t_test(std::span<const double> differences) {
    if (differences.size() < 2) throw InvalidInput("paired_t_test: need at least 2 differences");
    const double m = mean_of(differences);
    const double s = sd_of(differences, m);
    if (!(s > 0.0)) throw InvalidInput("paired_t_test: zero-variance differences");
    const double df = static_cast<double>(differences.size() - 1);
    const double t = m / (s / std::sqrt(static_cast<double>(differences.size())));
    return {t, df, two_sided_t(t, df)};
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
    std::vector<double> d;
    for (double x : differences) {
        if (x != 0.0) d.push_back(x);
    }
    const std::size_t n = d.size();
    if (n == 0) throw InvalidInput("wilcoxon_signed_rank: all differences are zero");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
    // Doubled midranks stay integral.
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
        const long r2 = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0.0) w2 += rank2[i];
    }
    WilcoxonResult out;
    out.w_plus = static_cast<double>(w2) / 2.0;
    out.n = n;

    if (n <= 25) {
        const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        for (long r : rank2) {
            for (long s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double upper = 0.0;
        double lower = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s >= w2) upper += count[static_cast<std::size_t>(s)];
            if (s <= w2) lower += count[static_cast<std::size_t>(s)];
        }
        out.p = std::min(1.0, 2.0 * std::min(upper, lower) / all);
        out.exact = true;
    } else {
        const double nn = static_cast<double>(n);
        const double mu = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double z = (out.w_plus - mu) / std::sqrt(var);
        const boost::math::normal_distribution<double> phi;
        out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(phi, std::fabs(z))));
        out.exact = false;
    }
    return out;
}

LillieforsResult lilliefors(std::span<const double> sample, std::size_t replicates,
                            std::uint64_t seed) {
    if (sample.size() < 4) throw InvalidInput("lilliefors: need at least 4 observations");
    if (replicates == 0) throw InvalidInput("lilliefors: replicates must be positive");
    std::vector<double> x(sample.begin(), sample.end());
    if (!(sd_of(x, mean_of(x)) > 0.0)) throw InvalidInput("lilliefors: zero-variance sample");
    const double d = ks_normal_distance(x);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::size_t exceed = 0;
    std::vector<double> sim(x.size());
    for (std::size_t r = 0; r < replicates; ++r) {
        for (auto& v : sim) v = gauss(rng);
        if (ks_normal_distance(sim) >= d) ++exceed;
    }
    const double p = static_cast<double>(exceed + 1) / static_cast<double>(replicates + 1);
    return {d, p, replicates};
}

PairedTests paired_tests(std::span<const double> a, std::span<const double> b,
                         std::size_t replicates, std::uint64_t seed, double alpha) {
    if (a.size() != b.size()) throw InvalidInput("paired_tests: samples differ in length");
    if (a.size() < 5) throw InvalidInput("paired_tests: need at least 5 pairs");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double m = mean_of(diff);
    if (!(sd_of(diff, m) > 0.0)) throw InvalidInput("paired_tests: degenerate (constant) differences");

    PairedTests out{};
    const LillieforsResult lf = lilliefors(diff, replicates, seed);
    out.lilliefors_statistic = lf.statistic;
    out.lilliefors_p = lf.p;
    const TTestResult t = paired_t_test(diff);
    out.t = t.t;
    out.t_p = t.p;
    const WilcoxonResult w = wilcoxon_signed_rank(diff);
    out.w = w.w_plus;
    out.wilcoxon_p = w.p;
    if (lf.p >= alpha) {
        out.chosen_test = "paired_t";
        out.chosen_p = t.p;
    } else {
        out.chosen_test = "wilcoxon";
        out.chosen_p = w.p;
    }
    return out;
}

CurveFit fit_performance_curves(std::span<const double> n, std::span<const double> score,
                                std::span<const double> predict_at) {
    if (n.size() != score.size()) throw InvalidInput("fit_performance_curves: length mismatch");
    const std::set<double> distinct(n.begin(), n.end());
    if (distinct.size() < 2) {
        throw InvalidInput("fit_performance_curves: need at least 2 distinct training sizes");
    }
    const auto m = static_cast<Eigen::Index>(n.size());
    Eigen::MatrixXd lin(m, 2);
    Eigen::MatrixXd lg(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double ni = n[static_cast<std::size_t>(i)];
        if (!(ni > 0.0)) throw InvalidInput("fit_performance_curves: training sizes must be positive");
        lin(i, 0) = 1.0;
        lin(i, 1) = ni;
        lg(i, 0) = 1.0;
        lg(i, 1) = std::log(ni);
        y(i) = score[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d bl = lin.colPivHouseholderQr().solve(y);
    const Eigen::Vector2d bg = lg.colPivHouseholderQr().solve(y);
    CurveFit out;
    out.linear = {bl(0), bl(1)};
    out.logarithmic = {bg(0), bg(1)};
    for (double p : predict_at) {
        if (!(p > 0.0)) throw InvalidInput("fit_performance_curves: prediction sizes must be positive");
        out.predict_at.push_back(p);
        out.linear_predictions.push_back(bl(0) + bl(1) * p);
        out.log_predictions.push_back(bg(0) + bg(1) * std::log(p));
    }
    return out;
}

}  // namespace spdalign
