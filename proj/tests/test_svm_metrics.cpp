#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "spdalign/metrics.hpp"
#include "spdalign/svm.hpp"
#include "support.hpp"

using namespace spdalign;

namespace {

struct Blobs {
    MatrixXd x;
    std::vector<int> y;
};

Blobs blobs(std::uint64_t seed, int per_class, double separation, double spread) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    Blobs b;
    b.x.resize(2 * per_class, 2);
    for (int i = 0; i < 2 * per_class; ++i) {
        const int cls = i % 2;
        const double centre = cls == 1 ? separation : -separation;
        b.x(i, 0) = centre + g(rng);
        b.x(i, 1) = 0.5 * centre + g(rng);
        b.y.push_back(cls);
    }
    return b;
}

double primal_objective(const MatrixXd& x, const std::vector<int>& y, const VectorXd& w, double b,
                        double c) {
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - s * (x.row(i).dot(w) + b));
    }
    return 0.5 * w.squaredNorm() + c * hinge;
}

// Reference dual solution by enumerating every assignment of the points to
// {alpha = 0, 0 < alpha < C, alpha = C} and solving the KKT equations of the
// free set. Only usable for a handful of points.
struct Reference {
    VectorXd w;
    double b;
    double objective;
};

Reference enumerate_qp(const MatrixXd& x, const std::vector<int>& labels, double c) {
    const auto n = static_cast<int>(x.rows());
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    const MatrixXd q = (y.asDiagonal() * x) * (y.asDiagonal() * x).transpose();
    Reference best{VectorXd::Zero(x.cols()), 0.0, std::numeric_limits<double>::infinity()};
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    for (int code = 0; code < combos; ++code) {
        std::vector<int> state(static_cast<std::size_t>(n));
        int rest = code;
        std::vector<int> free;
        for (int i = 0; i < n; ++i) {
            state[static_cast<std::size_t>(i)] = rest % 3;
            rest /= 3;
            if (state[static_cast<std::size_t>(i)] == 1) free.push_back(i);
        }
        if (free.empty()) continue;
        VectorXd alpha = VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (state[static_cast<std::size_t>(i)] == 2) alpha(i) = c;
        }
        const auto m = static_cast<Eigen::Index>(free.size());
        MatrixXd kkt = MatrixXd::Zero(m + 1, m + 1);
        VectorXd rhs(m + 1);
        for (Eigen::Index a = 0; a < m; ++a) {
            const int i = free[static_cast<std::size_t>(a)];
            for (Eigen::Index bb = 0; bb < m; ++bb) kkt(a, bb) = q(i, free[static_cast<std::size_t>(bb)]);
            kkt(a, m) = y(i);
            kkt(m, a) = y(i);
            rhs(a) = 1.0 - q.row(i).dot(alpha);
        }
        rhs(m) = -y.dot(alpha);
        const Eigen::FullPivLU<MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const VectorXd sol = lu.solve(rhs);
        bool ok = true;
        for (Eigen::Index a = 0; a < m; ++a) {
            if (sol(a) < -1e-12 || sol(a) > c + 1e-12) ok = false;
            alpha(free[static_cast<std::size_t>(a)]) = sol(a);
        }
        if (!ok) continue;
        const double b = sol(m);
        const VectorXd w = x.transpose() * (alpha.cwiseProduct(y));
        for (int i = 0; i < n && ok; ++i) {
            const double margin = y(i) * (x.row(i).dot(w) + b);
            if (state[static_cast<std::size_t>(i)] == 0 && margin < 1.0 - 1e-9) ok = false;
            if (state[static_cast<std::size_t>(i)] == 2 && margin > 1.0 + 1e-9) ok = false;
        }
        if (!ok) continue;
        const double obj = primal_objective(x, labels, w, b, c);
        if (obj < best.objective) best = {w, b, obj};
    }
    return best;
}

// With w fixed the objective is convex piecewise linear in b; its minimisers
// form an interval whose ends are hinge breakpoints. A single point unless
// every multiplier sits at a bound.
std::pair<double, double> optimal_bias_interval(const MatrixXd& x, const std::vector<int>& y,
                                                const VectorXd& w, double c) {
    std::vector<double> breaks;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        breaks.push_back(s - x.row(i).dot(w));
    }
    double best = std::numeric_limits<double>::infinity();
    for (double b : breaks) best = std::min(best, primal_objective(x, y, w, b, c));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double b : breaks) {
        if (primal_objective(x, y, w, b, c) <= best + 1e-12) {
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
    }
    return {lo, hi};
}

// Per-class F1 straight from the 2x2 confusion matrix.
double brute_force_macro_f1(const std::vector<int>& t, const std::vector<int>& p) {
    int cm[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < t.size(); ++i) ++cm[t[i]][p[i]];
    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double tp = cm[k][k];
        const double fp = cm[1 - k][k];
        const double fn = cm[k][1 - k];
        total += tp == 0.0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    }
    return 100.0 * total / 2.0;
}

}  // namespace

TEST_CASE("SVM on two points") {
    MatrixXd x(2, 2);
    x << -1, 0, 1, 0;
    const std::vector<int> y{0, 1};
    const SvmModel m = train_svm(x, y);
    CHECK(m.converged);
    CHECK(m.weights(0) > 0.0);
    CHECK(m.predict(x) == y);
    CHECK(m.weights(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(m.bias) < 1e-6);
}

TEST_CASE("SVM matches the enumerated QP on tiny blobs") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const Blobs b = blobs(seed, 4, 0.8, 0.7);
        for (double c : {0.1, 1.0, 10.0}) {
            SvmOptions opts;
            opts.c = c;
            const SvmModel m = train_svm(b.x, b.y, opts);
            const Reference ref = enumerate_qp(b.x, b.y, c);
            REQUIRE(std::isfinite(ref.objective));
            CHECK(m.converged);
            CHECK((m.weights - ref.w).norm() < 1e-3);
            const auto [lo, hi] = optimal_bias_interval(b.x, b.y, ref.w, c);
            CHECK(ref.b >= lo - 1e-9);
            CHECK(ref.b <= hi + 1e-9);
            CHECK(m.bias >= lo - 1e-3);
            CHECK(m.bias <= hi + 1e-3);
            CHECK(primal_objective(b.x, b.y, m.weights, m.bias, c) <= ref.objective + 1e-6);
        }
    }
}

TEST_CASE("SVM duplication and row-permutation invariance") {
    // Separable blobs: the hard-margin solution has every alpha below C.
    const Blobs b = blobs(7, 15, 2.0, 0.3);
    const SvmModel m = train_svm(b.x, b.y);
    MatrixXd twice(2 * b.x.rows(), 2);
    twice << b.x, b.x;
    std::vector<int> y2 = b.y;
    y2.insert(y2.end(), b.y.begin(), b.y.end());
    const SvmModel d = train_svm(twice, y2);
    std::mt19937_64 rng(8);
    const MatrixXd probe = spdalign::test::gaussian(50, 2, rng);
    CHECK((m.decision_function(probe) - d.decision_function(probe)).cwiseAbs().maxCoeff() < 1e-8);

    for (std::uint64_t seed : {9u, 10u}) {
        const Blobs nb = blobs(seed, 30, 0.5, 1.0);
        std::vector<Eigen::Index> order(nb.y.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        MatrixXd px(nb.x.rows(), 2);
        std::vector<int> py;
        for (std::size_t i = 0; i < order.size(); ++i) {
            px.row(static_cast<Eigen::Index>(i)) = nb.x.row(order[i]);
            py.push_back(nb.y[static_cast<std::size_t>(order[i])]);
        }
        const SvmModel a = train_svm(nb.x, nb.y);
        const SvmModel p = train_svm(px, py);
        CHECK((a.decision_function(probe) - p.decision_function(probe)).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("SVM determinism, dimensions and errors") {
    std::mt19937_64 rng(11);
    const MatrixXd x = spdalign::test::gaussian(80, 30, rng);
    std::vector<int> y;
    for (int i = 0; i < 80; ++i) y.push_back(x(i, 0) + 0.3 * x(i, 1) > 0.0 ? 1 : 0);
    const SvmModel a = train_svm(x, y);
    const SvmModel b = train_svm(x, y);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
    CHECK(a.converged);
    CHECK(a.kkt_gap < 1e-6);

    const std::vector<int> one_class(80, 1);
    CHECK_THROWS_AS(train_svm(x, one_class), InvalidInput);
    const std::vector<int> short_labels(10, 0);
    CHECK_THROWS(train_svm(x, short_labels));
    CHECK_THROWS_AS(a.decision_function(MatrixXd::Ones(3, 4)), DimensionMismatch);
}

TEST_CASE("Standardizer") {
    MatrixXd x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const Standardizer s = Standardizer::fit(x);
    const MatrixXd z = s.transform(x);
    CHECK(std::abs(z.col(0).mean()) < 1e-15);
    CHECK(z.col(1).norm() == 0.0);
    const double sd = std::sqrt((z.col(0).squaredNorm()) / 3.0);
    CHECK((std::abs(sd - 1.0) < 1e-12 || std::abs(z.col(0).norm() / 2.0 - 1.0) < 1e-12));
    CHECK(Standardizer::identity(2).transform(x) == x);
}

TEST_CASE("F1 examples") {
    const std::vector<int> y{0, 1, 1, 0, 1};
    CHECK(f1_score(y, y).score == 100.0);
    const std::vector<int> all_one(4, 1);
    CHECK(f1_score(all_one, all_one).score == 100.0);

    // Positive class: TP 2, FP 1, FN 1. Negatives mirror it.
    const std::vector<int> t{1, 1, 1, 0, 0, 0};
    const std::vector<int> p{1, 1, 0, 1, 0, 0};
    const F1Result r = f1_score(t, p);
    REQUIRE(r.classes == std::vector<int>{0, 1});
    CHECK(r.per_class[1] == doctest::Approx(66.67).epsilon(1e-4));
    CHECK(r.per_class[0] == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(r.score == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(f1_score(t, p, F1Average::binary).score == doctest::Approx(200.0 / 3.0).epsilon(1e-12));

    const std::vector<int> empty;
    CHECK_THROWS_AS(f1_score(empty, empty), InvalidInput);
    const std::vector<int> shorter{1};
    CHECK_THROWS(f1_score(t, shorter));
}

TEST_CASE("macro F1 against the confusion-matrix oracle and under label swap") {
    std::mt19937_64 rng(12);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 17);
        std::vector<int> t(n);
        std::vector<int> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = coin(rng) ? 1 : 0;
            p[i] = coin(rng) ? 1 : 0;
        }
        t[0] = 0;
        t[1] = 1;
        const double f = f1_score(t, p).score;
        CHECK(f == doctest::Approx(brute_force_macro_f1(t, p)).epsilon(1e-12));
        std::vector<int> ts(n);
        std::vector<int> ps(n);
        for (std::size_t i = 0; i < n; ++i) {
            ts[i] = 1 - t[i];
            ps[i] = 1 - p[i];
        }
        CHECK(f1_score(ts, ps).score == doctest::Approx(f).epsilon(1e-12));
    }
}
