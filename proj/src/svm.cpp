#include "spdalign/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace spdalign {

namespace {

constexpr double kTau = 1e-12;
constexpr Eigen::Index kGramCacheLimit = 4000;
constexpr Eigen::Index kPolishLimit = 1500;
constexpr double kBoundSnap = 1e-12;

constexpr Eigen::Index kIpmMaxDim = 2000;
constexpr double kIpmLooseMu = 1e-8;

/// Mehrotra predictor-corrector on the dual box QP
///   min 1/2 a'Qa - 1'a  s.t.  y'a = 0, 0 <= a <= c,  Q = Z Z', Z = diag(y) X,
/// solving each Newton system through the d x d Woodbury form. The result is
/// snapped to the bounds by strict complementarity; nullopt on breakdown.
std::optional<VectorXd> interior_point_start(const MatrixXd& x, const VectorXd& y, double c) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const MatrixXd z = y.asDiagonal() * x;
    VectorXd a = VectorXd::Constant(n, 0.5 * c);
    VectorXd s = VectorXd::Constant(n, 0.5 * c);
    VectorXd zl = VectorXd::Ones(n);
    VectorXd zu = VectorXd::Ones(n);
    double lam = 0.0;
    const double nn = 2.0 * static_cast<double>(n);

    auto max_step = [](const VectorXd& v, const VectorXd& dv) {
        double t = 1.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (dv(i) < 0.0) t = std::min(t, -v(i) / dv(i));
        }
        return t;
    };

    bool done = false;
    for (int it = 0; it < 200; ++it) {
        const VectorXd rd = (z * (z.transpose() * a)).array() - 1.0 + lam * y.array() - zl.array() + zu.array();
        const double rp = y.dot(a);
        const double mu = (a.dot(zl) + s.dot(zu)) / nn;
        if (!std::isfinite(mu)) return std::nullopt;
        if (mu < 1e-12 * c && rd.lpNorm<Eigen::Infinity>() < 1e-10 && std::abs(rp) < 1e-12 * c) {
            done = true;
            break;
        }
        const VectorXd dinv = (zl.cwiseQuotient(a) + zu.cwiseQuotient(s)).cwiseInverse();
        const MatrixXd m = MatrixXd::Identity(d, d) + z.transpose() * dinv.asDiagonal() * z;
        const Eigen::LLT<MatrixXd> llt(m);
        auto hsolve = [&](const VectorXd& v) -> VectorXd {
            const VectorXd t = dinv.cwiseProduct(v);
            return t - dinv.cwiseProduct(z * llt.solve(z.transpose() * t));
        };
        const VectorXd hy = hsolve(y);
        const double yhy = y.dot(hy);
        if (llt.info() != Eigen::Success || !(yhy > 0.0)) {
            // Woodbury loses accuracy once the barrier is nearly closed.
            done = mu < kIpmLooseMu * c;
            break;
        }

        VectorXd da;
        VectorXd dzl;
        VectorXd dzu;
        double dlam = 0.0;
        auto newton = [&](const VectorXd& rcl, const VectorXd& rcu) {
            const VectorXd r = -rd + rcl.cwiseQuotient(a) - rcu.cwiseQuotient(s);
            const VectorXd hr = hsolve(r);
            dlam = (y.dot(hr) + rp) / yhy;
            da = hr - dlam * hy;
            dzl = (rcl - zl.cwiseProduct(da)).cwiseQuotient(a);
            dzu = (rcu + zu.cwiseProduct(da)).cwiseQuotient(s);
        };
        auto step_length = [&] {
            return std::min({max_step(a, da), max_step(s, -da), max_step(zl, dzl), max_step(zu, dzu)});
        };

        newton(-a.cwiseProduct(zl), -s.cwiseProduct(zu));
        const double t_aff = step_length();
        const double mu_aff = ((a + t_aff * da).dot(zl + t_aff * dzl) +
                               (s - t_aff * da).dot(zu + t_aff * dzu)) / nn;
        const double sigma = std::pow(mu_aff / mu, 3.0);
        const VectorXd rcl = (sigma * mu - (a.cwiseProduct(zl) + da.cwiseProduct(dzl)).array()).matrix();
        const VectorXd rcu = (sigma * mu - (s.cwiseProduct(zu) - da.cwiseProduct(dzu)).array()).matrix();
        newton(rcl, rcu);
        const double t = std::min(1.0, 0.995 * step_length());
        if (!(t > 0.0)) return std::nullopt;
        a += t * da;
        s -= t * da;
        zl += t * dzl;
        zu += t * dzu;
        lam += t * dlam;
    }
    if (!done) return std::nullopt;

    for (Eigen::Index i = 0; i < n; ++i) {
        if (a(i) < zl(i) * c) a(i) = 0.0;
        else if (s(i) < zu(i) * c) a(i) = c;
    }
    // Restore y'a = 0 on the interior coordinates.
    double residue = y.dot(a);
    for (Eigen::Index i = 0; i < n && residue != 0.0; ++i) {
        if (a(i) <= 0.0 || a(i) >= c) continue;
        const double target = std::clamp(a(i) - y(i) * residue, 0.0, c);
        residue -= y(i) * (a(i) - target);
        a(i) = target;
    }
    if (std::abs(y.dot(a)) > 1e-12 * c * static_cast<double>(n)) return std::nullopt;
    return a;
}

}  // namespace

VectorXd SvmModel::decision_function(const MatrixXd& x) const {
    if (x.cols() != weights.size()) {
        throw DimensionMismatch("svm: feature dimension " + std::to_string(x.cols()) +
                                " != model dimension " + std::to_string(weights.size()));
    }
    return (x * weights).array() + bias;
}

std::vector<int> SvmModel::predict(const MatrixXd& x) const {
    const VectorXd f = decision_function(x);
    std::vector<int> out(static_cast<std::size_t>(f.size()));
    for (Eigen::Index i = 0; i < f.size(); ++i) out[static_cast<std::size_t>(i)] = f(i) > 0.0 ? 1 : 0;
    return out;
}

SvmModel train_svm(const MatrixXd& x, std::span<const int> labels, const SvmOptions& opts) {
    const auto n = x.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw InvalidInput("train_svm: rows and labels differ");
    if (!(opts.c > 0.0)) throw InvalidInput("train_svm: C must be positive");
    if (!x.allFinite()) throw InvalidInput("train_svm: non-finite features");
    VectorXd y(n);
    bool has_pos = false;
    bool has_neg = false;
    for (Eigen::Index t = 0; t < n; ++t) {
        const int l = labels[static_cast<std::size_t>(t)];
        if (l != 0 && l != 1) throw InvalidInput("train_svm: labels must be 0 or 1");
        y(t) = l == 1 ? 1.0 : -1.0;
        (l == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) throw InvalidInput("train_svm: both classes must be present");

    const double c = opts.c;
    const long max_iter = opts.max_iter > 0 ? opts.max_iter : std::max<long>(10'000'000, 100 * n);

    const bool cached = n <= kGramCacheLimit;
    MatrixXd gram;
    if (cached) gram = x * x.transpose();
    const VectorXd qd = x.rowwise().squaredNorm();
    VectorXd row_i(cached ? 0 : n);
    VectorXd row_j(cached ? 0 : n);
    auto kernel_col = [&](Eigen::Index i, VectorXd& buf) -> const double* {
        if (cached) return gram.col(i).data();
        buf.noalias() = x * x.row(i).transpose();
        return buf.data();
    };

    VectorXd alpha = VectorXd::Zero(n);
    VectorXd grad = VectorXd::Constant(n, -1.0);
    auto at_upper = [&](Eigen::Index t) { return alpha(t) >= c; };
    auto at_lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };
    auto in_up = [&](Eigen::Index t) { return y(t) > 0 ? !at_upper(t) : !at_lower(t); };
    auto in_low = [&](Eigen::Index t) { return y(t) > 0 ? !at_lower(t) : !at_upper(t); };

    // Rebuilds the exact gradient Q alpha - 1 over all rows.
    auto rebuild_gradient = [&] {
        const VectorXd w = x.transpose() * (alpha.array() * y.array()).matrix();
        grad = (y.array() * (x * w).array() - 1.0).matrix();
    };

    // Shrinking: rows pinned at a bound whose gradient keeps them there are
    // dropped from the working set and restored before the final check.
    std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) active[static_cast<std::size_t>(t)] = t;
    const long shrink_every = std::min<long>(static_cast<long>(n), 1000);
    long countdown = shrink_every;
    bool unshrunk = false;

    auto shrink = [&] {
        double gmax1 = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        for (const Eigen::Index t : active) {
            if (in_up(t)) gmax1 = std::max(gmax1, -y(t) * grad(t));
            if (in_low(t)) gmax2 = std::max(gmax2, y(t) * grad(t));
        }
        if (!unshrunk && gmax1 + gmax2 <= 10.0 * opts.tol) {
            unshrunk = true;
            rebuild_gradient();
            active.resize(static_cast<std::size_t>(n));
            for (Eigen::Index t = 0; t < n; ++t) active[static_cast<std::size_t>(t)] = t;
        }
        std::erase_if(active, [&](Eigen::Index t) {
            if (at_upper(t)) return y(t) > 0 ? -grad(t) > gmax1 : -grad(t) > gmax2;
            if (at_lower(t)) return y(t) > 0 ? grad(t) > gmax2 : grad(t) > gmax1;
            return false;
        });
    };

    auto dual_objective = [&] {
        const VectorXd w = x.transpose() * (alpha.array() * y.array()).matrix();
        return 0.5 * w.squaredNorm() - alpha.sum();
    };

    // Newton step on the free rows with the bounded rows held fixed: solves
    // [Q_FF y_F; y_F' 0][d; b] = [-g_F; 0], then moves as far along d as the
    // box allows. Kept only if the dual objective does not increase.
    auto polish = [&] {
        std::vector<Eigen::Index> free;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!at_upper(t) && !at_lower(t)) free.push_back(t);
        }
        const auto m = static_cast<Eigen::Index>(free.size());
        if (m < 2 || m > kPolishLimit) return;
        MatrixXd xf(m, x.cols());
        VectorXd yf(m);
        VectorXd gf(m);
        for (Eigen::Index a = 0; a < m; ++a) {
            const Eigen::Index t = free[static_cast<std::size_t>(a)];
            xf.row(a) = x.row(t);
            yf(a) = y(t);
            gf(a) = grad(t);
        }
        MatrixXd kkt(m + 1, m + 1);
        kkt.topLeftCorner(m, m) = yf.asDiagonal() * (xf * xf.transpose()) * yf.asDiagonal();
        kkt.topRightCorner(m, 1) = yf;
        kkt.bottomLeftCorner(1, m) = yf.transpose();
        kkt(m, m) = 0.0;
        VectorXd rhs(m + 1);
        rhs.head(m) = -gf;
        rhs(m) = 0.0;
        const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        const VectorXd d = sol.head(m);
        if (!d.allFinite() || std::abs(yf.dot(d)) > 1e-9 * (1.0 + d.lpNorm<1>())) return;

        double step = 1.0;
        for (Eigen::Index a = 0; a < m; ++a) {
            const double v = alpha(free[static_cast<std::size_t>(a)]);
            if (d(a) > 0.0) step = std::min(step, (c - v) / d(a));
            if (d(a) < 0.0) step = std::min(step, -v / d(a));
        }
        if (!(step > 0.0)) return;
        const VectorXd saved = alpha;
        const double before = dual_objective();
        for (Eigen::Index a = 0; a < m; ++a) {
            const Eigen::Index t = free[static_cast<std::size_t>(a)];
            double v = alpha(t) + step * d(a);
            if (v <= kBoundSnap * c) v = 0.0;
            if (v >= (1.0 - kBoundSnap) * c) v = c;
            alpha(t) = v;
        }
        // Snapping may break sum(y alpha) = 0 by a rounding residue; absorb it
        // in the largest interior coordinate.
        const double residue = alpha.dot(y);
        if (residue != 0.0) {
            Eigen::Index best = -1;
            for (const Eigen::Index t : free) {
                const double v = alpha(t) - y(t) * residue;
                if (v > 0.0 && v < c && (best < 0 || std::min(alpha(t), c - alpha(t)) >
                                                         std::min(alpha(best), c - alpha(best)))) {
                    best = t;
                }
            }
            if (best >= 0) alpha(best) -= y(best) * residue;
        }
        if (dual_objective() > before) {
            alpha = saved;
            return;
        }
        rebuild_gradient();
    };

    if (x.cols() <= kIpmMaxDim) {
        if (auto warm = interior_point_start(x, y, c)) {
            alpha = *warm;
            rebuild_gradient();
            polish();
        }
    }

    SvmModel model;
    model.c = c;
    long iter = 0;
    for (; iter < max_iter; ++iter) {
        if (--countdown == 0) {
            countdown = shrink_every;
            polish();
            shrink();
        }
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (const Eigen::Index t : active) {
            if (in_up(t) && -y(t) * grad(t) > gmax) {
                gmax = -y(t) * grad(t);
                i = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        const double* ki = nullptr;
        if (i >= 0) {
            ki = kernel_col(i, row_i);
            double obj_min = std::numeric_limits<double>::infinity();
            for (const Eigen::Index t : active) {
                double grad_diff = 0.0;
                if (y(t) > 0) {
                    if (at_lower(t)) continue;
                    grad_diff = gmax + grad(t);
                    gmax2 = std::max(gmax2, grad(t));
                } else {
                    if (at_upper(t)) continue;
                    grad_diff = gmax - grad(t);
                    gmax2 = std::max(gmax2, -grad(t));
                }
                if (grad_diff > 0.0) {
                    double quad = qd(i) + qd(t) - 2.0 * ki[t];
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(grad_diff * grad_diff) / quad;
                    if (obj < obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        model.kkt_gap = gmax + gmax2;
        if (i < 0 || j < 0 || model.kkt_gap < opts.tol) {
            if (static_cast<Eigen::Index>(active.size()) == n) {
                model.converged = true;
                break;
            }
            // Converged on the shrunk problem: restore every row and re-check.
            rebuild_gradient();
            active.resize(static_cast<std::size_t>(n));
            for (Eigen::Index t = 0; t < n; ++t) active[static_cast<std::size_t>(t)] = t;
            countdown = shrink_every;
            continue;
        }
        const double* kj = kernel_col(j, row_j);

        const double old_ai = alpha(i);
        const double old_aj = alpha(j);
        const double qij = y(i) * y(j) * ki[j];
        if (y(i) != y(j)) {
            double quad = qd(i) + qd(j) + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0.0) {
                if (alpha(j) < 0.0) {
                    alpha(j) = 0.0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = -diff;
            }
            if (diff > 0.0) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = c - diff;
                }
            } else if (alpha(j) > c) {
                alpha(j) = c;
                alpha(i) = c + diff;
            }
        } else {
            double quad = qd(i) + qd(j) - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > c) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = sum - c;
                }
            } else if (alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = sum;
            }
            if (sum > c) {
                if (alpha(j) > c) {
                    alpha(j) = c;
                    alpha(i) = sum - c;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = sum;
            }
        }
        const double si = y(i) * (alpha(i) - old_ai);
        const double sj = y(j) * (alpha(j) - old_aj);
        for (const Eigen::Index t : active) grad(t) += y(t) * (si * ki[t] + sj * kj[t]);
    }
    model.iterations = iter;
    if (!model.converged) rebuild_gradient();

    // Bias from free support vectors, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    Eigen::Index n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y(t) * grad(t);
        if (at_upper(t)) {
            if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
    model.bias = -rho;
    model.weights = x.transpose() * (alpha.array() * y.array()).matrix();
    model.support_vectors = (alpha.array() > 0.0).count();
    return model;
}

Standardizer Standardizer::fit(const MatrixXd& x) {
    if (x.rows() < 1) throw InvalidInput("Standardizer: empty feature matrix");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm() /
               static_cast<double>(x.rows()))
                  .cwiseSqrt()
                  .transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
        if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
    }
    return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
    return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

MatrixXd Standardizer::transform(const MatrixXd& x) const {
    if (x.cols() != mean.size()) throw DimensionMismatch("Standardizer: dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

}  // namespace spdalign
