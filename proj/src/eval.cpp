#include "spdalign/eval.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>

#include "spdalign/config.hpp"
#include "spdalign/covariance.hpp"
#include "spdalign/csp.hpp"
#include "spdalign/data_io.hpp"
#include "spdalign/error.hpp"
#include "spdalign/hash.hpp"
#include "spdalign/metrics.hpp"
#include "spdalign/parallel.hpp"
#include "spdalign/svm.hpp"

namespace spdalign {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::mt19937_64 derived_rng(std::initializer_list<std::uint64_t> words) {
    std::vector<std::uint32_t> v;
    for (auto w : words) {
        v.push_back(static_cast<std::uint32_t>(w));
        v.push_back(static_cast<std::uint32_t>(w >> 32));
    }
    std::seed_seq seq(v.begin(), v.end());
    return std::mt19937_64(seq);
}

/// One subject as seen by one side of the split.
struct View {
    TrialSet trials;
    std::vector<SpdMatrix> raw;
};

View make_view(TrialSet trials, const ShrinkageConfig& shrinkage) {
    View v{std::move(trials), {}};
    v.raw.reserve(v.trials.size());
    for (const auto& t : v.trials.trials) v.raw.push_back(shrink(t, shrinkage).cov);
    return v;
}

/// Replaces every trial E by T E.
TrialSet transform_trials(const TrialSet& trials, const MatrixXd& t) {
    TrialSet out = trials;
    for (auto& tr : out.trials) tr = Trial(t * tr.data());
    return out;
}

View adaptive_view(const View& base, const ShrinkageConfig& shrinkage) {
    const MatrixXd t = adaptive_m_transform(base.raw, base.trials.labels);
    return make_view(transform_trials(base.trials, t), shrinkage);
}

struct Prepared {
    std::vector<View> train;       // training-side view
    std::vector<View> restricted;  // training-side view on the test montage (cross-montage only)
    std::vector<View> test;        // held-out view: montage subset, never label-aligned
    bool cross_montage = false;
};

void require_both_classes(const TrialSet& t, std::size_t min_per_class) {
    std::size_t n[2] = {0, 0};
    for (int l : t.labels) {
        if (l != kAdaptive && l != kNonAdaptive) {
            throw DataError("subject " + t.subject_id + ": unknown label " + std::to_string(l));
        }
        ++n[l];
    }
    if (n[0] < min_per_class || n[1] < min_per_class) {
        throw CalibrationCoverageError("subject " + t.subject_id + " has " + std::to_string(n[kAdaptive]) +
                                       " adaptive and " + std::to_string(n[kNonAdaptive]) +
                                       " non-adaptive trials; need at least " +
                                       std::to_string(min_per_class) + " of each");
    }
}

Prepared prepare(const std::vector<TrialSet>& subjects, const PipelineConfig& cfg,
                 const std::vector<bool>& as_train, const std::vector<bool>& as_test,
                 std::size_t threads) {
    if (subjects.empty()) throw InvalidInput("evaluation: no subjects");
    const auto& names = subjects.front().channel_names;
    for (const auto& s : subjects) {
        s.validate();
        if (s.channel_names != names) {
            throw DataError("subject " + s.subject_id + ": channel names differ from subject " +
                            subjects.front().subject_id);
        }
        if (s.size() > 0 && s.trials.front().samples() < 2) throw DataError("empty trials");
    }
    Prepared p;
    p.cross_montage = is_cross_montage(names, cfg);
    const MontageSpec montage{"test", cfg.montage};
    const bool adaptive = cfg.alignment == Alignment::adaptive_m;
    const std::size_t n = subjects.size();
    p.train.resize(n);
    p.test.resize(n);
    if (p.cross_montage) p.restricted.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        if (as_train[i]) {
            require_both_classes(subjects[i], 1);
            View v = make_view(subjects[i], cfg.shrinkage);
            p.train[i] = adaptive ? adaptive_view(v, cfg.shrinkage) : std::move(v);
            if (p.cross_montage) {
                View r = make_view(subset_montage(subjects[i], montage), cfg.shrinkage);
                p.restricted[i] = adaptive ? adaptive_view(r, cfg.shrinkage) : std::move(r);
            }
        }
        if (as_test[i]) {
            require_both_classes(subjects[i], 2);
            p.test[i] = p.cross_montage ? make_view(subset_montage(subjects[i], montage), cfg.shrinkage)
                                        : make_view(subjects[i], cfg.shrinkage);
        }
    });
    return p;
}

Eigen::Index filter_count(const PipelineConfig& cfg, Eigen::Index channels) {
    return cfg.n_filters ? std::min(*cfg.n_filters, channels) : channels;
}

SpatialFilter fit_filter(const std::vector<const View*>& views, Eigen::Index f) {
    const auto e = views.front()->raw.front().dim();
    MatrixXd m[2] = {MatrixXd::Zero(e, e), MatrixXd::Zero(e, e)};
    double n[2] = {0.0, 0.0};
    for (const View* v : views) {
        for (std::size_t i = 0; i < v->raw.size(); ++i) {
            const int l = v->trials.labels[i];
            m[l] += v->raw[i].matrix();
            n[l] += 1.0;
        }
    }
    return fit_csp_from_means(m[kAdaptive] / n[kAdaptive], m[kNonAdaptive] / n[kNonAdaptive], f);
}

enum class BranchKind { filtered, raw, fused };

std::vector<BranchKind> branch_kinds(const PipelineConfig& cfg) {
    if (cfg.fusion == Fusion::sequential) return {BranchKind::filtered};
    if (uses_rotation(cfg.alignment)) return {BranchKind::filtered, BranchKind::raw};
    return {BranchKind::fused};
}

/// Filtered covariances and log-variance rows of one subject.
struct FilteredSide {
    std::vector<SpdMatrix> covs;
    MatrixXd log_variance;
};

FilteredSide filter_subject(const View& v, const SpatialFilter& w, const ShrinkageConfig& shrinkage,
                            bool need_covs, bool need_log_variance) {
    FilteredSide out;
    if (need_log_variance) out.log_variance.resize(static_cast<Eigen::Index>(v.trials.size()), w.filters());
    for (std::size_t i = 0; i < v.trials.size(); ++i) {
        const Trial f = apply_filter(w, v.trials.trials[i]);
        if (need_covs) out.covs.push_back(shrink(f, shrinkage).cov);
        if (need_log_variance) {
            out.log_variance.row(static_cast<Eigen::Index>(i)) = log_variance_features(f).transpose();
        }
    }
    return out;
}

MatrixXd project_rows(std::span<const SpdMatrix> covs, const SpdMatrix& ref, Alignment a) {
    return tangent_branch(covs, ref, a);
}

std::vector<SpdMatrix> pooled(const std::vector<const std::vector<SpdMatrix>*>& sets) {
    std::vector<SpdMatrix> out;
    for (const auto* s : sets) out.insert(out.end(), s->begin(), s->end());
    return out;
}

MatrixXd vstack(const std::vector<MatrixXd>& blocks) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) rows += b.rows();
    MatrixXd out(rows, blocks.empty() ? 0 : blocks.front().cols());
    Eigen::Index r = 0;
    for (const auto& b : blocks) {
        out.middleRows(r, b.rows()) = b;
        r += b.rows();
    }
    return out;
}

MatrixXd hstack(const std::vector<MatrixXd>& blocks) {
    Eigen::Index cols = 0;
    for (const auto& b : blocks) cols += b.cols();
    MatrixXd out(blocks.empty() ? 0 : blocks.front().rows(), cols);
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.middleCols(c, b.cols()) = b;
        c += b.cols();
    }
    return out;
}

MatrixXd select_rows(const MatrixXd& x, const std::vector<std::size_t>& idx) {
    MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

std::vector<int> select(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

/// Tangent features of the training subjects for one covariance branch.
struct TrainTangent {
    MatrixXd rows;
    std::vector<SpdMatrix> refs;  // one per subject (itsa) or one pooled
};

TrainTangent train_tangent(const std::vector<const std::vector<SpdMatrix>*>& sets,
                           const PipelineConfig& cfg) {
    TrainTangent out;
    std::vector<MatrixXd> blocks;
    switch (cfg.alignment) {
        case Alignment::none:
        case Alignment::adaptive_m: {
            const auto all = pooled(sets);
            out.refs.push_back(frechet_mean(all, cfg.frechet));
            out.rows = project_rows(all, out.refs.front(), cfg.alignment);
            return out;
        }
        case Alignment::ts: {
            const auto all = pooled(sets);
            out.refs.push_back(log_euclidean_mean(all));
            out.rows = recenter_with(all, out.refs.front());
            return out;
        }
        case Alignment::itsa:
            for (const auto* s : sets) {
                RecenterResult r = recenter_subject(*s);
                blocks.push_back(std::move(r.features));
                out.refs.push_back(std::move(r.reference));
            }
            out.rows = vstack(blocks);
            return out;
    }
    return out;
}

/// Features of the held-out subject plus the state needed to record it.
struct TestSide {
    std::vector<MatrixXd> branches;
    std::vector<MatrixXd> refs;
    std::vector<double> scales;
};

struct TrainSide {
    SpatialFilter filter;
    SpatialFilter test_filter;            // differs from `filter` across montages
    std::vector<SpdMatrix> test_refs;     // per branch, for none/adaptive_m
    std::vector<MatrixXd> branches;       // after rescale, before PCA
    std::vector<std::vector<MatrixXd>> refs;  // per branch, the fitted references
    std::vector<double> scales;
    std::vector<PcaModel> pcas;
    MatrixXd features;                    // fused, after PCA, before standardisation
    std::vector<int> labels;
    Standardizer standardizer;
    SvmModel svm;
    std::string upstream;
    std::string fingerprint;
};

TestSide test_features(const View& v, const TrainSide& tr, const std::vector<BranchKind>& kinds,
                       const PipelineConfig& cfg) {
    const bool rot = uses_rotation(cfg.alignment);
    bool need_covs = false;
    bool need_lv = false;
    for (auto k : kinds) {
        need_covs |= k == BranchKind::filtered;
        need_lv |= k == BranchKind::fused;
    }
    const FilteredSide fs = filter_subject(v, tr.test_filter, cfg.shrinkage, need_covs, need_lv);
    TestSide out;
    for (std::size_t b = 0; b < kinds.size(); ++b) {
        const std::vector<SpdMatrix>& covs = kinds[b] == BranchKind::filtered ? fs.covs : v.raw;
        MatrixXd rows;
        if (rot) {
            const SpdMatrix ref = log_euclidean_mean(covs);
            RescaleResult rs = rescale_block(recenter_with(covs, ref));
            rows = std::move(rs.features);
            out.refs.push_back(ref.matrix());
            out.scales.push_back(rs.scale);
        } else {
            rows = project_rows(covs, tr.test_refs[b], cfg.alignment);
            out.refs.push_back(tr.test_refs[b].matrix());
            out.scales.push_back(1.0);
        }
        if (kinds[b] == BranchKind::fused) rows = hstack({fs.log_variance, rows});
        out.branches.push_back(std::move(rows));
    }
    return out;
}

/// Applies PCA to the test branches and fuses them.
MatrixXd reduce_test(const TestSide& ts, const TrainSide& tr, bool cross_montage) {
    std::vector<MatrixXd> parts;
    for (std::size_t b = 0; b < ts.branches.size(); ++b) {
        if (tr.pcas.empty()) {
            parts.push_back(ts.branches[b]);
        } else if (cross_montage) {
            const Eigen::Index k = tr.pcas[b].k();
            const PcaModel own = fit_pca_k(ts.branches[b], k);
            if (own.k() != k) {
                throw InfeasibleExperiment("test-side PCA can keep only " + std::to_string(own.k()) +
                                           " components but training kept " + std::to_string(k));
            }
            parts.push_back(pca_transform(own, ts.branches[b]));
        } else {
            parts.push_back(pca_transform(tr.pcas[b], ts.branches[b]));
        }
    }
    return hstack(parts);
}

TrainSide fit_training_side(const Prepared& p, const std::vector<std::size_t>& train,
                            const PipelineConfig& cfg) {
    const auto kinds = branch_kinds(cfg);
    const bool rot = uses_rotation(cfg.alignment);
    std::vector<const View*> views;
    for (auto i : train) views.push_back(&p.train[i]);
    TrainSide tr;
    const Eigen::Index e = views.front()->raw.front().dim();
    tr.filter = fit_filter(views, filter_count(cfg, e));

    bool need_covs = false;
    bool need_lv = false;
    for (auto k : kinds) {
        need_covs |= k == BranchKind::filtered;
        need_lv |= k == BranchKind::fused;
    }
    std::vector<FilteredSide> filtered;
    for (const View* v : views) {
        filtered.push_back(filter_subject(*v, tr.filter, cfg.shrinkage, need_covs, need_lv));
        tr.labels.insert(tr.labels.end(), v->trials.labels.begin(), v->trials.labels.end());
    }

    Sha256 up;
    up.update(tr.filter.weights);
    for (std::size_t s = 0; s < views.size(); ++s) {
        for (const auto& c : views[s]->raw) up.update(c.matrix());
        for (const auto& c : filtered[s].covs) up.update(c.matrix());
    }
    tr.upstream = up.hex_digest();

    for (auto kind : kinds) {
        std::vector<const std::vector<SpdMatrix>*> sets;
        for (std::size_t s = 0; s < views.size(); ++s) {
            sets.push_back(kind == BranchKind::filtered ? &filtered[s].covs : &views[s]->raw);
        }
        TrainTangent tt = train_tangent(sets, cfg);
        MatrixXd rows = std::move(tt.rows);
        double scale = 1.0;
        if (rot) {
            RescaleResult rs = rescale_block(rows);
            rows = std::move(rs.features);
            scale = rs.scale;
        }
        if (kind == BranchKind::fused) {
            std::vector<MatrixXd> lv;
            for (const auto& f : filtered) lv.push_back(f.log_variance);
            rows = hstack({vstack(lv), rows});
        }
        std::vector<MatrixXd> refs;
        for (const auto& r : tt.refs) refs.push_back(r.matrix());
        tr.refs.push_back(std::move(refs));
        tr.scales.push_back(scale);
        tr.branches.push_back(std::move(rows));
        if (!rot) tr.test_refs.push_back(tt.refs.front());
    }

    // Held-out side filter and references on the test montage.
    if (p.cross_montage) {
        std::vector<const View*> rviews;
        for (auto i : train) rviews.push_back(&p.restricted[i]);
        const Eigen::Index et = rviews.front()->raw.front().dim();
        tr.test_filter = fit_filter(rviews, filter_count(cfg, et));
        if (!rot) {
            tr.test_refs.clear();
            std::vector<FilteredSide> rf;
            for (const View* v : rviews) rf.push_back(filter_subject(*v, tr.test_filter, cfg.shrinkage, need_covs, false));
            for (auto kind : kinds) {
                std::vector<const std::vector<SpdMatrix>*> sets;
                for (std::size_t s = 0; s < rviews.size(); ++s) {
                    sets.push_back(kind == BranchKind::filtered ? &rf[s].covs : &rviews[s]->raw);
                }
                tr.test_refs.push_back(frechet_mean(pooled(sets), cfg.frechet));
            }
        }
    } else {
        tr.test_filter = tr.filter;
    }

    std::vector<MatrixXd> parts;
    if (cfg.pca_retain) {
        for (const auto& b : tr.branches) {
            tr.pcas.push_back(fit_pca(b, *cfg.pca_retain));
            parts.push_back(pca_transform(tr.pcas.back(), b));
        }
    } else {
        parts = tr.branches;
    }
    tr.features = hstack(parts);
    tr.standardizer = cfg.standardize ? Standardizer::fit(tr.features) : Standardizer::identity(tr.features.cols());
    tr.svm = train_svm(tr.standardizer.transform(tr.features), tr.labels, SvmOptions{cfg.svm_c});

    Sha256 h;
    h.update(config_fingerprint(cfg));
    for (auto i : train) h.update(p.train[i].trials.subject_id);
    h.update(tr.filter.weights);
    h.update(tr.test_filter.weights);
    for (const auto& refs : tr.refs) {
        for (const auto& r : refs) h.update(r);
    }
    for (const auto& r : tr.test_refs) h.update(r.matrix());
    for (double s : tr.scales) h.update(s);
    for (const auto& pca : tr.pcas) {
        h.update(pca.mean);
        h.update(pca.components);
    }
    h.update(tr.standardizer.mean);
    h.update(tr.standardizer.scale);
    h.update(tr.svm.weights);
    h.update(tr.svm.bias);
    tr.fingerprint = h.hex_digest();
    return tr;
}

SubjectResult evaluate_core(const Prepared& p, std::size_t test, const std::vector<std::size_t>& train,
                            const PipelineConfig& cfg, bool keep_models) {
    if (train.empty()) throw InvalidInput("evaluation: no training subjects");
    if (std::find(train.begin(), train.end(), test) != train.end()) {
        throw InvalidInput("evaluation: held-out subject is also a training subject");
    }
    if (p.cross_montage && !cfg.pca_retain) {
        throw ConfigError("pipeline.pca_retain: required when the test montage differs from training");
    }
    const auto kinds = branch_kinds(cfg);
    const bool rot = uses_rotation(cfg.alignment);
    const TrainSide tr = fit_training_side(p, train, cfg);
    const View& tv = p.test[test];

    SubjectResult res;
    res.subject_id = tv.trials.subject_id;
    for (auto i : train) res.training_subjects.push_back(p.train[i].trials.subject_id);
    res.train_dim = tr.features.cols();
    res.svm_converged = tr.svm.converged;
    res.upstream_fingerprint = tr.upstream;
    res.training_fingerprint = tr.fingerprint;

    const auto folds = calibration_folds(tv.trials.labels, cfg.seed, tv.trials.subject_id);
    const bool per_fold = cfg.alignment == Alignment::adaptive_m &&
                          cfg.adaptive_m_test == AdaptiveMTestMode::calibration_labels;
    TestSide shared;
    MatrixXd shared_x;
    if (!per_fold) {
        shared = test_features(tv, tr, kinds, cfg);
        shared_x = reduce_test(shared, tr, p.cross_montage);
    }

    for (int k = 0; k < 2; ++k) {
        const auto& calib = folds[static_cast<std::size_t>(k)];
        const auto& eval = folds[static_cast<std::size_t>(1 - k)];
        TestSide ts;
        MatrixXd x;
        if (per_fold) {
            std::vector<SpdMatrix> cc;
            for (auto i : calib) cc.push_back(tv.raw[i]);
            const MatrixXd t = adaptive_m_transform(cc, select(tv.trials.labels, calib));
            const View aligned = make_view(transform_trials(tv.trials, t), cfg.shrinkage);
            ts = test_features(aligned, tr, kinds, cfg);
            x = reduce_test(ts, tr, p.cross_montage);
        } else {
            ts = shared;
            x = shared_x;
        }
        if (x.cols() != tr.features.cols()) {
            throw DimensionMismatch("held-out features have " + std::to_string(x.cols()) +
                                    " columns, training " + std::to_string(tr.features.cols()));
        }
        res.test_dim = x.cols();
        MatrixXd xe = select_rows(x, eval);
        const std::vector<int> ye = select(tv.trials.labels, eval);
        FoldResult fr;
        fr.n_calibration = calib.size();
        fr.n_evaluation = eval.size();
        RotationModel rotation;
        if (rot) {
            rotation = fit_rotation(tr.features, tr.labels, select_rows(x, calib),
                                    select(tv.trials.labels, calib), cfg.rotation_variance);
            xe = apply_rotation(rotation, xe);
            fr.n_v = rotation.n_v;
        }
        const std::vector<int> pred = tr.svm.predict(tr.standardizer.transform(xe));
        const F1Result f1 = f1_score(ye, pred, F1Average::macro);
        fr.f1 = f1.score;
        fr.per_class = f1.per_class;
        res.folds[static_cast<std::size_t>(k)] = fr;

        if (keep_models) {
            AlignmentModel m;
            m.alignment = to_string(cfg.alignment);
            m.subject_ids = res.training_subjects;
            m.subject_ids.push_back(res.subject_id);
            const std::size_t n_sub = train.size();
            m.references.assign(n_sub + 1, {});
            for (std::size_t b = 0; b < tr.refs.size(); ++b) {
                for (std::size_t s = 0; s < n_sub; ++s) {
                    m.references[s].push_back(tr.refs[b].size() == n_sub ? tr.refs[b][s] : tr.refs[b].front());
                }
                m.references[n_sub].push_back(ts.refs[b]);
            }
            m.train_scales = tr.scales;
            m.test_scales = ts.scales;
            m.rotation = rotation;
            res.alignment_models.push_back(std::move(m));
        }
    }
    res.f1 = 0.5 * (res.folds[0].f1 + res.folds[1].f1);
    return res;
}

std::vector<std::string> report_notes(const PipelineConfig& cfg, bool cross) {
    std::vector<std::string> notes;
    notes.push_back(std::string("features standardised before the SVM: ") + (cfg.standardize ? "yes" : "no"));
    if (cfg.alignment == Alignment::adaptive_m) {
        notes.push_back(std::string("adaptive_m held-out transform: ") + to_string(cfg.adaptive_m_test));
    }
    if (cross) {
        notes.push_back("held-out PCA fitted on the unlabelled held-out features (transductive)");
    }
    return notes;
}

EvalReport assemble(const std::vector<TrialSet>& subjects, const PipelineConfig& cfg,
                    std::vector<SubjectResult> results) {
    EvalReport r;
    r.condition = subjects.front().condition;
    r.config = cfg;
    r.pipeline_fingerprint = config_fingerprint(cfg);
    r.dataset_hash = dataset_hash(subjects);
    r.subjects = std::move(results);
    const auto s = r.scores();
    r.summary = summarize(s);
    r.notes = report_notes(cfg, is_cross_montage(subjects.front().channel_names, cfg));
    return r;
}

}  // namespace

std::vector<double> EvalReport::scores() const {
    std::vector<double> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) out.push_back(s.f1);
    return out;
}

std::array<std::vector<std::size_t>, 2> calibration_folds(std::span<const int> labels,
                                                          std::uint64_t seed,
                                                          const std::string& subject_id) {
    auto rng = derived_rng({seed, fnv1a(subject_id), 0x666f6c6473ULL});
    std::array<std::vector<std::size_t>, 2> folds;
    std::set<int> classes(labels.begin(), labels.end());
    for (int c : classes) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) idx.push_back(i);
        }
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng() % i)]);
        }
        const std::size_t half = idx.size() / 2;
        folds[0].insert(folds[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
        folds[1].insert(folds[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    }
    std::sort(folds[0].begin(), folds[0].end());
    std::sort(folds[1].begin(), folds[1].end());
    return folds;
}

bool is_cross_montage(const std::vector<std::string>& train_channels, const PipelineConfig& cfg) {
    return !cfg.montage.empty() && cfg.montage != train_channels;
}

void check_experiment_feasible(const std::vector<std::string>& train_channels,
                               const PipelineConfig& cfg) {
    cfg.validate();
    const auto e = static_cast<Eigen::Index>(train_channels.size());
    if (e < 2) throw DataError("dataset has fewer than 2 channels");
    if (cfg.n_filters && *cfg.n_filters > e) {
        throw ConfigError("pipeline.n_filters: " + std::to_string(*cfg.n_filters) + " exceeds " +
                          std::to_string(e) + " channels");
    }
    const Eigen::Index f = filter_count(cfg, e);
    if (is_cross_montage(train_channels, cfg)) {
        montage_indices(train_channels, MontageSpec{"test", cfg.montage});
        if (!cfg.pca_retain) {
            throw ConfigError("pipeline.pca_retain: required when the test montage differs from training");
        }
        const auto et = static_cast<Eigen::Index>(cfg.montage.size());
        if (et < 2) throw ConfigError("pipeline.montage: need at least 2 channels");
        check_cross_montage_feasible(cfg.fusion, cfg.alignment, e, f, et, filter_count(cfg, et),
                                     *cfg.pca_retain);
    } else if (cfg.pca_retain) {
        for (auto k : reduced_dims(cfg.fusion, cfg.alignment, e, f, *cfg.pca_retain)) {
            if (k < 1) throw InfeasibleExperiment("pipeline.pca_retain: keeps no components");
        }
    }
}

std::string dataset_hash(const std::vector<TrialSet>& subjects) {
    Sha256 h;
    for (const auto& s : subjects) {
        h.update(s.subject_id);
        h.update(s.condition);
        for (const auto& c : s.channel_names) h.update(c);
        for (int l : s.labels) h.update(static_cast<std::int64_t>(l));
        for (const auto& t : s.trials) h.update(t.data());
    }
    return h.hex_digest();
}

SubjectResult evaluate_held_out(const std::vector<TrialSet>& subjects, std::size_t test,
                                const std::vector<std::size_t>& train, const PipelineConfig& cfg,
                                const EvalOptions& opts) {
    cfg.validate();
    if (test >= subjects.size()) throw InvalidInput("evaluate_held_out: subject index out of range");
    std::vector<bool> as_train(subjects.size(), false);
    std::vector<bool> as_test(subjects.size(), false);
    for (auto i : train) {
        if (i >= subjects.size()) throw InvalidInput("evaluate_held_out: subject index out of range");
        as_train[i] = true;
    }
    as_test[test] = true;
    check_experiment_feasible(subjects.front().channel_names, cfg);
    const Prepared p = prepare(subjects, cfg, as_train, as_test, resolve_threads(opts.threads));
    SubjectResult r = evaluate_core(p, test, train, cfg, opts.keep_alignment_models);
    if (opts.on_subject) opts.on_subject(r);
    return r;
}

EvalReport run_loso(const std::vector<TrialSet>& subjects, const PipelineConfig& cfg,
                    const EvalOptions& opts) {
    cfg.validate();
    if (subjects.size() < 2) throw InvalidInput("run_loso: need at least 2 subjects");
    check_experiment_feasible(subjects.front().channel_names, cfg);
    const std::size_t n = subjects.size();
    const std::size_t threads = resolve_threads(opts.threads);
    const std::vector<bool> all(n, true);
    const Prepared p = prepare(subjects, cfg, all, all, threads);
    std::vector<SubjectResult> results(n);
    std::mutex cb;
    parallel_for(n, threads, [&](std::size_t t) {
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i) {
            if (i != t) train.push_back(i);
        }
        results[t] = evaluate_core(p, t, train, cfg, opts.keep_alignment_models);
        if (opts.on_subject) {
            const std::lock_guard lock(cb);
            opts.on_subject(results[t]);
        }
    });
    return assemble(subjects, cfg, std::move(results));
}

AblationReport run_ablation(const std::vector<TrialSet>& subjects, const PipelineConfig& base,
                            const EvalOptions& opts, std::size_t replicates) {
    AblationReport out;
    out.fusion = base.fusion;
    for (auto a : {Alignment::none, Alignment::adaptive_m, Alignment::ts, Alignment::itsa}) {
        PipelineConfig cfg = base;
        cfg.alignment = a;
        check_experiment_feasible(subjects.front().channel_names, cfg);
    }
    for (auto a : {Alignment::none, Alignment::adaptive_m, Alignment::ts, Alignment::itsa}) {
        PipelineConfig cfg = base;
        cfg.alignment = a;
        out.arms.push_back(run_loso(subjects, cfg, opts));
    }
    const auto ref = out.arms.front().scores();
    for (std::size_t i = 1; i < out.arms.size(); ++i) {
        ComparisonResult c;
        c.a = to_string(out.arms[i].config.alignment);
        c.b = to_string(Alignment::none);
        const auto s = out.arms[i].scores();
        try {
            c.tests = paired_tests(s, ref, replicates, base.seed);
        } catch (const InvalidInput& e) {
            c.skipped_reason = e.what();
        }
        out.comparisons.push_back(std::move(c));
    }
    return out;
}

CrossMontageReport run_cross_montage(const std::vector<TrialSet>& subjects,
                                     const PipelineConfig& base, const EvalOptions& opts) {
    if (subjects.empty()) throw InvalidInput("run_cross_montage: no subjects");
    const auto& names = subjects.front().channel_names;
    if (base.montage.empty()) throw ConfigError("pipeline.montage: required for a cross-montage run");
    if (!base.pca_retain) throw ConfigError("pipeline.pca_retain: required for a cross-montage run");

    struct Arm {
        Alignment alignment;
        bool reduced;
    };
    const Arm arms[] = {{Alignment::none, false}, {Alignment::none, true},
                        {Alignment::itsa, false}, {Alignment::itsa, true}};
    std::vector<PipelineConfig> cfgs;
    for (const auto& arm : arms) {
        PipelineConfig cfg = base;
        cfg.alignment = arm.alignment;
        if (!arm.reduced) {
            cfg.montage.clear();
            cfg.pca_retain.reset();
        }
        check_experiment_feasible(names, cfg);
        cfgs.push_back(cfg);
    }

    CrossMontageReport out;
    out.test_montage = base.montage;
    out.retain = *base.pca_retain;
    const auto e = static_cast<Eigen::Index>(names.size());
    const auto et = static_cast<Eigen::Index>(base.montage.size());
    out.train_dims = branch_dims(base.fusion, Alignment::itsa, e, filter_count(base, e));
    out.test_dims = branch_dims(base.fusion, Alignment::itsa, et, filter_count(base, et));
    out.reduced_dims = reduced_dims(base.fusion, Alignment::itsa, e, filter_count(base, e), *base.pca_retain);
    for (const auto& cfg : cfgs) out.arms.push_back(run_loso(subjects, cfg, opts));
    for (std::size_t a = 0; a < 2; ++a) {
        MontageDrop d;
        d.alignment = to_string(arms[2 * a].alignment);
        const auto full = out.arms[2 * a].scores();
        const auto reduced = out.arms[2 * a + 1].scores();
        for (std::size_t i = 0; i < full.size(); ++i) d.drops.push_back(full[i] - reduced[i]);
        d.summary = summarize(d.drops);
        out.drops.push_back(std::move(d));
    }
    return out;
}

LearningCurveReport run_learning_curve(const std::vector<TrialSet>& subjects,
                                       const PipelineConfig& cfg,
                                       const std::vector<std::size_t>& sizes, std::size_t folds,
                                       const std::vector<double>& predict_at,
                                       const EvalOptions& opts) {
    cfg.validate();
    const std::size_t n = subjects.size();
    if (n < 2) throw InvalidInput("run_learning_curve: need at least 2 subjects");
    if (folds < 1) throw InvalidInput("run_learning_curve: need at least 1 fold");
    if (sizes.empty()) throw InvalidInput("run_learning_curve: no training sizes");
    for (auto s : sizes) {
        if (s < 1 || s > n - 1) {
            throw InfeasibleExperiment("learning_curve.sizes: " + std::to_string(s) +
                                       " training subjects requested but the pool has " +
                                       std::to_string(n - 1));
        }
    }
    check_experiment_feasible(subjects.front().channel_names, cfg);
    const std::size_t threads = resolve_threads(opts.threads);
    const std::vector<bool> all(n, true);
    const Prepared p = prepare(subjects, cfg, all, all, threads);

    struct Task {
        std::size_t point;
        std::size_t fold;
        std::size_t test;
        std::vector<std::size_t> train;
    };
    std::vector<Task> tasks;
    std::vector<std::size_t> fold_counts;
    for (std::size_t pi = 0; pi < sizes.size(); ++pi) {
        const std::size_t size = sizes[pi];
        const std::size_t nf = size == n - 1 ? 1 : folds;
        fold_counts.push_back(nf);
        for (std::size_t r = 0; r < nf; ++r) {
            for (std::size_t t = 0; t < n; ++t) {
                std::vector<std::size_t> pool;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i != t) pool.push_back(i);
                }
                auto rng = derived_rng({cfg.seed, size, r, fnv1a(subjects[t].subject_id)});
                for (std::size_t i = 0; i < size; ++i) {
                    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
                    std::swap(pool[i], pool[j]);
                }
                pool.resize(size);
                std::sort(pool.begin(), pool.end());
                tasks.push_back({pi, r, t, std::move(pool)});
            }
        }
    }
    std::vector<double> f1(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        f1[i] = evaluate_core(p, tasks[i].test, tasks[i].train, cfg, false).f1;
    });

    LearningCurveReport out;
    for (std::size_t pi = 0; pi < sizes.size(); ++pi) {
        CurvePoint pt;
        pt.n_train = sizes[pi];
        std::vector<double> sum(fold_counts[pi], 0.0);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].point == pi) sum[tasks[i].fold] += f1[i];
        }
        for (double s : sum) pt.fold_scores.push_back(s / static_cast<double>(n));
        pt.summary = summarize(pt.fold_scores);
        out.points.push_back(std::move(pt));
    }
    std::set<std::size_t> distinct(sizes.begin(), sizes.end());
    if (distinct.size() >= 2) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& pt : out.points) {
            xs.push_back(static_cast<double>(pt.n_train));
            ys.push_back(pt.summary.mean);
        }
        out.fit = fit_performance_curves(xs, ys, predict_at);
    }
    return out;
}

}  // namespace spdalign
