#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "json.hpp"
#include "spdalign/alignment.hpp"
#include "spdalign/config.hpp"
#include "spdalign/covariance.hpp"
#include "spdalign/data_io.hpp"
#include "spdalign/error.hpp"
#include "spdalign/eval.hpp"
#include "spdalign/features.hpp"
#include "spdalign/report.hpp"
#include "spdalign/spd.hpp"
#include "spdalign/stats.hpp"
#include "spdalign/synth.hpp"

namespace py = pybind11;
using namespace spdalign;
using nlohmann::json;

namespace {

/// Subjects held on the C++ side; Python sees an opaque handle.
struct Dataset {
    std::vector<TrialSet> subjects;
};

std::vector<SpdMatrix> to_spd(const std::vector<Eigen::MatrixXd>& ms) {
    std::vector<SpdMatrix> out;
    out.reserve(ms.size());
    for (const auto& m : ms) out.emplace_back(m);
    return out;
}

PipelineConfig parse_pipeline(const std::string& text) {
    return pipeline_from_json(text.empty() ? json::object() : json::parse(text));
}

py::dict tests_dict(const PairedTests& t) {
    py::dict d;
    d["lilliefors_statistic"] = t.lilliefors_statistic;
    d["lilliefors_p"] = t.lilliefors_p;
    d["t"] = t.t;
    d["t_p"] = t.t_p;
    d["w"] = t.w;
    d["wilcoxon_p"] = t.wilcoxon_p;
    d["chosen_test"] = t.chosen_test;
    d["chosen_p"] = t.chosen_p;
    return d;
}

}  // namespace

PYBIND11_MODULE(_spdalign, m) {
    m.doc() = "SPD covariance features with inter-subject tangent space alignment";
    m.attr("__version__") = SPDALIGN_VERSION;

    auto base = py::register_exception<Error>(m, "SpdAlignError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InfeasibleExperiment>(m, "InfeasibleExperiment", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<CalibrationCoverageError>(m, "CalibrationCoverageError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

    // Manifold.
    m.def("matrix_log", [](const Eigen::MatrixXd& c) { return matrix_log(SpdMatrix(c)); }, py::arg("c"));
    m.def("matrix_exp", [](const Eigen::MatrixXd& s) { return matrix_exp(s).matrix(); }, py::arg("s"));
    m.def("matrix_sqrt", [](const Eigen::MatrixXd& c) { return matrix_sqrt(SpdMatrix(c)).matrix(); }, py::arg("c"));
    m.def("matrix_invsqrt", [](const Eigen::MatrixXd& c) { return matrix_invsqrt(SpdMatrix(c)).matrix(); },
          py::arg("c"));
    m.def("riemannian_distance",
          [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return riemannian_distance(SpdMatrix(a), SpdMatrix(b)); },
          py::arg("a"), py::arg("b"));
    m.def("frechet_mean", [](const std::vector<Eigen::MatrixXd>& cs) { return frechet_mean(to_spd(cs)).matrix(); },
          py::arg("covs"));
    m.def("log_euclidean_mean",
          [](const std::vector<Eigen::MatrixXd>& cs) { return log_euclidean_mean(to_spd(cs)).matrix(); },
          py::arg("covs"));
    m.def("tangent_project",
          [](const Eigen::MatrixXd& c, const Eigen::MatrixXd& ref) {
              return Eigen::VectorXd(tangent_project(SpdMatrix(c), SpdMatrix(ref)).values());
          },
          py::arg("c"), py::arg("reference"));

    // Covariance.
    m.def("trial_covariance", [](const Eigen::MatrixXd& e) { return trial_covariance(Trial(e)); }, py::arg("trial"));
    m.def("ledoit_wolf_gamma", [](const Eigen::MatrixXd& e) { return ledoit_wolf_gamma(Trial(e)); }, py::arg("trial"));
    m.def("shrink",
          [](const Eigen::MatrixXd& e) {
              const ShrunkCovariance s = shrink(Trial(e));
              return py::make_tuple(s.cov.matrix(), s.gamma);
          },
          py::arg("trial"), "Ledoit-Wolf shrunk covariance and its gamma.");

    // Alignment.
    m.def("rescale_block",
          [](const Eigen::MatrixXd& x) {
              const RescaleResult r = rescale_block(x);
              return py::make_tuple(r.features, r.scale);
          },
          py::arg("features"));
    m.def("fit_rotation",
          [](const Eigen::MatrixXd& xt, const std::vector<int>& yt, const Eigen::MatrixXd& xc,
             const std::vector<int>& yc, double threshold) {
              const RotationModel r = fit_rotation(xt, yt, xc, yc, threshold);
              return py::make_tuple(r.matrix(), r.n_v);
          },
          py::arg("train_features"), py::arg("train_labels"), py::arg("calib_features"), py::arg("calib_labels"),
          py::arg("variance_threshold") = 0.999, "Rotation matrix mapping calibration anchors onto training anchors, and N_v.");

    // Feature bookkeeping.
    m.def("feature_dim",
          [](const std::string& fusion, const std::string& alignment, Eigen::Index channels, Eigen::Index filters) {
              return feature_dim(fusion_from_string(fusion), alignment_from_string(alignment), channels, filters);
          },
          py::arg("fusion"), py::arg("alignment"), py::arg("channels"), py::arg("filters"));
    m.def("reduced_dims",
          [](const std::string& fusion, const std::string& alignment, Eigen::Index channels, Eigen::Index filters,
             double retain) {
              return reduced_dims(fusion_from_string(fusion), alignment_from_string(alignment), channels, filters,
                                  retain);
          },
          py::arg("fusion"), py::arg("alignment"), py::arg("channels"), py::arg("filters"), py::arg("retain"));

    // Statistics.
    m.def("paired_t_test",
          [](const std::vector<double>& d) {
              const TTestResult r = paired_t_test(d);
              return py::make_tuple(r.t, r.df, r.p);
          },
          py::arg("differences"));
    m.def("wilcoxon_signed_rank",
          [](const std::vector<double>& d) {
              const WilcoxonResult r = wilcoxon_signed_rank(d);
              return py::make_tuple(r.w_plus, r.p);
          },
          py::arg("differences"));
    m.def("lilliefors",
          [](const std::vector<double>& x, std::size_t replicates, std::uint64_t seed) {
              const LillieforsResult r = lilliefors(x, replicates, seed);
              return py::make_tuple(r.statistic, r.p);
          },
          py::arg("sample"), py::arg("replicates") = 100'000, py::arg("seed") = 0);
    m.def("paired_tests",
          [](const std::vector<double>& a, const std::vector<double>& b, std::size_t replicates, std::uint64_t seed) {
              return tests_dict(paired_tests(a, b, replicates, seed));
          },
          py::arg("a"), py::arg("b"), py::arg("replicates") = 100'000, py::arg("seed") = 0);

    // Datasets and experiments. Reports cross the boundary as JSON text.
    py::class_<Dataset>(m, "Dataset")
        .def_static(
            "synth",
            [](std::size_t n_subjects, std::size_t trials_per_class, Eigen::Index channels, Eigen::Index samples,
               double shift_strength, std::uint64_t seed) {
                SynthOptions o;
                o.n_subjects = n_subjects;
                o.trials_per_class = trials_per_class;
                o.channels = channels;
                o.samples = samples;
                o.shift_strength = shift_strength;
                o.seed = seed;
                return Dataset{synth_generate(o).subjects};
            },
            py::arg("n_subjects") = 8, py::arg("trials_per_class") = 64, py::arg("channels") = 16,
            py::arg("samples") = 100, py::arg("shift_strength") = 1.0, py::arg("seed") = 42)
        .def_static(
            "load",
            [](const std::string& path, std::optional<std::string> condition) {
                return Dataset{read_dataset(path, condition)};
            },
            py::arg("dataset_json"), py::arg("condition") = std::nullopt)
        .def("shuffled", [](const Dataset& d, std::uint64_t seed) { return Dataset{shuffle_labels(d.subjects, seed)}; },
             py::arg("seed"))
        .def_property_readonly("subject_ids",
                               [](const Dataset& d) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : d.subjects) ids.push_back(s.subject_id);
                                   return ids;
                               })
        .def_property_readonly("channel_names",
                               [](const Dataset& d) {
                                   return d.subjects.empty() ? std::vector<std::string>{} : d.subjects[0].channel_names;
                               })
        .def("trials",
             [](const Dataset& d, std::size_t subject) {
                 const TrialSet& s = d.subjects.at(subject);
                 std::vector<Eigen::MatrixXd> out;
                 for (const auto& t : s.trials) out.push_back(t.data());
                 return py::make_tuple(out, s.labels);
             },
             py::arg("subject"))
        .def("hash", [](const Dataset& d) { return dataset_hash(d.subjects); })
        .def("__len__", [](const Dataset& d) { return d.subjects.size(); });

    m.def("_run_loso",
          [](const Dataset& d, const std::string& pipeline, std::size_t threads) {
              EvalOptions opts;
              opts.threads = threads;
              EvalReport r;
              {
                  py::gil_scoped_release release;
                  r = run_loso(d.subjects, parse_pipeline(pipeline), opts);
              }
              return to_json(r).dump();
          },
          py::arg("dataset"), py::arg("pipeline"), py::arg("threads") = 1);
    m.def("_run_ablation",
          [](const Dataset& d, const std::string& pipeline, std::size_t replicates, std::size_t threads) {
              EvalOptions opts;
              opts.threads = threads;
              AblationReport r;
              {
                  py::gil_scoped_release release;
                  r = run_ablation(d.subjects, parse_pipeline(pipeline), opts, replicates);
              }
              return to_json(r).dump();
          },
          py::arg("dataset"), py::arg("pipeline"), py::arg("replicates") = 100'000, py::arg("threads") = 1);
    m.def("_run_cross_montage",
          [](const Dataset& d, const std::string& pipeline, std::size_t threads) {
              EvalOptions opts;
              opts.threads = threads;
              const PipelineConfig cfg = parse_pipeline(pipeline);
              py::gil_scoped_release release;
              return to_json(run_cross_montage(d.subjects, cfg, opts)).dump();
          },
          py::arg("dataset"), py::arg("pipeline"), py::arg("threads") = 1);
}
