#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace spdalign {

/// Broad failure category, used by the CLI to pick an exit code.
enum class ErrorKind { invalid_input, numerical, config, data };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::invalid_input, what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(ErrorKind::invalid_input, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/// Iterative solver gave up. Carries the last iterate and its residual.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, Eigen::MatrixXd last, double residual)
        : Error(ErrorKind::numerical, what), last_iterate(std::move(last)), residual(residual) {}
    Eigen::MatrixXd last_iterate;
    double residual;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// An experiment that cannot run with the given dimensions (e.g. PCA k > d_test).
struct InfeasibleExperiment : Error {
    explicit InfeasibleExperiment(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A class is missing from the training set or a calibration subset.
struct CalibrationCoverageError : Error {
    explicit CalibrationCoverageError(const std::string& what) : Error(ErrorKind::data, what) {}
};

}  // namespace spdalign
