"""Riemannian covariance features and inter-subject tangent space alignment.

Thin wrapper over the compiled ``_spdalign`` extension. Experiment runners
return plain dictionaries with the same layout as the CLI report files.
"""

import json as _json

from ._spdalign import (  # noqa: F401
    CalibrationCoverageError,
    ConfigError,
    ConvergenceError,
    DataError,
    Dataset,
    DimensionMismatch,
    InfeasibleExperiment,
    InvalidInput,
    NumericalError,
    SpdAlignError,
    __version__,
    feature_dim,
    fit_rotation,
    frechet_mean,
    ledoit_wolf_gamma,
    lilliefors,
    log_euclidean_mean,
    matrix_exp,
    matrix_invsqrt,
    matrix_log,
    matrix_sqrt,
    paired_t_test,
    paired_tests,
    reduced_dims,
    rescale_block,
    riemannian_distance,
    shrink,
    tangent_project,
    trial_covariance,
    wilcoxon_signed_rank,
)
from . import _spdalign


def _pipeline(pipeline):
    return _json.dumps(pipeline or {})


def run_loso(dataset, pipeline=None, threads=1):
    """Leave-one-subject-out evaluation. ``pipeline`` uses the config-file keys."""
    return _json.loads(_spdalign._run_loso(dataset, _pipeline(pipeline), threads))


def run_ablation(dataset, pipeline=None, replicates=100_000, threads=1):
    """The four alignment arms on one fusion mode, with paired comparisons."""
    return _json.loads(_spdalign._run_ablation(dataset, _pipeline(pipeline), replicates, threads))


def run_cross_montage(dataset, pipeline, threads=1):
    """Full-montage training, reduced-montage testing; needs ``montage`` in ``pipeline``."""
    return _json.loads(_spdalign._run_cross_montage(dataset, _pipeline(pipeline), threads))
