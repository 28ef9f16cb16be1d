"""Long-run effects, delta-method SEs, cluster bootstrap and the
small-bias-condition diagnostic.

The long-run effect of a permanent treatment change in a model with L
outcome lags is alpha / (1 - sum of lag coefficients). Its analytic SE comes
from the delta method over the joint clustered covariance of (alpha, beta);
for debiased estimators the covariance of the uncorrected estimator is
reused, while bootstrap SEs rerun the full correction inside each replicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from .design import RegressionSample
from .exceptions import (
    NegativeVariance,
    PanelDebiasError,
    TooManyFailedReplicates,
    UnitRootDenominator,
)
from .util import derive_seed, frozen

_UNIT_ROOT_TOL = 1e-8


@dataclass(frozen=True)
class CovarianceEstimate:
    """Cluster-robust covariance of (alpha, beta) with its provenance."""

    matrix: np.ndarray
    names: tuple
    provenance: str  # "analytic" | "bootstrap"
    n_clusters: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", frozen(self.matrix))

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


@dataclass(frozen=True)
class LongRunEffect:
    value: float
    gradient: np.ndarray
    se_analytic: Optional[float] = None
    se_bootstrap: Optional[float] = None


def long_run_effect(alpha: float, beta: Sequence[float]) -> float:
    """alpha / (1 - sum(beta)), the steady-state effect of a permanent change."""
    beta = np.asarray(beta, dtype=float)
    denom = 1.0 - beta.sum()
    if abs(denom) <= _UNIT_ROOT_TOL:
        raise UnitRootDenominator(
            f"lag coefficients sum to {beta.sum():.10g}; long-run effect undefined"
        )
    return float(alpha) / denom


def long_run_gradient(alpha: float, beta: Sequence[float]) -> np.ndarray:
    """Gradient of the long-run effect in (alpha, beta_1..beta_L)."""
    beta = np.asarray(beta, dtype=float)
    denom = 1.0 - beta.sum()
    if abs(denom) <= _UNIT_ROOT_TOL:
        raise UnitRootDenominator("unit-root denominator in gradient")
    g = np.empty(1 + beta.size)
    g[0] = 1.0 / denom
    g[1:] = float(alpha) / denom**2
    return g


def delta_method_lr(
    alpha: float, beta: Sequence[float], cov: CovarianceEstimate
) -> float:
    """Delta-method SE of the long-run effect.

    ``cov`` must cover (alpha, beta) jointly, in that order. For debiased
    estimators pass the covariance of the uncorrected estimator, which
    remains valid for the correction.
    """
    g = long_run_gradient(alpha, beta)
    v = cov.matrix
    if v.shape != (g.size, g.size):
        raise ValueError(
            f"covariance is {v.shape}, expected {(g.size, g.size)}"
        )
    quad = float(g @ v @ g)
    if quad < 0:
        raise NegativeVariance(f"delta-method variance {quad:.3e} < 0")
    return float(np.sqrt(quad))


@dataclass(frozen=True)
class Diagnostic:
    """(p v m)^2 / n ratio with its verdict."""

    ratio: float
    flagged: bool
    text: str


def small_bias_diagnostic(n: int, p: int, m: int = 0) -> Diagnostic:
    """Ratio max(p, m)^2 / n; ratios >= 1 flag that debiasing is recommended."""
    if n <= 0 or p <= 0 or m < 0:
        raise ValueError("n and p must be positive, m non-negative")
    ratio = max(p, m) ** 2 / n
    flagged = ratio >= 1.0
    verdict = "debiasing recommended" if flagged else "small-bias condition plausible"
    return Diagnostic(
        ratio=float(ratio),
        flagged=flagged,
        text=f"(p v m)^2/n = {ratio:.1f}: {verdict}",
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Across-replicate SEs for every reported quantity."""

    names: tuple
    se: np.ndarray
    estimates: np.ndarray  # (successful replicates, len(names))
    n_requested: int
    n_failed: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "se", frozen(self.se))
        object.__setattr__(self, "estimates", frozen(self.estimates))

    def se_for(self, name: str) -> float:
        return float(self.se[self.names.index(name)])


def _replicate_quantities(estimator) -> np.ndarray:
    return np.concatenate([np.asarray(estimator.coef_, dtype=float),
                           np.asarray(estimator.long_run_, dtype=float)])


def _quantity_names(sample: RegressionSample) -> tuple:
    lr_names = tuple(f"long_run:{t}" for t in sample.treatment_names)
    return tuple(sample.coef_names) + lr_names


def _one_replicate(sample: RegressionSample, estimator, seed: int, rep: int):
    rng = np.random.default_rng([seed, rep])
    resample = sample.resample_units(rng)
    est = clone(estimator)
    if "seed" in est.get_params():
        est.set_params(seed=derive_seed(seed, rep, 1))
    try:
        est.fit(resample)
        return _replicate_quantities(est)
    except PanelDebiasError:
        return None


def cluster_bootstrap(
    sample: RegressionSample,
    estimator,
    n_boot: int,
    seed: int = 0,
    n_jobs: int = 1,
) -> BootstrapResult:
    """Unit (cluster) bootstrap of a full estimation pipeline.

    Each replicate draws N units with replacement (duplicates get fresh unit
    identities so each copy carries its own fixed effect), reruns the entire
    pipeline -- estimation, any debiasing, long-run effect -- and the SEs are
    the across-replicate standard deviations. Replicate r is driven entirely
    by the stream derived from (seed, r), so serial and parallel runs agree
    exactly.
    """
    if n_boot < 2:
        raise ValueError("bootstrap needs at least 2 replicates")
    names = _quantity_names(sample)

    if n_jobs == 1:
        draws = [
            _one_replicate(sample, estimator, seed, rep) for rep in range(n_boot)
        ]
    else:
        draws = Parallel(n_jobs=n_jobs)(
            delayed(_one_replicate)(sample, estimator, seed, rep)
            for rep in range(n_boot)
        )
    kept = [d for d in draws if d is not None]
    n_failed = n_boot - len(kept)
    if n_failed > 0.10 * n_boot:
        raise TooManyFailedReplicates(
            f"{n_failed} of {n_boot} bootstrap replicates failed"
        )
    estimates = np.vstack(kept)
    return BootstrapResult(
        names=names,
        se=estimates.std(axis=0, ddof=1),
        estimates=estimates,
        n_requested=n_boot,
        n_failed=n_failed,
        seed=seed,
    )
