"""One-step Arellano-Bond difference GMM with clustered covariance.

The level equations of a :class:`RegressionSample` are differenced between
consecutive effective periods, which removes the unit effects. Each
differenced equation at original period t is instrumented by the levels of
the predetermined variables: treatments dated up to t-1, outcome levels dated
up to t-2 (present only when the model contains outcome lags), plus one time
dummy per equation. Within an equation each (variable, source period) pair
occupies exactly one column even though the textbook instrument list repeats
lagged outcomes across overlapping blocks; repeated columns would make the
weighting matrix singular.

Instrument values are stored per equation. The stacked per-unit instrument
matrix Z_i is block sparse (row e is nonzero only in equation e's columns),
so products against the tridiagonal one-step band H never materialise Z.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import RegressionSample
from .exceptions import (
    NoValidInstruments,
    OrderConditionFailed,
    SingleCluster,
    SingularGMMGram,
    ZeroWeightMatrix,
)
from .inference import CovarianceEstimate
from .util import frozen

EIG_RTOL = 1e-10


@dataclass(frozen=True)
class ColumnKey:
    """Identity of one instrument column: equation, kind, source period."""

    equation: int
    kind: str  # "treatment:<name>" | "outcome" | "time_dummy"
    source_period: Optional[int]


@dataclass(frozen=True)
class InstrumentSet:
    """Instrument columns for the differenced system.

    ``values[e]`` is the (N, m_e) matrix of instrument values for equation
    ``e``; ``col_slices[e]`` locates those columns in the global registry.
    """

    sample: RegressionSample
    eq_periods: tuple
    columns: tuple
    values: tuple
    col_slices: tuple
    lag_cap: Optional[int]

    @property
    def m(self) -> int:
        return len(self.columns)

    @property
    def n_equations(self) -> int:
        return len(self.eq_periods)

    def dense_matrix(self) -> np.ndarray:
        """(N, n_equations, m) stacked instrument tensor (for small problems)."""
        n_units = self.sample.n_units
        z = np.zeros((n_units, self.n_equations, self.m))
        for e, (vals, sl) in enumerate(zip(self.values, self.col_slices)):
            z[:, e, sl] = vals
        return z


def build_instruments(
    sample: RegressionSample, lag_cap: Optional[int] = None
) -> InstrumentSet:
    """Enumerate admissible instruments for every differenced equation.

    The differenced equation at panel position tau admits treatment levels at
    positions < tau and, when the model has outcome lags, outcome levels at
    positions < tau - 1. ``lag_cap`` keeps only the most recent admissible
    periods per variable per equation.
    """
    if lag_cap is not None and lag_cap < 1:
        raise NoValidInstruments(f"lag_cap must be >= 1, got {lag_cap}")
    t_eff = sample.n_eff_periods
    if t_eff < 2:
        raise NoValidInstruments(
            "differencing needs at least 2 effective periods"
        )
    panel = sample.panel
    periods = panel.periods
    outcome_vals = panel.values(sample.outcome)
    treat_vals = {v: panel.values(v) for v in sample.treatment_names}

    columns = []
    values = []
    slices = []
    for e in range(1, t_eff):
        tau = sample.eff_positions[e]
        start = len(columns)
        eq_vals = []
        for name in sample.treatment_names:
            lo = 0 if lag_cap is None else max(0, tau - lag_cap)
            for s in range(lo, tau):
                columns.append(ColumnKey(e - 1, f"treatment:{name}", periods[s]))
                eq_vals.append(treat_vals[name][:, s])
        if sample.n_lags >= 1:
            lo = 0 if lag_cap is None else max(0, tau - 1 - lag_cap)
            for s in range(lo, tau - 1):
                columns.append(ColumnKey(e - 1, "outcome", periods[s]))
                eq_vals.append(outcome_vals[:, s])
        columns.append(ColumnKey(e - 1, "time_dummy", None))
        eq_vals.append(np.ones(sample.n_units))
        values.append(frozen(np.column_stack(eq_vals)))
        slices.append(slice(start, len(columns)))
    return InstrumentSet(
        sample=sample,
        eq_periods=tuple(sample.eff_periods[1:]),
        columns=tuple(columns),
        values=tuple(values),
        col_slices=tuple(slices),
        lag_cap=lag_cap,
    )


def first_difference_band(n_equations: int) -> np.ndarray:
    """Covariance band of differenced white noise: 2 on the diagonal, -1 off."""
    h = 2.0 * np.eye(n_equations)
    idx = np.arange(n_equations - 1)
    h[idx, idx + 1] = -1.0
    h[idx + 1, idx] = -1.0
    return h


@dataclass(frozen=True)
class OneStepWeight:
    """Inverse of sum_i Z_i' H Z_i, with a pseudo-inverse fallback flag."""

    matrix: np.ndarray
    pseudo_inverse: bool

    def __post_init__(self):
        object.__setattr__(self, "matrix", frozen(self.matrix))


def _zhz(instruments: InstrumentSet) -> np.ndarray:
    """sum_i Z_i' H Z_i computed blockwise against the tridiagonal band."""
    m = instruments.m
    n_eq = instruments.n_equations
    a = np.zeros((m, m))
    vals = instruments.values
    sls = instruments.col_slices
    for e in range(n_eq):
        a[sls[e], sls[e]] += 2.0 * (vals[e].T @ vals[e])
        if e + 1 < n_eq:
            cross = vals[e].T @ vals[e + 1]
            a[sls[e], sls[e + 1]] -= cross
            a[sls[e + 1], sls[e]] -= cross.T
    return a


def one_step_weight(
    instruments: InstrumentSet, sample: Optional[RegressionSample] = None
) -> OneStepWeight:
    """One-step AB weighting matrix [sum_i Z_i' H Z_i]^{-1}.

    Near-singular sums (routine in many-instrument settings) fall back to a
    spectral pseudo-inverse with threshold 1e-10 times the top eigenvalue,
    flagged on the result and warned about once.
    """
    a = _zhz(instruments)
    scale = np.abs(a).max()
    if scale == 0.0:
        raise ZeroWeightMatrix("instrument moment matrix is identically zero")
    eigval, eigvec = np.linalg.eigh(a)
    cutoff = EIG_RTOL * eigval.max()
    keep = eigval > cutoff
    pseudo = not bool(keep.all())
    if pseudo:
        warnings.warn(
            f"one-step weight: {int((~keep).sum())} of {keep.size} eigenvalues "
            "below threshold; using spectral pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
    inv_vals = np.where(keep, 1.0 / np.where(keep, eigval, 1.0), 0.0)
    w = (eigvec * inv_vals) @ eigvec.T
    return OneStepWeight(matrix=(w + w.T) / 2.0, pseudo_inverse=pseudo)


@dataclass(frozen=True)
class ABFit:
    """Fitted one-step AB regression on the differenced sample."""

    sample: RegressionSample
    alpha: np.ndarray
    beta: np.ndarray
    time_effects: np.ndarray
    residuals: np.ndarray  # (N, n_equations) differenced residuals
    xz: np.ndarray         # (p, m) cross-moment matrix, reused by the covariance
    n: int
    m: int
    p: int

    def __post_init__(self):
        for name in ("alpha", "beta", "time_effects", "residuals", "xz"):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    @property
    def coef_names(self) -> tuple:
        return self.sample.coef_names


def _differenced_design(sample: RegressionSample):
    dy = sample.y[:, 1:] - sample.y[:, :-1]
    dm = np.concatenate(
        [
            sample.treatments[:, 1:] - sample.treatments[:, :-1],
            sample.lags[:, 1:] - sample.lags[:, :-1],
        ],
        axis=2,
    )
    return dy, dm


def fit_ab(
    sample: RegressionSample,
    instruments: InstrumentSet,
    weight: OneStepWeight,
) -> ABFit:
    """Closed-form linear GMM on the differenced system.

    Coefficients are (X'Z W Z'X)^{-1} X'Z W Z'y over the stacked differenced
    rows; X holds the differenced treatments and lags plus one dummy per
    differenced equation. Exactly identified systems (m = p) are invariant to
    the weighting matrix.
    """
    dy, dm = _differenced_design(sample)
    n_units = sample.n_units
    n_eq = instruments.n_equations
    k = sample.d_alpha + sample.n_lags
    p = k + n_eq
    m = instruments.m
    if m < p:
        raise OrderConditionFailed(f"m={m} moment conditions for p={p} coefficients")

    xz = np.zeros((p, m))
    zy = np.zeros(m)
    for e in range(n_eq):
        v = instruments.values[e]
        sl = instruments.col_slices[e]
        xz[:k, sl] = dm[:, e, :].T @ v
        xz[k + e, sl] = v.sum(axis=0)
        zy[sl] = v.T @ dy[:, e]

    xzw = xz @ weight.matrix
    gram = xzw @ xz.T
    rhs = xzw @ zy
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularGMMGram(f"X'Z W Z'X is singular (cond={cond:.3e})")
    theta = np.linalg.solve(gram, rhs)

    fitted = np.tensordot(dm, theta[:k], axes=([2], [0])) + theta[k:][None, :]
    residuals = dy - fitted
    return ABFit(
        sample=sample,
        alpha=theta[: sample.d_alpha],
        beta=theta[sample.d_alpha : k],
        time_effects=theta[k:],
        residuals=residuals,
        xz=xz,
        n=n_units * n_eq,
        m=m,
        p=p,
    )


def moment_vector(fit: ABFit, instruments: InstrumentSet) -> np.ndarray:
    """Average moment vector (1/n) sum_i Z_i' (dy_i - X_i theta)."""
    g = np.zeros(instruments.m)
    for e in range(instruments.n_equations):
        g[instruments.col_slices[e]] = instruments.values[e].T @ fit.residuals[:, e]
    return g / fit.n


def ab_cluster_cov(
    fit: ABFit, instruments: InstrumentSet, weight: OneStepWeight
) -> CovarianceEstimate:
    """GMM sandwich clustered by unit, restricted to the (alpha, beta) block.

    With A = (X'Z W Z'X)^{-1} X'Z W, the covariance is
    A [sum_i Z_i' de_i de_i' Z_i] A'.
    """
    n_units = fit.sample.n_units
    if n_units < 2:
        raise SingleCluster("cluster-robust covariance needs >= 2 units")
    xzw = fit.xz @ weight.matrix
    gram = xzw @ fit.xz.T
    a = np.linalg.solve(gram, xzw)

    scores = np.zeros((n_units, instruments.m))
    for e in range(instruments.n_equations):
        scores[:, instruments.col_slices[e]] = (
            instruments.values[e] * fit.residuals[:, e : e + 1]
        )
    meat = scores.T @ scores
    cov_full = a @ meat @ a.T
    k = fit.sample.d_alpha + fit.sample.n_lags
    cov = (cov_full[:k, :k] + cov_full[:k, :k].T) / 2.0
    return CovarianceEstimate(
        matrix=cov,
        names=fit.coef_names,
        provenance="analytic",
        n_clusters=n_units,
    )
