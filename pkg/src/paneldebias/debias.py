"""Analytical and split-sample bias corrections.

The fixed-effects estimator in a dynamic panel carries an O(1/T) incidental-
parameter bias from estimating one intercept per unit. ``nickell_bias``
estimates that bias analytically from the fitted residuals and trimmed
forward cross-moments of the predetermined regressors; ``debias_fe_analytic``
subtracts it. The "D" entering the formula is the full predetermined block
(treatments plus outcome lags), so the lag coefficients are corrected jointly
with the treatment effect.

Split-sample corrections instead exploit that half-samples carry twice the
first-order bias: 2 * full - average(halves) cancels it. The FE version
splits along time (the bias source is the per-unit intercepts); the AB
version splits along the cross-section (the bias source is the number of
moment conditions relative to the sample size), optionally averaging several
random splits to reduce variability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ab import ABFit, build_instruments, fit_ab, one_step_weight
from .design import RegressionSample, cross_split, time_split
from .exceptions import (
    HalfSampleOrderConditionFailed,
    InvalidTrim,
    OrderConditionFailed,
    SingularH,
    TooFewUnits,
)
from .fe import FEFit, fit_fe
from .util import frozen


@dataclass(frozen=True)
class CorrectionReport:
    """Raw and corrected (alpha, beta) with the correction's ingredients.

    Exactly one of ``bias_estimate`` (analytic) and ``half_estimates``
    (split-sample) is present. ``corrected`` satisfies the defining
    arithmetic identity of its method.
    """

    method: str
    coef_names: tuple
    raw: np.ndarray
    corrected: np.ndarray
    partition: str
    bias_estimate: Optional[np.ndarray] = None
    half_estimates: Optional[tuple] = None
    sub_seeds: Optional[tuple] = None
    split_corrections: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "raw", frozen(self.raw))
        object.__setattr__(self, "corrected", frozen(self.corrected))
        if self.bias_estimate is not None:
            object.__setattr__(self, "bias_estimate", frozen(self.bias_estimate))
        if self.half_estimates is not None:
            object.__setattr__(
                self, "half_estimates", tuple(frozen(h) for h in self.half_estimates)
            )
        if self.split_corrections is not None:
            object.__setattr__(
                self,
                "split_corrections",
                tuple(frozen(c) for c in self.split_corrections),
            )


def nickell_bias(fit: FEFit, trim: int) -> np.ndarray:
    """Plug-in estimate of the first-order FE bias, as a (d_alpha + L) vector.

    Solves H b = -sum_i sum_{t<s<=min(t+trim, T)} D_is e_it / (T - s + t)
    with H the average outer product of the partialled-out predetermined
    block, then returns b / n. ``trim`` keeps only the first ``trim`` forward
    cross-moments; it must satisfy 1 <= trim < T_eff.
    """
    sample = fit.sample
    t_eff = sample.n_eff_periods
    if not 1 <= trim < t_eff:
        raise InvalidTrim(f"trim must satisfy 1 <= M < {t_eff}, got {trim}")
    k = sample.d_alpha + sample.n_lags
    n = sample.n

    h = (fit.dtilde.T @ fit.dtilde) / n
    cond = np.linalg.cond(h)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularH(f"predetermined-block Gram is singular (cond={cond:.3e})")

    pred = np.concatenate([sample.treatments, sample.lags], axis=2)
    resid = fit.residuals.reshape(sample.n_units, t_eff)
    rhs = np.zeros(k)
    for j in range(1, trim + 1):
        # offset j pairs residual at t with regressors at s = t + j
        cross = np.einsum("itk,it->k", pred[:, j:, :], resid[:, : t_eff - j])
        rhs -= cross / (t_eff - j)
    b = np.linalg.solve(h, rhs)
    return b / n


def debias_fe_analytic(sample: RegressionSample, trim: int = 4) -> CorrectionReport:
    """Analytically debiased FE: corrected = raw - estimated bias."""
    fit = fit_fe(sample)
    bias = nickell_bias(fit, trim)
    return CorrectionReport(
        method=f"analytic(M={trim})",
        coef_names=fit.coef_names,
        raw=fit.coef,
        corrected=fit.coef - bias,
        bias_estimate=bias,
        partition="none",
    )


def debias_fe_split(
    sample: RegressionSample,
    convention: str = "paper",
    full_fit: Optional[FEFit] = None,
) -> CorrectionReport:
    """Split-sample debiased FE along the time dimension.

    Fits the full sample and both halves (each half re-estimates its own unit
    and time dummies but keeps the full-sample lag values) and forms
    2 * full - average(halves). ``full_fit`` reuses an existing full-sample
    fit.
    """
    part = time_split(sample, convention=convention)
    full = fit_fe(sample) if full_fit is None else full_fit
    half_a, half_b = (fit_fe(h) for h in part.halves(sample))
    mean_halves = (half_a.coef + half_b.coef) / 2.0
    return CorrectionReport(
        method=f"split(time, {convention})",
        coef_names=full.coef_names,
        raw=full.coef,
        corrected=2.0 * full.coef - mean_halves,
        half_estimates=(half_a.coef, half_b.coef),
        partition=part.descriptor,
    )


def _fit_ab_whole(sample: RegressionSample, lag_cap) -> ABFit:
    instruments = build_instruments(sample, lag_cap=lag_cap)
    weight = one_step_weight(instruments)
    return fit_ab(sample, instruments, weight)


def debias_ab_split(
    sample: RegressionSample,
    n_splits: int = 1,
    seed: int = 0,
    lag_cap=None,
    convention: str = "paper",
    permutations: Optional[Sequence[Sequence[int]]] = None,
    full_fit: Optional[ABFit] = None,
) -> CorrectionReport:
    """Split-sample debiased AB along the cross-section.

    Each of ``n_splits`` random unit orderings (split r is seeded with
    ``seed + r``, so a 1-split run with seed ``seed + r`` reproduces split r
    exactly) is cut in half; both halves rebuild their own instruments and
    weights. The corrected estimate is the average over splits of
    2 * full - average(halves). ``permutations`` overrides the random
    orderings, e.g. to engineer deterministic splits; ``full_fit`` reuses an
    existing full-sample fit.
    """
    if n_splits < 1:
        raise TooFewUnits("n_splits must be at least 1")
    n_units = sample.n_units
    if n_units < 4:
        raise TooFewUnits(f"cross split needs at least 4 units, got {n_units}")

    full = _fit_ab_whole(sample, lag_cap) if full_fit is None else full_fit

    if permutations is None:
        sub_seeds = tuple(int(seed) + r for r in range(n_splits))
        perms = [
            np.random.default_rng(s).permutation(n_units) for s in sub_seeds
        ]
    else:
        if len(permutations) != n_splits:
            raise TooFewUnits("need one permutation per split")
        sub_seeds = None
        perms = [list(p) for p in permutations]

    corrections = []
    halves = []
    descriptors = []
    for perm in perms:
        part = cross_split(sample, perm, convention=convention)
        half_fits = []
        for half in part.halves(sample):
            try:
                half_fits.append(_fit_ab_whole(half, lag_cap))
            except OrderConditionFailed as err:
                raise HalfSampleOrderConditionFailed(str(err)) from err
        mean_halves = (half_fits[0].coef + half_fits[1].coef) / 2.0
        corrections.append(2.0 * full.coef - mean_halves)
        halves.append((half_fits[0].coef, half_fits[1].coef))
        descriptors.append(part.descriptor)

    corrected = np.mean(np.stack(corrections), axis=0)
    return CorrectionReport(
        method=f"split(cross-section, K={n_splits}, {convention})",
        coef_names=full.coef_names,
        raw=full.coef,
        corrected=corrected,
        half_estimates=tuple(h for pair in halves for h in pair),
        sub_seeds=sub_seeds,
        split_corrections=tuple(corrections),
        partition=" | ".join(descriptors),
    )
