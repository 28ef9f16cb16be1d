"""Estimator classes with a scikit-learn style fit/get_params surface.

Every estimator is configured through ``__init__`` keyword parameters,
fitted with ``fit(sample)`` where ``sample`` is a
:class:`~paneldebias.design.RegressionSample`, and exposes the same fitted
attributes:

``alpha_``, ``beta_``, ``coef_``, ``coef_names_``
    Treatment and outcome-lag coefficients (corrected where applicable).
``cov_``, ``se_``
    Clustered covariance of (alpha, beta). For debiased estimators this is
    the covariance of the uncorrected estimator, which remains valid.
``long_run_``, ``long_run_se_``
    Long-run effect per treatment and its delta-method SE.
``n_``, ``p_``, ``m_``, ``diagnostic_``
    Dimension metadata and the small-bias-condition verdict.

Because the classes are plain ``BaseEstimator`` subclasses they compose with
``sklearn.base.clone``; the bootstrap and the Monte Carlo study rely on that
to rerun entire pipelines on resampled data.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import ab as _ab
from . import debias as _debias
from . import fe as _fe
from .design import RegressionSample
from .inference import (
    CovarianceEstimate,
    LongRunEffect,
    delta_method_lr,
    long_run_effect,
    long_run_gradient,
    small_bias_diagnostic,
)


def _check_sample(sample):
    if not isinstance(sample, RegressionSample):
        raise TypeError(
            f"fit expects a RegressionSample, got {type(sample).__name__}"
        )
    return sample


class PanelEstimator(BaseEstimator):
    """Shared post-fit bookkeeping: long-run effects and dimensions."""

    def _finalise(self, sample, coef, cov: CovarianceEstimate, m: int, p: int,
                  n=None):
        d_alpha = sample.d_alpha
        self.sample_ = sample
        self.coef_ = coef
        self.coef_names_ = sample.coef_names
        self.alpha_ = coef[:d_alpha]
        self.beta_ = coef[d_alpha:]
        self.cov_ = cov
        self.se_ = cov.se
        self.n_ = sample.n if n is None else int(n)
        self.p_ = p
        self.m_ = m
        self.diagnostic_ = small_bias_diagnostic(self.n_, p, m)

        lr = np.empty(d_alpha)
        lr_se = np.empty(d_alpha)
        details = []
        k = d_alpha + sample.n_lags
        for j in range(d_alpha):
            lr[j] = long_run_effect(self.alpha_[j], self.beta_)
            idx = np.r_[j, d_alpha:k]
            sub = CovarianceEstimate(
                matrix=cov.matrix[np.ix_(idx, idx)],
                names=(cov.names[j],) + tuple(cov.names[d_alpha:]),
                provenance=cov.provenance,
                n_clusters=cov.n_clusters,
            )
            lr_se[j] = delta_method_lr(self.alpha_[j], self.beta_, sub)
            details.append(
                LongRunEffect(
                    value=float(lr[j]),
                    gradient=long_run_gradient(self.alpha_[j], self.beta_),
                    se_analytic=float(lr_se[j]),
                )
            )
        self.long_run_ = lr
        self.long_run_se_ = lr_se
        self.long_run_info_ = tuple(details)
        return self


class FixedEffects(PanelEstimator):
    """Within/dummy-variable OLS with unit-clustered covariance."""

    def __init__(self, small_sample: bool = False):
        self.small_sample = small_sample

    def fit(self, sample, y=None):
        sample = _check_sample(sample)
        fit = _fe.fit_fe(sample)
        cov = _fe.fe_cluster_cov(fit, small_sample=self.small_sample)
        self.fit_ = fit
        self.report_ = None
        return self._finalise(sample, fit.coef, cov, m=0, p=sample.p)


class AnalyticDebiasedFE(PanelEstimator):
    """FE minus the plug-in estimate of its first-order bias (trimming M)."""

    def __init__(self, trim: int = 4, small_sample: bool = False):
        self.trim = trim
        self.small_sample = small_sample

    def fit(self, sample, y=None):
        sample = _check_sample(sample)
        fit = _fe.fit_fe(sample)
        cov = _fe.fe_cluster_cov(fit, small_sample=self.small_sample)
        bias = _debias.nickell_bias(fit, self.trim)
        self.fit_ = fit
        self.report_ = _debias.CorrectionReport(
            method=f"analytic(M={self.trim})",
            coef_names=fit.coef_names,
            raw=fit.coef,
            corrected=fit.coef - bias,
            bias_estimate=bias,
            partition="none",
        )
        return self._finalise(sample, self.report_.corrected, cov, m=0, p=sample.p)


class SplitDebiasedFE(PanelEstimator):
    """FE debiased by the half-panel correction along the time dimension."""

    def __init__(self, convention: str = "paper", small_sample: bool = False):
        self.convention = convention
        self.small_sample = small_sample

    def fit(self, sample, y=None):
        sample = _check_sample(sample)
        fit = _fe.fit_fe(sample)
        cov = _fe.fe_cluster_cov(fit, small_sample=self.small_sample)
        self.fit_ = fit
        self.report_ = _debias.debias_fe_split(
            sample, convention=self.convention, full_fit=fit
        )
        return self._finalise(sample, self.report_.corrected, cov, m=0, p=sample.p)


class ArellanoBond(PanelEstimator):
    """One-step difference GMM with unit-clustered covariance."""

    def __init__(self, lag_cap: Optional[int] = None):
        self.lag_cap = lag_cap

    def fit(self, sample, y=None):
        sample = _check_sample(sample)
        instruments = _ab.build_instruments(sample, lag_cap=self.lag_cap)
        weight = _ab.one_step_weight(instruments)
        fit = _ab.fit_ab(sample, instruments, weight)
        cov = _ab.ab_cluster_cov(fit, instruments, weight)
        self.fit_ = fit
        self.instruments_ = instruments
        self.weight_ = weight
        self.report_ = None
        return self._finalise(sample, fit.coef, cov, m=fit.m, p=fit.p, n=fit.n)


class SplitDebiasedAB(PanelEstimator):
    """AB debiased by averaging cross-section split corrections.

    ``n_splits`` random unit orderings are drawn from ``seed`` (split r uses
    seed + r); the K-split estimate is the average of the per-split
    corrections 2 * full - mean(halves).
    """

    def __init__(
        self,
        n_splits: int = 1,
        seed: int = 0,
        lag_cap: Optional[int] = None,
        convention: str = "paper",
    ):
        self.n_splits = n_splits
        self.seed = seed
        self.lag_cap = lag_cap
        self.convention = convention

    def fit(self, sample, y=None):
        sample = _check_sample(sample)
        instruments = _ab.build_instruments(sample, lag_cap=self.lag_cap)
        weight = _ab.one_step_weight(instruments)
        fit = _ab.fit_ab(sample, instruments, weight)
        cov = _ab.ab_cluster_cov(fit, instruments, weight)
        self.fit_ = fit
        self.report_ = _debias.debias_ab_split(
            sample,
            n_splits=self.n_splits,
            seed=self.seed,
            lag_cap=self.lag_cap,
            convention=self.convention,
            full_fit=fit,
        )
        return self._finalise(
            sample, self.report_.corrected, cov, m=fit.m, p=fit.p, n=fit.n
        )


ESTIMATOR_REGISTRY = {
    "fe": FixedEffects,
    "dfe-a": AnalyticDebiasedFE,
    "dfe-ss": SplitDebiasedFE,
    "ab": ArellanoBond,
    "dab-ss": SplitDebiasedAB,
}


def make_estimator(name: str, **options):
    """Instantiate a registered estimator, ignoring irrelevant options."""
    try:
        cls = ESTIMATOR_REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown estimator {name!r}; choose from {sorted(ESTIMATOR_REGISTRY)}"
        ) from None
    accepted = cls().get_params()
    kwargs = {k: v for k, v in options.items() if k in accepted}
    return cls(**kwargs)


def is_fitted(estimator) -> bool:
    try:
        check_is_fitted(estimator)
        return True
    except Exception:
        return False
