"""Fixed-effects (dummy-variable) OLS with cluster-robust covariance.

The unit/time dummy block is partialled out by the two-way within
transformation, which on a balanced rectangle is the exact orthogonal
projection onto the dummy span. The slope estimates therefore coincide with
full dummy-variable OLS (Frisch-Waugh), while the numerical problem shrinks
to d_alpha + L columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import RegressionSample
from .exceptions import RankDeficientDesign, SingleCluster, SingularBread
from .inference import CovarianceEstimate
from .util import frozen

RANK_RTOL = 1e-10


def _two_way_demean(tensor: np.ndarray) -> np.ndarray:
    """Residual of the projection onto unit+time dummies (balanced panel)."""
    unit_mean = tensor.mean(axis=1, keepdims=True)
    time_mean = tensor.mean(axis=0, keepdims=True)
    grand = tensor.mean(axis=(0, 1), keepdims=True)
    return tensor - unit_mean - time_mean + grand


@dataclass(frozen=True)
class FEFit:
    """Fitted fixed-effects regression.

    ``dtilde`` holds the partialled-out predetermined block: the residuals of
    projecting the stacked (treatments, outcome lags) columns on the dummy
    block, flattened to (n, d_alpha + L).
    """

    sample: RegressionSample
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    residuals: np.ndarray
    dtilde: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "residuals", "dtilde"):
            object.__setattr__(self, name, frozen(getattr(self, name)))

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    @property
    def coef_names(self) -> tuple:
        return self.sample.coef_names


def fit_fe(sample: RegressionSample) -> FEFit:
    """Within/dummy-variable OLS of the sample.

    Raises
    ------
    RankDeficientDesign
        If the partialled-out design loses full column rank; the offending
        columns are named on the exception.
    """
    n_units, t_eff = sample.n_units, sample.n_eff_periods
    k = sample.d_alpha + sample.n_lags
    if k == 0:
        raise RankDeficientDesign("no treatment or lag columns to estimate", [])

    pred = np.concatenate([sample.treatments, sample.lags], axis=2)
    dtilde = _two_way_demean(pred)
    ytilde = _two_way_demean(sample.y)

    x = dtilde.reshape(-1, k)
    yv = ytilde.reshape(-1)

    coef, _, rank, svals = np.linalg.lstsq(x, yv, rcond=None)
    if rank < k or (svals.size and svals[-1] < RANK_RTOL * svals[0]):
        # name the offenders via pivoted QR on the demeaned block
        _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        tol = RANK_RTOL * (diag[0] if diag.size else 1.0)
        names = sample.coef_names
        bad = [names[piv[j]] for j in range(k) if j >= diag.size or diag[j] <= tol]
        raise RankDeficientDesign(
            f"design is rank deficient after partialling out dummies: {bad}",
            columns=bad,
        )

    residuals = yv - x @ coef

    # dummy coefficients from the residualised outcome; first retained time
    # dummy dropped, unit dummies absorb the intercept
    r = (sample.y - np.tensordot(pred, coef, axes=([2], [0]))).reshape(
        n_units, t_eff
    )
    row_mean = r.mean(axis=1)
    col_mean = r.mean(axis=0)
    grand = r.mean()
    time_eff = col_mean[1:] - col_mean[0]
    unit_eff = row_mean - (grand - col_mean[0])
    gamma = np.concatenate([unit_eff, time_eff])

    d_alpha = sample.d_alpha
    return FEFit(
        sample=sample,
        alpha=coef[:d_alpha],
        beta=coef[d_alpha:],
        gamma=gamma,
        residuals=residuals,
        dtilde=x,
    )


def fe_cluster_cov(fit: FEFit, small_sample: bool = False) -> CovarianceEstimate:
    """Sandwich covariance of (alpha, beta), clustered by unit.

    Bread is the inverse Gram of the partialled-out regressors; the meat sums
    outer products of within-cluster score sums. ``small_sample`` applies the
    G/(G-1) * (n-1)/(n-p) factor (off by default).
    """
    sample = fit.sample
    n_units = sample.n_units
    if n_units < 2:
        raise SingleCluster("cluster-robust covariance needs >= 2 clusters")
    k = fit.dtilde.shape[1]
    gram = fit.dtilde.T @ fit.dtilde
    try:
        bread = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise SingularBread("Gram matrix of partialled-out regressors is singular")
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1 / RANK_RTOL:
        raise SingularBread(
            f"Gram matrix numerically singular (cond={cond:.3e})"
        )

    scores = np.einsum(
        "itk,it->ik",
        fit.dtilde.reshape(n_units, sample.n_eff_periods, k),
        fit.residuals.reshape(n_units, sample.n_eff_periods),
    )
    meat = scores.T @ scores
    cov = bread @ meat @ bread
    if small_sample:
        g, n, p = n_units, sample.n, sample.p
        cov = cov * (g / (g - 1)) * ((n - 1) / (n - p))
    cov = (cov + cov.T) / 2.0
    return CovarianceEstimate(
        matrix=cov,
        names=fit.coef_names,
        provenance="analytic",
        n_clusters=n_units,
    )
