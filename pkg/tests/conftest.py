import numpy as np
import pytest

from paneldebias.panel import BalancedPanel
from paneldebias.design import build_design


def random_panel(rng, n_units, n_periods, variables=("y", "d"), dynamics=None):
    """Small random panel for oracle comparisons.

    With ``dynamics=(alpha, rho)`` the outcome follows a one-lag dynamic
    process with unit and time effects; otherwise all series are iid noise.
    """
    series = {}
    if dynamics is None:
        for v in variables:
            series[v] = rng.normal(size=(n_units, n_periods))
    else:
        alpha, rho = dynamics
        a = rng.normal(size=n_units)
        b = rng.normal(scale=0.5, size=n_periods)
        d = (rng.uniform(size=(n_units, n_periods)) < 0.5).astype(float)
        y = np.empty((n_units, n_periods))
        y[:, 0] = a + b[0] + alpha * d[:, 0] + rng.normal(size=n_units)
        for t in range(1, n_periods):
            y[:, t] = (
                a
                + b[t]
                + alpha * d[:, t]
                + rho * y[:, t - 1]
                + rng.normal(size=n_units)
            )
        series = {"y": y, "d": d}
    return BalancedPanel(
        units=tuple(f"u{i}" for i in range(n_units)),
        periods=tuple(range(1, n_periods + 1)),
        series=series,
    )


def random_sample(rng, n_units=5, n_periods=6, n_lags=1, d_alpha=1):
    panel = random_panel(rng, n_units, n_periods, dynamics=(0.5, 0.4))
    if d_alpha == 0:
        return build_design(panel, "y", (), n_lags)
    if d_alpha > 1:
        extra = {f"d{j}": rng.normal(size=(n_units, n_periods)) for j in range(2, d_alpha + 1)}
        series = dict(panel.series)
        series.update(extra)
        panel = BalancedPanel(units=panel.units, periods=panel.periods, series=series)
        return build_design(panel, "y", ("d",) + tuple(sorted(extra)), n_lags)
    return build_design(panel, "y", ("d",), n_lags)


def dense_dummy_ols(sample):
    """Brute-force dummy-variable OLS oracle.

    Builds the full design with explicit unit dummies and time dummies (first
    retained period dropped) and solves it densely. Independent of the within
    solver.
    """
    n_units, t_eff = sample.n_units, sample.n_eff_periods
    n = sample.n
    blocks = [sample.treatment_cols, sample.predetermined_cols]
    unit_d = np.zeros((n, n_units))
    time_d = np.zeros((n, t_eff - 1))
    for row, (i, e) in enumerate(sample.rows):
        unit_d[row, i] = 1.0
        if e > 0:
            time_d[row, e - 1] = 1.0
    x = np.hstack(blocks + [unit_d, time_d])
    coef, *_ = np.linalg.lstsq(x, sample.outcome_vector, rcond=None)
    k = sample.d_alpha + sample.n_lags
    resid = sample.outcome_vector - x @ coef
    return coef[:k], resid


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
