"""Estimation-ready samples and the two split-sample partition schemes.

``build_design`` turns a balanced panel into a :class:`RegressionSample`: the
rows left after reserving the first L periods as initial conditions, with the
treatment block, the L lag-of-outcome columns and an implicit unit/time dummy
block. Data are stored as (N, T_eff, .) tensors in unit-major order so the
flat row view is simply a reshape.

``time_split`` and ``cross_split`` produce the two half-panel partitions used
by the debiasing routines. Index formulas follow the convention that, for a
length-T axis, part A covers positions 1..ceil(T/2) and part B covers
floor(T/2)..T (one-based). Both parts therefore overlap by one or two
positions; the alternative ``nonoverlap`` convention starts part B at
floor(T/2)+1 instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    InvalidPermutation,
    TooFewPeriods,
    TooFewPeriodsForSplit,
    TooFewUnits,
    UnknownVariable,
)
from .panel import BalancedPanel
from .util import frozen

SPLIT_CONVENTIONS = ("paper", "nonoverlap")


@dataclass(frozen=True)
class DummySpec:
    """Encoding of the unit/time indicator block.

    One dummy per unit, one per effective period with the first retained
    period dropped (the unit dummies absorb the intercept, so keeping all
    time dummies would be exactly collinear).
    """

    n_units: int
    periods: tuple

    @property
    def dropped_period(self) -> int:
        return self.periods[0]

    @property
    def n_columns(self) -> int:
        return self.n_units + len(self.periods) - 1


@dataclass(frozen=True)
class RegressionSample:
    """Estimation-ready rows for one outcome / treatment configuration.

    Attributes
    ----------
    y, treatments, lags
        (N, T_eff), (N, T_eff, d_alpha) and (N, T_eff, L) value tensors.
        Lag columns hold the actual lagged outcome values from the source
        panel, so sub-samples keep their original initial conditions.
    eff_positions
        Positions of the effective periods inside ``panel.periods``.
    """

    panel: BalancedPanel
    outcome: str
    treatment_names: tuple
    n_lags: int
    unit_ids: tuple
    eff_periods: tuple
    eff_positions: tuple
    y: np.ndarray
    treatments: np.ndarray
    lags: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", frozen(self.y))
        object.__setattr__(self, "treatments", frozen(self.treatments))
        object.__setattr__(self, "lags", frozen(self.lags))

    # -- dimension metadata --------------------------------------------------

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def n_eff_periods(self) -> int:
        return len(self.eff_periods)

    @property
    def n(self) -> int:
        return self.n_units * self.n_eff_periods

    @property
    def d_alpha(self) -> int:
        return len(self.treatment_names)

    @property
    def p(self) -> int:
        """Parameter count: alpha + beta + unit dummies + retained time dummies."""
        return self.d_alpha + self.n_lags + self.dummy_spec.n_columns

    @property
    def dummy_spec(self) -> DummySpec:
        return DummySpec(n_units=self.n_units, periods=self.eff_periods)

    @property
    def coef_names(self) -> tuple:
        return self.treatment_names + tuple(
            f"lag{j}" for j in range(1, self.n_lags + 1)
        )

    # -- flat row views -------------------------------------------------------

    @property
    def rows(self) -> list:
        """(unit index, effective period index) per flat row, unit-major."""
        t_eff = self.n_eff_periods
        return [(i, e) for i in range(self.n_units) for e in range(t_eff)]

    @property
    def outcome_vector(self) -> np.ndarray:
        return self.y.reshape(self.n)

    @property
    def treatment_cols(self) -> np.ndarray:
        return self.treatments.reshape(self.n, self.d_alpha)

    @property
    def predetermined_cols(self) -> np.ndarray:
        return self.lags.reshape(self.n, self.n_lags)

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_units), self.n_eff_periods)

    # -- sub-sampling ---------------------------------------------------------

    def subset_periods(self, start: int, stop: int) -> "RegressionSample":
        """Restrict to effective-period positions [start, stop) (0-based).

        Lag columns keep their full-panel values: the sub-sample reuses the
        original initial conditions rather than re-truncating.
        """
        sl = slice(start, stop)
        return RegressionSample(
            panel=self.panel,
            outcome=self.outcome,
            treatment_names=self.treatment_names,
            n_lags=self.n_lags,
            unit_ids=self.unit_ids,
            eff_periods=self.eff_periods[sl],
            eff_positions=self.eff_positions[sl],
            y=self.y[:, sl],
            treatments=self.treatments[:, sl],
            lags=self.lags[:, sl],
        )

    def subset_units(self, positions: Sequence[int]) -> "RegressionSample":
        """Restrict to the given unit positions (distinct), keeping labels."""
        idx = np.asarray(list(positions), dtype=int)
        if len(set(idx.tolist())) != len(idx):
            raise InvalidPermutation("unit positions must be distinct")
        return RegressionSample(
            panel=self.panel.subset_units(idx.tolist()),
            outcome=self.outcome,
            treatment_names=self.treatment_names,
            n_lags=self.n_lags,
            unit_ids=tuple(self.unit_ids[i] for i in idx),
            eff_periods=self.eff_periods,
            eff_positions=self.eff_positions,
            y=self.y[idx],
            treatments=self.treatments[idx],
            lags=self.lags[idx],
        )

    def resample_units(self, rng: np.random.Generator) -> "RegressionSample":
        """Draw N units with replacement; copies receive fresh identities.

        Rebuilds the design from the resampled panel so every derived column
        is consistent with the new unit set.
        """
        draws = rng.integers(0, self.n_units, size=self.n_units)
        labels = [f"bs{k:05d}_{self.panel.units[i]}" for k, i in enumerate(draws)]
        new_panel = self.panel.subset_units(draws.tolist(), labels=labels)
        return build_design(
            new_panel, self.outcome, self.treatment_names, self.n_lags
        )


def build_design(
    panel: BalancedPanel,
    outcome: str,
    treatments: Sequence[str],
    n_lags: int,
) -> RegressionSample:
    """Construct the estimation sample with ``n_lags`` outcome lags.

    The first ``n_lags`` periods become initial conditions; effective periods
    are positions n_lags..T-1, giving n = N * (T - n_lags) rows.
    """
    treatments = tuple(str(t) for t in treatments)
    if n_lags < 0:
        raise TooFewPeriods("n_lags must be non-negative")
    if panel.n_periods <= n_lags:
        raise TooFewPeriods(
            f"need more than {n_lags} periods, panel has {panel.n_periods}"
        )
    y_full = panel.values(outcome)
    for name in treatments:
        if name not in panel.series:
            raise UnknownVariable(f"no variable named {name!r}")

    t_all = panel.n_periods
    eff = slice(n_lags, t_all)
    eff_positions = tuple(range(n_lags, t_all))
    d_mats = (
        np.stack([panel.values(v)[:, eff] for v in treatments], axis=2)
        if treatments
        else np.empty((panel.n_units, t_all - n_lags, 0))
    )
    lag_mats = (
        np.stack(
            [y_full[:, n_lags - j : t_all - j] for j in range(1, n_lags + 1)],
            axis=2,
        )
        if n_lags
        else np.empty((panel.n_units, t_all - n_lags, 0))
    )
    return RegressionSample(
        panel=panel,
        outcome=str(outcome),
        treatment_names=treatments,
        n_lags=int(n_lags),
        unit_ids=panel.units,
        eff_periods=tuple(panel.periods[i] for i in eff_positions),
        eff_positions=eff_positions,
        y=y_full[:, eff],
        treatments=d_mats,
        lags=lag_mats,
    )


@dataclass(frozen=True)
class SplitPartition:
    """Two overlapping-or-not halves of a sample.

    ``part_a`` / ``part_b`` are flat row-index sets into the sample; the
    structured fields record how to materialise each half as a balanced
    sub-sample.
    """

    scheme: str
    part_a: frozenset
    part_b: frozenset
    descriptor: str
    period_range_a: Optional[tuple] = None
    period_range_b: Optional[tuple] = None
    unit_positions_a: Optional[tuple] = None
    unit_positions_b: Optional[tuple] = None

    def halves(self, sample: RegressionSample):
        """Materialise (half_a, half_b) as RegressionSamples."""
        if self.scheme == "time":
            return (
                sample.subset_periods(*self.period_range_a),
                sample.subset_periods(*self.period_range_b),
            )
        return (
            sample.subset_units(self.unit_positions_a),
            sample.subset_units(self.unit_positions_b),
        )


def _half_bounds(length: int, convention: str):
    """One-based half bounds -> 0-based [start, stop) ranges."""
    if convention not in SPLIT_CONVENTIONS:
        raise InvalidPermutation(f"unknown split convention {convention!r}")
    hi_a = -(-length // 2)          # ceil(length / 2)
    lo_b = length // 2              # floor(length / 2), one-based start
    if convention == "nonoverlap":
        lo_b += 1
    return (0, hi_a), (lo_b - 1, length)


def time_split(
    sample: RegressionSample, convention: str = "paper"
) -> SplitPartition:
    """Split along the time dimension over the effective periods.

    Part A holds effective periods 1..ceil(T/2), part B holds
    floor(T/2)..T (one-based); ``nonoverlap`` starts part B one later.
    Lag columns inside each half keep their full-sample values.
    """
    t_eff = sample.n_eff_periods
    if t_eff < 4:
        raise TooFewPeriodsForSplit(
            f"time split needs at least 4 effective periods, got {t_eff}"
        )
    (a0, a1), (b0, b1) = _half_bounds(t_eff, convention)
    t_len = t_eff
    n_units = sample.n_units
    rows_a = frozenset(
        i * t_len + e for i in range(n_units) for e in range(a0, a1)
    )
    rows_b = frozenset(
        i * t_len + e for i in range(n_units) for e in range(b0, b1)
    )
    return SplitPartition(
        scheme="time",
        part_a=rows_a,
        part_b=rows_b,
        descriptor=(
            f"time split ({convention}): periods "
            f"{sample.eff_periods[a0]}..{sample.eff_periods[a1 - 1]} | "
            f"{sample.eff_periods[b0]}..{sample.eff_periods[b1 - 1]}"
        ),
        period_range_a=(a0, a1),
        period_range_b=(b0, b1),
    )


def cross_split(
    sample: RegressionSample,
    permutation: Sequence[int],
    convention: str = "paper",
) -> SplitPartition:
    """Split along the cross-section after reordering units by ``permutation``.

    Part A holds permuted unit positions 1..ceil(N/2) and part B holds
    floor(N/2)..N (one-based); all periods are retained in both parts.
    """
    n_units = sample.n_units
    if n_units < 4:
        raise TooFewUnits(f"cross split needs at least 4 units, got {n_units}")
    perm = list(int(i) for i in permutation)
    if sorted(perm) != list(range(n_units)):
        raise InvalidPermutation(
            "permutation must reorder unit positions 0..N-1 exactly once each"
        )
    (a0, a1), (b0, b1) = _half_bounds(n_units, convention)
    units_a = tuple(perm[a0:a1])
    units_b = tuple(perm[b0:b1])
    t_len = sample.n_eff_periods
    rows_a = frozenset(i * t_len + e for i in units_a for e in range(t_len))
    rows_b = frozenset(i * t_len + e for i in units_b for e in range(t_len))
    return SplitPartition(
        scheme="cross-section",
        part_a=rows_a,
        part_b=rows_b,
        descriptor=(
            f"cross-section split ({convention}): {len(units_a)} units | "
            f"{len(units_b)} units of {n_units}"
        ),
        unit_positions_a=units_a,
        unit_positions_b=units_b,
    )
