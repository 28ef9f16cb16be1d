"""Balanced-panel container, ingestion and the lag/difference operators.

A :class:`BalancedPanel` is a strictly rectangular N x T collection of
real-valued series keyed by unit and period. Missing cells are rejected at
construction: every downstream routine (within transformation, differencing,
instrument construction) relies on the rectangle being complete.

Periods are stored as integer labels (e.g. years). All internal indexing is
positional: ``lag`` and ``difference`` step through adjacent positions in the
period grid, never through label arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .exceptions import (
    DuplicateCell,
    LagTooLarge,
    NonNumericValue,
    SingletonTimeSeries,
    UnbalancedPanel,
    UnknownVariable,
)
from .util import frozen


@dataclass(frozen=True)
class BalancedPanel:
    """Rectangular panel of one or more series.

    Parameters
    ----------
    units : tuple of str
        Unit identifiers, unique, in a fixed order.
    periods : tuple of int
        Period labels, strictly increasing. Gaps are allowed; indexing is
        positional.
    series : dict of str -> ndarray
        One (N, T) float matrix per variable. No NaN / inf cells.
    """

    units: tuple
    periods: tuple
    series: dict

    def __post_init__(self):
        units = tuple(str(u) for u in self.units)
        periods = tuple(int(p) for p in self.periods)
        if len(set(units)) != len(units):
            raise DuplicateCell("unit identifiers must be unique")
        if any(b <= a for a, b in zip(periods, periods[1:])):
            raise UnbalancedPanel("periods must be strictly increasing")
        if not self.series:
            raise UnbalancedPanel("panel needs at least one variable")
        n, t = len(units), len(periods)
        clean = {}
        for name, mat in self.series.items():
            arr = np.asarray(mat, dtype=float)
            if arr.shape != (n, t):
                raise UnbalancedPanel(
                    f"variable {name!r} has shape {arr.shape}, expected {(n, t)}"
                )
            if not np.all(np.isfinite(arr)):
                i, j = np.argwhere(~np.isfinite(arr))[0]
                raise UnbalancedPanel(
                    f"variable {name!r} missing or non-finite at "
                    f"unit {units[i]!r}, period {periods[j]}"
                )
            clean[str(name)] = frozen(arr)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "series", clean)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    @property
    def variables(self) -> tuple:
        return tuple(self.series)

    def values(self, variable: str) -> np.ndarray:
        """(N, T) value matrix for one variable."""
        try:
            return self.series[variable]
        except KeyError:
            raise UnknownVariable(f"no variable named {variable!r}") from None

    def describe(self) -> pd.DataFrame:
        """Per-variable mean, standard deviation and cell count."""
        rows = {}
        for name, mat in self.series.items():
            rows[name] = {
                "mean": float(mat.mean()),
                "sd": float(mat.std(ddof=1)) if mat.size > 1 else 0.0,
                "count": int(mat.size),
            }
        return pd.DataFrame(rows).T[["mean", "sd", "count"]]

    def subset_units(self, positions: Sequence[int], labels=None) -> "BalancedPanel":
        """New panel holding the given unit positions (repeats allowed).

        ``labels`` supplies fresh identifiers; required when positions repeat,
        e.g. for bootstrap resamples where each copy must act as its own unit.
        """
        positions = list(positions)
        if labels is None:
            labels = [self.units[i] for i in positions]
            if len(set(labels)) != len(labels):
                raise DuplicateCell(
                    "repeated unit positions need fresh labels"
                )
        idx = np.asarray(positions, dtype=int)
        return BalancedPanel(
            units=tuple(labels),
            periods=self.periods,
            series={k: v[idx] for k, v in self.series.items()},
        )


def _coerce_value(value, unit, period, variable) -> float:
    if isinstance(value, bool):
        return float(value)
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise NonNumericValue(
            f"value {value!r} for ({unit!r}, {period}, {variable!r}) is not numeric"
        ) from None
    if not math.isfinite(v):
        raise NonNumericValue(
            f"value {value!r} for ({unit!r}, {period}, {variable!r}) is not finite"
        )
    return v


def load_panel(records: Iterable[tuple]) -> BalancedPanel:
    """Assemble a balanced panel from (unit, period, {variable: value}) records.

    Records may arrive in any order; units are sorted lexicographically and
    periods ascending, so ingestion order never affects any downstream result.

    Raises
    ------
    DuplicateCell
        If a (unit, period, variable) cell appears more than once.
    UnbalancedPanel
        If any unit is missing any (period, variable) cell.
    NonNumericValue
        If a value is not a finite real number.
    """
    cells: dict = {}
    variables: list = []
    for unit, period, mapping in records:
        unit = str(unit)
        try:
            period = int(period)
        except (TypeError, ValueError):
            raise NonNumericValue(f"period {period!r} is not an integer") from None
        for variable, value in dict(mapping).items():
            key = (unit, period, str(variable))
            if key in cells:
                raise DuplicateCell(f"duplicate cell {key}")
            cells[key] = _coerce_value(value, unit, period, variable)
            if str(variable) not in variables:
                variables.append(str(variable))
    if not cells:
        raise UnbalancedPanel("no records supplied")

    units = sorted({u for u, _, _ in cells})
    periods = sorted({p for _, p, _ in cells})
    series = {}
    for variable in variables:
        mat = np.empty((len(units), len(periods)))
        for i, u in enumerate(units):
            for j, p in enumerate(periods):
                try:
                    mat[i, j] = cells[(u, p, variable)]
                except KeyError:
                    raise UnbalancedPanel(
                        f"unit {u!r} is missing {variable!r} at period {p}"
                    ) from None
        series[variable] = mat
    return BalancedPanel(units=tuple(units), periods=tuple(periods), series=series)


def read_panel_csv(path) -> BalancedPanel:
    """Read a long-format CSV with header ``unit,period,<var1>,<var2>,...``.

    UTF-8, decimal point ``.``, periods parsed as integers. Row order in the
    file does not affect the resulting panel.
    """
    df = pd.read_csv(path, encoding="utf-8")
    cols = list(df.columns)
    if len(cols) < 3 or cols[0] != "unit" or cols[1] != "period":
        raise UnbalancedPanel(
            "CSV header must be 'unit,period,<var1>,...'; got " + ",".join(cols)
        )
    variables = cols[2:]
    records = []
    for row in df.itertuples(index=False):
        unit, period = row[0], row[1]
        records.append((unit, period, dict(zip(variables, row[2:]))))
    return load_panel(records)


def lag(panel: BalancedPanel, variable: str, k: int) -> np.ndarray:
    """k-period positional lag of one variable, per unit.

    Returns an (N, T) matrix whose first ``k`` columns are NaN (undefined);
    column ``t`` holds the value at position ``t - k`` of the same unit. Lags
    never cross unit boundaries.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise LagTooLarge(f"lag order must be a positive integer, got {k!r}")
    values = panel.values(variable)
    if k >= panel.n_periods:
        raise LagTooLarge(
            f"lag {k} needs more than {panel.n_periods} periods"
        )
    out = np.full_like(values, np.nan)
    out[:, k:] = values[:, :-k]
    return out


def difference(panel: BalancedPanel, variable: str) -> np.ndarray:
    """First difference per unit; NaN at the first period."""
    values = panel.values(variable)
    if panel.n_periods < 2:
        raise SingletonTimeSeries("differencing needs at least two periods")
    out = np.full_like(values, np.nan)
    out[:, 1:] = values[:, 1:] - values[:, :-1]
    return out
