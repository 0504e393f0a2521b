"""Trajectory classification: peaks, gaps, qualitative regimes, parameter
sweeps, and a divergence-rate (Lyapunov) estimator.

Classification precedence: overflow termination, or a horizon-reached run
ending above 5x initial capital and still rising over its last tenth, is
UnboundedGrowth; two or more prominent peaks make MultiBubble; any gap makes
GapBubble; one prominent peak makes SmoothBubble; a run that never leaves a
1% band around the initial capital is Flat; anything else is MonotoneDecline.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .dynamics import (
    DegenerateDenominatorError,
    FundState,
    MaturityCollapseError,
    RangeError,
    RealizedPath,
    Scenario,
    Termination,
    Trajectory,
    simulate,
    step,
)

__all__ = [
    "PeakEvent",
    "GapEvent",
    "Regime",
    "RegimeReport",
    "ParameterAxis",
    "CellSummary",
    "RegimeMap",
    "LyapunovEstimate",
    "InvalidAxisError",
    "find_peaks",
    "detect_gaps",
    "classify",
    "sweep",
    "lyapunov_estimate",
    "report_to_dict",
]

FLAT_BAND = 0.01
GROWTH_FACTOR = 5.0
TAIL_FRACTION = 0.10

SWEEP_AXES = ("c0", "kappa", "lambda", "sigma0", "r_const", "dt")


class InvalidAxisError(ValueError):
    """Sweep axis names a parameter that cannot be swept."""


class Regime(enum.Enum):
    FLAT = "Flat"
    SMOOTH_BUBBLE = "SmoothBubble"
    GAP_BUBBLE = "GapBubble"
    MULTI_BUBBLE = "MultiBubble"
    UNBOUNDED_GROWTH = "UnboundedGrowth"
    MONOTONE_DECLINE = "MonotoneDecline"


@dataclass(frozen=True)
class PeakEvent:
    """A strict local maximum of the capital series.

    prominence is the drop from the peak to the higher of the two valleys
    separating it from taller neighbours (or the series ends).
    """

    step: int
    value: float
    prominence: float


@dataclass(frozen=True)
class GapEvent:
    """A discontinuous step: |C_{t+dt} - C_t| / C_t at or above threshold."""

    step: int
    rel_change: float


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    peaks: Tuple[PeakEvent, ...]
    gaps: Tuple[GapEvent, ...]
    bankruptcy_step: Optional[int]
    final_capital: float


@dataclass(frozen=True)
class ParameterAxis:
    """One swept parameter: a name from SWEEP_AXES plus explicit grid values."""

    name: str
    values: Tuple[float, ...]

    def __post_init__(self):
        name = self.name.lower()
        if name not in SWEEP_AXES:
            raise InvalidAxisError(f"unknown sweep axis {self.name!r}; expected one of {SWEEP_AXES}")
        object.__setattr__(self, "name", name)
        if len(self.values) < 1:
            raise InvalidAxisError(f"axis {name!r} has no values")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def linspace(cls, name: str, lo: float, hi: float, count: int) -> "ParameterAxis":
        if count < 2:
            raise InvalidAxisError(f"axis {name!r}: count must be >= 2")
        stepw = (hi - lo) / (count - 1)
        return cls(name, tuple(lo + i * stepw for i in range(count)))


@dataclass(frozen=True)
class CellSummary:
    """Classification summary of one sweep grid point."""

    values: Tuple[float, ...]
    regime: Regime
    termination: Termination
    final_capital: float
    peak_value: Optional[float]
    gap_count: int
    bankruptcy_step: Optional[int]


@dataclass(frozen=True)
class RegimeMap:
    axes: Tuple[ParameterAxis, ...]
    cells: Tuple[CellSummary, ...]


@dataclass(frozen=True)
class LyapunovEstimate:
    exponent: float
    steps: int


def find_peaks(traj: Trajectory, min_prominence: float = 0.10) -> list[PeakEvent]:
    """Strict local maxima of the capital series with prominence at least
    min_prominence times the series maximum, in step order."""
    caps = np.asarray(traj.capital_series(), dtype=float)
    if caps.size < 3:
        return []
    threshold = min_prominence * float(caps.max())
    idx, props = _scipy_find_peaks(caps, prominence=threshold)
    return [
        PeakEvent(step=int(i), value=float(caps[i]), prominence=float(p))
        for i, p in zip(idx, props["prominences"])
    ]


def detect_gaps(traj: Trajectory, threshold: Optional[float] = None) -> list[GapEvent]:
    """Steps whose relative capital change reaches the threshold, in order.

    The default threshold comes from the trajectory's own guards
    (gap_threshold, 0.10 unless overridden in the scenario).
    """
    if threshold is None:
        threshold = traj.scenario.guards.gap_threshold
    caps = traj.capital_series()
    out = []
    for i in range(len(caps) - 1):
        rel = (caps[i + 1] - caps[i]) / caps[i]
        if abs(rel) >= threshold:
            out.append(GapEvent(step=i, rel_change=rel))
    return out


def classify(
    traj: Trajectory,
    gap_threshold: Optional[float] = None,
    peak_prominence: Optional[float] = None,
) -> RegimeReport:
    """Classify a completed trajectory; thresholds default to the scenario's
    guards. Pure: the same trajectory always yields the same report."""
    guards = traj.scenario.guards
    if gap_threshold is None:
        gap_threshold = guards.gap_threshold
    if peak_prominence is None:
        peak_prominence = guards.peak_prominence
    peaks = tuple(find_peaks(traj, peak_prominence))
    gaps = tuple(detect_gaps(traj, gap_threshold))
    caps = traj.capital_series()
    c0 = caps[0]
    bankruptcy_step = len(caps) - 1 if traj.termination is Termination.BANKRUPT else None

    regime = Regime.MONOTONE_DECLINE
    if traj.termination is Termination.NUMERICAL_OVERFLOW or (
        traj.termination is Termination.HORIZON_REACHED
        and caps[-1] > GROWTH_FACTOR * c0
        and _non_decreasing_tail(caps)
    ):
        regime = Regime.UNBOUNDED_GROWTH
    elif len(peaks) >= 2:
        regime = Regime.MULTI_BUBBLE
    elif gaps:
        regime = Regime.GAP_BUBBLE
    elif len(peaks) == 1:
        regime = Regime.SMOOTH_BUBBLE
    elif max(abs(c - c0) for c in caps) < FLAT_BAND * c0:
        regime = Regime.FLAT
    return RegimeReport(
        regime=regime,
        peaks=peaks,
        gaps=gaps,
        bankruptcy_step=bankruptcy_step,
        final_capital=caps[-1],
    )


def report_to_dict(report: RegimeReport) -> dict:
    """JSON-ready mapping of a regime report."""
    return {
        "regime": report.regime.value,
        "peaks": [
            {"step": p.step, "value": p.value, "prominence": p.prominence} for p in report.peaks
        ],
        "gaps": [{"step": g.step, "rel_change": g.rel_change} for g in report.gaps],
        "bankruptcy_step": report.bankruptcy_step,
        "final_capital": report.final_capital,
    }


def _non_decreasing_tail(caps: Sequence[float]) -> bool:
    n = len(caps) - 1
    tail = max(1, n // int(1 / TAIL_FRACTION))
    return all(caps[i + 1] >= caps[i] for i in range(n - tail, n))


def _apply_axis(scenario: Scenario, name: str, value: float) -> Scenario:
    params = scenario.params
    if name == "c0":
        return replace(scenario, c0=value)
    if name == "sigma0":
        return replace(scenario, sigma0=value)
    if name == "r_const":
        return replace(scenario, realized=RealizedPath.constant(value))
    if name == "kappa":
        return replace(scenario, params=replace(params, kappa=value))
    if name == "lambda":
        return replace(scenario, params=replace(params, lam=value))
    if name == "dt":
        return replace(scenario, params=replace(params, dt=value))
    raise InvalidAxisError(f"unknown sweep axis {name!r}")


def _sweep_workers() -> int:
    raw = os.environ.get("PROPSIM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, min(n, 32))


def _evaluate_cell(scenario: Scenario, axes: Sequence[ParameterAxis], values: Tuple[float, ...]) -> CellSummary:
    cell_scenario = scenario
    for axis, value in zip(axes, values):
        cell_scenario = _apply_axis(cell_scenario, axis.name, value)
    traj = simulate(cell_scenario)
    report = classify(traj)
    return CellSummary(
        values=values,
        regime=report.regime,
        termination=traj.termination,
        final_capital=report.final_capital,
        peak_value=max((p.value for p in report.peaks), default=None),
        gap_count=len(report.gaps),
        bankruptcy_step=report.bankruptcy_step,
    )


def sweep(base: Scenario, axes: Sequence[ParameterAxis]) -> RegimeMap:
    """Simulate and classify the base scenario over a 1- or 2-axis grid.

    Cells are evaluated independently (in parallel up to PROPSIM_THREADS
    workers; 0 or unset means auto) and assembled in row-major grid order, so
    the result is identical however they are scheduled.
    """
    axes = tuple(axes)
    if not 1 <= len(axes) <= 2:
        raise InvalidAxisError(f"expected 1 or 2 axes, got {len(axes)}")
    if len(axes) == 2:
        grid = [(a, b) for a in axes[0].values for b in axes[1].values]
    else:
        grid = [(a,) for a in axes[0].values]
    workers = _sweep_workers()
    if workers == 1 or len(grid) == 1:
        cells = [_evaluate_cell(base, axes, values) for values in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(lambda v: _evaluate_cell(base, axes, v), grid))
    return RegimeMap(axes=axes, cells=tuple(cells))


def lyapunov_estimate(scenario: Scenario, epsilon: float = 1e-8) -> LyapunovEstimate:
    """Divergence rate per year of nearby trajectories.

    The reference state and a companion with capital offset by a relative
    epsilon evolve in lock-step. Each step the separation d is measured as
    the Euclidean norm of the relative differences of capital, maturity, and
    mark; the step's log growth of the separation accumulates and the
    companion is pulled back to separation epsilon along the current
    difference direction. Growth is measured against the separation actually
    achieved by the previous renormalization (within float rounding of
    epsilon): reconstructing the companion rounds at the reference's ulp, and
    pretending the baseline is exactly epsilon would drown fixed-point
    scenarios in noise around 1e-8 per step. The estimate is the accumulated
    log growth over the elapsed time; accumulation stops when the reference
    run terminates.
    """
    if scenario.horizon < 100:
        raise RangeError("horizon", "lyapunov estimate needs >= 100 steps")
    if not (0 < epsilon < 1):
        raise RangeError("epsilon", "must be in (0, 1)")
    params = scenario.params
    guards = scenario.guards

    def seed(base: FundState) -> FundState:
        return replace(
            base,
            capital=base.capital * (1 + epsilon),
            vega=params.kappa * base.capital * (1 + epsilon),
        )

    ref = scenario.initial_state()
    pert = seed(ref)
    baseline, _ = _separation(ref, pert)
    acc = 0.0
    used = 0
    for i in range(scenario.horizon):
        r = scenario.realized.at(i)
        try:
            ref, _ = step(ref, params, r, guards.eps_deg)
        except MaturityCollapseError as exc:
            ref = exc.state
        try:
            pert, _ = step(pert, params, r, guards.eps_deg)
        except MaturityCollapseError as exc:
            pert = exc.state
        d, direction = _separation(ref, pert)
        used += 1
        if d == 0.0 or baseline == 0.0:
            # Identical floats: re-seed the offset instead of taking log(0).
            pert = seed(ref)
            baseline, _ = _separation(ref, pert)
            continue
        acc += math.log(d / baseline)
        scale = epsilon / d
        cap_p = ref.capital + abs(ref.capital) * direction[0] * scale
        pert = FundState(
            t=ref.t,
            capital=cap_p,
            avg_maturity=ref.avg_maturity + abs(ref.avg_maturity) * direction[1] * scale,
            implied=ref.implied + abs(ref.implied) * direction[2] * scale,
            vega=params.kappa * cap_p,
        )
        baseline, _ = _separation(ref, pert)
        if (
            not ref.is_finite()
            or abs(ref.capital) >= guards.overflow_cap
            or ref.capital <= guards.bankruptcy_floor
            or ref.avg_maturity <= params.dt
        ):
            break
    return LyapunovEstimate(exponent=acc / (used * params.dt), steps=used)


def _separation(ref: FundState, pert: FundState) -> Tuple[float, Tuple[float, float, float]]:
    def rel(a: float, b: float) -> float:
        denom = abs(b)
        return (a - b) / denom if denom > 0 else (a - b)

    u = (
        rel(pert.capital, ref.capital),
        rel(pert.avg_maturity, ref.avg_maturity),
        rel(pert.implied, ref.implied),
    )
    return math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]), u
