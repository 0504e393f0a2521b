"""Core state evolution for a constant-exposure fund trading decomposable derivatives.

The fund targets vega exposure V = kappa * C at every step. Over one step of
length dt, a slice dt/M of the book expires and realizes R against the current
implied mark sigma; the fund then trades back to target, and the trade moves
the mark by lambda per unit of vega traded (linear impact) or by
lambda * sign(dV) * sqrt(|dV|) (square-root impact). Because the trade size
depends on the period's profit and the profit depends on the mark move caused
by the trade, each step solves a small fixed-point problem.

Under linear impact the fixed point is a ratio whose denominator
1 - lambda * kappa * aged_vega vanishes at a critical capital level
C = M / ((M - dt) * lambda * kappa^2); trajectories passing near that level
jump discontinuously. All functions here are pure: given the same inputs they
produce bit-identical outputs, with no hidden state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

from scipy.optimize import brentq

__all__ = [
    "ModelParams",
    "FundState",
    "RealizedPath",
    "StepBreakdown",
    "Guards",
    "Scenario",
    "Trajectory",
    "Termination",
    "CriticalCapital",
    "RangeError",
    "DegenerateDenominatorError",
    "MaturityCollapseError",
    "NoRootFoundError",
    "UndefinedCriticalError",
    "solve_profit_linear",
    "solve_profit_sqrt",
    "sqrt_impact_residual",
    "step",
    "step_closed_form",
    "simulate",
    "critical_capital",
    "degeneracy_margin",
]

EPS_DEG_DEFAULT = 1e-10
OVERFLOW_CAP_DEFAULT = 1e9
GAP_THRESHOLD_DEFAULT = 0.10
PEAK_PROMINENCE_DEFAULT = 0.10
BANKRUPTCY_FRACTION_DEFAULT = 0.10

SQRT_ROOT_TOL = 1e-12


class RangeError(ValueError):
    """A numeric field violates its allowed range. Carries the field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


class DegenerateDenominatorError(ArithmeticError):
    """The profit equation's coefficient 1 - lambda*kappa*aged_vega is within
    eps_deg of zero: capital sits at the critical level and the map is undefined."""


class MaturityCollapseError(ArithmeticError):
    """A step drove the average maturity to dt or below. Carries the offending
    state and the breakdown that produced it so callers can record them."""

    def __init__(self, state: "FundState", breakdown: "StepBreakdown"):
        super().__init__(f"average maturity collapsed to {state.avg_maturity!r}")
        self.state = state
        self.breakdown = breakdown


class NoRootFoundError(ArithmeticError):
    """The square-root-impact profit equation has no root in [-C, 10*C]."""


class UndefinedCriticalError(ValueError):
    """No critical capital exists (lambda = 0 means no market impact singularity)."""


class Termination(enum.Enum):
    """Why a simulation stopped."""

    HORIZON_REACHED = "HorizonReached"
    BANKRUPT = "Bankrupt"
    DEGENERATE_DENOMINATOR = "DegenerateDenominator"
    MATURITY_COLLAPSE = "MaturityCollapse"
    NUMERICAL_OVERFLOW = "NumericalOverflow"


class ImpactModel(enum.Enum):
    LINEAR = "linear"
    SQRT = "sqrt"


@dataclass(frozen=True)
class ModelParams:
    """Fixed model constants.

    kappa: target exposure as a fraction of capital (e.g. 0.1)
    lam: market impact in vol points per million of vega notional traded
    maturity: standard maturity T of newly traded derivatives, in years
    dt: step length in years
    impact_model: "linear" or "sqrt"
    """

    kappa: float
    lam: float
    maturity: float
    dt: float
    impact_model: ImpactModel = ImpactModel.LINEAR

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise RangeError("kappa", "must be finite and > 0")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise RangeError("lambda", "must be finite and >= 0")
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise RangeError("T", "must be finite and > 0")
        if not (0 < self.dt < self.maturity):
            raise RangeError("dt", "must satisfy 0 < dt < T")
        if not isinstance(self.impact_model, ImpactModel):
            object.__setattr__(self, "impact_model", ImpactModel(self.impact_model))


@dataclass(frozen=True)
class FundState:
    """Evolving fund state: time, capital C (millions), average maturity M
    (years), implied mark sigma (vol points), vega V = kappa*C (millions per
    vol point)."""

    t: float
    capital: float
    avg_maturity: float
    implied: float
    vega: float

    def is_finite(self) -> bool:
        return all(
            math.isfinite(x)
            for x in (self.t, self.capital, self.avg_maturity, self.implied, self.vega)
        )


@dataclass(frozen=True)
class RealizedPath:
    """Realized marks per step: either one constant value or an explicit
    per-step sequence (vol points)."""

    kind: str
    value: float = 0.0
    values: Tuple[float, ...] = ()

    @classmethod
    def constant(cls, value: float) -> "RealizedPath":
        if not math.isfinite(value):
            raise RangeError("realized", "must be finite")
        return cls(kind="constant", value=float(value))

    @classmethod
    def sequence(cls, values: Sequence[float]) -> "RealizedPath":
        vals = tuple(float(v) for v in values)
        if not vals:
            raise RangeError("realized", "sequence must be non-empty")
        if not all(math.isfinite(v) for v in vals):
            raise RangeError("realized", "all values must be finite")
        return cls(kind="sequence", values=vals)

    def at(self, i: int) -> float:
        if self.kind == "constant":
            return self.value
        return self.values[i]

    def check_horizon(self, horizon: int) -> None:
        if self.kind == "sequence" and len(self.values) < horizon:
            raise RangeError(
                "realized",
                f"sequence has {len(self.values)} values but horizon is {horizon}",
            )


@dataclass(frozen=True)
class StepBreakdown:
    """Profit decomposition of one step.

    realized_pnl: (V/M)(R - sigma) dt on the expiring slice
    implied_pnl: aged_vega * (sigma' - sigma) on the remaining book
    total_pnl: the solved per-step profit
    aged_vega: V (M - dt) / M, the book left after aging
    new_vega: kappa * (C + profit), the post-trade target exposure
    trade: new_vega - aged_vega (signed)
    denom_margin: 1 - lambda * kappa * aged_vega
    """

    realized_pnl: float
    implied_pnl: float
    total_pnl: float
    aged_vega: float
    new_vega: float
    trade: float
    denom_margin: float


@dataclass(frozen=True)
class Guards:
    """Numerical and detection thresholds carried with a scenario."""

    eps_deg: float = EPS_DEG_DEFAULT
    overflow_cap: float = OVERFLOW_CAP_DEFAULT
    gap_threshold: float = GAP_THRESHOLD_DEFAULT
    peak_prominence: float = PEAK_PROMINENCE_DEFAULT
    # Capital level (millions) at or below which the fund is wound down.
    # The exact map decays geometrically without ever crossing zero, so a
    # strictly positive floor is needed for any run to end in bankruptcy.
    # Resolved to BANKRUPTCY_FRACTION_DEFAULT * c0 when left at None;
    # set 0 to recover the literal capital <= 0 rule.
    bankruptcy_floor: Optional[float] = None

    def __post_init__(self):
        if not (self.eps_deg > 0):
            raise RangeError("eps_deg", "must be > 0")
        if not (self.overflow_cap > 0):
            raise RangeError("overflow_cap", "must be > 0")
        if not (self.gap_threshold > 0):
            raise RangeError("gap_threshold", "must be > 0")
        if not (0 < self.peak_prominence <= 1):
            raise RangeError("peak_prominence", "must be in (0, 1]")
        if self.bankruptcy_floor is not None and not (self.bankruptcy_floor >= 0):
            raise RangeError("bankruptcy_floor", "must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """A complete, reproducible simulation setup."""

    params: ModelParams
    c0: float
    sigma0: float
    realized: RealizedPath
    horizon: int
    m0: Optional[float] = None
    guards: Guards = field(default_factory=Guards)

    def __post_init__(self):
        if not (self.c0 > 0 and math.isfinite(self.c0)):
            raise RangeError("c0", "must be finite and > 0")
        if not math.isfinite(self.sigma0):
            raise RangeError("sigma0", "must be finite")
        if not (isinstance(self.horizon, int) and self.horizon >= 1):
            raise RangeError("horizon", "must be an integer >= 1")
        m0 = self.params.maturity if self.m0 is None else self.m0
        if not (self.params.dt < m0 <= self.params.maturity):
            raise RangeError("m0", "must satisfy dt < m0 <= T")
        object.__setattr__(self, "m0", float(m0))
        self.realized.check_horizon(self.horizon)
        if self.guards.bankruptcy_floor is None:
            floor = BANKRUPTCY_FRACTION_DEFAULT * self.c0
            object.__setattr__(self, "guards", replace(self.guards, bankruptcy_floor=floor))

    def initial_state(self) -> FundState:
        return FundState(
            t=0.0,
            capital=self.c0,
            avg_maturity=self.m0,
            implied=self.sigma0,
            vega=self.params.kappa * self.c0,
        )


@dataclass(frozen=True)
class Trajectory:
    """Ordered states and per-step breakdowns of one simulation run.

    states has exactly one more entry than breakdowns; breakdowns[i] describes
    the step from states[i] to states[i+1]. negative_implied_step is the index
    of the first state whose implied mark is negative, if any.
    """

    scenario: Scenario
    states: Tuple[FundState, ...]
    breakdowns: Tuple[StepBreakdown, ...]
    termination: Termination
    negative_implied_step: Optional[int] = None

    def capital_series(self) -> list[float]:
        return [s.capital for s in self.states]

    @property
    def steps(self) -> int:
        return len(self.breakdowns)


@dataclass(frozen=True)
class CriticalCapital:
    """Capital level at which the linear-impact profit equation degenerates.

    approx = 1/(lambda kappa^2); exact = M / ((M - dt) lambda kappa^2) for a
    given average maturity M. exact > approx whenever M > dt > 0 and tends to
    approx as dt -> 0.
    """

    approx: float
    exact: Optional[float] = None


def _aged_vega(state: FundState, params: ModelParams) -> float:
    return state.vega * (state.avg_maturity - params.dt) / state.avg_maturity


def degeneracy_margin(state: FundState, params: ModelParams) -> float:
    """Coefficient 1 - lambda*kappa*aged_vega of the per-step profit equation.

    Zero exactly when capital sits at the critical level for the state's
    maturity; the linear-impact step is undefined there.
    """
    return 1.0 - params.lam * params.kappa * _aged_vega(state, params)


def critical_capital(params: ModelParams, maturity: Optional[float] = None) -> CriticalCapital:
    """Critical capital levels for the given impact and exposure parameters.

    Raises UndefinedCriticalError when lambda = 0 (no impact, no singularity).
    When a maturity M is supplied, also returns the exact level
    M / ((M - dt) lambda kappa^2); otherwise only the dt -> 0 approximation.
    """
    if params.lam == 0:
        raise UndefinedCriticalError("lambda = 0: the profit equation never degenerates")
    approx = 1.0 / params.lam / params.kappa / params.kappa
    exact = None
    if maturity is not None:
        if not (maturity > params.dt):
            raise RangeError("maturity", "must be > dt")
        exact = maturity / ((maturity - params.dt) * params.lam * params.kappa * params.kappa)
    return CriticalCapital(approx=approx, exact=exact)


def solve_profit_linear(
    state: FundState, params: ModelParams, realized: float, eps_deg: float = EPS_DEG_DEFAULT
) -> StepBreakdown:
    """Solve the one-step profit under linear impact.

    profit = [ (V/M)(R - sigma) dt + V^2 ((M-dt)/M) lambda dt/M ]
             / (1 - lambda kappa aged_vega)

    Raises DegenerateDenominatorError when the denominator is within eps_deg
    of zero.
    """
    V = state.vega
    M = state.avg_maturity
    dt = params.dt
    aged = _aged_vega(state, params)
    margin = 1.0 - params.lam * params.kappa * aged
    if abs(margin) <= eps_deg:
        raise DegenerateDenominatorError(
            f"profit-equation coefficient {margin!r} within {eps_deg} of zero"
        )
    realized_pnl = (V / M) * (realized - state.implied) * dt
    rhs = realized_pnl + V * V * ((M - dt) / M) * params.lam * dt / M
    profit = rhs / margin
    new_vega = params.kappa * (state.capital + profit)
    trade = new_vega - aged
    implied_pnl = aged * params.lam * trade
    return StepBreakdown(
        realized_pnl=realized_pnl,
        implied_pnl=implied_pnl,
        total_pnl=profit,
        aged_vega=aged,
        new_vega=new_vega,
        trade=trade,
        denom_margin=margin,
    )


def sqrt_impact_residual(
    state: FundState, params: ModelParams, realized: float, profit: float
) -> float:
    """Residual of the implicit profit equation under square-root impact.

    f(P) = (V/M)(R - sigma) dt + aged * lambda * sign(dV) sqrt(|dV|) - P
    with dV = V + kappa P - aged. Roots of f are admissible profits.
    """
    V = state.vega
    M = state.avg_maturity
    aged = _aged_vega(state, params)
    realized_pnl = (V / M) * (realized - state.implied) * params.dt
    dv = V + params.kappa * profit - aged
    impact = params.lam * math.copysign(math.sqrt(abs(dv)), dv)
    return realized_pnl + aged * impact - profit


def solve_profit_sqrt(
    state: FundState, params: ModelParams, realized: float, eps_deg: float = EPS_DEG_DEFAULT
) -> StepBreakdown:
    """Solve the one-step profit when impact scales with sqrt(|vega traded|).

    Scans [-C, 10C] for sign changes of the residual, refines each bracketed
    root, and returns the root of smallest |profit|. Raises NoRootFoundError
    when no bracketed root with |residual| < 1e-12 exists; the bracket is not
    widened.
    """
    C = state.capital
    lo, hi = -C, 10.0 * C

    def f(p: float) -> float:
        return sqrt_impact_residual(state, params, realized, p)

    # Include the kink where dV = 0 so no sign change straddles it unseen.
    kink = -(state.vega - _aged_vega(state, params)) / params.kappa
    n = 4096
    grid = sorted({lo + (hi - lo) * i / n for i in range(n + 1)} | ({kink} if lo < kink < hi else set()))
    roots: list[float] = []
    prev_x = grid[0]
    prev_f = f(prev_x)
    if prev_f == 0.0:
        roots.append(prev_x)
    for x in grid[1:]:
        fx = f(x)
        if fx == 0.0:
            roots.append(x)
        elif prev_f != 0.0 and (fx > 0) != (prev_f > 0):
            roots.append(float(brentq(f, prev_x, x, xtol=1e-15, rtol=8.9e-16, maxiter=200)))
        prev_x, prev_f = x, fx
    roots = [r for r in roots if abs(f(r)) < SQRT_ROOT_TOL]
    if not roots:
        raise NoRootFoundError(f"no profit root in [{lo!r}, {hi!r}]")
    profit = min(roots, key=abs)

    V = state.vega
    M = state.avg_maturity
    aged = _aged_vega(state, params)
    realized_pnl = (V / M) * (realized - state.implied) * params.dt
    new_vega = params.kappa * (state.capital + profit)
    trade = new_vega - aged
    implied_pnl = aged * params.lam * math.copysign(math.sqrt(abs(trade)), trade)
    return StepBreakdown(
        realized_pnl=realized_pnl,
        implied_pnl=implied_pnl,
        total_pnl=profit,
        aged_vega=aged,
        new_vega=new_vega,
        trade=trade,
        denom_margin=1.0 - params.lam * params.kappa * aged,
    )


def step(
    state: FundState, params: ModelParams, realized: float, eps_deg: float = EPS_DEG_DEFAULT
) -> Tuple[FundState, StepBreakdown]:
    """Advance the fund one step of length dt.

    C' = C + profit; V' = kappa C'; sigma' moves by the impact of the trade
    V' - aged_vega; M' is the vega-weighted average of the aged maturity and
    the standard maturity of the trade. Raises MaturityCollapseError (carrying
    the new state) when M' <= dt while the fund is still solvent; bankruptcy
    is left to the caller, which sees the returned state.
    """
    if params.impact_model is ImpactModel.SQRT:
        bd = solve_profit_sqrt(state, params, realized, eps_deg)
    else:
        bd = solve_profit_linear(state, params, realized, eps_deg)
    capital = state.capital + bd.total_pnl
    vega = bd.new_vega
    if params.impact_model is ImpactModel.SQRT:
        implied = state.implied + params.lam * math.copysign(math.sqrt(abs(bd.trade)), bd.trade)
    else:
        implied = state.implied + params.lam * bd.trade
    if vega != 0.0:
        maturity = (bd.aged_vega * (state.avg_maturity - params.dt) + bd.trade * params.maturity) / vega
    else:
        maturity = state.avg_maturity - params.dt
    new_state = FundState(
        t=state.t + params.dt,
        capital=capital,
        avg_maturity=maturity,
        implied=implied,
        vega=vega,
    )
    if capital > 0 and maturity <= params.dt:
        raise MaturityCollapseError(new_state, bd)
    return new_state, bd


def step_closed_form(
    state: FundState, params: ModelParams, realized: float, eps_deg: float = EPS_DEG_DEFAULT
) -> FundState:
    """One step via the closed-form recurrences (linear impact only).

    Cross-check against step(): the two must agree to 1e-9 relative away from
    the degenerate denominator. The sigma recurrence carries denominator
    (M - C kappa^2 lambda (M - dt)); with the opposite sign the lambda -> 0
    limit degenerates to sigma' = -sigma, which is not the step map. The
    capital recurrence reads its mark term at the current step for the same
    reason.
    """
    if params.impact_model is not ImpactModel.LINEAR:
        raise RangeError("impact_model", "closed form exists only for linear impact")
    C = state.capital
    M = state.avg_maturity
    sig = state.implied
    k = params.kappa
    lam = params.lam
    T = params.maturity
    dt = params.dt
    denom = M - C * k * k * lam * (M - dt)
    if abs(denom) <= eps_deg:
        raise DegenerateDenominatorError(f"closed-form denominator {denom!r} within {eps_deg} of zero")
    capital = C + C * k * dt * (realized - sig + C * k * lam * (M - dt) / M) / denom
    implied = (sig * M + C * k * lam * (dt - k * sig * M + k * dt * realized)) / denom
    maturity = (M * T * dt * (k * (sig - realized) - 1.0) - (M - dt) ** 2 * denom) / (
        C * k * k * lam * (M - dt) ** 2 - M * (M - k * dt * (sig - realized))
    )
    return FundState(
        t=state.t + dt,
        capital=capital,
        avg_maturity=maturity,
        implied=implied,
        vega=k * capital,
    )


def simulate(scenario: Scenario) -> Trajectory:
    """Run the step map from the scenario's initial state until termination.

    Stops at the horizon, at bankruptcy (capital at or below the scenario's
    bankruptcy floor), at |capital| >= overflow_cap or a non-finite state, at
    maturity collapse, or at a degenerate profit denominator. Every visited
    state and breakdown is recorded; the run is bit-for-bit deterministic.
    """
    params = scenario.params
    guards = scenario.guards
    state = scenario.initial_state()
    states = [state]
    breakdowns: list[StepBreakdown] = []
    termination = Termination.HORIZON_REACHED
    negative_step = 0 if state.implied < 0 else None
    for i in range(scenario.horizon):
        r = scenario.realized.at(i)
        try:
            state, bd = step(state, params, r, guards.eps_deg)
        except DegenerateDenominatorError:
            termination = Termination.DEGENERATE_DENOMINATOR
            break
        except MaturityCollapseError as exc:
            states.append(exc.state)
            breakdowns.append(exc.breakdown)
            if negative_step is None and exc.state.implied < 0:
                negative_step = len(states) - 1
            termination = Termination.MATURITY_COLLAPSE
            break
        states.append(state)
        breakdowns.append(bd)
        if negative_step is None and state.implied < 0:
            negative_step = len(states) - 1
        if not state.is_finite():
            termination = Termination.NUMERICAL_OVERFLOW
            break
        if state.capital <= guards.bankruptcy_floor:
            termination = Termination.BANKRUPT
            break
        if abs(state.capital) >= guards.overflow_cap:
            termination = Termination.NUMERICAL_OVERFLOW
            break
    return Trajectory(
        scenario=scenario,
        states=tuple(states),
        breakdowns=tuple(breakdowns),
        termination=termination,
        negative_implied_step=negative_step,
    )
