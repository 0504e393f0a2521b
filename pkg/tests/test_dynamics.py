"""Unit and property tests for the step map, closed forms, and solvers."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propsim import (
    DegenerateDenominatorError,
    FundState,
    Guards,
    ImpactModel,
    MaturityCollapseError,
    ModelParams,
    NoRootFoundError,
    RangeError,
    RealizedPath,
    Termination,
    UndefinedCriticalError,
    critical_capital,
    degeneracy_margin,
    simulate,
    solve_profit_linear,
    solve_profit_sqrt,
    sqrt_impact_residual,
    step,
    step_closed_form,
)
from conftest import make_scenario

BASE_PARAMS = ModelParams(kappa=0.1, lam=0.05, maturity=5.0, dt=0.01)
BASE_STATE = FundState(t=0.0, capital=1000.0, avg_maturity=5.0, implied=20.0, vega=100.0)

# Base example solved by hand from the collected profit equation with
# V = 100, aged vega = 99.8: rhs = 0.998, coefficient = 0.501.
BASE_PROFIT = 0.998 / 0.501

# Root of the sqrt-impact profit equation at R = sigma, frozen from the
# bisection oracle below (200 halvings of [0, 1e4]).
SQRT_PROFIT_ORACLE = 3.8004027087774457


def bisect_residual(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_state(rng, params):
    capital = rng.uniform(1.0, 5000.0)
    m = rng.uniform(params.dt * 1.5, params.maturity)
    return FundState(
        t=0.0,
        capital=capital,
        avg_maturity=m,
        implied=rng.uniform(-10.0, 60.0),
        vega=params.kappa * capital,
    )


def random_params(rng, impact_model=ImpactModel.LINEAR, lam_max=0.2):
    maturity = rng.uniform(1.0, 10.0)
    return ModelParams(
        kappa=rng.uniform(0.01, 0.5),
        lam=rng.uniform(0.0, lam_max),
        maturity=maturity,
        dt=rng.uniform(0.001, min(0.1, maturity / 4)),
        impact_model=impact_model,
    )


# ---------------------------------------------------------------------------
# solve_profit_linear
# ---------------------------------------------------------------------------


class TestSolveProfitLinear:
    def test_base_example(self):
        bd = solve_profit_linear(BASE_STATE, BASE_PARAMS, 20.0)
        assert math.isclose(bd.total_pnl, BASE_PROFIT, rel_tol=1e-12)
        assert math.isclose(bd.total_pnl, 1.99202, rel_tol=1e-5)
        assert math.isclose(bd.aged_vega, 99.8, rel_tol=1e-12)
        assert math.isclose(bd.denom_margin, 0.501, rel_tol=1e-12)

    def test_no_impact_reduces_to_realized_leg(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        bd = solve_profit_linear(BASE_STATE, params, 21.0)
        assert math.isclose(bd.total_pnl, (100.0 / 5.0) * 1.0 * 0.01, rel_tol=1e-12)
        assert bd.total_pnl == pytest.approx(0.2)
        assert bd.implied_pnl == 0.0

    def test_degenerate_at_exact_critical_capital(self):
        c_crit = 5.0 / (4.99 * 0.05 * 0.01)
        assert c_crit == pytest.approx(2004.008, abs=1e-3)
        state = FundState(t=0.0, capital=c_crit, avg_maturity=5.0, implied=20.0, vega=0.1 * c_crit)
        with pytest.raises(DegenerateDenominatorError):
            solve_profit_linear(state, BASE_PARAMS, 20.0)

    def test_breakdown_identities(self):
        bd = solve_profit_linear(BASE_STATE, BASE_PARAMS, 23.5)
        assert math.isclose(bd.total_pnl, bd.realized_pnl + bd.implied_pnl, rel_tol=1e-12)
        assert math.isclose(
            bd.aged_vega,
            BASE_STATE.vega * (5.0 - 0.01) / 5.0,
            rel_tol=1e-15,
        )
        assert math.isclose(bd.trade, bd.new_vega - bd.aged_vega, rel_tol=1e-15)


# ---------------------------------------------------------------------------
# solve_profit_sqrt
# ---------------------------------------------------------------------------


class TestSolveProfitSqrt:
    SQRT_PARAMS = ModelParams(kappa=0.1, lam=0.05, maturity=5.0, dt=0.01, impact_model=ImpactModel.SQRT)

    def test_lambda_zero_matches_linear(self):
        sq = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01, impact_model=ImpactModel.SQRT)
        lin = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        bd_sq = solve_profit_sqrt(BASE_STATE, sq, 21.0)
        bd_lin = solve_profit_linear(BASE_STATE, lin, 21.0)
        assert math.isclose(bd_sq.total_pnl, bd_lin.total_pnl, rel_tol=1e-12, abs_tol=1e-12)

    def test_positive_root_at_flat_realized(self):
        bd = solve_profit_sqrt(BASE_STATE, self.SQRT_PARAMS, 20.0)
        assert math.isclose(bd.total_pnl, SQRT_PROFIT_ORACLE, rel_tol=1e-10)
        # re-derive with the oracle so the frozen constant stays honest
        oracle = bisect_residual(
            lambda p: sqrt_impact_residual(BASE_STATE, self.SQRT_PARAMS, 20.0, p), 0.0, 1e4
        )
        assert math.isclose(oracle, SQRT_PROFIT_ORACLE, rel_tol=1e-12)

    def test_residual_at_kink_is_realized_minus_profit(self):
        # dV vanishes at profit = -(V - aged)/kappa; there the impact term is
        # exactly zero and the residual is the realized leg minus the profit.
        state, params = BASE_STATE, self.SQRT_PARAMS
        aged = state.vega * (5.0 - 0.01) / 5.0
        p_kink = -(state.vega - aged) / params.kappa
        realized = (state.vega / 5.0) * (20.0 - state.implied) * 0.01
        res = sqrt_impact_residual(state, params, 20.0, p_kink)
        assert math.isclose(res, realized - p_kink, rel_tol=1e-12, abs_tol=1e-15)

    def test_no_root_outside_bracket(self):
        # A huge realized print puts the only root far above 10*C.
        with pytest.raises(NoRootFoundError):
            solve_profit_sqrt(BASE_STATE, self.SQRT_PARAMS, 6.0e6)

    def test_oracle_agreement_randomized(self):
        rng = random.Random(20240917)
        checked = 0
        while checked < 60:
            params = random_params(rng, ImpactModel.SQRT, lam_max=0.1)
            state = random_state(rng, params)
            r = rng.uniform(state.implied - 5.0, state.implied + 5.0)
            try:
                bd = solve_profit_sqrt(state, params, r)
            except NoRootFoundError:
                continue
            res = sqrt_impact_residual(state, params, r, bd.total_pnl)
            assert abs(res) < 1e-12 * max(1.0, abs(bd.total_pnl))
            lo, hi = bd.total_pnl - 1.0, bd.total_pnl + 1.0
            f = lambda p: sqrt_impact_residual(state, params, r, p)
            if (f(lo) > 0) != (f(hi) > 0):
                oracle = bisect_residual(f, lo, hi)
                assert math.isclose(bd.total_pnl, oracle, rel_tol=1e-10, abs_tol=1e-10)
                checked += 1


# ---------------------------------------------------------------------------
# step
# ---------------------------------------------------------------------------


class TestStep:
    def test_base_example_matches_hand_applied_equations(self):
        nxt, bd = step(BASE_STATE, BASE_PARAMS, 20.0)
        # independent recomputation, straight from the per-step relations
        profit = 0.998 / 0.501
        capital = 1000.0 + profit
        new_vega = 0.1 * capital
        trade = new_vega - 99.8
        implied = 20.0 + 0.05 * trade
        maturity = (99.8 * 4.99 + trade * 5.0) / new_vega
        assert math.isclose(nxt.capital, capital, rel_tol=1e-12)
        assert math.isclose(nxt.implied, implied, rel_tol=1e-12)
        assert math.isclose(nxt.avg_maturity, maturity, rel_tol=1e-12)
        assert nxt.capital == pytest.approx(1001.992, abs=5e-4)
        assert nxt.implied == pytest.approx(20.01996, abs=5e-6)
        assert nxt.avg_maturity == pytest.approx(4.99004, abs=5e-6)
        assert nxt.t == pytest.approx(0.01)
        assert bd.total_pnl == pytest.approx(profit, rel=1e-12)

    def test_zero_profit_fixed_point(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        nxt, _ = step(BASE_STATE, params, 20.0)
        assert nxt.capital == BASE_STATE.capital
        assert nxt.implied == BASE_STATE.implied
        assert nxt.vega == BASE_STATE.vega
        assert math.isclose(nxt.avg_maturity, (4.99**2 + 0.01 * 5.0) / 5.0, rel_tol=1e-12)

    def test_maturity_fixed_point(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        m_star = (5.0 + 0.01) / 2.0
        assert math.isclose(m_star**2, (m_star - 0.01) ** 2 + 0.01 * 5.0, rel_tol=1e-15)
        state = FundState(t=0.0, capital=1000.0, avg_maturity=m_star, implied=20.0, vega=100.0)
        nxt, _ = step(state, params, 20.0)
        assert math.isclose(nxt.avg_maturity, m_star, rel_tol=1e-12)

    def test_maturity_collapse_carries_state(self):
        # Selling hard enough drives the maturity to dt or below while the
        # fund is still solvent.
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        state = FundState(t=0.0, capital=1000.0, avg_maturity=0.05, implied=20.0, vega=100.0)
        with pytest.raises(MaturityCollapseError) as err:
            step(state, params, 0.0)
        assert err.value.state.capital > 0
        assert err.value.state.avg_maturity <= params.dt


# ---------------------------------------------------------------------------
# step_closed_form
# ---------------------------------------------------------------------------


class TestStepClosedForm:
    def test_lambda_zero_limit(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        state = FundState(t=0.0, capital=1200.0, avg_maturity=3.0, implied=22.0, vega=120.0)
        r = 25.0
        got = step_closed_form(state, params, r)
        k, dt, T, M, sig, C = 0.1, 0.01, 5.0, 3.0, 22.0, 1200.0
        assert math.isclose(got.implied, sig, rel_tol=1e-15)
        assert math.isclose(
            got.avg_maturity,
            ((M - dt) ** 2 + dt * T * (1 + k * (r - sig))) / (M + k * dt * (r - sig)),
            rel_tol=1e-12,
        )
        assert math.isclose(got.capital, C + C * k * dt * (r - sig) / M, rel_tol=1e-12)

    def test_matches_step_on_base_example(self):
        via_step, _ = step(BASE_STATE, BASE_PARAMS, 20.0)
        via_closed = step_closed_form(BASE_STATE, BASE_PARAMS, 20.0)
        assert math.isclose(via_closed.capital, via_step.capital, rel_tol=1e-9)
        assert math.isclose(via_closed.avg_maturity, via_step.avg_maturity, rel_tol=1e-9)
        assert math.isclose(via_closed.implied, via_step.implied, rel_tol=1e-9)

    def test_sign_flipped_sigma_denominator_is_wrong(self):
        # With the denominator written as (C k^2 lam (M - dt) - M) the mark
        # recurrence collapses to sigma' = -sigma at lam = 0: not the map.
        C, M, sig, k, lam, dt, r = 1200.0, 3.0, 22.0, 0.1, 0.0, 0.01, 25.0
        flipped = (sig * M + C * k * lam * (dt - k * sig * M + k * dt * r)) / (
            C * k * k * lam * (M - dt) - M
        )
        assert math.isclose(flipped, -sig, rel_tol=1e-15)
        params = ModelParams(kappa=k, lam=lam, maturity=5.0, dt=dt)
        state = FundState(t=0.0, capital=C, avg_maturity=M, implied=sig, vega=k * C)
        assert math.isclose(step_closed_form(state, params, r).implied, sig, rel_tol=1e-15)

    def test_degenerate_denominator(self):
        c_crit = 5.0 / (4.99 * 0.05 * 0.01)
        state = FundState(t=0.0, capital=c_crit, avg_maturity=5.0, implied=20.0, vega=0.1 * c_crit)
        with pytest.raises(DegenerateDenominatorError):
            step_closed_form(state, BASE_PARAMS, 20.0)

    def test_rejects_sqrt_model(self):
        params = ModelParams(kappa=0.1, lam=0.05, maturity=5.0, dt=0.01, impact_model=ImpactModel.SQRT)
        with pytest.raises(RangeError):
            step_closed_form(BASE_STATE, params, 20.0)


# ---------------------------------------------------------------------------
# critical capital and degeneracy margin
# ---------------------------------------------------------------------------


class TestCriticalCapital:
    def test_reference_values(self):
        cc = critical_capital(BASE_PARAMS, 5.0)
        assert cc.approx == 2000.0
        assert math.isclose(cc.exact, 2004.0080160320641, rel_tol=1e-9)

    def test_unit_parameters(self):
        params = ModelParams(kappa=1.0, lam=1.0, maturity=4.0, dt=1.0)
        cc = critical_capital(params, 2.0)
        assert cc.approx == pytest.approx(1.0, rel=1e-15)
        assert cc.exact == pytest.approx(2.0, rel=1e-15)

    def test_exact_exceeds_approx(self):
        cc = critical_capital(BASE_PARAMS, 5.0)
        assert cc.exact > cc.approx
        tight = ModelParams(kappa=0.1, lam=0.05, maturity=5.0, dt=1e-7)
        cc2 = critical_capital(tight, 5.0)
        assert math.isclose(cc2.exact, cc2.approx, rel_tol=1e-6)

    def test_lambda_zero_undefined(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        with pytest.raises(UndefinedCriticalError):
            critical_capital(params)

    def test_exact_omitted_without_maturity(self):
        assert critical_capital(BASE_PARAMS).exact is None


class TestDegeneracyMargin:
    def test_base_example(self):
        assert math.isclose(degeneracy_margin(BASE_STATE, BASE_PARAMS), 0.501, rel_tol=1e-12)

    def test_lambda_zero(self):
        params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
        assert degeneracy_margin(BASE_STATE, params) == 1.0

    def test_zero_at_exact_critical(self):
        cc = critical_capital(BASE_PARAMS, 5.0)
        state = FundState(t=0.0, capital=cc.exact, avg_maturity=5.0, implied=20.0, vega=0.1 * cc.exact)
        assert abs(degeneracy_margin(state, BASE_PARAMS)) <= 1e-12


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


class TestSimulate:
    def test_smooth_reference_shape(self, reference_trajectories):
        traj = reference_trajectories["smooth"]
        caps = traj.capital_series()
        peak = max(caps)
        assert peak > 1750
        assert 280 <= caps.index(peak) <= 320
        assert traj.termination is Termination.BANKRUPT
        assert 550 <= traj.steps <= 650

    def test_growth_reference_final_capital(self, reference_trajectories):
        traj = reference_trajectories["growth"]
        assert traj.termination is Termination.HORIZON_REACHED
        assert traj.states[1000].capital > 17500

    def test_zero_profit_scenario_constant(self):
        scen = make_scenario(lam=0.0, sigma0=20.0, realized=20.0, horizon=500)
        traj = simulate(scen)
        assert traj.termination is Termination.HORIZON_REACHED
        assert all(s.capital == 1000.0 for s in traj.states)

    def test_states_one_longer_than_breakdowns(self, reference_trajectories):
        for traj in reference_trajectories.values():
            assert len(traj.states) == len(traj.breakdowns) + 1

    def test_determinism_bit_for_bit(self, gap_scenario):
        a = simulate(gap_scenario)
        b = simulate(gap_scenario)
        assert a == b

    def test_degenerate_at_step_zero(self):
        c_crit = 5.0 / (4.99 * 0.05 * 0.01)
        traj = simulate(make_scenario(c0=c_crit, horizon=10))
        assert traj.termination is Termination.DEGENERATE_DENOMINATOR
        assert traj.steps == 0

    def test_overflow_cap(self):
        scen = make_scenario(c0=1012.0, guards=Guards(overflow_cap=5000.0))
        traj = simulate(scen)
        assert traj.termination is Termination.NUMERICAL_OVERFLOW
        assert abs(traj.states[-1].capital) >= 5000.0

    def test_finite_plunge_is_bankruptcy_not_overflow(self):
        # A hair above the critical capital the first step's coefficient is a
        # tiny negative number, so capital plunges billions negative in one
        # step: a dead fund, not a float failure.
        params = ModelParams(kappa=0.1, lam=0.05, maturity=5.0, dt=0.01)
        exact = critical_capital(params, 5.0).exact
        traj = simulate(make_scenario(c0=exact + 2.01e-6, horizon=10))
        assert traj.termination is Termination.BANKRUPT
        assert traj.steps == 1
        assert traj.states[-1].capital < -1e9
        assert math.isfinite(traj.states[-1].capital)

    def test_sequence_realized_path_matches_constant(self):
        path = RealizedPath.sequence([20.0] * 50)
        seq = simulate(make_scenario(realized=path, horizon=50))
        const = simulate(make_scenario(horizon=50))
        assert [s.capital for s in seq.states] == [s.capital for s in const.states]

    def test_sequence_shorter_than_horizon_rejected(self):
        with pytest.raises(RangeError):
            make_scenario(realized=RealizedPath.sequence([20.0] * 10), horizon=50)

    def test_negative_implied_flagged(self):
        traj = simulate(make_scenario(sigma0=0.5, realized=-30.0, horizon=200))
        flagged = traj.negative_implied_step
        assert flagged is not None
        assert traj.states[flagged].implied < 0
        assert all(s.implied >= 0 for s in traj.states[:flagged])

    def test_consecutive_states_satisfy_step_equations(self, reference_trajectories):
        traj = reference_trajectories["gap"]
        params = traj.scenario.params
        for i in range(0, len(traj.breakdowns), 37):
            redone, bd = step(traj.states[i], params, traj.scenario.realized.at(i))
            assert redone == traj.states[i + 1]
            assert bd == traj.breakdowns[i]


# ---------------------------------------------------------------------------
# invariants (hypothesis)
# ---------------------------------------------------------------------------


@st.composite
def nondegenerate_cases(draw, lam_max=0.2):
    kappa = draw(st.floats(0.01, 0.5))
    lam = draw(st.floats(0.0, lam_max))
    maturity = draw(st.floats(1.0, 10.0))
    dt = draw(st.floats(0.001, 0.1))
    if dt >= maturity / 4:
        dt = maturity / 40
    capital = draw(st.floats(1.0, 5000.0))
    m = draw(st.floats(dt * 1.5, maturity))
    sigma = draw(st.floats(-10.0, 60.0))
    r = draw(st.floats(-10.0, 60.0))
    params = ModelParams(kappa=kappa, lam=lam, maturity=maturity, dt=dt)
    state = FundState(t=0.0, capital=capital, avg_maturity=m, implied=sigma, vega=kappa * capital)
    return params, state, r


@settings(max_examples=200, deadline=None)
@given(nondegenerate_cases())
def test_step_conservation_and_identities(case):
    params, state, r = case
    if abs(degeneracy_margin(state, params)) < 1e-3:
        return
    try:
        nxt, bd = step(state, params, r)
    except MaturityCollapseError as exc:
        nxt, bd = exc.state, exc.breakdown
    scale = max(1.0, abs(bd.total_pnl), abs(state.capital))
    assert abs((nxt.capital - state.capital) - (bd.realized_pnl + bd.implied_pnl)) <= 1e-12 * scale
    if nxt.capital > 0:
        assert math.isclose(nxt.vega, params.kappa * nxt.capital, rel_tol=1e-12)
    assert abs((nxt.implied - state.implied) - params.lam * bd.trade) <= 1e-12 * max(
        1.0, abs(state.implied)
    )


@settings(max_examples=200, deadline=None)
@given(nondegenerate_cases())
def test_closed_form_equivalence(case):
    params, state, r = case
    if params.lam == 0.0 or abs(degeneracy_margin(state, params)) <= 0.05:
        return
    try:
        via_step, _ = step(state, params, r)
    except MaturityCollapseError as exc:
        via_step = exc.state
    via_closed = step_closed_form(state, params, r)
    assert math.isclose(via_closed.capital, via_step.capital, rel_tol=1e-9)
    assert math.isclose(via_closed.avg_maturity, via_step.avg_maturity, rel_tol=1e-9)
    assert math.isclose(via_closed.implied, via_step.implied, rel_tol=1e-9)


def test_lambda_zero_sigma_constant_and_monotonicity():
    params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
    rng = random.Random(7)
    state = FundState(t=0.0, capital=800.0, avg_maturity=4.0, implied=20.0, vega=80.0)
    for _ in range(500):
        r = rng.uniform(10.0, 30.0)
        nxt, _ = step(state, params, r)
        assert nxt.implied == state.implied
        if r > state.implied:
            assert nxt.capital > state.capital
        elif r < state.implied:
            assert nxt.capital < state.capital
        else:
            assert nxt.capital == state.capital
        state = nxt


@pytest.mark.parametrize("m0", [0.02, 0.5, 2.505, 4.0, 5.0])
def test_lambda_zero_maturity_converges(m0):
    params = ModelParams(kappa=0.1, lam=0.0, maturity=5.0, dt=0.01)
    state = FundState(t=0.0, capital=1000.0, avg_maturity=m0, implied=20.0, vega=100.0)
    for _ in range(2000):
        state, _ = step(state, params, 20.0)
    assert abs(state.avg_maturity - (5.0 + 0.01) / 2.0) < 1e-2


def test_singularity_matches_exact_critical():
    rng = random.Random(99)
    for _ in range(50):
        params = random_params(rng, lam_max=0.2)
        if params.lam == 0.0:
            continue
        m = rng.uniform(params.dt * 1.5, params.maturity)
        cc = critical_capital(params, m)
        state = FundState(t=0.0, capital=cc.exact, avg_maturity=m, implied=20.0, vega=params.kappa * cc.exact)
        assert abs(degeneracy_margin(state, params)) < 1e-9
