import dataclasses

import pytest

from propsim import ImpactModel, ModelParams, RealizedPath, Scenario


def make_scenario(
    c0=1000.0,
    sigma0=20.0,
    realized=20.0,
    kappa=0.1,
    lam=0.05,
    maturity=5.0,
    dt=0.01,
    horizon=1000,
    impact_model=ImpactModel.LINEAR,
    **kwargs,
):
    params = ModelParams(kappa=kappa, lam=lam, maturity=maturity, dt=dt, impact_model=impact_model)
    path = realized if isinstance(realized, RealizedPath) else RealizedPath.constant(realized)
    return Scenario(params=params, c0=c0, sigma0=sigma0, realized=path, horizon=horizon, **kwargs)


@pytest.fixture(scope="session")
def smooth_scenario():
    return make_scenario()


@pytest.fixture(scope="session")
def gap_scenario():
    return make_scenario(c0=1010.0)


@pytest.fixture(scope="session")
def growth_scenario():
    return make_scenario(c0=1012.0)


@pytest.fixture(scope="session")
def double_scenario():
    return make_scenario(sigma0=17.0)


@pytest.fixture(scope="session")
def reference_trajectories(smooth_scenario, gap_scenario, growth_scenario, double_scenario):
    from propsim import simulate

    return {
        "smooth": simulate(smooth_scenario),
        "gap": simulate(gap_scenario),
        "growth": simulate(growth_scenario),
        "double": simulate(double_scenario),
    }


def scenario_with(base: Scenario, **updates) -> Scenario:
    return dataclasses.replace(base, **updates)
