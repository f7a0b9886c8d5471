import numpy as np
import pytest

from meritgame.model import (
    CONVENTIONAL,
    RENEWABLE,
    StateGrid,
    SupplyCurve,
    TechnologySpec,
)


def make_conventional(
    tech_id="gas",
    fuel="gas",
    fuel_rate=1.8,
    fixed_cost=1.0,
    capital_cost=50.0,
    scrap_value=5.0,
    capital_decay=0.0,
    build_time=0.0,
    lifetime=np.inf,
    mean_reversion=0.5,
    level=2.0,
    vol=1.5,
    offer_scale=10.0,
):
    return TechnologySpec(
        id=tech_id,
        kind=CONVENTIONAL,
        fixed_cost=fixed_cost,
        capital_cost=capital_cost,
        scrap_value=scrap_value,
        capital_decay=capital_decay,
        build_time=build_time,
        lifetime=lifetime,
        mean_reversion=mean_reversion,
        level=level,
        vol=vol,
        offer_scale=offer_scale,
        fuel=fuel,
        fuel_rate=fuel_rate,
    )


def make_renewable(
    tech_id="wind",
    fixed_cost=1.0,
    capital_cost=80.0,
    scrap_value=2.0,
    capital_decay=0.0,
    build_time=0.0,
    lifetime=np.inf,
    mean_reversion=0.8,
    level=0.5,
    vol=1.0,
):
    return TechnologySpec(
        id=tech_id,
        kind=RENEWABLE,
        fixed_cost=fixed_cost,
        capital_cost=capital_cost,
        scrap_value=scrap_value,
        capital_decay=capital_decay,
        build_time=build_time,
        lifetime=lifetime,
        mean_reversion=mean_reversion,
        level=level,
        vol=vol,
        offer_scale=1.0,
    )


def linear_curve(slope, p_max=4000.0, intercept=0.0):
    return SupplyCurve(
        prices=np.array([0.0, p_max]),
        quantities=np.array([intercept, intercept + slope * p_max]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def gas_tech():
    return make_conventional()


@pytest.fixture
def wind_tech():
    return make_renewable()


@pytest.fixture
def gas_grid(gas_tech):
    return StateGrid(gas_tech.id, np.linspace(0.0, 6.0, 61))


@pytest.fixture
def wind_grid(wind_tech):
    return StateGrid(wind_tech.id, np.linspace(0.0, 1.0, 51))
