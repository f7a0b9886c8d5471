"""Domain types and closed-form economic functions.

Technologies are either conventional (fuel-burning, idiosyncratic cost
follows a square-root mean-reverting diffusion) or renewable (capacity
factor follows a mean-reverting diffusion on (0,1)).  A plant's offer at
a given electricity price is a smooth fraction of nameplate capacity,
and its instantaneous gain is the antiderivative of that offer curve.

Units: years for time, GW for capacity and demand, EUR/MWh for
electricity and fuel prices, EUR/tCO2 for the carbon price.  Per-MW
costs are converted by the config loader so that rewards stay in hourly
EUR/MWh terms (see scenario_io).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

PEAK_HOUR_FRACTION = 65.0 / 168.0  # weekdays 7AM-8PM as a share of the week

CONVENTIONAL = "conventional"
RENEWABLE = "renewable"


@dataclass(frozen=True)
class SupplyCurve:
    """Piecewise-linear increasing supply: quantity offered at each price.

    Breakpoints are (price, quantity) pairs; beyond the last breakpoint
    the final segment's slope extrapolates.  Every segment must have
    strictly positive slope so the integrated curve is strongly convex,
    which the price-clearing step relies on.
    """

    prices: np.ndarray
    quantities: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        quantities = np.asarray(self.quantities, dtype=float)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "quantities", quantities)
        if prices.ndim != 1 or prices.shape != quantities.shape or prices.size < 2:
            raise ConfigError("supply curve needs >= 2 (price, quantity) breakpoints")
        if prices[0] != 0.0:
            raise ConfigError("supply curve must start at price 0")
        if np.any(np.diff(prices) <= 0):
            raise ConfigError("supply curve prices must be strictly increasing")
        if self.min_slope <= 0:
            raise ConfigError(
                "supply curve must be strictly increasing (min slope > 0); "
                "flat segments break strong convexity of the clearing potential"
            )

    @property
    def min_slope(self) -> float:
        return float(np.min(np.diff(self.quantities) / np.diff(self.prices)))

    def __call__(self, price):
        """Quantity at `price` (scalar or array), last-segment extrapolation."""
        p = np.asarray(price, dtype=float)
        slope_end = (self.quantities[-1] - self.quantities[-2]) / (
            self.prices[-1] - self.prices[-2]
        )
        out = np.interp(p, self.prices, self.quantities)
        out = np.where(
            p > self.prices[-1],
            self.quantities[-1] + slope_end * (p - self.prices[-1]),
            out,
        )
        return out if out.ndim else float(out)

    def integral(self, price):
        """Exact antiderivative: integral of the curve from 0 to `price`."""
        p = np.asarray(price, dtype=float)
        # cumulative trapezoid area up to each breakpoint
        seg_area = 0.5 * (self.quantities[1:] + self.quantities[:-1]) * np.diff(self.prices)
        cum = np.concatenate([[0.0], np.cumsum(seg_area)])
        idx = np.clip(np.searchsorted(self.prices, p, side="right") - 1, 0, len(self.prices) - 2)
        p0 = self.prices[idx]
        q0 = self.quantities[idx]
        slope = (self.quantities[idx + 1] - self.quantities[idx]) / (
            self.prices[idx + 1] - self.prices[idx]
        )
        dp = p - p0
        out = cum[idx] + q0 * dp + 0.5 * slope * dp * dp
        # beyond the last breakpoint the last segment extrapolates
        over = p > self.prices[-1]
        if np.any(over):
            slope_end = (self.quantities[-1] - self.quantities[-2]) / (
                self.prices[-1] - self.prices[-2]
            )
            dp_end = p - self.prices[-1]
            out = np.where(
                over,
                cum[-1] + self.quantities[-1] * dp_end + 0.5 * slope_end * dp_end * dp_end,
                out,
            )
        return out if out.ndim else float(out)

    def inverse(self, quantity):
        """Price at which the curve supplies `quantity` (0 if below intercept)."""
        q = np.asarray(quantity, dtype=float)
        slope_end = (self.quantities[-1] - self.quantities[-2]) / (
            self.prices[-1] - self.prices[-2]
        )
        out = np.interp(q, self.quantities, self.prices)
        out = np.where(
            q > self.quantities[-1],
            self.prices[-1] + (q - self.quantities[-1]) / slope_end,
            out,
        )
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class FuelSpec:
    """One fuel market: emission intensity plus its exogenous supply curve."""

    id: str
    emission_intensity: float  # tCO2 per fuel unit (MWh of fuel)
    supply_curve: SupplyCurve

    def __post_init__(self):
        if self.emission_intensity < 0:
            raise ConfigError(f"fuel {self.id}: emission intensity must be >= 0")


@dataclass(frozen=True)
class TechnologySpec:
    """All per-technology constants.

    Conventional technologies burn `fuel_rate` units of fuel `fuel` per
    MWh and carry an idiosyncratic cost state; renewables have a
    capacity-factor state in (0,1) and no fuel link.
    """

    id: str
    kind: str  # CONVENTIONAL or RENEWABLE
    fixed_cost: float  # per MW per unit time, model units
    capital_cost: float  # entry cost per MW, model units
    scrap_value: float  # recovered per MW at exit, model units
    capital_decay: float  # decay rate of capital costs (1/year)
    build_time: float  # years from decision to first generation
    lifetime: float  # years from decision to forced decommission (inf allowed)
    mean_reversion: float  # state process pull toward `level` (1/year)
    level: float  # state process long-run level
    vol: float  # state process volatility
    offer_scale: float  # width of the capacity-cost spread (EUR/MWh)
    fuel: str | None = None  # fuel id, conventional only
    fuel_rate: float | None = None  # fuel units per MWh, conventional only

    def __post_init__(self):
        if self.kind not in (CONVENTIONAL, RENEWABLE):
            raise ConfigError(f"technology {self.id}: unknown kind {self.kind!r}")
        if self.is_conventional:
            if self.fuel is None or self.fuel_rate is None:
                raise ConfigError(f"technology {self.id}: conventional techs need fuel/fuel_rate")
            if self.fuel_rate <= 0:
                raise ConfigError(f"technology {self.id}: fuel_rate must be > 0")
            if self.level <= 0:
                raise ConfigError(f"technology {self.id}: cost level must be > 0")
        else:
            if self.fuel is not None or self.fuel_rate is not None:
                raise ConfigError(f"technology {self.id}: renewables carry no fuel fields")
            if not 0.0 < self.level < 1.0:
                raise ConfigError(f"technology {self.id}: capacity-factor level must be in (0,1)")
        if self.fixed_cost < 0:
            raise ConfigError(f"technology {self.id}: fixed_cost must be >= 0")
        if not self.capital_cost >= self.scrap_value >= 0:
            raise ConfigError(f"technology {self.id}: need capital_cost >= scrap_value >= 0")
        if self.capital_decay < 0 or self.build_time < 0:
            raise ConfigError(f"technology {self.id}: rates and build time must be >= 0")
        if not self.lifetime > self.build_time:
            raise ConfigError(f"technology {self.id}: lifetime must exceed build time")
        if self.mean_reversion <= 0 or self.vol <= 0:
            raise ConfigError(f"technology {self.id}: mean_reversion and vol must be > 0")
        if self.offer_scale <= 0:
            raise ConfigError(f"technology {self.id}: offer_scale must be > 0")

    @property
    def is_conventional(self) -> bool:
        return self.kind == CONVENTIONAL

    @property
    def has_finite_lifetime(self) -> bool:
        return math.isfinite(self.lifetime)


@dataclass(frozen=True)
class StateGrid:
    """Uniform grid of state nodes for one technology.

    Conventional grids live on [0, x_max]; renewable grids on [0, 1].
    """

    tech_id: str
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ConfigError(f"grid for {self.tech_id}: need at least 3 nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigError(f"grid for {self.tech_id}: nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])


def default_state_grid(tech: TechnologySpec, n_nodes: int = 60) -> StateGrid:
    """Uniform grid on the technology's state domain.

    Renewables use [0, 1].  Conventional grids run from 0 to eight
    stationary standard deviations above the mean-reversion level, with
    a reflecting boundary there, so truncated tail mass is negligible.
    """
    if n_nodes < 3:
        raise ConfigError(f"grid for {tech.id}: need at least 3 nodes")
    if tech.is_conventional:
        stat_sd = tech.vol * math.sqrt(tech.level / (2.0 * tech.mean_reversion))
        x_max = tech.level + 8.0 * stat_sd
    else:
        x_max = 1.0
    return StateGrid(tech.id, np.linspace(0.0, x_max, n_nodes))


@dataclass(frozen=True)
class CapacityProfile:
    """Fraction of nameplate capacity available at each age.

    Zero during construction, one while operating, zero after the
    lifetime ends; `ramp_width` > 0 smooths the two transitions.
    """

    tech_id: str
    ages: np.ndarray
    values: np.ndarray

    def __call__(self, age):
        return np.interp(age, self.ages, self.values)


def _smoothstep(u):
    """Quintic smoothstep: 0 below 0, 1 above 1, C2 everywhere."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def _smoothstep_integral(u):
    """Antiderivative of the quintic smoothstep, zero at 0."""
    uc = np.clip(u, 0.0, 1.0)
    core = uc**4 * (uc * (uc - 3.0) + 2.5)
    return core + np.maximum(u - 1.0, 0.0)


def offer_fraction(tech: TechnologySpec, margin) -> np.ndarray | float:
    """Fraction of capacity offered when the price exceeds cost by `margin`.

    Nondecreasing, 0 for margin <= 0, 1 once the margin covers the full
    capacity-cost spread `offer_scale`.
    """
    if not tech.is_conventional:
        raise InputError(f"technology {tech.id} is not conventional")
    out = _smoothstep(np.asarray(margin, dtype=float) / tech.offer_scale)
    return out if out.ndim else float(out)


def gain(tech: TechnologySpec, margin) -> np.ndarray | float:
    """Instantaneous gain per MW at cost margin `margin` (EUR/MWh).

    Closed-form antiderivative of offer_fraction; zero on negative
    margins, slope at most one.
    """
    if not tech.is_conventional:
        raise InputError(f"technology {tech.id} is not conventional")
    m = np.asarray(margin, dtype=float)
    out = tech.offer_scale * _smoothstep_integral(m / tech.offer_scale)
    return out if out.ndim else float(out)


def capacity_profile(tech: TechnologySpec, age_grid, ramp_width: float = 0.0) -> CapacityProfile:
    """Evaluate the capacity availability profile on `age_grid`.

    With ramp_width=0 this is the sharp indicator of the operating
    window [build_time, lifetime]; with ramp_width=w the edges ramp
    smoothly over [edge-w, edge+w].
    """
    ages = np.asarray(age_grid, dtype=float)
    if ages.size == 0 or ages.max() < tech.build_time:
        raise ConfigError(
            f"technology {tech.id}: age grid must reach the {tech.build_time}y build time"
        )
    if ramp_width < 0:
        raise ConfigError("ramp width must be >= 0")
    if ramp_width == 0.0:
        values = ((ages >= tech.build_time) & (ages <= tech.lifetime)).astype(float)
    else:
        up = _smoothstep((ages - (tech.build_time - ramp_width)) / (2.0 * ramp_width))
        if tech.has_finite_lifetime:
            down = _smoothstep(((tech.lifetime + ramp_width) - ages) / (2.0 * ramp_width))
        else:
            down = 1.0
        values = up * down
    return CapacityProfile(tech.id, ages, values)


@dataclass(frozen=True)
class Scenario:
    """Global market data plus per-technology grids and initial measures.

    Trajectories are sampled on the solver time grid (n_t + 1 points
    over [0, horizon]).  Initial measures are mass vectors on the state
    grid (potential projects) and mass matrices over (age bucket, state)
    for plants already decided (see measures.AgeStructure for bucket
    semantics).
    """

    horizon: float  # years
    n_t: int
    technologies: tuple[TechnologySpec, ...]
    fuels: tuple[FuelSpec, ...]
    demand_peak: np.ndarray  # GW, length n_t+1
    demand_offpeak: np.ndarray
    carbon_price: np.ndarray  # EUR/tCO2, length n_t+1
    baseline_supply: SupplyCurve
    price_cap: float  # EUR/MWh
    discount: float  # 1/year
    state_grids: dict[str, StateGrid]
    init_potential: dict[str, np.ndarray]  # tech id -> mass per state node (GW)
    init_installed: dict[str, np.ndarray]  # tech id -> mass per (age bucket, node)
    peak_fraction: float = PEAK_HOUR_FRACTION
    ramp_width: float = 0.0
    config: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("demand_peak", "demand_offpeak", "carbon_price"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (self.n_t + 1,):
                raise ConfigError(f"{name} must have length n_t+1={self.n_t + 1}")
            if np.any(arr < 0):
                raise ConfigError(f"{name} must be >= 0")
        if self.horizon <= 0 or self.n_t < 1:
            raise ConfigError("horizon must be > 0 and n_t >= 1")
        if not 0.0 < self.peak_fraction < 1.0:
            raise ConfigError("peak_fraction must be in (0,1)")
        if self.price_cap <= 0:
            raise ConfigError("price cap must be > 0")
        if self.discount < 0:
            raise ConfigError("discount rate must be >= 0")
        if abs(float(self.baseline_supply(0.0))) > 1e-12:
            raise ConfigError("baseline supply must vanish at price 0")
        fuel_ids = {f.id for f in self.fuels}
        if len(fuel_ids) != len(self.fuels):
            raise ConfigError("duplicate fuel ids")
        tech_ids = {t.id for t in self.technologies}
        if len(tech_ids) != len(self.technologies):
            raise ConfigError("duplicate technology ids")
        for tech in self.technologies:
            if tech.is_conventional and tech.fuel not in fuel_ids:
                raise ConfigError(f"technology {tech.id} references unknown fuel {tech.fuel}")
            if tech.id not in self.state_grids:
                raise ConfigError(f"missing state grid for technology {tech.id}")
            if tech.id not in self.init_potential or tech.id not in self.init_installed:
                raise ConfigError(f"missing initial measures for technology {tech.id}")
            for m in (self.init_potential[tech.id], self.init_installed[tech.id]):
                if np.any(np.asarray(m) < 0) or not np.all(np.isfinite(m)):
                    raise ConfigError(f"initial measures for {tech.id} must be finite and >= 0")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_t

    @property
    def offpeak_fraction(self) -> float:
        return 1.0 - self.peak_fraction

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_t + 1)

    def fuel(self, fuel_id: str) -> FuelSpec:
        for f in self.fuels:
            if f.id == fuel_id:
                return f
        raise KeyError(fuel_id)

    def technology(self, tech_id: str) -> TechnologySpec:
        for t in self.technologies:
            if t.id == tech_id:
                return t
        raise KeyError(tech_id)

    def total_initial_mass(self, tech_id: str) -> float:
        return float(
            np.sum(self.init_potential[tech_id]) + np.sum(self.init_installed[tech_id])
        )
