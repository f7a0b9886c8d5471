"""Discretized measure flows and their linear (Fokker-Planck) constraints.

Each technology carries two populations: potential projects (state only)
and decided plants (age bucket x state).  Per time step the dynamics
are: diffuse the state with one implicit step, shift the age bucket,
then split the arriving mass between staying put and stopping (entering
for potential projects, decommissioning for plants).  Stacking those
balance identities over all steps gives the sparse equality system that
every admissible flow must satisfy and that the best-response LP
optimizes over.

Conventions (mirrored exactly by the dynamic-programming oracle in
bestresponse.py; keep the two in sync):
  * decisions happen at time points t = 0..n_t-1; entries at the final
    point are not allowed - potential mass left at the horizon expires
    worthless, while decided mass left at the horizon is scrapped;
  * the exit split happens after the diffusion step of the period;
  * mass is stored per node (GW), so implicit steps conserve the sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .errors import ConfigError, InputError
from .generators import GeneratorMatrix, adjoint, generator_for
from .model import Scenario, StateGrid, TechnologySpec, capacity_profile


def implicit_step(gen: GeneratorMatrix, dt: float, mass: np.ndarray) -> np.ndarray:
    """One implicit diffusion step of the forward (adjoint) equation.

    Solves (I - dt * T) v = mass with a banded solve, where T is the
    transpose of the passed generator; passing a forward generator gives
    the measure step, passing its adjoint gives the expectation step.
    The system matrix is an M-matrix, so v >= 0 for mass >= 0, and zero
    column sums of the transpose make sum(v) == sum(mass) for forward
    generators.
    """
    if dt <= 0:
        raise InputError("dt must be > 0")
    adj = adjoint(gen)
    n = adj.n
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * adj.upper[:-1]
    ab[1, :] = 1.0 - dt * adj.diag
    ab[2, :-1] = -dt * adj.lower[1:]
    return solve_banded((1, 1), ab, np.asarray(mass, dtype=float))


@dataclass(frozen=True)
class AgeStructure:
    """Age buckets aligned with the time step.

    Buckets 0..build_steps-1 are under construction; with infinite
    lifetime one absorbing mature bucket follows.  With finite lifetime
    the buckets continue to the last operating age and one extra
    "expired" bucket whose occupation is pinned to zero, which forces
    decommissioning.  `availability` holds the capacity fraction per
    bucket.
    """

    tech_id: str
    dt: float
    build_steps: int
    n_buckets: int
    mature_bucket: int | None  # absorbing bucket (infinite lifetime) or None
    expired_bucket: int | None  # forced-exit bucket (finite lifetime) or None
    availability: np.ndarray  # capacity fraction per bucket

    @property
    def bucket_ages(self) -> np.ndarray:
        return np.arange(self.n_buckets) * self.dt

    def successor(self, a: int) -> int | None:
        """Bucket that mass in bucket `a` ages into over one step."""
        if self.mature_bucket is not None and a == self.mature_bucket:
            return a
        if a + 1 < self.n_buckets:
            return a + 1
        return None  # expired bucket has no successor (its occupation is zero)

    def predecessors(self, a: int) -> list[int]:
        return [b for b in range(self.n_buckets) if self.successor(b) == a]

    def bucket_for_age(self, age: float) -> int:
        """Bucket holding initial mass of the given age (years)."""
        if age < 0:
            raise InputError("age must be >= 0")
        idx = int(round(age / self.dt))
        if self.mature_bucket is not None:
            return min(idx, self.mature_bucket)
        # finite lifetime: clamp into the last operating bucket
        return min(idx, self.n_buckets - 2)


def age_structure(tech: TechnologySpec, dt: float, ramp_width: float = 0.0) -> AgeStructure:
    build_steps = int(math.ceil(tech.build_time / dt - 1e-9))
    if tech.has_finite_lifetime:
        last_op = int(math.floor(tech.lifetime / dt + 1e-9))
        if last_op < build_steps:
            raise ConfigError(f"{tech.id}: lifetime shorter than one step past build time")
        n_buckets = last_op + 2  # + expired bucket
        mature = None
        expired = n_buckets - 1
        ages = np.arange(n_buckets) * dt
        avail = capacity_profile(tech, ages, ramp_width).values.copy()
        avail[expired] = 0.0
    else:
        n_buckets = build_steps + 1
        mature = n_buckets - 1
        expired = None
        ages = np.arange(n_buckets) * dt
        avail = np.zeros(n_buckets)
        if build_steps > 0:
            avail[:build_steps] = capacity_profile(tech, ages[:build_steps], ramp_width).values
        avail[mature] = 1.0
    return AgeStructure(
        tech_id=tech.id,
        dt=dt,
        build_steps=build_steps,
        n_buckets=n_buckets,
        mature_bucket=mature,
        expired_bucket=expired,
        availability=avail,
    )


@dataclass(frozen=True)
class TechDiscretization:
    """Everything fixed about one technology's discretization.

    Bundles the state grid, generator, implicit-step matrix and age
    structure; built once per scenario and shared by the constraint
    assembly, forward evolution, reward assembly and the DP oracle.
    """

    tech: TechnologySpec
    grid: StateGrid
    gen: GeneratorMatrix
    ages: AgeStructure
    n_t: int
    dt: float

    @property
    def n_x(self) -> int:
        return self.grid.n

    @property
    def n_a(self) -> int:
        return self.ages.n_buckets

    def step_matrix(self) -> sp.csr_matrix:
        """(I - dt * L_adj) as a sparse matrix (the implicit-step system)."""
        adj = adjoint(self.gen)
        n = adj.n
        return sp.diags(
            [-self.dt * adj.lower[1:], 1.0 - self.dt * adj.diag, -self.dt * adj.upper[:-1]],
            offsets=[-1, 0, 1],
            format="csr",
        )

    def diffuse(self, mass: np.ndarray) -> np.ndarray:
        return implicit_step(self.gen, self.dt, mass)

    def expect(self, values: np.ndarray) -> np.ndarray:
        """Adjoint of `diffuse`: conditional expectation over one step."""
        return implicit_step(adjoint(self.gen), self.dt, values)


def discretize(scenario: Scenario) -> dict[str, TechDiscretization]:
    out = {}
    for tech in scenario.technologies:
        grid = scenario.state_grids[tech.id]
        out[tech.id] = TechDiscretization(
            tech=tech,
            grid=grid,
            gen=generator_for(tech, grid),
            ages=age_structure(tech, scenario.dt, scenario.ramp_width),
            n_t=scenario.n_t,
            dt=scenario.dt,
        )
    return out


@dataclass
class MeasureFlow:
    """Discretized occupation and stopping measures for one technology.

    pre_occ[t, x]   potential-project occupation at time point t
    entry[t, x]     mass entering at decision point t (t < n_t)
    occ[t, a, x]    decided-plant occupation
    exit[t, a, x]   mass decommissioning at decision point t (t < n_t)

    The terminal lumps are views: pre_occ[n_t] is the mass expiring
    unentered, occ[n_t] the mass scrapped at the horizon.
    """

    tech_id: str
    pre_occ: np.ndarray
    entry: np.ndarray
    occ: np.ndarray
    exit: np.ndarray

    @property
    def n_t(self) -> int:
        return self.pre_occ.shape[0] - 1

    @property
    def terminal_expiry(self) -> np.ndarray:
        return self.pre_occ[-1]

    @property
    def terminal_scrap(self) -> np.ndarray:
        return self.occ[-1]

    def as_vector(self) -> np.ndarray:
        """Flatten into the LP variable ordering (pre_occ, entry, occ, exit)."""
        return np.concatenate(
            [self.pre_occ.ravel(), self.entry.ravel(), self.occ.ravel(), self.exit.ravel()]
        )

    @staticmethod
    def from_vector(disc: TechDiscretization, v: np.ndarray) -> "MeasureFlow":
        n_t, n_a, n_x = disc.n_t, disc.n_a, disc.n_x
        sizes = [(n_t + 1) * n_x, n_t * n_x, (n_t + 1) * n_a * n_x, n_t * n_a * n_x]
        parts = np.split(np.asarray(v, dtype=float), np.cumsum(sizes)[:-1])
        return MeasureFlow(
            tech_id=disc.tech.id,
            pre_occ=parts[0].reshape(n_t + 1, n_x),
            entry=parts[1].reshape(n_t, n_x),
            occ=parts[2].reshape(n_t + 1, n_a, n_x),
            exit=parts[3].reshape(n_t, n_a, n_x),
        )

    @staticmethod
    def zeros(disc: TechDiscretization) -> "MeasureFlow":
        n_t, n_a, n_x = disc.n_t, disc.n_a, disc.n_x
        return MeasureFlow(
            tech_id=disc.tech.id,
            pre_occ=np.zeros((n_t + 1, n_x)),
            entry=np.zeros((n_t, n_x)),
            occ=np.zeros((n_t + 1, n_a, n_x)),
            exit=np.zeros((n_t, n_a, n_x)),
        )

    def blend(self, other: "MeasureFlow", weight: float) -> "MeasureFlow":
        """Convex combination weight*other + (1-weight)*self."""
        w = float(weight)
        return MeasureFlow(
            tech_id=self.tech_id,
            pre_occ=w * other.pre_occ + (1 - w) * self.pre_occ,
            entry=w * other.entry + (1 - w) * self.entry,
            occ=w * other.occ + (1 - w) * self.occ,
            exit=w * other.exit + (1 - w) * self.exit,
        )

    def scaled(self, s: float) -> "MeasureFlow":
        return MeasureFlow(
            self.tech_id, s * self.pre_occ, s * self.entry, s * self.occ, s * self.exit
        )

    def min_value(self) -> float:
        return float(
            min(self.pre_occ.min(), self.entry.min(), self.occ.min(), self.exit.min())
        )

    def mass_residuals(self, nu0_hat: np.ndarray, nu0: np.ndarray) -> tuple[float, float]:
        """Deviations from the two total-mass accounting identities.

        First: all stops of potential mass (entries plus terminal
        expiry) must add up to the initial potential mass.  Second: all
        plant stops (exits plus terminal scrap) must add up to initial
        plants plus entries.
        """
        entries = float(self.entry.sum())
        res_pre = entries + float(self.terminal_expiry.sum()) - float(np.sum(nu0_hat))
        res_inst = (
            float(self.exit.sum())
            + float(self.terminal_scrap.sum())
            - float(np.sum(nu0))
            - entries
        )
        return res_pre, res_inst

    def to_csv(self, path) -> None:
        """Debug dump: one row per (t, a, x) cell with all four fields."""
        n_t1, n_a, n_x = self.occ.shape
        with open(path, "w") as fh:
            fh.write("t,a,x,m,mu,m_hat,mu_hat\n")
            for t in range(n_t1):
                for a in range(n_a):
                    for x in range(n_x):
                        mu = self.exit[t, a, x] if t < n_t1 - 1 else 0.0
                        mh = self.pre_occ[t, x] if a == 0 else 0.0
                        muh = self.entry[t, x] if (a == 0 and t < n_t1 - 1) else 0.0
                        fh.write(
                            f"{t},{a},{x},{self.occ[t, a, x]:.17g},{mu:.17g},"
                            f"{mh:.17g},{muh:.17g}\n"
                        )


@dataclass(frozen=True)
class ConstraintSystem:
    """Sparse equality system A v = b over a flattened MeasureFlow."""

    tech_id: str
    matrix: sp.csr_matrix
    rhs: np.ndarray

    def residual(self, flow: MeasureFlow) -> float:
        return float(np.max(np.abs(self.matrix @ flow.as_vector() - self.rhs)))


class _Indexer:
    """Column offsets of the four variable blocks in the LP ordering."""

    def __init__(self, disc: TechDiscretization):
        n_t, n_a, n_x = disc.n_t, disc.n_a, disc.n_x
        self.n_t, self.n_a, self.n_x = n_t, n_a, n_x
        self.off_pre = 0
        self.off_entry = (n_t + 1) * n_x
        self.off_occ = self.off_entry + n_t * n_x
        self.off_exit = self.off_occ + (n_t + 1) * n_a * n_x
        self.n_vars = self.off_exit + n_t * n_a * n_x

    def pre(self, t):  # slice of pre_occ[t, :]
        return self.off_pre + t * self.n_x

    def entry(self, t):
        return self.off_entry + t * self.n_x

    def occ(self, t, a):
        return self.off_occ + (t * self.n_a + a) * self.n_x

    def exit(self, t, a):
        return self.off_exit + (t * self.n_a + a) * self.n_x


def build_constraints(
    disc: TechDiscretization, nu0_hat: np.ndarray, nu0: np.ndarray
) -> ConstraintSystem:
    """Assemble the discrete Fokker-Planck equality system A v = b.

    Balance rows for steps t >= 1 are pre-multiplied by the implicit-step
    matrix M = I - dt*L_adj, which keeps the system tridiagonal-sparse
    without changing the feasible set (M is invertible):

        pre-entry   M (pre_occ[t] + entry[t]) = pre_occ[t-1]
        decided     M (occ[t,a'] + exit[t,a']) =
                        sum_{a -> a'} occ[t-1,a] + (a'==0) M entry[t]

    plus identity rows at t=0 seeding the initial measures, no entry at
    the horizon, and zero-occupation pins on the expired bucket.
    """
    nu0_hat = np.asarray(nu0_hat, dtype=float)
    nu0 = np.asarray(nu0, dtype=float)
    n_t, n_a, n_x = disc.n_t, disc.n_a, disc.n_x
    if nu0_hat.shape != (n_x,) or nu0.shape != (n_a, n_x):
        raise ConfigError(
            f"{disc.tech.id}: initial measure shapes {nu0_hat.shape}/{nu0.shape} do not "
            f"match grid ({n_x},)/({n_a},{n_x})"
        )
    ix = _Indexer(disc)
    M = disc.step_matrix().tocoo()
    ages = disc.ages

    rows, cols, vals = [], [], []
    rhs_chunks = []
    row0 = 0
    eye = np.arange(n_x)

    def put_eye(row_base, col_base, sign=1.0):
        rows.append(row_base + eye)
        cols.append(col_base + eye)
        vals.append(np.full(n_x, sign))

    def put_M(row_base, col_base, sign=1.0):
        rows.append(row_base + M.row)
        cols.append(col_base + M.col)
        vals.append(sign * M.data)

    # pre-entry block: one row per (t, x)
    for t in range(n_t + 1):
        if t == 0:
            put_eye(row0, ix.pre(0))
            put_eye(row0, ix.entry(0))
            rhs_chunks.append(nu0_hat)
        else:
            put_M(row0, ix.pre(t))
            if t < n_t:
                put_M(row0, ix.entry(t))
            put_eye(row0, ix.pre(t - 1), sign=-1.0)
            rhs_chunks.append(np.zeros(n_x))
        row0 += n_x

    # decided block: one row per (t, a, x)
    for t in range(n_t + 1):
        for a in range(n_a):
            if t == 0:
                put_eye(row0, ix.occ(0, a))
                put_eye(row0, ix.exit(0, a))
                if a == 0:
                    put_eye(row0, ix.entry(0), sign=-1.0)
                rhs_chunks.append(nu0[a])
            else:
                put_M(row0, ix.occ(t, a))
                if t < n_t:
                    put_M(row0, ix.exit(t, a))
                for b in ages.predecessors(a):
                    put_eye(row0, ix.occ(t - 1, b), sign=-1.0)
                if a == 0 and t < n_t:
                    put_M(row0, ix.entry(t), sign=-1.0)
                rhs_chunks.append(np.zeros(n_x))
            row0 += n_x

    # expired bucket may hold no mass before the horizon
    if ages.expired_bucket is not None:
        a = ages.expired_bucket
        for t in range(n_t):
            put_eye(row0, ix.occ(t, a))
            rhs_chunks.append(np.zeros(n_x))
            row0 += n_x

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row0, ix.n_vars),
    ).tocsr()
    return ConstraintSystem(disc.tech.id, matrix, np.concatenate(rhs_chunks))


def forward_evolve(
    disc: TechDiscretization,
    entry_control: np.ndarray,
    exit_control: np.ndarray,
    nu0_hat: np.ndarray,
    nu0: np.ndarray,
) -> MeasureFlow:
    """Evolve the initial measures under fractional stopping controls.

    entry_control[t, x] and exit_control[t, a, x] give the fraction of
    the mass arriving at that cell which stops there (t = 0..n_t-1).
    Expired-bucket mass always exits regardless of the control.  The
    result satisfies build_constraints exactly (same implicit steps).
    """
    n_t, n_a, n_x = disc.n_t, disc.n_a, disc.n_x
    entry_control = np.asarray(entry_control, dtype=float)
    exit_control = np.asarray(exit_control, dtype=float)
    if entry_control.shape != (n_t, n_x) or exit_control.shape != (n_t, n_a, n_x):
        raise InputError("control shapes must be (n_t, n_x) and (n_t, n_a, n_x)")
    for ctl in (entry_control, exit_control):
        if np.any(ctl < 0) or np.any(ctl > 1):
            raise InputError("controls must lie in [0, 1]")

    flow = MeasureFlow.zeros(disc)
    ages = disc.ages

    flow.entry[0] = entry_control[0] * nu0_hat
    flow.pre_occ[0] = nu0_hat - flow.entry[0]
    arrived = np.array(nu0, dtype=float)
    arrived[0] += flow.entry[0]
    for a in range(n_a):
        frac = exit_control[0, a] if a != ages.expired_bucket else 1.0
        flow.exit[0, a] = frac * arrived[a]
        flow.occ[0, a] = arrived[a] - flow.exit[0, a]

    for t in range(1, n_t + 1):
        drift_pre = disc.diffuse(flow.pre_occ[t - 1])
        if t < n_t:
            flow.entry[t] = entry_control[t] * drift_pre
            flow.pre_occ[t] = drift_pre - flow.entry[t]
        else:
            flow.pre_occ[t] = drift_pre

        inflow = np.zeros((n_a, n_x))
        for a in range(n_a):
            succ = ages.successor(a)
            if succ is not None:
                inflow[succ] += disc.diffuse(flow.occ[t - 1, a])
        if t < n_t:
            inflow[0] += flow.entry[t]
            for a in range(n_a):
                frac = exit_control[t, a] if a != ages.expired_bucket else 1.0
                flow.exit[t, a] = frac * inflow[a]
                flow.occ[t, a] = inflow[a] - flow.exit[t, a]
        else:
            flow.occ[t] = inflow
    return flow


def never_stop_flow(disc: TechDiscretization, nu0_hat, nu0) -> MeasureFlow:
    """Initial guess: nobody enters, nobody exits."""
    return forward_evolve(
        disc,
        np.zeros((disc.n_t, disc.n_x)),
        np.zeros((disc.n_t, disc.n_a, disc.n_x)),
        nu0_hat,
        nu0,
    )


def all_enter_flow(disc: TechDiscretization, nu0_hat, nu0) -> MeasureFlow:
    """Initial guess: every potential project enters immediately, nobody exits."""
    entry = np.zeros((disc.n_t, disc.n_x))
    entry[0] = 1.0
    return forward_evolve(disc, entry, np.zeros((disc.n_t, disc.n_a, disc.n_x)), nu0_hat, nu0)
