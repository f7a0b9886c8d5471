"""Finite-difference generator matrices for the technology state processes.

Conventional cost states follow a mean-reverting square-root diffusion
on [0, x_max]; renewable capacity factors follow a mean-reverting
diffusion on [0, 1] whose noise vanishes at both endpoints.  Both are
discretized as tridiagonal monotone schemes: central differences where
the grid resolves the drift, one-sided (upwind) drift otherwise, so
off-diagonals stay nonnegative and row sums stay exactly zero.

Measures are stored as mass per node, so the discrete pairing is the
plain dot product and the adjoint is the matrix transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import StateGrid, TechnologySpec

_BANDS = ("lower", "diag", "upper")


@dataclass(frozen=True)
class GeneratorMatrix:
    """Tridiagonal generator (or its adjoint) on a state grid.

    `lower[j]` couples node j to j-1, `upper[j]` to j+1; lower[0] and
    upper[-1] are zero.  `drift` and `diffusion` keep the coefficient
    vectors used to build the rows.
    """

    tech_id: str
    nodes: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    drift: np.ndarray
    diffusion: np.ndarray
    is_adjoint: bool = False

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Matrix-vector product with the tridiagonal operator."""
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.lower[1:], k=-1)
            + np.diag(self.upper[:-1], k=1)
        )

    def row_sums(self) -> np.ndarray:
        out = self.diag.copy()
        out[1:] += self.lower[1:]
        out[:-1] += self.upper[:-1]
        return out


def _assemble(tech: TechnologySpec, grid: StateGrid, drift: np.ndarray, diffusion: np.ndarray) -> GeneratorMatrix:
    """Monotone tridiagonal rows from drift/diffusion coefficient vectors.

    Central drift is used where diffusion/h^2 covers |drift|/2h; the
    fallback is upwind in the drift direction.  An outward drift at a
    boundary node is dropped (reflecting wall).
    """
    n = grid.n
    h = grid.spacing
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.zeros(n)

    dif = diffusion / (h * h)
    for j in range(n):
        b = drift[j]
        at_left = j == 0
        at_right = j == n - 1
        d = 0.0 if (at_left or at_right) else dif[j]
        lo = d
        up = d
        if d >= abs(b) / (2.0 * h) and not (at_left or at_right):
            lo -= b / (2.0 * h)
            up += b / (2.0 * h)
        elif b > 0 and not at_right:
            up += b / h
        elif b < 0 and not at_left:
            lo -= b / h
        # else: outward drift at a wall, no flux
        lower[j] = lo if j > 0 else 0.0
        upper[j] = up if j < n - 1 else 0.0
        diag[j] = -(lower[j] + upper[j])

    return GeneratorMatrix(
        tech_id=tech.id,
        nodes=grid.nodes.copy(),
        lower=lower,
        diag=diag,
        upper=upper,
        drift=drift,
        diffusion=diffusion,
    )


def cir_generator(tech: TechnologySpec, grid: StateGrid) -> GeneratorMatrix:
    """Generator of the conventional cost process on [0, x_max].

    Drift mean_reversion*(level - x), diffusion vol^2*x/2.  The x=0 row
    is drift-only inflow (diffusion vanishes there); the outer boundary
    reflects.
    """
    if not tech.is_conventional:
        raise ConfigError(f"{tech.id}: square-root cost generator needs a conventional tech")
    if tech.vol <= 0:
        raise ConfigError(f"{tech.id}: vol must be > 0")
    x = grid.nodes
    drift = tech.mean_reversion * (tech.level - x)
    diffusion = 0.5 * tech.vol**2 * x
    return _assemble(tech, grid, drift, diffusion)


def jacobi_generator(tech: TechnologySpec, grid: StateGrid) -> GeneratorMatrix:
    """Generator of the renewable capacity-factor process on [0, 1].

    Diffusion vol^2*x(1-x)/2 vanishes at both endpoints, which get
    drift-only rows (inward, since level lies in (0,1)).
    """
    if tech.is_conventional:
        raise ConfigError(f"{tech.id}: capacity-factor generator needs a renewable tech")
    if not 0.0 < tech.level < 1.0:
        raise ConfigError(f"{tech.id}: level must be in (0,1)")
    x = grid.nodes
    if x[0] < -1e-12 or x[-1] > 1.0 + 1e-12:
        raise ConfigError(f"{tech.id}: renewable grid must lie within [0,1]")
    drift = tech.mean_reversion * (tech.level - x)
    diffusion = 0.5 * tech.vol**2 * x * (1.0 - x)
    return _assemble(tech, grid, drift, diffusion)


def adjoint(gen: GeneratorMatrix) -> GeneratorMatrix:
    """Transpose in the mass pairing: <L u, m> == <u, adjoint(L) m> exactly."""
    return GeneratorMatrix(
        tech_id=gen.tech_id,
        nodes=gen.nodes,
        lower=np.concatenate([[0.0], gen.upper[:-1]]),
        diag=gen.diag,
        upper=np.concatenate([gen.lower[1:], [0.0]]),
        drift=gen.drift,
        diffusion=gen.diffusion,
        is_adjoint=not gen.is_adjoint,
    )


def generator_for(tech: TechnologySpec, grid: StateGrid) -> GeneratorMatrix:
    return cir_generator(tech, grid) if tech.is_conventional else jacobi_generator(tech, grid)
