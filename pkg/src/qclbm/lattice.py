"""D2Q9 lattice Boltzmann reference solver.

Populations are stored as arrays of shape ``(ny, nx, 9)`` so that a C-order
ravel gives the flat index ``k = (y * nx + x) * 9 + i`` used by every
vectorized operator in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple, Union

import numpy as np

Q = 9

_DIRECTIONS = ((0, 0), (1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))
_WEIGHTS = (Fraction(4, 9),) + (Fraction(1, 9),) * 4 + (Fraction(1, 36),) * 4


@dataclass(frozen=True)
class VelocitySet:
    directions: Tuple[Tuple[int, int], ...]
    weights_exact: Tuple[Fraction, ...]
    sound_speed_sq_exact: Fraction

    @property
    def e(self) -> np.ndarray:
        return np.array(self.directions, dtype=np.int64)

    @property
    def w(self) -> np.ndarray:
        return np.array([float(x) for x in self.weights_exact])

    @property
    def cs2(self) -> float:
        return float(self.sound_speed_sq_exact)

    @property
    def opposite(self) -> np.ndarray:
        lookup = {d: i for i, d in enumerate(self.directions)}
        return np.array([lookup[(-dx, -dy)] for dx, dy in self.directions])


D2Q9 = VelocitySet(_DIRECTIONS, _WEIGHTS, Fraction(1, 3))

E = D2Q9.e
W = D2Q9.w
CS2 = D2Q9.cs2
OPPOSITE = D2Q9.opposite


@dataclass(frozen=True)
class Periodic:
    kind = "pbc"


@dataclass(frozen=True)
class BounceBack:
    kind = "bounceback"


@dataclass(frozen=True)
class LidDriven:
    """Bounce-back box whose left wall (x = 0) slides with ``v_lid``."""

    v_lid: Tuple[float, float] = (0.0, 0.075)
    kind = "liddriven"

    def __post_init__(self):
        v = tuple(float(c) for c in self.v_lid)
        if len(v) != 2 or not all(np.isfinite(v)):
            raise ValueError("v_lid must be a finite 2-vector")
        if np.hypot(*v) >= np.sqrt(CS2):
            raise ValueError("lid velocity must be subsonic (|v_lid| < c_s)")
        object.__setattr__(self, "v_lid", v)


Boundary = Union[Periodic, BounceBack, LidDriven]


def make_boundary(kind: str, v_lid=(0.0, 0.075)) -> Boundary:
    kind = kind.lower().replace("-", "").replace("_", "")
    if kind in ("pbc", "periodic"):
        return Periodic()
    if kind in ("bounceback", "bb"):
        return BounceBack()
    if kind in ("liddriven", "lid"):
        return LidDriven(tuple(v_lid))
    raise ValueError(f"unknown boundary kind {kind!r}")


@dataclass(frozen=True)
class LatticeGrid:
    nx: int
    ny: int
    boundary: Boundary = field(default_factory=Periodic)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("grid dimensions must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs nx, ny >= 2")

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.ny, self.nx, Q)

    @property
    def size(self) -> int:
        return self.n_sites * Q

    def site_index(self, x: int, y: int) -> int:
        if not (0 <= x < self.nx and 0 <= y < self.ny):
            raise IndexError(f"site ({x}, {y}) outside {self.nx}x{self.ny} grid")
        return y * self.nx + x

    def site_coords(self, n: int) -> Tuple[int, int]:
        if not 0 <= n < self.n_sites:
            raise IndexError(f"site index {n} out of range")
        return n % self.nx, n // self.nx

    def lid_sites(self):
        """Left-wall sites that use the moving-wall rule (corners excluded)."""
        if not isinstance(self.boundary, LidDriven):
            return []
        return [(0, y) for y in range(1, self.ny - 1)]


@dataclass(frozen=True)
class DistributionField:
    values: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 3 or v.shape[2] != Q:
            raise ValueError(f"expected populations of shape (ny, nx, 9), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("distribution contains non-finite entries")
        if self.time_index < 0:
            raise ValueError("time_index must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_flat(cls, flat, grid: LatticeGrid, time_index: int = 0) -> "DistributionField":
        return cls(np.asarray(flat, dtype=float).reshape(grid.shape), time_index)

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    def flat(self) -> np.ndarray:
        return self.values.ravel().copy()

    def mass(self) -> float:
        return float(self.values.sum())


def _check_grid(f: DistributionField, grid: LatticeGrid) -> None:
    if f.values.shape != grid.shape:
        raise ValueError(f"field shape {f.values.shape} does not match grid {grid.shape}")


# --- macroscopic moments ----------------------------------------------------

def density(f: DistributionField, site: Tuple[int, int]) -> float:
    x, y = site
    return float(f.values[y, x].sum())


def velocity(f: DistributionField, site: Tuple[int, int]) -> np.ndarray:
    x, y = site
    pops = f.values[y, x]
    rho = pops.sum()
    if rho == 0:
        raise ZeroDivisionError("degenerate density at site (%d, %d)" % (x, y))
    return pops @ E / rho


def density_field(f: DistributionField) -> np.ndarray:
    return f.values.sum(axis=2)


def momentum_field(f: DistributionField) -> np.ndarray:
    return f.values @ E.astype(float)


def velocity_field(f: DistributionField) -> np.ndarray:
    rho = density_field(f)
    if np.any(rho == 0):
        raise ZeroDivisionError("degenerate density")
    return momentum_field(f) / rho[..., None]


def vorticity(f: DistributionField) -> np.ndarray:
    """Central-difference curl ``du_y/dx - du_x/dy`` of the velocity field."""
    u = velocity_field(f)
    return np.gradient(u[..., 1], axis=1) - np.gradient(u[..., 0], axis=0)


def equilibrium(rho, u) -> np.ndarray:
    """Second-order Maxwell-Boltzmann equilibrium.

    Broadcasts: ``rho`` of shape ``S`` with ``u`` of shape ``S + (2,)`` gives
    an array of shape ``S + (9,)``.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    eu = u @ E.T.astype(float)
    uu = np.sum(u * u, axis=-1)[..., None]
    return W * rho[..., None] * (1 + eu / CS2 + eu**2 / (2 * CS2**2) - uu / (2 * CS2))


# --- collision and streaming ------------------------------------------------

def check_omega(omega: float) -> float:
    omega = float(omega)
    if not 0 < omega < 2:
        raise ValueError(f"unstable relaxation: omega={omega} outside (0, 2)")
    return omega


def collide_bgk(f: DistributionField, omega: float) -> DistributionField:
    omega = check_omega(omega)
    rho = density_field(f)
    if np.any(rho == 0):
        raise ZeroDivisionError("degenerate density")
    u = momentum_field(f) / rho[..., None]
    feq = equilibrium(rho, u)
    return DistributionField((1 - omega) * f.values + omega * feq, f.time_index)


def _bounce_stream(pops: np.ndarray) -> np.ndarray:
    ny, nx, _ = pops.shape
    out = np.empty_like(pops)
    ys, xs = np.mgrid[0:ny, 0:nx]
    for i, (dx, dy) in enumerate(E):
        tx, ty = xs + dx, ys + dy
        inside = (tx >= 0) & (tx < nx) & (ty >= 0) & (ty < ny)
        out[ty[inside], tx[inside], i] = pops[ys[inside], xs[inside], i]
        out[ys[~inside], xs[~inside], OPPOSITE[i]] = pops[ys[~inside], xs[~inside], i]
    return out


def stream(f: DistributionField, grid: LatticeGrid) -> DistributionField:
    _check_grid(f, grid)
    pops = f.values
    bc = grid.boundary
    if isinstance(bc, Periodic):
        out = np.empty_like(pops)
        for i, (dx, dy) in enumerate(E):
            out[..., i] = np.roll(pops[..., i], shift=(dy, dx), axis=(0, 1))
    else:
        out = _bounce_stream(pops)
        if isinstance(bc, LidDriven):
            v = np.asarray(bc.v_lid)
            # wall density is the plain bounce-back density at the node, so the
            # moving-wall rule stays linear in the post-collision populations
            for x, y in grid.lid_sites():
                rho_w = out[y, x].sum()
                for i in np.flatnonzero(E[:, 0] + x < 0):
                    out[y, x, OPPOSITE[i]] -= 2 * W[i] * (E[i] @ v) / CS2 * rho_w
    return DistributionField(out, f.time_index + 1)


def lbm_step(f: DistributionField, grid: LatticeGrid, omega: float) -> DistributionField:
    return stream(collide_bgk(f, omega), grid)


def run_lbm(f: DistributionField, grid: LatticeGrid, omega: float, steps: int):
    """Trajectory ``[f(0), ..., f(steps)]``."""
    traj = [f]
    for _ in range(steps):
        f = lbm_step(f, grid, omega)
        traj.append(f)
    return traj


# --- initial conditions -----------------------------------------------------

def init_kolmogorov(grid: LatticeGrid, A_x=0.3, A_y=0.3, k_x=1, k_y=1) -> DistributionField:
    """Sinusoidal density profile ``w_i [1 + A_x cos(2 pi k_x y / N_y) + A_y cos(2 pi k_y x / N_x)]``.

    ``k_x`` deliberately modulates along ``y`` and ``k_y`` along ``x``;
    this pairing is part of the model definition and is not swapped.
    """
    ys, xs = np.mgrid[0 : grid.ny, 0 : grid.nx]
    profile = 1 + A_x * np.cos(2 * np.pi * k_x * ys / grid.ny) + A_y * np.cos(2 * np.pi * k_y * xs / grid.nx)
    pops = profile[..., None] * W
    if np.any(pops <= 0):
        raise ValueError("unphysical amplitude: initial populations must be positive")
    return DistributionField(pops)


def init_lid(grid: LatticeGrid, v_lid=None, A_x=None, A_y=None, k_x=0, k_y=0) -> DistributionField:
    """Fluid at rest with the lid velocity imprinted on the wall-adjacent column.

    Wall-adjacent nodes get ``w_i [1 + A_x e_ix cos(2 pi k_x y / N_y) + A_y e_iy cos(2 pi k_y x / N_x)]``
    with amplitudes defaulting to ``v_lid / c_s^2`` (0.225 for ``v_lid = 0.075``),
    which reproduces the lid velocity exactly through the first moment.
    """
    if v_lid is None:
        if not isinstance(grid.boundary, LidDriven):
            raise ValueError("init_lid needs a LidDriven grid or an explicit v_lid")
        v_lid = grid.boundary.v_lid
    v_lid = np.asarray(v_lid, dtype=float)
    A_x = v_lid[0] / CS2 if A_x is None else A_x
    A_y = v_lid[1] / CS2 if A_y is None else A_y
    pops = np.tile(W, (grid.ny, grid.nx, 1))
    ys = np.arange(grid.ny)
    x = 0
    mod_x = A_x * np.cos(2 * np.pi * k_x * ys / grid.ny)[:, None] * E[:, 0]
    mod_y = A_y * np.cos(2 * np.pi * k_y * x / grid.nx) * E[:, 1]
    pops[:, x, :] = W * (1 + mod_x + mod_y)
    if np.any(pops <= 0):
        raise ValueError("unphysical amplitude: initial populations must be positive")
    return DistributionField(pops)


def initial_field(grid: LatticeGrid, **params) -> DistributionField:
    if isinstance(grid.boundary, LidDriven):
        return init_lid(grid, **params)
    return init_kolmogorov(grid, **params)


def kinematic_viscosity(omega: float) -> float:
    return CS2 * (1 / omega - 0.5)


def reynolds_number(omega: float, length: float, speed: float) -> float:
    """Derived label ``u L / nu`` with ``nu = c_s^2 (1/omega - 1/2)``."""
    return speed * length / kinematic_viscosity(omega)
