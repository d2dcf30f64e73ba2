"""Carleman-linearized LBM operators at truncation order 1 and 2."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .lattice import (
    CS2,
    E,
    OPPOSITE,
    Q,
    W,
    BounceBack,
    DistributionField,
    LatticeGrid,
    LidDriven,
    Periodic,
)


def _check_carleman_omega(omega: float) -> float:
    # omega = 0 is allowed here: it is the pure-streaming limit of the operator
    omega = float(omega)
    if not 0 <= omega < 2:
        raise ValueError(f"unstable relaxation: omega={omega} outside [0, 2)")
    return omega


def build_collision_first(omega: float) -> np.ndarray:
    """Linear collision block ``D_ij = (1-w) d_ij + w w_i (1 + e_i.e_j / c_s^2)``."""
    omega = _check_carleman_omega(omega)
    ee = (E @ E.T).astype(float)
    return (1 - omega) * np.eye(Q) + omega * W[:, None] * (1 + ee / CS2)


def build_collision_second(omega: float) -> np.ndarray:
    """Quadratic collision tensor ``E_ijk`` (second derivative of the collision map)."""
    omega = _check_carleman_omega(omega)
    ee = (E @ E.T).astype(float)
    return (omega * W / CS2**2)[:, None, None] * (
        ee[:, :, None] * ee[:, None, :] - CS2 * ee[None, :, :]
    )


@dataclass(frozen=True)
class StreamingMatrix:
    matrix: sp.csr_matrix
    kind: str

    def __matmul__(self, other):
        return self.matrix @ other


def _bounce_source(grid: LatticeGrid, x: int, y: int, i: int):
    """Column feeding row ``(n, i)`` under plain bounce-back, as (site, direction)."""
    sx, sy = x - E[i, 0], y - E[i, 1]
    if 0 <= sx < grid.nx and 0 <= sy < grid.ny:
        return grid.site_index(sx, sy), i
    return grid.site_index(x, y), OPPOSITE[i]


def build_streaming(grid: LatticeGrid) -> StreamingMatrix:
    """Sparse streaming operator acting on ``k = site * 9 + direction`` vectors."""
    bc = grid.boundary
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    lid = set(grid.lid_sites())
    v = np.asarray(bc.v_lid) if isinstance(bc, LidDriven) else None
    for y in range(grid.ny):
        for x in range(grid.nx):
            n = grid.site_index(x, y)
            entries = {}
            for i in range(Q):
                k = n * Q + i
                if isinstance(bc, Periodic):
                    m = grid.site_index((x - E[i, 0]) % grid.nx, (y - E[i, 1]) % grid.ny)
                    src = (m, i)
                else:
                    src = _bounce_source(grid, x, y, i)
                entries[k] = {src[0] * Q + src[1]: 1.0}
            if (x, y) in lid:
                # rho_w row: sum of the plain bounce-back sources of every slot at n
                rho_w_cols = [next(iter(entries[n * Q + j])) for j in range(Q)]
                for i in range(Q):
                    if E[i, 0] != -1:
                        continue
                    coef = -2 * W[i] * (E[i] @ v) / CS2
                    if coef == 0:
                        continue
                    row = entries[n * Q + OPPOSITE[i]]
                    for col in rho_w_cols:
                        row[col] = row.get(col, 0.0) + coef
            for k in sorted(entries):
                for col in sorted(entries[k]):
                    rows.append(k)
                    cols.append(col)
                    vals.append(entries[k][col])
    size = grid.size
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    mat.sort_indices()
    return StreamingMatrix(mat, bc.kind)


def collision_blockdiag(D: np.ndarray, n_sites: int) -> sp.csr_matrix:
    return sp.kron(sp.identity(n_sites, format="csr"), sp.csr_matrix(D), format="csr")


def carleman_matrix_first(grid: LatticeGrid, omega: float) -> sp.csr_matrix:
    """First-order Carleman matrix ``S . blockdiag(D)``."""
    S = build_streaming(grid).matrix
    C = (S @ collision_blockdiag(build_collision_first(omega), grid.n_sites)).tocsr()
    C.sort_indices()
    return C


@dataclass(frozen=True)
class CarlemanSystem:
    """Operators for one Carleman evolution.

    Order 2 keeps only the local blocks ``D``, ``E`` and the sparse ``S``;
    the Kronecker products acting on the pair variables are never formed.
    """

    grid: LatticeGrid
    omega: float
    order: int
    D: np.ndarray
    E: np.ndarray
    S: sp.csr_matrix
    C1: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.grid.size


def build_carleman_system(grid: LatticeGrid, omega: float, order: int = 1) -> CarlemanSystem:
    if order not in (1, 2):
        raise ValueError("Carleman order must be 1 or 2")
    D = build_collision_first(omega)
    S = build_streaming(grid).matrix
    C1 = (S @ collision_blockdiag(D, grid.n_sites)).tocsr()
    C1.sort_indices()
    return CarlemanSystem(grid, float(omega), order, D, build_collision_second(omega), S, C1)


@dataclass(frozen=True)
class CarlemanState:
    """Truncated Carleman state.

    For order 2 the pair variables ``g = h (x) h`` are kept as the single
    factor ``h``; ``g_dense`` is only populated by the small-lattice oracle.
    """

    f: np.ndarray
    h: Optional[np.ndarray] = None
    g_dense: Optional[np.ndarray] = None
    time_index: int = 0

    @classmethod
    def from_field(cls, field: DistributionField, order: int = 1, dense: bool = False) -> "CarlemanState":
        f = field.flat()
        if order == 1:
            return cls(f, time_index=field.time_index)
        g = np.kron(f, f) if dense else None
        return cls(f, f.copy(), g, field.time_index)

    def g_factored(self) -> np.ndarray:
        return np.kron(self.h, self.h)


def quadratic_collision(E_tensor: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Site-local second-order collision term ``sum_jk E_ijk g_jk(n, n)``.

    ``pairs`` holds the same-site products with shape ``(L, 9, 9)``. ``E`` is
    contracted as is, without a 1/2 Taylor factor.
    """
    return np.einsum("ijk,njk->ni", E_tensor, pairs)


def _step_order2(state: CarlemanState, system: CarlemanSystem) -> CarlemanState:
    L = system.grid.n_sites
    h = state.h.reshape(L, Q)
    pairs = h[:, :, None] * h[:, None, :]
    f_star = (state.f.reshape(L, Q) @ system.D.T + quadratic_collision(system.E, pairs)).ravel()
    f_new = system.S @ f_star
    return CarlemanState(f_new, system.C1 @ state.h, None, state.time_index + 1)


def evolve_carleman(state: CarlemanState, system: CarlemanSystem, steps: int) -> List[CarlemanState]:
    """Trajectory ``[state(0), ..., state(steps)]``."""
    traj = [state]
    for _ in range(steps):
        if system.order == 1:
            state = CarlemanState(system.C1 @ state.f, time_index=state.time_index + 1)
        else:
            state = _step_order2(state, system)
        traj.append(state)
    return traj


def dense_second_order_operators(system: CarlemanSystem):
    """Materialized ``(S (x) S)(D (x) D)`` and the same-site ``E`` contraction.

    Memory grows as ``(9 L)^2``; intended for lattices up to 4x4.
    """
    L = system.grid.n_sites
    d = system.dim
    if d > 16 * Q:
        raise ValueError("dense second-order operators are limited to 16 sites")
    Dbd = collision_blockdiag(system.D, L)
    G = (sp.kron(system.S, system.S) @ sp.kron(Dbd, Dbd)).tocsr()
    rows, cols, vals = [], [], []
    for n in range(L):
        for i in range(Q):
            for j in range(Q):
                for k in range(Q):
                    e = system.E[i, j, k]
                    if e != 0.0:
                        rows.append(n * Q + i)
                        cols.append((n * Q + j) * d + n * Q + k)
                        vals.append(e)
    Emat = sp.csr_matrix((vals, (rows, cols)), shape=(d, d * d))
    return G, Emat


def evolve_dense_second_order(field: DistributionField, system: CarlemanSystem, steps: int) -> List[CarlemanState]:
    """Reference order-2 evolution on the full pair vector (small lattices only)."""
    G, Emat = dense_second_order_operators(system)
    Dbd = collision_blockdiag(system.D, system.grid.n_sites)
    state = CarlemanState.from_field(field, order=2, dense=True)
    f, g = state.f, state.g_dense
    traj = [CarlemanState(f, None, g, field.time_index)]
    for t in range(steps):
        f = system.S @ (Dbd @ f + Emat @ g)
        g = G @ g
        traj.append(CarlemanState(f, None, g, field.time_index + t + 1))
    return traj


def carleman_trajectory(field: DistributionField, grid: LatticeGrid, omega: float, order: int, steps: int) -> np.ndarray:
    """Population trajectory of shape ``(steps + 1, 9 L)``."""
    system = build_carleman_system(grid, omega, order)
    traj = evolve_carleman(CarlemanState.from_field(field, order), system, steps)
    return np.array([s.f for s in traj])


def rmse(f_carleman, f_lbm) -> float:
    """Direction-averaged RMS of the relative deviation ``1 - f_C / f_LBM``."""
    a = np.asarray(getattr(f_carleman, "values", f_carleman), dtype=float)
    b = np.asarray(getattr(f_lbm, "values", f_lbm), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    a = a.reshape(-1, Q)
    b = b.reshape(-1, Q)
    if np.any(b == 0):
        raise ZeroDivisionError("undefined ratio: reference population is zero")
    per_dir = np.sqrt(np.mean((1 - a / b) ** 2, axis=0))
    return float(per_dir.mean())


__all__ = [
    "BounceBack",
    "CarlemanState",
    "CarlemanSystem",
    "StreamingMatrix",
    "build_carleman_system",
    "build_collision_first",
    "build_collision_second",
    "build_streaming",
    "carleman_matrix_first",
    "carleman_trajectory",
    "evolve_carleman",
    "evolve_dense_second_order",
    "rmse",
]
