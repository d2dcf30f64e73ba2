"""Multi-time-step block system, its Hermitian embedding and exact solve."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class TimeBlockSystem:
    """``tilde_a x = rhs`` with identity diagonal blocks and ``-C`` below them."""

    C: sp.csr_matrix
    n_steps: int
    tilde_a: sp.csr_matrix
    rhs: Optional[np.ndarray] = None

    @property
    def block_dim(self) -> int:
        return self.C.shape[0]

    @property
    def dim(self) -> int:
        return (self.n_steps + 1) * self.block_dim

    def with_rhs(self, phi0) -> "TimeBlockSystem":
        return TimeBlockSystem(self.C, self.n_steps, self.tilde_a, assemble_b(phi0, self.n_steps))


def assemble_tilde_a(C, n_steps: int) -> TimeBlockSystem:
    C = sp.csr_matrix(C)
    if C.shape[0] != C.shape[1]:
        raise ValueError("Carleman matrix must be square")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    sub = sp.diags([np.ones(n_steps)], [-1], shape=(n_steps + 1, n_steps + 1), format="csr")
    tilde_a = (sp.identity((n_steps + 1) * C.shape[0], format="csr") - sp.kron(sub, C, format="csr")).tocsr()
    tilde_a.eliminate_zeros()
    tilde_a.sort_indices()
    return TimeBlockSystem(C, int(n_steps), tilde_a)


def assemble_b(phi0, n_steps: int) -> np.ndarray:
    phi0 = np.asarray(phi0, dtype=float).ravel()
    b = np.zeros((n_steps + 1) * phi0.size)
    b[: phi0.size] = phi0
    return b


def build_time_block_system(C, phi0, n_steps: int) -> TimeBlockSystem:
    return assemble_tilde_a(C, n_steps).with_rhs(phi0)


def classical_solve(system: TimeBlockSystem) -> np.ndarray:
    """Forward substitution: block ``k`` of the solution is ``C^k phi0``."""
    if system.rhs is None:
        raise ValueError("system has no right-hand side")
    d = system.block_dim
    blocks = system.rhs.reshape(system.n_steps + 1, d)
    x = np.empty_like(blocks)
    x[0] = blocks[0]
    for k in range(1, system.n_steps + 1):
        x[k] = blocks[k] + system.C @ x[k - 1]
    return x.ravel()


@dataclass(frozen=True)
class HermitianEmbedding:
    """Symmetric ``[[0, tilde_a^T], [tilde_a, 0]]`` padded to a power of two.

    Padded diagonal entries alternate +1/-1 so the spectrum stays symmetric
    and the padded block is invertible; the padded rhs entries are zero.
    """

    system: TimeBlockSystem
    a_matrix: sp.csr_matrix
    rhs: np.ndarray
    n_b: int
    padding_dim: int

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def unpadded_dim(self) -> int:
        return 2 * self.system.dim

    def embed_solution(self, x) -> np.ndarray:
        """``(x, 0, padding)`` for a solution of the block system."""
        out = np.zeros(self.dim)
        out[: self.system.dim] = x
        return out

    def solution_part(self, v) -> np.ndarray:
        """Time blocks of the ``x`` half of a register vector, shape ``(N_t + 1, d)``."""
        s = self.system
        return np.asarray(v)[: s.dim].reshape(s.n_steps + 1, s.block_dim)


def hermitize_and_pad(system: TimeBlockSystem) -> HermitianEmbedding:
    if system.rhs is None:
        raise ValueError("system has no right-hand side")
    n = system.dim
    T = system.tilde_a
    core = sp.bmat([[None, T.T], [T, None]], format="csr")
    unpadded = 2 * n
    n_b = max(1, math.ceil(math.log2(unpadded)))
    padding = 2**n_b - unpadded
    if padding:
        signs = np.where(np.arange(padding) % 2 == 0, 1.0, -1.0)
        a = sp.block_diag([core, sp.diags(signs)], format="csr")
    else:
        a = core
    a.sort_indices()
    rhs = np.zeros(2**n_b)
    rhs[n:unpadded] = system.rhs
    return HermitianEmbedding(system, a, rhs, n_b, padding)


# --- sparse triplet export -------------------------------------------------

def write_triplets(matrix, path: Union[str, Path]) -> None:
    """Write ``# rows cols nnz`` then one ``row col value`` line per entry (0-based)."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"# {m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")


def read_triplets(path: Union[str, Path]) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        n_rows, n_cols, nnz = (int(x) for x in header)
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"expected {nnz} entries, found {data.shape[0]}")
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n_rows, n_cols))
