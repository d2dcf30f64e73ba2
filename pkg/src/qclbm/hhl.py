"""Exact emulation of HHL with spectrum-driven controlled rotations.

The normative path works in the eigenbasis of the system matrix: the clock
register distribution of every eigencomponent is the closed-form QPE kernel,
so no circuit is ever built. :func:`brute_force_oracle` builds the full
register state gate by gate and serves as the cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .linsys import HermitianEmbedding, classical_solve
from .spectra import Spectrum


class RotationError(ValueError):
    pass


class PostSelectionError(RuntimeError):
    pass


# --- clock register arithmetic ------------------------------------------------

def clock_minimum(spectrum) -> int:
    """``max(1, ceil(log2(ceil(lambda_max / lambda_min))))`` over nonzero eigenvalue magnitudes."""
    ev = np.abs(np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float))
    pos = ev[ev > 0]
    if pos.size == 0:
        raise ValueError("spectrum has no nonzero eigenvalue")
    ratio = math.ceil(pos.max() / pos.min())
    return max(1, math.ceil(math.log2(ratio)))


def evolution_times(n_clock: int, lambda_max: float) -> List[float]:
    """Hamiltonian-simulation times ``2^q * 2 pi / (4 lambda_max)`` for each clock qubit ``q``."""
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    return [2**q * 2 * math.pi / (4 * lambda_max) for q in range(n_clock)]


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def binary_eigenvalue(lam: float, lambda_max: float, n_clock: int) -> Tuple[int, int]:
    """Signed clock integer ``round(2^n lam / (4 lambda_max))`` and its register value."""
    if abs(lam) > lambda_max * (1 + 1e-12):
        raise ValueError(f"|lambda|={abs(lam)} exceeds lambda_max={lambda_max}")
    lam_bar = int(_round_half_away(2**n_clock * lam / (4 * lambda_max)))
    if lam_bar == 0:
        raise ValueError("insufficient clock resolution: eigenvalue rounds to zero")
    return lam_bar, lam_bar % 2**n_clock


def rotation_angle(lambda_bar: int, c_p: float = 1.0) -> float:
    if lambda_bar == 0:
        raise RotationError("rotation undefined for a zero clock value")
    ratio = c_p / lambda_bar
    if abs(ratio) > 1:
        raise RotationError(f"rotation undefined: |c_p / lambda_bar| = {abs(ratio):g} > 1")
    return math.asin(ratio)


@dataclass(frozen=True)
class RotationTable:
    """Clock value -> ancilla angle; clock values missing from the table get no rotation."""

    n_clock: int
    c_p: float
    angles: Dict[int, float]
    lambda_bars: Dict[int, int]
    n_unresolved: int = 0

    def sin_vector(self) -> np.ndarray:
        s = np.zeros(2**self.n_clock)
        for k, theta in self.angles.items():
            s[k] = math.sin(theta)
        return s


def build_rotation_table(eigenvalues, lambda_max: float, n_clock: int, c_p: float = 1.0) -> RotationTable:
    """Rotations at the distinct clock values hit by ``eigenvalues``.

    Eigenvalues whose binary value rounds to zero cannot be rotated; they are
    counted in ``n_unresolved`` and left without a rotation.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if np.any(np.abs(ev) > lambda_max * (1 + 1e-12)):
        raise ValueError("eigenvalue magnitude exceeds lambda_max")
    bars = _round_half_away(2**n_clock * ev / (4 * lambda_max)).astype(np.int64)
    unresolved = int(np.count_nonzero(bars == 0))
    angles, lambda_bars = {}, {}
    for lam_bar in sorted(set(bars[bars != 0].tolist())):
        k = lam_bar % 2**n_clock
        angles[k] = rotation_angle(lam_bar, c_p)
        lambda_bars[k] = lam_bar
    return RotationTable(n_clock, float(c_p), angles, lambda_bars, unresolved)


def qpe_kernel(phi, n_clock: int) -> np.ndarray:
    """Exact QPE amplitudes ``alpha_k = 2^-n sum_y exp(2 pi i y (phi - k / 2^n))``.

    ``phi`` may be an array; the result has shape ``phi.shape + (2^n,)``.
    """
    N = 2**n_clock
    phi = np.asarray(phi, dtype=float)
    delta = phi[..., None] - np.arange(N) / N
    s = np.sin(np.pi * delta)
    exact = np.abs(s) < 1e-15
    # at integer delta the ratio tends to cos(pi N delta) / cos(pi delta) = +-1
    limit = np.cos(np.pi * N * delta) / np.cos(np.pi * delta)
    ratio = np.where(exact, limit, np.sin(np.pi * N * delta) / (N * np.where(exact, 1.0, s)))
    return np.exp(1j * np.pi * (N - 1) * delta) * ratio


def qpe_weights(phi, n_clock: int) -> np.ndarray:
    """``|alpha_k|^2`` (Fejer kernel); rows sum to one."""
    N = 2**n_clock
    phi = np.asarray(phi, dtype=float)
    delta = phi[..., None] - np.arange(N) / N
    s = np.sin(np.pi * delta)
    exact = np.abs(s) < 1e-15
    return np.where(exact, 1.0, (np.sin(np.pi * N * delta) / (N * np.where(exact, 1.0, s))) ** 2)


def fidelity_error(state_a, state_b) -> float:
    a = np.asarray(state_a)
    b = np.asarray(state_b)
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1) > 1e-8:
            raise ValueError("fidelity_error expects unit-norm states")
    return float(max(0.0, 1 - abs(np.vdot(a, b)) ** 2))


def _normalized(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def block_fidelity_errors(embedding: HermitianEmbedding, state, x_exact) -> List[float]:
    """Per-time-block fidelity error on the ``x`` half of the register."""
    got = embedding.solution_part(state)
    ref = embedding.solution_part(x_exact)
    out = []
    for g, r in zip(got, ref):
        if np.linalg.norm(g) == 0 or np.linalg.norm(r) == 0:
            out.append(1.0)
        else:
            out.append(fidelity_error(_normalized(g), _normalized(r)))
    return out


# --- eigenbases ---------------------------------------------------------------

class _EighBasis:
    def __init__(self, A: np.ndarray):
        self.dim = A.shape[0]
        self.eigenvalues, self.vectors = sla.eigh(A)

    def project(self, v):
        return self.vectors.T.conj() @ v

    def synthesize(self, c):
        return self.vectors @ c


class _EmbeddingBasis:
    """Eigenpairs of ``[[0, T^T], [T, 0]]`` from the SVD ``T = U diag(s) V^T``.

    ``(v_k, +-u_k) / sqrt 2`` has eigenvalue ``+-s_k``; padding components are
    eigenvectors of the +-1 padding diagonal and never carry amplitude.
    """

    def __init__(self, embedding: HermitianEmbedding):
        T = embedding.system.tilde_a.toarray()
        self.n = T.shape[0]
        self.dim = embedding.dim
        U, s, Vt = sla.svd(T)
        self.U, self.s, self.V = U, s, Vt.T
        self.eigenvalues = np.concatenate([s, -s])

    def project(self, v):
        top, bottom = v[: self.n], v[self.n : 2 * self.n]
        a = self.V.T @ top
        b = self.U.T @ bottom
        return np.concatenate([a + b, a - b]) / np.sqrt(2)

    def synthesize(self, c):
        n = self.n
        plus, minus = c[:n], c[n:]
        out = np.zeros(self.dim, dtype=np.result_type(c, float))
        out[:n] = self.V @ (plus + minus) / np.sqrt(2)
        out[n : 2 * n] = self.U @ (plus - minus) / np.sqrt(2)
        return out


def eigenbasis(A):
    if isinstance(A, HermitianEmbedding):
        return _EmbeddingBasis(A)
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A)
    if not np.allclose(A, A.conj().T, atol=1e-12):
        raise ValueError("matrix must be Hermitian")
    return _EighBasis(A)


# --- results ------------------------------------------------------------------

@dataclass
class HhlConfig:
    n_clock: int = 7
    c_p: float = 1.0
    spectrum: Optional[Spectrum] = None
    strict_clock: bool = False

    def __post_init__(self):
        if int(self.n_clock) != self.n_clock or self.n_clock < 1:
            raise ValueError("n_clock must be an integer >= 1")
        if not self.c_p > 0:
            raise ValueError("c_p must be positive")

    @property
    def spectrum_source(self) -> str:
        if self.spectrum is None or self.spectrum.source.exact:
            return "exact"
        nx, ny = self.spectrum.source.substituted_from
        return f"substituted_{nx}x{ny}"


@dataclass
class HhlResult:
    solution_state: np.ndarray
    fidelity_error: float
    p_ancilla: float
    p_success: float
    lambda_max_used: float
    rotation_table: RotationTable
    qubit_counts: Tuple[int, int, int]
    block_errors: List[float] = field(default_factory=list)
    n_clock_min: Optional[int] = None


def _matrix_parts(A, rhs):
    if isinstance(A, HermitianEmbedding):
        b = A.rhs if rhs is None else np.asarray(rhs, dtype=float)
        x = A.embed_solution(classical_solve(A.system))
        return b, x, A.n_b
    dense = np.asarray(A.toarray() if hasattr(A, "toarray") else A)
    if rhs is None:
        raise ValueError("rhs is required for a plain matrix")
    b = np.asarray(rhs)
    return b, np.linalg.solve(dense, b), max(1, math.ceil(math.log2(dense.shape[0])))


def _spectrum_inputs(basis, config: HhlConfig):
    if config.spectrum is not None:
        ev = config.spectrum.eigenvalues
    else:
        ev = basis.eigenvalues
    lambda_max = float(np.abs(ev).max())
    return ev, lambda_max


def _check_clock(ev, config: HhlConfig) -> int:
    n_min = clock_minimum(ev)
    if config.strict_clock and config.n_clock < n_min:
        raise ValueError(f"n_clock={config.n_clock} below the minimum {n_min} for this spectrum")
    return n_min


def hhl_from_basis(basis, b, x_exact, n_b: int, config: HhlConfig, embedding=None) -> HhlResult:
    """Analytic post-selected HHL output in a precomputed eigenbasis."""
    if not np.any(b):
        raise ValueError("rhs must be nonzero")
    ev, lambda_max = _spectrum_inputs(basis, config)
    n_min = _check_clock(ev, config)
    table = build_rotation_table(ev, lambda_max, config.n_clock, config.c_p)
    sin = table.sin_vector()

    beta = basis.project(b / np.linalg.norm(b))
    phi = np.mod(basis.eigenvalues / (4 * lambda_max), 1.0)
    weights = qpe_weights(phi, config.n_clock)
    c = beta * (weights @ sin)
    p_ancilla = float(np.sum(np.abs(beta) ** 2 * (weights @ sin**2)))
    p_success = float(np.sum(np.abs(c) ** 2))
    if p_success <= 0:
        raise PostSelectionError("post-selection impossible: zero success probability")
    state = basis.synthesize(c) / math.sqrt(p_success)
    if np.iscomplexobj(state) and np.allclose(state.imag, 0):
        state = state.real
    ref = _normalized(x_exact)
    eps = fidelity_error(state, ref)
    blocks = block_fidelity_errors(embedding, state, x_exact) if embedding is not None else []
    return HhlResult(
        solution_state=state,
        fidelity_error=eps,
        p_ancilla=min(1.0, p_ancilla),
        p_success=min(p_success, p_ancilla),
        lambda_max_used=lambda_max,
        rotation_table=table,
        qubit_counts=(config.n_clock, n_b, 1),
        block_errors=blocks,
        n_clock_min=n_min,
    )


def run_hhl(A, rhs=None, config: Optional[HhlConfig] = None) -> HhlResult:
    """Post-selected HHL output for ``A x = rhs``.

    ``A`` is either a :class:`HermitianEmbedding` (``rhs`` defaults to its
    embedded right-hand side, the reference solution is the forward
    substitution) or a Hermitian matrix used as is.
    """
    config = config or HhlConfig()
    b, x_exact, n_b = _matrix_parts(A, rhs)
    basis = eigenbasis(A)
    emb = A if isinstance(A, HermitianEmbedding) else None
    return hhl_from_basis(basis, b, x_exact, n_b, config, emb)


# --- gate-level oracle ----------------------------------------------------------

ORACLE_CAP = 2**20


def brute_force_oracle(A, rhs=None, config: Optional[HhlConfig] = None) -> HhlResult:
    """Full-register statevector emulation of the same HHL circuit.

    Register layout is ``(ancilla, clock, system)``. Controlled evolutions are
    applied qubit by qubit with unitaries built from ``scipy.linalg.eigh``;
    the Fourier transforms are explicit dense matrices.
    """
    config = config or HhlConfig()
    b, x_exact, n_b = _matrix_parts(A, rhs)
    emb = A if isinstance(A, HermitianEmbedding) else None
    dense = A.a_matrix.toarray() if emb is not None else np.asarray(A.toarray() if hasattr(A, "toarray") else A)
    n = config.n_clock
    N = 2**n
    dim = dense.shape[0]
    if 2 * N * dim > ORACLE_CAP:
        raise ValueError(f"oracle dimension {2 * N * dim} exceeds cap {ORACLE_CAP}")

    lam, vecs = sla.eigh(dense)
    if config.spectrum is not None:
        ev = config.spectrum.eigenvalues
    elif emb is not None:
        ev = _unpadded_eigs(emb)
    else:
        ev = lam
    lambda_max = float(np.abs(ev).max())
    n_min = _check_clock(ev, config)
    table = build_rotation_table(ev, lambda_max, n, config.c_p)
    times = evolution_times(n, lambda_max)
    units = [vecs @ np.diag(np.exp(1j * lam * t)) @ vecs.conj().T for t in times]

    state = np.zeros((2, N, dim), dtype=complex)
    state[0, 0] = b / np.linalg.norm(b)
    hadamard = np.full((N, N), 1 / np.sqrt(N))  # only ever applied to |0...0>
    state[0] = hadamard @ state[0]
    clock = np.arange(N)
    for q, U in enumerate(units):
        on = (clock >> q) & 1 == 1
        state[0, on] = state[0, on] @ U.T
    y, k = np.meshgrid(clock, clock, indexing="ij")
    qft = np.exp(2j * np.pi * y * k / N) / np.sqrt(N)
    iqft = qft.conj().T
    state[0] = iqft @ state[0]

    for kk, theta in table.angles.items():
        amp = state[0, kk].copy()
        state[0, kk] = math.cos(theta) * amp
        state[1, kk] = math.sin(theta) * amp
    p_ancilla = float(np.sum(np.abs(state[1]) ** 2))

    # uncompute: QFT, inverse controlled evolutions, Hadamards
    for a in (0, 1):
        reg = qft @ state[a]
        for q in reversed(range(n)):
            on = (clock >> q) & 1 == 1
            reg[on] = reg[on] @ units[q].conj()
        state[a] = hadamard_full(n) @ reg
    post = state[1, 0]
    p_success = float(np.sum(np.abs(post) ** 2))
    if p_success <= 0:
        raise PostSelectionError("post-selection impossible: zero success probability")
    sol = post / math.sqrt(p_success)
    if np.allclose(sol.imag, 0, atol=1e-12):
        sol = sol.real
    ref = _normalized(x_exact)
    return HhlResult(
        solution_state=sol,
        fidelity_error=fidelity_error(sol, ref),
        p_ancilla=p_ancilla,
        p_success=p_success,
        lambda_max_used=lambda_max,
        rotation_table=table,
        qubit_counts=(n, n_b, 1),
        block_errors=block_fidelity_errors(emb, sol, x_exact) if emb is not None else [],
        n_clock_min=n_min,
    )


def hadamard_full(n: int) -> np.ndarray:
    """Walsh-Hadamard transform on ``n`` qubits."""
    H = np.array([[1.0]])
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    for _ in range(n):
        H = np.kron(H, h1)
    return H


def _unpadded_eigs(emb: HermitianEmbedding) -> np.ndarray:
    core = emb.a_matrix[: emb.unpadded_dim, : emb.unpadded_dim].toarray()
    return sla.eigvalsh(core)
