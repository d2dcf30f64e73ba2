"""CNOT upper bounds for the controlled Hamiltonian simulation and HHL cost formulas."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

Q_TILDE_EXPECTED = 4**4
Q_TILDE_PESSIMISTIC = 4**36


@dataclass(frozen=True)
class ResourceEstimate:
    generic_bound: int
    local_bound: int
    q_tilde: int
    reinit_bound: int
    hamiltonian_qubits: int

    def as_dict(self):
        return asdict(self)


def padded_time_steps(n_steps: int) -> int:
    """``2^ceil(log2(N_t + 1))``."""
    return 2 ** math.ceil(math.log2(n_steps + 1))


def hamiltonian_qubits(L: int, Q: int, n_steps: int) -> int:
    """Control qubit + Hermitization qubit + time register + lattice register."""
    return 2 + math.ceil(math.log2(n_steps + 1)) + math.ceil(math.log2(Q * L))


def cnot_bounds(n_clock: int, L: int, Q: int = 9, n_steps: int = 1, q_tilde: int = Q_TILDE_EXPECTED) -> ResourceEstimate:
    """Generic ``16 n_c L^2 Q^2 N_t^2`` and lattice-local ``16 n_c L Q~ N~_t^2`` CNOT bounds."""
    for name, value in (("n_clock", n_clock), ("L", L), ("Q", Q), ("n_steps", n_steps), ("q_tilde", q_tilde)):
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer")
    n_clock, L, Q, n_steps, q_tilde = (int(v) for v in (n_clock, L, Q, n_steps, q_tilde))
    return ResourceEstimate(
        generic_bound=16 * n_clock * L**2 * Q**2 * n_steps**2,
        local_bound=16 * n_clock * L * q_tilde * padded_time_steps(n_steps) ** 2,
        q_tilde=q_tilde,
        reinit_bound=4**Q,
        hamiltonian_qubits=hamiltonian_qubits(L, Q, n_steps),
    )


def shannon_bound(n_clock: int, L: int, Q: int = 9, n_steps: int = 1) -> int:
    """``n_c 4^{n_i}`` with the qubit count rounded up to whole qubits."""
    return n_clock * 4 ** hamiltonian_qubits(L, Q, n_steps)


def condition_number(spectrum) -> float:
    ev = np.abs(np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float))
    ev = ev[ev > 0]
    return float(ev.max() / ev.min())


def row_sparsity(matrix) -> int:
    """Maximum number of nonzeros in any row."""
    m = matrix.tocsr()
    return int(np.diff(m.indptr).max())


def hhl_complexity(kappa: float, sparsity: float, dim: int, epsilon: float) -> float:
    """Original HHL scaling ``kappa^2 s^2 log(n) / eps`` (constants dropped)."""
    return kappa**2 * sparsity**2 * math.log(dim) / epsilon


def hhl_complexity_dense(kappa: float, frobenius_norm: float, dim: int, epsilon: float) -> float:
    """Dense-matrix scaling ``kappa^2 polylog(n) ||A||_F / eps`` with polylog taken as ``log n``."""
    return kappa**2 * math.log(dim) * frobenius_norm / epsilon
