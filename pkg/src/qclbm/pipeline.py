"""End-to-end use cases: initial state, Carleman pre-evolution, embedding, HHL."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from .carleman import carleman_matrix_first
from .estimators import HHLSolver
from .hhl import RotationError
from .lattice import LatticeGrid, init_kolmogorov, init_lid, make_boundary, reynolds_number, velocity_field
from .linsys import assemble_tilde_a, hermitize_and_pad
from .resources import cnot_bounds
from .spectra import Spectrum, SpectrumCache, SpectrumDescriptor, eigen_spectrum, substituted_spectrum

USE_CASES = ("pbc", "bounceback", "liddriven")

# initial-condition defaults per use case; lid amplitudes follow v_lid / c_s^2
INIT_DEFAULTS = {
    "pbc": {"A_x": 0.3, "A_y": 0.3, "k_x": 1, "k_y": 1},
    "bounceback": {"A_x": 0.3, "A_y": 0.3, "k_x": 1, "k_y": 1},
    "liddriven": {"A_x": None, "A_y": None, "k_x": 0, "k_y": 0},
}
DEFAULT_V_LID = 0.075


@dataclass(frozen=True)
class Problem:
    use_case: str
    nx: int
    ny: int
    omega: float
    n_steps: int = 1
    t0: int = 0
    v_lid: float = DEFAULT_V_LID
    init: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.use_case not in USE_CASES:
            raise ValueError(f"use_case must be one of {USE_CASES}")
        if self.t0 < 0:
            raise ValueError("t0 must be nonnegative")

    @property
    def lid_velocity(self) -> Optional[Tuple[float, float]]:
        return (0.0, float(self.v_lid)) if self.use_case == "liddriven" else None

    def grid(self) -> LatticeGrid:
        return LatticeGrid(self.nx, self.ny, make_boundary(self.use_case, self.lid_velocity or (0.0, 0.0)))

    def init_params(self) -> Dict[str, float]:
        params = dict(INIT_DEFAULTS[self.use_case])
        params.update(dict(self.init))
        return params

    def initial_field(self):
        grid = self.grid()
        if self.use_case == "liddriven":
            return init_lid(grid, self.lid_velocity, **self.init_params())
        return init_kolmogorov(grid, **self.init_params())

    def operator_key(self):
        return (self.use_case, self.nx, self.ny, self.omega, self.lid_velocity)

    def carleman_matrix(self):
        return _carleman_matrix(self.operator_key())

    def phi0(self) -> np.ndarray:
        """Initial state advanced ``t0`` steps with the first-order Carleman matrix."""
        C = self.carleman_matrix()
        phi = self.initial_field().flat()
        for _ in range(self.t0):
            phi = C @ phi
        return phi

    def embedding(self):
        return hermitize_and_pad(_time_block(self.operator_key(), self.n_steps).with_rhs(self.phi0()))

    def descriptor(self) -> SpectrumDescriptor:
        return SpectrumDescriptor(self.use_case, self.nx, self.ny, float(self.omega), self.n_steps, 1, self.lid_velocity)

    def reynolds(self) -> float:
        """Derived label: ``u L / nu`` with ``L = nx`` and ``u`` the largest initial speed (or the lid speed)."""
        speed = float(np.linalg.norm(velocity_field(self.initial_field()), axis=-1).max())
        if self.use_case == "liddriven":
            speed = max(speed, abs(self.v_lid))
        return reynolds_number(self.omega, self.nx, speed)


@lru_cache(maxsize=32)
def _carleman_matrix(key):
    use_case, nx, ny, omega, v = key
    grid = LatticeGrid(nx, ny, make_boundary(use_case, v or (0.0, 0.0)))
    return carleman_matrix_first(grid, omega)


@lru_cache(maxsize=16)
def _time_block(key, n_steps):
    return assemble_tilde_a(_carleman_matrix(key), n_steps)


_SOLVERS: Dict[tuple, HHLSolver] = {}


def fitted_solver(problem: Problem) -> HHLSolver:
    """HHL solver fitted on the problem's matrix; cached across ``t0``, ``n_clock`` and ``c_p``."""
    key = (problem.operator_key(), problem.n_steps)
    if key not in _SOLVERS:
        if len(_SOLVERS) >= 4:
            _SOLVERS.pop(next(iter(_SOLVERS)))
        _SOLVERS[key] = HHLSolver().fit(problem.embedding())
    return _SOLVERS[key]


def clear_caches():
    _SOLVERS.clear()
    _carleman_matrix.cache_clear()
    _time_block.cache_clear()


def exact_spectrum(problem: Problem, cache: Optional[SpectrumCache] = None) -> Spectrum:
    desc = problem.descriptor()
    if cache is not None:
        hit = cache.get(desc)
        if hit is not None:
            return hit
    spectrum = eigen_spectrum(problem.embedding(), desc)
    if cache is not None:
        cache.put(spectrum)
    return spectrum


def resolve_spectrum(problem: Problem, source: str, cache: Optional[SpectrumCache] = None) -> Optional[Spectrum]:
    """``"exact"`` -> None (use the problem's own spectrum); ``"substituted:N"`` -> N x N spectrum."""
    if source == "exact":
        return None
    kind, _, size = source.partition(":")
    if kind != "substituted":
        raise ValueError(f"unknown spectrum source {source!r}")
    n = int(size or 4)
    small = exact_spectrum(replace(problem, nx=n, ny=n, t0=0), cache)
    return substituted_spectrum(small, problem.descriptor())


def hhl_record(problem: Problem, n_clock: int = 7, c_p: float = 1.0, spectrum_source: str = "exact",
               cache: Optional[SpectrumCache] = None) -> Dict[str, object]:
    """One HHL run flattened into a CSV-ready record."""
    solver = fitted_solver(problem)
    spectrum = resolve_spectrum(problem, spectrum_source, cache)
    solver.set_params(n_clock=n_clock, c_p=c_p, spectrum=spectrum)
    emb = problem.embedding()
    res_est = cnot_bounds(n_clock, problem.nx * problem.ny, 9, problem.n_steps)
    rec = {
        "use_case": problem.use_case,
        "nx": problem.nx,
        "ny": problem.ny,
        "omega": float(problem.omega),
        "n_steps": problem.n_steps,
        "t0": problem.t0,
        "n_clock": n_clock,
        "c_p": float(c_p),
        "v_lid": float(problem.v_lid) if problem.use_case == "liddriven" else 0.0,
        "spectrum_source": spectrum_source,
        "re_derived": problem.reynolds(),
    }
    try:
        result = solver.solve(emb.rhs)
    except RotationError as exc:
        rec.update(status="rotation_undefined", error=str(exc))
        return rec
    evolved = result.block_errors[1:]
    rec.update(
        status="ok",
        error="",
        fidelity_error=result.fidelity_error,
        eps_evolved_mean=float(np.mean(evolved)),
        eps_evolved_median=float(np.median(evolved)),
        block_errors=";".join(repr(float(e)) for e in result.block_errors),
        p_ancilla=result.p_ancilla,
        p_success=result.p_success,
        lambda_max=result.lambda_max_used,
        n_clock_min=result.n_clock_min,
        n_unresolved=result.rotation_table.n_unresolved,
        n_b=emb.n_b,
        generic_cnot=res_est.generic_bound,
        local_cnot=res_est.local_bound,
    )
    return rec
