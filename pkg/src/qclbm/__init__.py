"""Carleman-linearized lattice Boltzmann dynamics with an emulated HHL solver."""
from .carleman import build_carleman_system, carleman_matrix_first, evolve_carleman, rmse
from .estimators import CarlemanLBM, HHLSolver
from .hhl import HhlConfig, HhlResult, run_hhl
from .lattice import D2Q9, LatticeGrid, make_boundary, run_lbm
from .linsys import build_time_block_system, hermitize_and_pad
from .resources import cnot_bounds

__version__ = "0.1.0"

__all__ = [
    "CarlemanLBM",
    "D2Q9",
    "HHLSolver",
    "HhlConfig",
    "HhlResult",
    "LatticeGrid",
    "build_carleman_system",
    "build_time_block_system",
    "carleman_matrix_first",
    "cnot_bounds",
    "evolve_carleman",
    "hermitize_and_pad",
    "make_boundary",
    "rmse",
    "run_hhl",
    "run_lbm",
]
