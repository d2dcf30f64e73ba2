"""scikit-learn style front ends for the Carleman evolution and the HHL emulator.

Both follow the estimator conventions: hyperparameters are set in
``__init__`` and exposed through ``get_params``/``set_params``, learned state
ends in an underscore and is produced by ``fit``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import hhl as _hhl
from ._validation import check_populations, check_positive, check_positive_int, check_vector
from .carleman import CarlemanState, build_carleman_system, evolve_carleman
from .lattice import DistributionField, LatticeGrid, make_boundary
from .linsys import HermitianEmbedding, TimeBlockSystem, classical_solve
from .spectra import Spectrum


class CarlemanLBM(TransformerMixin, BaseEstimator):
    """Carleman-linearized LBM propagator.

    ``fit`` reads the lattice shape from an initial population array of shape
    ``(ny, nx, 9)`` and assembles the operators; ``transform`` returns the
    flattened trajectory of shape ``(n_steps + 1, 9 nx ny)``.

    Parameters
    ----------
    boundary : {"pbc", "bounceback", "liddriven"}
    omega : float
        BGK relaxation frequency.
    order : {1, 2}
        Carleman truncation order.
    n_steps : int
        Number of time steps produced by ``transform``.
    v_lid : tuple of float
        Lid velocity, only used for ``boundary="liddriven"``.
    """

    def __init__(self, boundary="bounceback", omega=1.1, order=1, n_steps=1, v_lid=(0.0, 0.075)):
        self.boundary = boundary
        self.omega = omega
        self.order = order
        self.n_steps = n_steps
        self.v_lid = v_lid

    def fit(self, X, y=None):
        X = check_populations(X)
        check_positive_int(self.n_steps, "n_steps")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        self.grid_ = LatticeGrid(X.shape[1], X.shape[0], make_boundary(self.boundary, self.v_lid))
        self.system_ = build_carleman_system(self.grid_, self.omega, self.order)
        self.n_features_in_ = X.size
        return self

    def _trajectory(self, X):
        check_is_fitted(self, "system_")
        X = check_populations(X)
        if X.size != self.n_features_in_:
            raise ValueError(f"X has {X.size} populations, estimator was fitted on {self.n_features_in_}")
        state = CarlemanState.from_field(DistributionField(X), self.order)
        return evolve_carleman(state, self.system_, self.n_steps)

    def transform(self, X):
        return np.array([s.f for s in self._trajectory(X)])

    def predict(self, X):
        """Populations after ``n_steps``, shape ``(ny, nx, 9)``."""
        return self._trajectory(X)[-1].f.reshape(self.grid_.shape)

    @property
    def carleman_matrix_(self):
        check_is_fitted(self, "system_")
        return self.system_.C1


class HHLSolver(BaseEstimator):
    """Spectrum-driven HHL emulator.

    ``fit`` diagonalizes the system matrix once (a
    :class:`~qclbm.linsys.HermitianEmbedding` or a dense Hermitian matrix);
    ``solve`` then runs the post-selected pipeline for any right-hand side,
    so sweeps over ``n_clock`` or ``c_p`` reuse the same eigenbasis through
    ``set_params``.
    """

    def __init__(self, n_clock=7, c_p=1.0, spectrum=None, strict_clock=False):
        self.n_clock = n_clock
        self.c_p = c_p
        self.spectrum = spectrum
        self.strict_clock = strict_clock

    def _config(self):
        check_positive_int(self.n_clock, "n_clock")
        check_positive(self.c_p, "c_p")
        if self.spectrum is not None and not isinstance(self.spectrum, Spectrum):
            raise TypeError("spectrum must be a qclbm.spectra.Spectrum or None")
        return _hhl.HhlConfig(self.n_clock, self.c_p, self.spectrum, self.strict_clock)

    def fit(self, A, y=None):
        self._config()
        self.embedding_ = A if isinstance(A, HermitianEmbedding) else None
        self.basis_ = _hhl.eigenbasis(A)
        if self.embedding_ is None:
            self.matrix_ = np.asarray(A.toarray() if hasattr(A, "toarray") else A)
            self.n_b_ = max(1, int(np.ceil(np.log2(self.matrix_.shape[0]))))
        else:
            self.n_b_ = A.n_b
        self.eigenvalues_ = np.sort(self.basis_.eigenvalues)
        self.n_features_in_ = self.basis_.dim
        return self

    @property
    def lambda_max_(self):
        src = self.spectrum.eigenvalues if self.spectrum is not None else self.eigenvalues_
        return float(np.abs(src).max())

    @property
    def n_clock_min_(self):
        src = self.spectrum.eigenvalues if self.spectrum is not None else self.eigenvalues_
        return _hhl.clock_minimum(src)

    def _reference(self, b):
        emb = self.embedding_
        if emb is None:
            return np.linalg.solve(self.matrix_, b)
        s = emb.system
        lower = b[s.dim : 2 * s.dim]
        if np.any(b[: s.dim]) or np.any(b[2 * s.dim :]):
            raise ValueError("embedded rhs must vanish outside its lower block")
        x = classical_solve(TimeBlockSystem(s.C, s.n_steps, s.tilde_a, lower))
        return emb.embed_solution(x)

    def solve(self, b=None) -> _hhl.HhlResult:
        check_is_fitted(self, "basis_")
        config = self._config()
        if b is None:
            if self.embedding_ is None:
                raise ValueError("rhs is required for a plain matrix")
            b = self.embedding_.rhs
        b = check_vector(b, self.n_features_in_)
        return _hhl.hhl_from_basis(self.basis_, b, self._reference(b), self.n_b_, config, self.embedding_)

    def predict(self, b=None):
        """Normalized post-selected solution state."""
        return self.solve(b).solution_state

    def score(self, b=None, y=None):
        """Fidelity ``1 - eps`` against the exact solution."""
        return 1.0 - self.solve(b).fidelity_error
