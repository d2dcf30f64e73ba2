import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from qclbm.hhl import (
    HhlConfig,
    RotationError,
    binary_eigenvalue,
    brute_force_oracle,
    build_rotation_table,
    clock_minimum,
    evolution_times,
    fidelity_error,
    qpe_kernel,
    qpe_weights,
    rotation_angle,
    run_hhl,
)
from qclbm.linsys import build_time_block_system, hermitize_and_pad
from qclbm.pipeline import Problem


def random_symmetric(rng, dim, eigenvalues=None):
    Qm, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    if eigenvalues is None:
        eigenvalues = rng.choice([-1, 1], dim) * rng.uniform(0.3, 1.0, dim)
    return Qm @ np.diag(eigenvalues) @ Qm.T


def assert_same_result(a, b, tol=1e-10):
    assert a.fidelity_error == pytest.approx(b.fidelity_error, abs=tol)
    assert a.p_success == pytest.approx(b.p_success, abs=tol)
    assert a.p_ancilla == pytest.approx(b.p_ancilla, abs=tol)
    assert np.allclose(a.solution_state, b.solution_state, atol=tol)
    assert a.rotation_table.angles == b.rotation_table.angles


# --- register arithmetic ------------------------------------------------------

def test_clock_minimum_examples():
    assert clock_minimum([2.0, 2.0]) == 1
    assert clock_minimum([0.5, 3.5, -3.5]) == 3
    assert clock_minimum([1.0, 8.0]) == 3


def test_evolution_times():
    t = evolution_times(4, 1.3)
    assert t[0] == pytest.approx(math.pi / (2 * 1.3))
    assert np.allclose(np.array(t[1:]) / np.array(t[:-1]), 2.0)
    assert evolution_times(3, 1.0)[2] == pytest.approx(2 * math.pi)


def test_binary_eigenvalue_examples():
    assert binary_eigenvalue(1.7, 1.7, 7) == (32, 32)
    assert binary_eigenvalue(-1.7, 1.7, 7) == (-32, 96)
    assert binary_eigenvalue(1.7, 1.7, 2) == (1, 1)
    with pytest.raises(ValueError, match="insufficient clock resolution"):
        binary_eigenvalue(0.01, 1.7, 3)


def test_rotation_angle_examples():
    assert rotation_angle(1, 1.0) == pytest.approx(math.pi / 2)
    assert rotation_angle(2, 1.0) == pytest.approx(math.pi / 6)
    assert rotation_angle(-2, 1.0) == pytest.approx(-math.pi / 6)
    with pytest.raises(RotationError):
        rotation_angle(1, 2.0)


def test_rotation_table_skips_zero_bins():
    table = build_rotation_table([1.0, -1.0, 0.01], 1.0, 3, 1.0)
    assert table.n_unresolved == 1
    assert table.lambda_bars == {2: 2, 6: -2}


# --- QPE kernel ---------------------------------------------------------------

def direct_kernel(phi, n):
    N = 2**n
    y = np.arange(N)
    return np.array([np.exp(2j * np.pi * y * (phi - k / N)).sum() / N for k in range(N)])


@given(st.floats(0.0, 1.0, exclude_max=True), st.integers(1, 6))
def test_kernel_matches_direct_sum(phi, n):
    assert np.allclose(qpe_kernel(phi, n), direct_kernel(phi, n), atol=1e-12)
    w = qpe_weights(phi, n)
    assert np.allclose(w, np.abs(direct_kernel(phi, n)) ** 2, atol=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_kernel_limits():
    assert np.allclose(qpe_weights(3 / 8, 3), np.eye(8)[3])
    assert np.allclose(qpe_weights(0.0, 4), np.eye(16)[0])
    delta = 0.5 / 16
    mid = np.abs(qpe_kernel(5 / 16 + delta, 4))
    assert mid[5] == pytest.approx(abs(math.sin(16 * math.pi * delta) / (16 * math.sin(math.pi * delta))))


# --- fidelity -----------------------------------------------------------------

def test_fidelity_examples():
    a = np.array([1.0, 0.0])
    assert fidelity_error(a, a) == 0.0
    assert fidelity_error(a, np.array([0.0, 1.0])) == 1.0
    assert fidelity_error(a, np.array([0.6, 0.8])) == pytest.approx(0.64)
    with pytest.raises(ValueError):
        fidelity_error(a, np.array([1.0, 1.0]))


# --- analytic pipeline --------------------------------------------------------

def test_diagonal_example():
    b = np.ones(2) / math.sqrt(2)
    res = run_hhl(np.diag([1.0, 2.0]), b, HhlConfig(n_clock=3))
    assert res.fidelity_error == pytest.approx(0.0, abs=1e-12)
    assert res.p_success == pytest.approx(0.625, abs=1e-12)
    assert set(res.rotation_table.lambda_bars.values()) == {1, 2}
    oracle = brute_force_oracle(np.diag([1.0, 2.0]), b, HhlConfig(n_clock=3))
    assert_same_result(res, oracle, 1e-12)


def test_flat_spectrum_example():
    A = 1.5 * np.eye(4)
    res = run_hhl(A, np.arange(1.0, 5.0), HhlConfig(n_clock=2))
    assert res.rotation_table.lambda_bars == {1: 1}
    assert res.fidelity_error == pytest.approx(0.0, abs=1e-12)
    assert res.p_success == pytest.approx(1.0)


def test_single_clock_identity():
    b = np.array([0.6, 0.8])
    assert_same_result(run_hhl(np.eye(2), b, HhlConfig(n_clock=1)), brute_force_oracle(np.eye(2), b, HhlConfig(n_clock=1)))


@given(st.integers(0, 2**31 - 1), st.integers(2, 8), st.integers(2, 4), st.sampled_from([0.5, 1.0]))
def test_analytic_matches_oracle(seed, dim, n_clock, c_p):
    rng = np.random.default_rng(seed)
    A = random_symmetric(rng, dim)
    b = rng.normal(size=dim)
    cfg = HhlConfig(n_clock=n_clock, c_p=c_p)
    a, o = run_hhl(A, b, cfg), brute_force_oracle(A, b, cfg)
    assert_same_result(a, o)
    assert a.p_success <= a.p_ancilla + 1e-15


def test_embedding_oracle_agreement():
    emb = Problem("bounceback", 2, 2, 1.1).embedding()
    cfg = HhlConfig(n_clock=4)
    assert_same_result(run_hhl(emb, config=cfg), brute_force_oracle(emb, config=cfg))


def test_exact_representability_limit(rng):
    n = 5
    k = np.array([8, 3, -5, 1, -8, 2])
    A = random_symmetric(rng, 6, 4 * k / 2**n)
    res = run_hhl(A, rng.normal(size=6), HhlConfig(n_clock=n))
    assert res.fidelity_error <= 1e-10


def test_cp_scaling_in_exact_limit(rng):
    A = random_symmetric(rng, 4, np.array([1.0, -0.5, 0.25, -1.0]))
    b = rng.normal(size=4)
    base = run_hhl(A, b, HhlConfig(n_clock=4, c_p=1.0))
    for c in (0.25, 0.5, 0.75):
        res = run_hhl(A, b, HhlConfig(n_clock=4, c_p=c))
        assert res.p_success == pytest.approx(c**2 * base.p_success, rel=1e-12)
        assert np.allclose(res.solution_state, base.solution_state, atol=1e-12)


def test_cp_too_large_raises():
    with pytest.raises(RotationError):
        run_hhl(np.diag([1.0, 2.0]), np.ones(2), HhlConfig(n_clock=3, c_p=2.0))


def test_strict_clock():
    A = np.diag([0.1, 1.0])
    with pytest.raises(ValueError, match="below the minimum"):
        run_hhl(A, np.ones(2), HhlConfig(n_clock=2, strict_clock=True))


def test_block_errors_reported():
    emb = Problem("bounceback", 4, 4, 1.1).embedding()
    res = run_hhl(emb, config=HhlConfig(n_clock=7))
    assert len(res.block_errors) == 2
    assert res.block_errors[1] < 1e-2
    assert res.p_success > 1e-3
    assert res.qubit_counts == (7, emb.n_b, 1)


def test_padding_never_carries_amplitude(rng):
    C = sp.random(3, 3, density=0.6, random_state=np.random.RandomState(4), format="csr")
    emb = hermitize_and_pad(build_time_block_system(C, rng.normal(size=3), 1))
    res = run_hhl(emb, config=HhlConfig(n_clock=5))
    assert emb.padding_dim > 0
    assert not np.any(res.solution_state[emb.unpadded_dim :])
