import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqrm import fockspace as fs
from aqrm.errors import DimensionError

from .conftest import random_density


def test_hilbert_config_dimensions():
    cfg = fs.HilbertConfig(7)
    assert cfg.total_dim == 14
    with pytest.raises(ValueError):
        fs.HilbertConfig(1)
    with pytest.raises(ValueError):
        fs.HilbertConfig(2.5)


def test_annihilation_entries():
    a = fs.annihilation(fs.HilbertConfig(3))
    assert a.shape == (3, 3)
    assert a[0, 1] == 1.0
    assert abs(a[1, 2] - math.sqrt(2)) < 1e-15
    assert np.all(a[:, 0] == 0)


def test_truncated_commutator():
    n = 6
    a = fs.annihilation(n)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(n)
    expected[-1, -1] = 1 - n
    # sqrt(k)**2 is k only up to rounding
    assert np.max(np.abs(comm - expected)) < 1e-13


def test_qubit_operators():
    sp, sm = fs.qubit_operator("sp"), fs.qubit_operator("sm")
    assert np.array_equal(fs.qubit_operator("sz"), np.diag([1.0, -1.0]))
    assert np.array_equal(sp @ sm, np.diag([1.0, 0.0]))
    assert np.array_equal(fs.qubit_operator("sx") @ fs.qubit_operator("sx"), np.eye(2))
    assert np.array_equal(sp @ sm + sm @ sp, np.eye(2))
    assert np.allclose(sp, 0.5 * (fs.qubit_operator("sx") + 1j * fs.qubit_operator("sy")))
    with pytest.raises(ValueError):
        fs.qubit_operator("sw")


def test_embed_examples():
    n = 2
    a = fs.annihilation(n)
    lifted = fs.embed(np.eye(2), a)
    for q in ("e", "g"):
        assert np.allclose(lifted @ fs.basis_state(n, q, 1), fs.basis_state(n, q, 0))
        assert np.allclose(lifted @ fs.basis_state(n, q, 0), 0)
    assert np.array_equal(fs.embed(fs.qubit_operator("sz"), np.eye(n)), np.diag([1.0, 1, -1, -1]))
    hop = fs.embed(fs.qubit_operator("sp"), a)
    assert np.allclose(hop @ fs.basis_state(n, "g", 1), fs.basis_state(n, "e", 0))
    assert np.array_equal(fs.embed(np.eye(2), np.eye(3)), np.eye(6))


def test_embed_dimension_errors():
    with pytest.raises(DimensionError):
        fs.embed(np.eye(3), np.eye(2))
    with pytest.raises(DimensionError):
        fs.embed(np.eye(2), np.ones((2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_embed_is_multiplicative(n, seed):
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in (2, n, 2, n)]
    a, b, c, d = mats
    assert np.allclose(fs.embed(a, b) @ fs.embed(c, d), fs.embed(a @ c, b @ d), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_partial_trace_of_products(n, seed):
    rng = np.random.default_rng(seed)
    rq, rb = random_density(2, rng), random_density(n, rng)
    rho = fs.embed(rq, rb)
    assert np.allclose(fs.partial_trace(rho, "qubit"), rq, atol=1e-12)
    assert np.allclose(fs.partial_trace(rho, "boson"), rb, atol=1e-12)


def test_partial_trace_bell_and_random(rng):
    n = 3
    bell = (fs.basis_state(n, "e", 0) + fs.basis_state(n, "g", 1)) / math.sqrt(2)
    assert np.allclose(fs.partial_trace(fs.projector(bell), "qubit"), 0.5 * np.eye(2))
    rho = random_density(2 * n, rng)
    for keep in ("qubit", "boson"):
        assert abs(np.trace(fs.partial_trace(rho, keep)) - 1) < 1e-12
    with pytest.raises(ValueError):
        fs.partial_trace(rho, "photon")
    with pytest.raises(DimensionError):
        fs.partial_trace(np.eye(5), "qubit")


def test_partial_transpose(rng):
    n = 3
    prod = fs.embed(random_density(2, rng), random_density(n, rng))
    assert np.allclose(
        np.linalg.eigvalsh(fs.partial_transpose(prod)), np.linalg.eigvalsh(prod), atol=1e-12
    )
    bell = fs.projector((fs.basis_state(n, "e", 0) + fs.basis_state(n, "g", 1)) / math.sqrt(2))
    pt = fs.partial_transpose(bell)
    assert fs.is_hermitian(pt)
    assert abs(np.linalg.eigvalsh(pt)[0] + 0.5) < 1e-12
    rho = random_density(2 * n, rng)
    assert np.array_equal(fs.partial_transpose(fs.partial_transpose(rho)), rho)
    assert abs(np.trace(fs.partial_transpose(rho)) - 1) < 1e-12


def test_density_matrix_validation(rng):
    rho = random_density(4, rng)
    assert fs.is_density_matrix(rho)
    assert not fs.is_density_matrix(2 * rho)
    assert not fs.is_density_matrix(np.diag([1.5, -0.5]))
    assert not fs.is_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    assert fs.hermiticity_error(np.array([[0, 1j], [1j, 0]])) == 2.0


def test_basis_state_validation():
    with pytest.raises(ValueError):
        fs.basis_state(3, "x", 0)
    with pytest.raises(ValueError):
        fs.basis_state(3, "g", 3)
