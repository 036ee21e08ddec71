from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from fourfold_rmt.constants import INVERSE_RESIDUAL_PER_DIM
from fourfold_rmt.ensembles import flip_permutation, sample_fourfold, wigner
from fourfold_rmt.linalg_core import (
    hermitian_eigenvalues,
    inf_operator_norm,
    invert_shifted,
    read_matrix_csv,
    write_matrix_csv,
)


def test_invert_scalar():
    assert invert_shifted([[0.0]], 1j) == pytest.approx(np.array([[1j]]))


def test_invert_diagonal():
    g = invert_shifted(np.diag([1.0, -1.0]), 2j)
    np.testing.assert_allclose(g, np.diag([1 / (1 - 2j), 1 / (-1 - 2j)]), atol=1e-15)


def test_invert_residual(rng):
    h = random_hermitian(rng, 16)
    z = 0.3 + 0.2j
    g = invert_shifted(h, z)
    assert np.max(np.abs((h - z * np.eye(16)) @ g - np.eye(16))) < INVERSE_RESIDUAL_PER_DIM * 16


def test_invert_rejects_real_z():
    with pytest.raises(ValueError):
        invert_shifted(np.eye(2), 1.0)


def test_invert_rejects_non_square():
    with pytest.raises(ValueError):
        invert_shifted(np.ones((2, 3)), 1j)


@given(st.integers(1, 12), st.integers(0, 10_000), st.floats(-3, 3), st.floats(0.01, 5))
def test_resolvent_adjoint_symmetry(n, seed, E, eta):
    h = random_hermitian(np.random.default_rng(seed), n)
    z = complex(E, eta)
    g = invert_shifted(h, z)
    gbar = invert_shifted(h, z.conjugate())
    assert np.max(np.abs(gbar - g.conj().T)) < 1e-10


def test_eigenvalues_small_cases():
    np.testing.assert_allclose(hermitian_eigenvalues(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])
    np.testing.assert_allclose(hermitian_eigenvalues([[0, 1], [1, 0]]), [-1, 1], atol=1e-15)


def test_eigenvalue_trace_fourfold():
    h = sample_fourfold(wigner(32), "complex-gaussian", 3).h
    assert abs(hermitian_eigenvalues(h).sum() - np.trace(h).real) < 1e-9


def test_eigenvalues_backward_error(rng):
    h = random_hermitian(rng, 40)
    lam = hermitian_eigenvalues(h)
    ref = np.linalg.eigvals(h)
    np.testing.assert_allclose(np.sort(ref.real), lam, atol=1e-9 * np.abs(lam).max())


def test_eigenvalues_reject_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_eigenvalues([[0, 1], [0, 0]])


@pytest.mark.parametrize("dist", ["real-gaussian", "complex-gaussian"])
def test_spectrum_flip_invariant(dist):
    h = sample_fourfold(wigner(21), dist, 11).h
    p = flip_permutation(21)
    np.testing.assert_allclose(hermitian_eigenvalues(h[np.ix_(p, p)]), hermitian_eigenvalues(h), atol=1e-8)


def test_inf_norm_examples():
    assert inf_operator_norm(np.eye(5)) == 1.0
    assert inf_operator_norm(np.array([[1, -2], [0, 3j]])) == pytest.approx(3.0)


def test_inf_norm_permutation_invariant(rng):
    a = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    for _ in range(20):
        p = rng.permutation(9)
        assert inf_operator_norm(a[np.ix_(p, p)]) == pytest.approx(inf_operator_norm(a), rel=1e-14)


@given(st.integers(1, 10), st.integers(0, 10_000))
def test_inf_norm_submultiplicative(n, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    b = r.standard_normal((n, n))
    assert inf_operator_norm(a @ b) <= inf_operator_norm(a) * inf_operator_norm(b) * (1 + 1e-12)


def test_matrix_csv_roundtrip(tmp_path, rng):
    h = random_hermitian(rng, 7)
    p = write_matrix_csv(tmp_path / "h.csv", h)
    assert np.array_equal(read_matrix_csv(p), h)


def test_matrix_csv_rejects_truncated(tmp_path, rng):
    p = write_matrix_csv(tmp_path / "h.csv", random_hermitian(rng, 3))
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        read_matrix_csv(p)
