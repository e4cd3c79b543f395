import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2bnet.numkit import (
    ConvergenceError,
    NumericError,
    Rng,
    as_matrix,
    conjugate_gradient,
    gram_jacobi,
    jacobi_eigh,
    matvec,
    splitmix64,
    thomas_solve,
    weighted_principal_spectrum,
)


def laplacian_1d(n):
    return 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


# --- matvec -----------------------------------------------------------------


def test_matvec_identity_and_zero():
    assert np.array_equal(matvec(np.eye(3), [1, 2, 3]), [1, 2, 3])
    assert np.array_equal(matvec(np.zeros((2, 3)), [1, 2, 3]), [0, 0])


def test_matvec_hand_arithmetic():
    assert np.array_equal(matvec([[1, 2], [3, 4]], [1, 1]), [3, 7])


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(np.eye(3), [1, 2])


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(NumericError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_matrix([1.0, 2.0])


# --- random streams ---------------------------------------------------------


def test_splitmix64_reference_value():
    # first output of the reference generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_rng_reproducible():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.raw(1000), b.raw(1000))
    assert np.array_equal(Rng(42).uniform(size=10), Rng(42).uniform(size=10))


def test_rng_split_is_stable_and_distinct():
    parent = Rng(7)
    parent.uniform(size=100)  # consuming the parent must not move children
    assert Rng(7).split("x").seed == parent.split("x").seed
    assert parent.split("x").seed != parent.split("y").seed
    assert parent.split(0).seed != parent.split(1).seed


def test_split_streams_do_not_overlap():
    a = Rng(3).split("a").raw(1_000_000)
    b = Rng(3).split("b").raw(1_000_000)
    assert np.intersect1d(a, b).size == 0


# --- conjugate gradient -----------------------------------------------------


def test_cg_identity_one_iteration():
    b = np.array([3.0, -1.0, 2.0])
    x, it = conjugate_gradient(lambda v: v, b)
    assert it == 1
    assert np.allclose(x, b)


def test_cg_diagonal():
    x, _ = conjugate_gradient(lambda v: np.array([1.0, 2.0]) * v, np.array([2.0, 2.0]))
    assert np.allclose(x, [2.0, 1.0], atol=1e-12)


def test_cg_matches_thomas_on_laplacian():
    n = 8
    a = laplacian_1d(n)
    x, _ = conjugate_gradient(lambda v: a @ v, np.ones(n), tol=1e-14)
    ref = thomas_solve(-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1), np.ones(n))
    assert np.max(np.abs(x - ref)) < 1e-10


def test_cg_residual_contract():
    a = laplacian_1d(50)
    b = Rng(1).normal(size=50)
    x, _ = conjugate_gradient(lambda v: a @ v, b, tol=1e-9)
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_cg_non_convergence_carries_residual():
    a = laplacian_1d(64)
    with pytest.raises(ConvergenceError) as info:
        conjugate_gradient(lambda v: a @ v, np.ones(64), tol=1e-12, max_iter=3)
    assert info.value.iterations == 3
    assert info.value.residual > 0


def test_cg_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        conjugate_gradient(lambda v: v, np.ones(2), tol=0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_cg_agrees_with_dense_solve(n, seed):
    rng = Rng(seed)
    m = rng.normal(size=(n, n))
    a = m.T @ m + np.eye(n)
    b = rng.normal(size=n)
    x, _ = conjugate_gradient(lambda v: a @ v, b, tol=1e-13, max_iter=1000)
    assert np.max(np.abs(x - np.linalg.solve(a, b))) < 1e-9


# --- Thomas -----------------------------------------------------------------


def test_thomas_identity():
    r = np.array([1.0, -2.0, 5.0])
    assert np.array_equal(thomas_solve(np.zeros(2), np.ones(3), np.zeros(2), r), r)


def test_thomas_two_by_two():
    x = thomas_solve([1.0], [2.0, 2.0], [1.0], [3.0, 3.0])
    assert np.allclose(x, [1.0, 1.0], atol=1e-15)


def test_thomas_zero_pivot():
    with pytest.raises(NumericError):
        thomas_solve([1.0], [0.0, 1.0], [1.0], [1.0, 1.0])
    with pytest.raises(NumericError):
        thomas_solve([1.0], [1.0, 1.0], [1.0], [1.0, 1.0])


def test_thomas_band_lengths():
    with pytest.raises(ValueError):
        thomas_solve([1.0, 1.0], [2.0, 2.0], [1.0], [1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_thomas_residual_on_dominant_systems(n, seed):
    rng = Rng(seed)
    lo, up = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    x = thomas_solve(lo, diag, up, rhs)
    a = np.diag(diag) + np.diag(lo, -1) + np.diag(up, 1)
    assert np.max(np.abs(a @ x - rhs)) < 1e-12


# --- eigen-decompositions ---------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_jacobi_eigh_against_reference(n, seed):
    m = Rng(seed).normal(size=(n, n))
    a = m + m.T
    vals, vecs = jacobi_eigh(a)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.allclose(vals, np.linalg.eigvalsh(a)[::-1], atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
    assert np.allclose(a @ vecs, vecs * vals, atol=1e-9)


def test_jacobi_rejects_nonsquare():
    with pytest.raises(ValueError):
        jacobi_eigh(np.ones((2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 15), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_gram_jacobi_matches_gram_spectrum(n, d, seed):
    y = Rng(seed).normal(size=(n, d))
    vals, vecs = gram_jacobi(y)
    ref = np.linalg.eigvalsh(y.T @ y)[::-1]
    assert np.allclose(vals, ref, atol=1e-10 * max(1.0, ref[0]))
    assert np.allclose(vecs.T @ vecs, np.eye(d), atol=1e-12)


def test_spectrum_rank_one():
    v = np.array([1.0, 2.0, -1.0, 0.5])
    w = np.array([0.1, 0.2, 0.3, 0.4])
    vals, vecs = weighted_principal_spectrum(np.tile(v, (6, 1)), w, 4)
    assert vals[0] == pytest.approx(np.sum(w * v * v), rel=1e-12)
    assert np.all(np.abs(vals[1:]) < 1e-14)
    phi = vecs[:, 0]
    assert abs(abs(np.sum(w * phi * v)) - np.sqrt(np.sum(w * v * v))) < 1e-12


def test_spectrum_span_of_four():
    rng = Rng(11)
    d = 30
    q, _ = np.linalg.qr(rng.normal(size=(d, 4)))
    x = rng.normal(size=(50, 4)) @ q.T
    vals, _ = weighted_principal_spectrum(x, np.full(d, 1.0 / d), d)
    assert np.all(np.abs(vals[4:]) < 1e-12)
    assert vals[3] > 1e-3


def test_spectrum_trace_identity():
    rng = Rng(5)
    x = rng.normal(size=(10, 10))
    w = rng.uniform(0.1, 1.0, 10)
    vals, _ = weighted_principal_spectrum(x, w, 10)
    assert abs(vals.sum() - np.mean(np.sum(w * x * x, axis=1))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 20), st.integers(2, 15), st.integers(0, 2**32 - 1))
def test_spectrum_vectors_weighted_orthonormal(n, d, seed):
    rng = Rng(seed)
    x = rng.normal(size=(n, d))
    w = rng.uniform(0.05, 2.0, d)
    k = min(n, d)
    _, vecs = weighted_principal_spectrum(x, w, k)
    gram = vecs.T @ (w[:, None] * vecs)
    assert np.max(np.abs(gram - np.eye(k))) < 1e-8


def test_spectrum_errors():
    with pytest.raises(ValueError):
        weighted_principal_spectrum(np.ones((3, 2)), np.ones(2), 3)
    with pytest.raises(ValueError):
        weighted_principal_spectrum(np.ones((3, 2)), np.array([1.0, 0.0]), 1)
