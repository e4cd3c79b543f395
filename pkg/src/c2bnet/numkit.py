"""Dense linear algebra, seeded random streams and small direct/iterative solvers.

Matrices are plain 2-D ``float64`` numpy arrays (row-major); vectors are 1-D.
"""

from __future__ import annotations

import hashlib
import logging
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class NumericError(RuntimeError):
    """A numerical routine failed (non-convergence, zero pivot, non-finite values)."""


class ConvergenceError(NumericError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    return m


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def splitmix64(x: int) -> int:
    """One step of the splitmix64 output function (Steele, Lea & Flood)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label_hash(label: str | int) -> int:
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """Seeded random stream.

    The 64-bit seed is whitened with splitmix64 and drives numpy's PCG64 bit
    generator, whose output is specified bit-for-bit across platforms.
    ``split(label)`` derives a child seed by mixing the parent seed with a
    stable hash of the label, so child streams do not depend on how many
    draws the parent has made.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.PCG64(splitmix64(self.seed)))

    def split(self, label: str | int) -> "Rng":
        return Rng(splitmix64(self.seed ^ splitmix64(_label_hash(label))))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def raw(self, size: int) -> np.ndarray:
        """Raw 64-bit outputs of the underlying generator."""
        return self._gen.bit_generator.random_raw(size)


# ---------------------------------------------------------------------------
# dense kernels
# ---------------------------------------------------------------------------


def matvec(a, x) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {a.shape} times vector {x.shape}")
    return a @ x


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    x0=None,
) -> tuple[np.ndarray, int]:
    """Solve ``A x = b`` for a symmetric positive definite operator.

    Stops once ``||A x - b||_2 <= tol * ||b||_2`` and returns ``(x, iterations)``.
    The residual is recomputed from scratch at exit so the returned solution
    honours the tolerance regardless of recurrence drift.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=np.float64)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    target = tol * bnorm
    r = b - apply_a(x)
    p = r.copy()
    rr = float(r @ r)
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise ConvergenceError("operator is not positive definite", np.sqrt(rr), it)
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= target:
            true_r = float(np.linalg.norm(b - apply_a(x)))
            if true_r <= target:
                return x, it
            r = b - apply_a(x)
            rr_new = float(r @ r)
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise ConvergenceError("conjugate gradient did not converge", float(np.sqrt(rr)), max_iter)


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Tridiagonal solve. ``lower`` and ``upper`` have length ``n - 1``."""
    a = np.asarray(lower, dtype=np.float64)
    b = np.asarray(diag, dtype=np.float64)
    c = np.asarray(upper, dtype=np.float64)
    d = np.asarray(rhs, dtype=np.float64)
    n = b.shape[0]
    if d.shape[0] != n or a.shape[0] != n - 1 or c.shape[0] != n - 1:
        raise ValueError("inconsistent tridiagonal band lengths")
    cp = np.empty(max(n - 1, 0))
    dp = np.empty(n)
    if b[0] == 0.0:
        raise NumericError("zero pivot at row 0")
    if n > 1:
        cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        m = b[i] - a[i - 1] * cp[i - 1]
        if m == 0.0:
            raise NumericError(f"zero pivot at row {i}")
        if i < n - 1:
            cp[i] = c[i] / m
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / m
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _round_robin(m: int):
    """Pairings of ``range(m)`` (m even) such that every pair meets once per sweep."""
    players = list(range(m))
    for _ in range(m - 1):
        yield [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a, tol: float = 1e-15, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are scheduled in round-robin order so each round applies n/2
    disjoint (hence commuting) rotations at once. Returns eigenvalues in
    descending order and the matching orthonormal eigenvectors as columns.
    """
    a = as_matrix(a).copy()
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("matrix must be square")
    a = 0.5 * (a + a.T)
    m = n + (n % 2)
    if m != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m)
    rounds = [(np.array([p for p, _ in r]), np.array([q for _, q in r])) for r in _round_robin(m)]
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            app = a[p, p]
            aqq = a[q, q]
            t = np.zeros_like(apq)
            theta = (aqq[active] - app[active]) / (2.0 * apq[active])
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t[active] = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            col_p = a[:, p].copy()
            col_q = a[:, q]
            a[:, p] = col_p * c - col_q * s
            a[:, q] = col_p * s + col_q * c
            row_p = a[p, :].copy()
            row_q = a[q, :]
            a[p, :] = row_p * c[:, None] - row_q * s[:, None]
            a[q, :] = row_p * s[:, None] + row_q * c[:, None]
            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    else:
        raise ConvergenceError("Jacobi iteration did not converge", off, max_sweeps)
    vals = np.diag(a)[:n]
    vecs = v[:n, :n]
    order = np.argsort(-vals, kind="stable")
    return vals[order].copy(), vecs[:, order].copy()


def gram_jacobi(y, tol: float = 1e-15, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``y^T y`` by one-sided Jacobi rotations applied to the columns of ``y``.

    This is the cyclic Jacobi iteration for the Gram matrix carried out without
    ever forming it: each rotation is chosen to zero one Gram entry and is
    applied to the two columns directly. Small eigenvalues and their vectors
    are then accurate relative to the data rather than to its square.
    Returns eigenvalues (descending) and orthonormal eigenvectors as columns.
    """
    y = as_matrix(y).copy()
    n, d = y.shape
    m = d + (d % 2)
    if m != d:
        y = np.pad(y, ((0, 0), (0, 1)))
    v = np.eye(m)
    rounds = [(np.array([p for p, _ in r]), np.array([q for _, q in r])) for r in _round_robin(m)]
    # columns below round-off of the whole matrix carry no information
    floor = (np.finfo(float).eps ** 2) * float(np.sum(y * y))
    sweeps = 0
    for _ in range(max_sweeps):
        worst = 0.0
        for p, q in rounds:
            yp, yq = y[:, p], y[:, q]
            alpha = np.einsum("ij,ij->j", yp, yp)
            beta = np.einsum("ij,ij->j", yq, yq)
            gamma = np.einsum("ij,ij->j", yp, yq)
            denom = np.sqrt(alpha * beta)
            active = (np.abs(gamma) > tol * denom) & (np.minimum(alpha, beta) > floor)
            if not np.any(active):
                continue
            worst = max(worst, float(np.max(np.abs(gamma[active]) / denom[active])))
            t = np.zeros_like(gamma)
            theta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
            sgn = np.where(theta >= 0.0, 1.0, -1.0)
            t[active] = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            y[:, p] = yp * c - yq * s
            y[:, q] = yp * s + yq * c
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
        sweeps += 1
        if worst <= tol:
            break
    else:
        raise ConvergenceError("one-sided Jacobi iteration did not converge", worst, max_sweeps)
    vals = np.einsum("ij,ij->j", y, y)[:d]
    vecs = v[:d, :d]
    log.debug("one-sided Jacobi converged in %d sweeps", sweeps)
    order = np.argsort(-vals, kind="stable")
    return vals[order].copy(), vecs[:, order].copy()


def weighted_principal_spectrum(x, weights, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of the quadrature-weighted second-moment matrix.

    ``x`` holds one sample per row. The returned vectors (columns, shape
    ``(D, k)``) are orthonormal in the inner product ``<a, b> = sum(w * a * b)``.
    The Gram matrix is diagonalised implicitly (see :func:`gram_jacobi`).
    """
    x = as_matrix(x)
    w = np.asarray(weights, dtype=np.float64)
    n, d = x.shape
    if w.shape != (d,) or np.any(w <= 0):
        raise ValueError("weights must be positive and match the row length")
    if not 1 <= k <= d:
        raise ValueError(f"k={k} must lie in [1, {d}]")
    sw = np.sqrt(w)
    vals, vecs = gram_jacobi(x * sw / np.sqrt(n))
    return vals[:k], vecs[:, :k] / sw[:, None]
