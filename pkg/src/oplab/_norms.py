"""Spectral-norm estimation kernels.

Dense norms use exact SVD up to the documented crossover dimension and
two-sided power iteration above it.  The batched family iteration serves
scans over operators of the form X diag(d) Xinv, which covers powers,
sign patterns, resolvents, polynomial images, and basis projections of a
diagonalizable operator with a single kernel.
"""

from __future__ import annotations

import numpy as np

SVD_CROSSOVER = 512
POWER_TOL = 1e-8
POWER_MAXIT = 500


def spectral_norm(a: np.ndarray, tol: float = POWER_TOL) -> float:
    """Largest singular value; exact SVD below the crossover, power iteration above."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if min(a.shape) <= SVD_CROSSOVER:
        return float(np.linalg.norm(a, 2))
    return _power_norm_dense(a, tol)


def _power_norm_dense(a: np.ndarray, tol: float, maxit: int = POWER_MAXIT) -> float:
    rng = np.random.default_rng(0x5EED)
    n = a.shape[1]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(maxit):
        w = a @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        u = a.conj().T @ w
        nu = np.linalg.norm(u)
        new = nu / nw  # converges to sigma_max from below
        v = u / nu
        if abs(new - est) <= tol * max(new, 1e-300):
            return float(new)
        est = new
    return float(est)


def diag_family_norms(
    x: np.ndarray,
    xinv: np.ndarray,
    cols: np.ndarray,
    tol: float = 1e-6,
    maxit: int = 120,
    seed: int = 0,
    v0: np.ndarray | None = None,
):
    """Spectral norms of X diag(cols[:, j]) Xinv for every column j.

    Two-sided power iteration on all columns simultaneously; each matrix
    touch is a pair of GEMMs.  Returns (norms, final_vectors) so callers
    can warm-start consecutive chunks.
    """
    n, b = cols.shape
    xh = x.conj().T
    xinvh = xinv.conj().T
    if v0 is None:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
        v += 1.0  # deterministic bias keeps zero-pattern starts generic
    else:
        v = v0.copy()
    v /= np.maximum(np.linalg.norm(v, axis=0, keepdims=True), 1e-300)
    est = np.zeros(b)
    done = np.zeros(b, dtype=bool)
    for _ in range(maxit):
        w = x @ (cols * (xinv @ v))
        mw = np.linalg.norm(w, axis=0)
        u = xinvh @ (np.conj(cols) * (xh @ w))
        nu = np.linalg.norm(u, axis=0)
        new = np.where(mw > 0.0, mw, 0.0)
        zero = nu == 0.0
        done |= zero
        stable = np.abs(new - est) <= tol * np.maximum(new, 1e-300)
        done |= stable
        est = new
        if np.all(done):
            break
        v = np.where(zero[None, :], v, u / np.maximum(nu, 1e-300)[None, :])
    return est, v


def chunked_diag_norms(
    x: np.ndarray,
    xinv: np.ndarray,
    column_maker,
    count: int,
    chunk: int = 512,
    tol: float = 1e-6,
    seed: int = 0,
):
    """Evaluate diag_family_norms over ``count`` columns produced lazily by
    ``column_maker(start, stop) -> (n, stop-start) array``; warm-starts each
    chunk with the previous chunk's final vectors."""
    out = np.empty(count)
    v0 = None
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        cols = column_maker(start, stop)
        if v0 is not None and v0.shape[1] != cols.shape[1]:
            v0 = v0[:, : cols.shape[1]]
        norms, v0 = diag_family_norms(x, xinv, cols, tol=tol, seed=seed + start, v0=v0)
        out[start:stop] = norms
    return out
