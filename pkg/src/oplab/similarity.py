"""Similarity witnesses: Stein-based similarity to a contraction, the
eigenbasis diagonalizing map, the Sylvester intertwiner, the direct-sum
map with its inverse-norm certificate, and the annihilator splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._norms import spectral_norm
from .diskfn import BlaschkeProduct
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InvariantViolation,
    SpectralRadiusError,
)
from .operators import as_operator, blaschke_of_operator, power_bound, spectral_radius

__all__ = [
    "SimilarityWitness",
    "DirectSumCertificate",
    "C0Split",
    "lyapunov_similarity",
    "stein_via_diagonalization",
    "eigenbasis_similarity",
    "sylvester_intertwiner",
    "direct_sum_similarity",
    "c0_split",
]

STEIN_RTOL = 1e-12
STEIN_ITERATION_CAP = 100_000
KRONECKER_DIM_CAP = 64
EIGEN_RESIDUAL_TOL = 1e-8
SPECTRAL_GAP_TOL = 1e-8
NULLSPACE_TOL = 1e-8
STABILITY_THRESHOLD = 0.1
# Witnesses with condition number beyond this are flagged as ill conditioned.
COND_FLAG = 1e3


@dataclass(frozen=True)
class SimilarityWitness:
    """Invertible X with its condition number and the conjugated norm
    ||X T X^{-1}||; extra diagnostics depend on the construction."""

    x: np.ndarray
    cond: float
    conjugated_norm: float
    gram_cond: float | None = None
    stein_min_eig: float | None = None
    ill_conditioned: bool = False

    def to_json(self) -> dict:
        out = {
            "cond": self.cond,
            "conjugated_norm": self.conjugated_norm,
            "ill_conditioned": self.ill_conditioned,
        }
        if self.gram_cond is not None:
            out["gram_cond"] = self.gram_cond
        if self.stein_min_eig is not None:
            out["stein_min_eig"] = self.stein_min_eig
        return out


def _stein_solution(t: np.ndarray) -> np.ndarray:
    """Solve P - T^* P T = I for the strictly stable T."""
    n = t.shape[0]
    rho = spectral_radius(t)
    if rho >= 1.0 - 1e-10:
        raise SpectralRadiusError(
            f"Stein iteration requires spectral radius < 1 - 1e-10; got {rho:.17g}",
            radius=rho,
        )
    eye = np.eye(n, dtype=complex)
    expected = math.inf
    if 0.0 < rho < 1.0:
        expected = math.log(STEIN_RTOL) / (2.0 * math.log(rho))
    if expected > STEIN_ITERATION_CAP:
        if n <= KRONECKER_DIM_CAP:
            # vec(P) - (T^T kron T^*) vec(P) = vec(I); O(n^6) but gated small.
            sys = np.eye(n * n, dtype=complex) - np.kron(t.T, t.conj().T)
            p = np.linalg.solve(sys, eye.ravel(order="F")).reshape((n, n), order="F")
            return (p + p.conj().T) / 2.0
        raise ConvergenceError(
            f"Stein iteration would need ~{expected:.3g} steps (cap "
            f"{STEIN_ITERATION_CAP}) and the Kronecker fallback is gated to "
            f"dim <= {KRONECKER_DIM_CAP}"
        )
    th = t.conj().T
    p = eye.copy()
    prev_inc = math.inf
    for k in range(1, STEIN_ITERATION_CAP + 1):
        new = eye + th @ p @ t
        inc = spectral_norm(new - p)
        if inc <= STEIN_RTOL * spectral_norm(new):
            return (new + new.conj().T) / 2.0
        if k % 64 == 0:
            if inc >= prev_inc:
                raise ConvergenceError(
                    "Stein iteration stopped contracting; spectral radius "
                    "estimate may be unreliable"
                )
            prev_inc = inc
        p = new
    raise ConvergenceError("Stein iteration hit the iteration cap")


def lyapunov_similarity(t) -> SimilarityWitness:
    """Similarity-to-a-contraction witness X = P^{1/2} from the Stein
    equation P - T^* P T = I; guarantees ||X T X^{-1}|| <= 1 and
    cond(X) = cond(P)^{1/2}."""
    t = as_operator(t)
    p = _stein_solution(t)
    vals, vecs = np.linalg.eigh(p)
    if vals[0] <= 0.0:
        raise ConvergenceError("Stein solution lost positive definiteness")
    x = (vecs * np.sqrt(vals)) @ vecs.conj().T
    xinv = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
    conj_norm = spectral_norm(x @ t @ xinv)
    stein_gap = p - t.conj().T @ p @ t - np.eye(t.shape[0])
    min_eig = float(np.linalg.eigvalsh((stein_gap + stein_gap.conj().T) / 2.0)[0])
    cond = float(np.sqrt(vals[-1] / vals[0]))
    return SimilarityWitness(
        x=x,
        cond=cond,
        conjugated_norm=float(conj_norm),
        stein_min_eig=min_eig,
        ill_conditioned=cond > COND_FLAG,
    )


def stein_via_diagonalization(x, xinv, eigvals) -> np.ndarray:
    """Exact Stein solution P - T^* P T = I for T = X diag(eigvals) Xinv.

    The Neumann series sums in closed form through the eigenbasis:
    P = Xinv^H S Xinv with S = (X^H X) / (1 - conj(lam_i) lam_j) entrywise.
    Usable at spectral radii far beyond the reach of the dense iteration;
    the price is the conditioning of the supplied eigenbasis.
    """
    x = np.asarray(x, dtype=complex)
    xinv = np.asarray(xinv, dtype=complex)
    lam = np.asarray(eigvals, dtype=complex).ravel()
    rho = float(np.max(np.abs(lam)))
    if rho >= 1.0:
        raise SpectralRadiusError(
            f"eigenvalues must lie strictly inside the disk; got radius {rho:.17g}",
            radius=rho,
        )
    g = x.conj().T @ x
    denom = 1.0 - np.conj(lam)[:, None] * lam[None, :]
    p = xinv.conj().T @ (g / denom) @ xinv
    return (p + p.conj().T) / 2.0


def eigenbasis_similarity(t, eigvecs) -> SimilarityWitness:
    """Witness mapping the (normalized) eigenvectors to the standard basis.

    cond(X) equals the square root of the condition number of the Gram
    matrix of the normalized eigenvectors; both are reported.
    """
    t = as_operator(t)
    v = np.asarray(eigvecs, dtype=complex)
    if v.ndim != 2 or v.shape[0] != t.shape[0] or v.shape[1] != t.shape[0]:
        raise InvariantViolation("eigvecs must be a square matrix of columns")
    norms = np.linalg.norm(v, axis=0)
    if np.any(norms == 0.0):
        raise InvariantViolation("zero eigenvector column")
    v = v / norms
    svals = np.linalg.svd(v, compute_uv=False)
    if svals[-1] <= 1e-12 * svals[0]:
        raise DegenerateInputError("eigenvector matrix is numerically rank deficient")
    lam = np.einsum("ij,ij->j", np.conj(v), t @ v)
    residuals = np.linalg.norm(t @ v - v * lam, axis=0)
    scale = max(1.0, spectral_norm(t))
    if np.max(residuals) > EIGEN_RESIDUAL_TOL * scale:
        raise InvariantViolation(
            f"eigenvector residual {np.max(residuals):.3e} exceeds tolerance"
        )
    x = np.linalg.inv(v)
    conj = x @ t @ v
    off = conj - np.diag(np.diag(conj))
    cond = float(svals[0] / svals[-1])
    gram = v.conj().T @ v
    gvals = np.linalg.eigvalsh((gram + gram.conj().T) / 2.0)
    return SimilarityWitness(
        x=x,
        cond=cond,
        conjugated_norm=float(spectral_norm(conj)),
        gram_cond=float(gvals[-1] / gvals[0]),
        ill_conditioned=cond > COND_FLAG,
    )


def sylvester_intertwiner(t, v, a) -> np.ndarray:
    """Solve A = T Y - Y V for Y; requires the spectra of T and V to be
    separated by more than ``SPECTRAL_GAP_TOL``."""
    t = as_operator(t)
    v = as_operator(v)
    a = np.asarray(a, dtype=complex)
    if a.shape != (t.shape[0], v.shape[0]):
        raise InvariantViolation(
            f"A must map the V-space to the T-space; expected shape "
            f"{(t.shape[0], v.shape[0])}, got {a.shape}"
        )
    et = np.linalg.eigvals(t)
    ev = np.linalg.eigvals(v)
    gap = float(np.min(np.abs(et[:, None] - ev[None, :])))
    if gap <= SPECTRAL_GAP_TOL:
        raise DegenerateInputError(
            f"spectra of T and V overlap (gap {gap:.3e}); the Sylvester "
            "equation is ill posed"
        )
    y = scipy.linalg.solve_sylvester(t, -v, a)
    residual = spectral_norm(t @ y - y @ v - a)
    allowed = 1e-9 * ((spectral_norm(t) + spectral_norm(v)) * spectral_norm(y)
                      + spectral_norm(a))
    if residual > allowed + 1e-300:
        raise ConvergenceError(
            f"Sylvester residual {residual:.3e} exceeds the certified level"
        )
    return y


def _orthonormal(basis: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(basis)
    if np.min(np.abs(np.diag(r))) <= 1e-12 * max(1.0, np.max(np.abs(np.diag(r)))):
        raise DegenerateInputError("basis columns are numerically dependent")
    return q


@dataclass(frozen=True)
class DirectSumCertificate:
    """Witness X(x + y) = x + y for H = M + N together with the certified
    inverse bound (1 + 2C/c + 2(C/c)^2)^{1/2}."""

    x: np.ndarray
    cond: float
    conjugated_norm: float
    inverse_norm: float
    certified_bound: float
    power_constant: float
    lower_constant: float

    def to_json(self) -> dict:
        return {
            "cond": self.cond,
            "conjugated_norm": self.conjugated_norm,
            "inverse_norm": self.inverse_norm,
            "certified_bound": self.certified_bound,
            "power_constant": self.power_constant,
            "lower_constant": self.lower_constant,
        }


def direct_sum_similarity(t, basis_m, basis_n, n_max: int = 200) -> DirectSumCertificate:
    """Certified similarity T ~ T|_M direct-sum T|_N for invariant M, N.

    Preconditions: both subspaces invariant (residual < 1e-8), T|_M
    diagonalizable with unimodular spectrum (the finite-dimensional proxy
    for similarity to an isometry), and T|_N stable in the sense
    ||(T|_N)^{n_max}|| < 0.1.  The certificate uses
    C = max_{0<=k<=n_max} ||T^k|| and c = min_{0<=k<=n_max} of the smallest
    singular value of T^k restricted to M.
    """
    t = as_operator(t)
    qm = _orthonormal(np.asarray(basis_m, dtype=complex))
    qn = _orthonormal(np.asarray(basis_n, dtype=complex))
    dim = t.shape[0]
    if qm.shape[1] + qn.shape[1] != dim:
        raise InvariantViolation("M and N must jointly span the space")
    scale = max(1.0, spectral_norm(t))

    for name, q in (("M", qm), ("N", qn)):
        image = t @ q
        residual = spectral_norm(image - q @ (q.conj().T @ image))
        if residual > 1e-8 * scale:
            raise InvariantViolation(
                f"{name} is not invariant (residual {residual:.3e})"
            )

    tm = qm.conj().T @ t @ qm
    tn = qn.conj().T @ t @ qn
    evals, evecs = np.linalg.eig(tm)
    if np.max(np.abs(np.abs(evals) - 1.0), initial=0.0) > 1e-8:
        raise InvariantViolation("T|_M must have unimodular spectrum")
    sv = np.linalg.svd(evecs, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise InvariantViolation("T|_M must be diagonalizable")
    stab = spectral_norm(np.linalg.matrix_power(tn, n_max))
    if stab >= STABILITY_THRESHOLD:
        raise InvariantViolation(
            f"||(T|_N)^{n_max}|| = {stab:.3e} violates the stability threshold"
        )

    big_c = power_bound(t, n_max)
    small_c = 1.0  # k = 0 term: smallest singular value of Q_M itself
    p = qm.copy()
    for _ in range(n_max):
        p = t @ p
        small_c = min(small_c, float(np.linalg.svd(p, compute_uv=False)[-1]))
    kappa = big_c / small_c
    bound = math.sqrt(1.0 + 2.0 * kappa + 2.0 * kappa * kappa)

    x = np.concatenate([qm, qn], axis=1)
    svx = np.linalg.svd(x, compute_uv=False)
    inverse_norm = float(1.0 / svx[-1])
    direct = np.zeros_like(t)
    m = qm.shape[1]
    direct[:m, :m] = tm
    direct[m:, m:] = tn
    return DirectSumCertificate(
        x=x,
        cond=float(svx[0] / svx[-1]),
        conjugated_norm=float(spectral_norm(direct)),
        inverse_norm=inverse_norm,
        certified_bound=float(bound),
        power_constant=float(big_c),
        lower_constant=float(small_c),
    )


@dataclass(frozen=True)
class C0Split:
    """Block data of T over ker theta0(T) and its orthogonal complement.

    ``lower`` keeps the (numerically tiny) lower-left block so the
    round trip ``reassemble`` is an exact unitary change of coordinates.
    """

    t0: np.ndarray
    a: np.ndarray
    t1: np.ndarray
    lower: np.ndarray
    basis0: np.ndarray
    basis1: np.ndarray
    lower_residual: float
    theta0_residual: float
    trivial_kernel: bool

    def reassemble(self) -> np.ndarray:
        q = np.concatenate([self.basis0, self.basis1], axis=1)
        d0 = self.t0.shape[0]
        n = q.shape[0]
        s = np.zeros((n, n), dtype=complex)
        s[:d0, :d0] = self.t0
        s[:d0, d0:] = self.a
        s[d0:, :d0] = self.lower
        s[d0:, d0:] = self.t1
        return q @ s @ q.conj().T


def c0_split(t, theta0: BlaschkeProduct) -> C0Split:
    """Split T over H0 = ker theta0(T) and H1 = H - H0 (orthogonal).

    The kernel is extracted from the SVD of theta0(T) at tolerance
    ``NULLSPACE_TOL``; the returned data certifies theta0(T0) ~ 0 and the
    vanishing lower-left block (invariance of H0).
    """
    t = as_operator(t)
    img = blaschke_of_operator(theta0, t)
    u, s, vh = np.linalg.svd(img)
    scale = max(1.0, float(s[0]) if s.size else 1.0)
    rank = int(np.sum(s > NULLSPACE_TOL * scale))
    dim = t.shape[0]
    basis0 = vh[rank:].conj().T  # orthonormal kernel basis
    basis1 = vh[:rank].conj().T
    d0 = basis0.shape[1]
    q = np.concatenate([basis0, basis1], axis=1)
    m = q.conj().T @ t @ q
    t0 = m[:d0, :d0]
    a = m[:d0, d0:]
    t1 = m[d0:, d0:]
    lower = m[d0:, :d0]
    lower_res = float(spectral_norm(lower)) if lower.size else 0.0
    theta_res = float(spectral_norm(blaschke_of_operator(theta0, t0))) if d0 else 0.0
    return C0Split(
        t0=t0,
        a=a,
        t1=t1,
        lower=lower,
        basis0=basis0,
        basis1=basis1,
        lower_residual=lower_res,
        theta0_residual=theta_res,
        trivial_kernel=(d0 == 0),
    )
