"""Model-space pipelines.

Builds the normalized kernel family of a finite Blaschke product, the
coupled pair (diagonal operator on an orthonormal basis over the model
compression) with its coupling blocks, the explicit intertwiner that
block-diagonalizes the pair, and the shift-embedding witness with its
lower-bound certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._norms import spectral_norm
from .diskfn import (
    BlaschkeProduct,
    RationalFunction,
    blaschke_eval,
    _factor_rational,
    _resolve_quad_points,
    QUAD_POINTS_CAP,
    QUAD_STABLE_TOL,
    QUAD_FAIL_TOL,
)
from .errors import ConvergenceError, DegenerateInputError, InvariantViolation
from .interpolation import carleson_delta
from .operators import blaschke_of_operator, rational_of_operator

__all__ = [
    "ModelBasis",
    "ModelPairInstance",
    "IntertwinerReport",
    "EigenvectorReport",
    "ShiftWitnessReport",
    "build_model_basis",
    "make_pair_instance",
    "random_coupling",
    "geometric_zeros",
    "coupling_block",
    "coupling_block_oracle",
    "build_intertwiner",
    "eigenvector_residuals",
    "shift_witness_report",
]

GRAM_DIAG_TOL = 1e-8
EIGENRELATION_TOL = 1e-7
INTERTWINER_TOL = 1e-8
CONDITIONING_DELTA_FLOOR = 1e-8
TAIL_BOUND_CAP = 1e-3


def geometric_zeros(n: int) -> np.ndarray:
    """The classical geometric family 1 - 2^{-(k+1)}, k = 0..n-1."""
    return 1.0 - 2.0 ** -(np.arange(1, n + 1, dtype=float))


def random_coupling(n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded random coupling matrix with exactly zero diagonal."""
    rng = np.random.default_rng(seed)
    a = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    np.fill_diagonal(a, 0.0)
    return a


@dataclass(frozen=True)
class ModelBasis:
    """Kernels k_n = (1-|lam_n|^2)^{1/2} / (1 - conj(lam_n) z) * B_n(z),
    their Gram matrix, and its Cholesky factor (gram = chol @ chol^H)."""

    b: BlaschkeProduct
    kernels: tuple[RationalFunction, ...]
    gram: np.ndarray
    chol: np.ndarray
    eigenrelation_residual: float

    @property
    def zeros(self) -> np.ndarray:
        return np.asarray(self.b.zeros, dtype=complex)

    def kernel_coords(self) -> np.ndarray:
        """Coordinates of the kernels in the Gram-orthonormalized basis
        (column n holds k_n)."""
        return self.chol.conj().T

    def compression_matrix(self) -> np.ndarray:
        """The compression of multiplication by z, materialized in the
        orthonormalized coordinates: L^H diag(lam) L^{-H}."""
        lh = self.chol.conj().T
        return lh @ np.diag(self.zeros) @ np.linalg.inv(lh)


def _kernel_rational(zeros: np.ndarray, n: int) -> RationalFunction:
    lam = zeros[n]
    c = np.sqrt(1.0 - abs(lam) ** 2)
    if lam == 0.0:
        out = RationalFunction.from_factors(c)
    else:
        # c / (1 - conj(lam) z) = (-c / conj(lam)) / (z - 1/conj(lam))
        out = RationalFunction.from_factors(
            -c / np.conj(lam), (), (1.0 / np.conj(lam),)
        )
    for k, mu in enumerate(zeros):
        if k == n:
            continue
        out = out * _factor_rational(mu)
    return out


def _circle_gram(kernels, npts: int, weight=None) -> np.ndarray:
    """Matrix [m, n] = <w k_n, k_m> by the uniform boundary rule."""
    z = np.exp(2j * np.pi * np.arange(npts) / npts)
    vals = np.stack([k(z) for k in kernels])  # row n holds k_n on the grid
    wvals = vals if weight is None else vals * weight(z)[None, :]
    return (vals.conj() @ wvals.T) / npts


def _stable_gram(kernels, npts0: int, weight=None) -> np.ndarray:
    """Gram matrix by the doubling quadrature rule used for scalar inner
    products, applied to the whole matrix at once."""
    n = npts0
    coarse = _circle_gram(kernels, n, weight)
    while True:
        fine = _circle_gram(kernels, 2 * n, weight)
        diff = float(np.max(np.abs(fine - coarse)))
        if diff < QUAD_STABLE_TOL:
            return fine
        if 2 * n >= QUAD_POINTS_CAP:
            if diff > QUAD_FAIL_TOL:
                raise ConvergenceError(
                    f"Gram quadrature not converged at {2 * n} points"
                )
            return fine
        n *= 2
        coarse = fine


def build_model_basis(
    b: BlaschkeProduct, quadrature_points: int | None = None
) -> ModelBasis:
    """Kernel family of a finite Blaschke product with simple zeros.

    The Gram matrix comes from boundary quadrature; positive definiteness
    is required (near-degenerate zero families fail here).  The
    eigenrelation of the compression of multiplication by z is verified
    against an independently quadrature-computed compression.
    """
    if len(b) < 1:
        raise InvariantViolation("the product needs at least one zero")
    zeros = np.asarray(b.zeros, dtype=complex)
    npts0 = _resolve_quad_points(quadrature_points)
    kernels = tuple(_kernel_rational(zeros, n) for n in range(len(b)))
    gram = _stable_gram(kernels, npts0)
    gram = (gram + gram.conj().T) / 2.0
    if np.max(np.abs(np.diag(gram).real - 1.0)) > GRAM_DIAG_TOL:
        raise InvariantViolation("kernel norms deviate from 1 beyond tolerance")
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DegenerateInputError(
            "Gram matrix is not positive definite; zeros are too close"
        ) from None

    # Independent check of T1 k_n = lam_n k_n: the compression of
    # multiplication by z, in kernel coordinates, solves G C = Z with
    # Z[j, n] = <z k_n, k_j>; it must equal diag(zeros).
    zmat = _stable_gram(kernels, npts0, weight=lambda z: z)
    compression = np.linalg.solve(gram, zmat)
    residual = float(np.max(np.abs(compression - np.diag(zeros))))
    if residual > EIGENRELATION_TOL:
        raise ConvergenceError(
            f"compression eigenrelation residual {residual:.3e} exceeds "
            f"{EIGENRELATION_TOL:g}"
        )
    return ModelBasis(
        b=b, kernels=kernels, gram=gram, chol=chol, eigenrelation_residual=residual
    )


@dataclass(frozen=True)
class ModelPairInstance:
    """Coupled pair R = [[T0, A], [0, T1]]: T0 diagonal on an orthonormal
    basis, T1 the model compression materialized in Gram-orthonormalized
    coordinates, and A given by its pairing matrix a[j, n] = (A k_n, e_j)
    with exactly zero diagonal."""

    basis: ModelBasis
    coupling: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    a_block: np.ndarray
    r: np.ndarray

    @property
    def zeros(self) -> np.ndarray:
        return self.basis.zeros

    @property
    def dim(self) -> int:
        return self.t0.shape[0]


def make_pair_instance(
    basis: ModelBasis | BlaschkeProduct, coupling
) -> ModelPairInstance:
    if isinstance(basis, BlaschkeProduct):
        basis = build_model_basis(basis)
    n = len(basis.kernels)
    a = np.asarray(coupling, dtype=complex)
    if a.shape != (n, n):
        raise InvariantViolation(f"coupling must be {n}x{n}; got {a.shape}")
    if np.any(np.diag(a) != 0.0):
        raise InvariantViolation("coupling diagonal must be exactly zero")
    zeros = basis.zeros
    t0 = np.diag(zeros)
    t1 = basis.compression_matrix()
    # a holds pairings against kernel inputs; convert to the orthonormal
    # coordinates in which T1 is materialized: A_block @ (coords of k_n)
    # must reproduce column n of a.
    a_block = np.linalg.solve(basis.kernel_coords().T, a.T).T
    r = np.zeros((2 * n, 2 * n), dtype=complex)
    r[:n, :n] = t0
    r[:n, n:] = a_block
    r[n:, n:] = t1
    return ModelPairInstance(
        basis=basis, coupling=a, t0=t0, t1=t1, a_block=a_block, r=r
    )


def coupling_block(inst: ModelPairInstance, phi: RationalFunction) -> np.ndarray:
    """Pairing matrix of the phi-image coupling: entry (j, n) equals the
    divided difference of phi at (lam_n, lam_j) times a[j, n]; confluent
    diagonal entries are phi'(lam_n) a[n, n] = 0."""
    lam = inst.zeros
    vals = phi(lam)
    num = vals[None, :] - vals[:, None]  # phi(lam_n) - phi(lam_j) at (j, n)
    den = lam[None, :] - lam[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        dd = num / den
    dphi = phi.derivative()(lam)
    np.fill_diagonal(dd, dphi)
    return dd * inst.coupling


def coupling_block_oracle(inst: ModelPairInstance, phi: RationalFunction) -> np.ndarray:
    """Same pairing matrix, via rational functional calculus on the
    assembled pair: phi(R) is computed densely and its upper-right block is
    converted back to kernel pairings.  Exists solely as the independent
    route for cross-checking ``coupling_block``."""
    n = inst.dim
    phir = rational_of_operator(phi, inst.r)
    block = phir[:n, n:]
    return block @ inst.basis.kernel_coords()


@dataclass(frozen=True)
class IntertwinerReport:
    """Y with A = T0 Y - Y T1, reported in both kernel pairings
    (y[j, n] = (Y k_n, e_j)) and orthonormal coordinates."""

    y_pairing: np.ndarray
    y_block: np.ndarray
    equation_residual: float
    offdiag_residual: float
    norm: float
    conditioning_warning: bool

    def to_json(self) -> dict:
        return {
            "equation_residual": self.equation_residual,
            "offdiag_residual": self.offdiag_residual,
            "norm": self.norm,
            "conditioning_warning": self.conditioning_warning,
        }


def build_intertwiner(inst: ModelPairInstance, alpha=None) -> IntertwinerReport:
    """Columnwise intertwiner: Y k_n = -(coupling block of B_n/B_n(lam_n))
    applied to k_n, plus alpha_n e_n.

    Certifies A = T0 Y - Y T1 and that conjugating R by [[I, Y], [0, I]]
    zeroes the off-diagonal block.
    """
    n = inst.dim
    lam = inst.zeros
    if alpha is None:
        alpha = np.zeros(n, dtype=complex)
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape != (n,):
        raise InvariantViolation(f"alpha must have length {n}")
    y_pairing = np.zeros((n, n), dtype=complex)
    for k in range(n):
        if n == 1:
            phi_k = RationalFunction([1.0])
        else:
            bn = inst.basis.b.omit(k)
            scale = 1.0 / blaschke_eval(bn, lam[k])
            phi_k = bn.as_rational() * scale
        col = coupling_block(inst, phi_k)[:, k]
        y_pairing[:, k] = -col
        y_pairing[k, k] += alpha[k]
    y_block = np.linalg.solve(inst.basis.kernel_coords().T, y_pairing.T).T

    lhs = inst.t0 @ y_block - y_block @ inst.t1
    scale = max(1.0, spectral_norm(inst.a_block))
    eq_res = float(spectral_norm(inst.a_block - lhs))
    conj = np.eye(2 * n, dtype=complex)
    conj[:n, n:] = y_block
    conj_inv = np.eye(2 * n, dtype=complex)
    conj_inv[:n, n:] = -y_block
    transported = conj @ inst.r @ conj_inv
    off_res = float(spectral_norm(transported[:n, n:]))
    delta = carleson_delta(lam).delta
    return IntertwinerReport(
        y_pairing=y_pairing,
        y_block=y_block,
        equation_residual=eq_res / scale,
        offdiag_residual=off_res / scale,
        norm=float(spectral_norm(y_block)),
        conditioning_warning=delta < CONDITIONING_DELTA_FLOOR,
    )


@dataclass(frozen=True)
class EigenvectorReport:
    """Per-index residuals of R v_n = lam_n v_n for the explicit
    eigenvectors, with the norm sandwich data."""

    residuals: np.ndarray
    norms: np.ndarray
    delta: float
    m_upper: float
    upper_bound: float

    def to_json(self) -> dict:
        return {
            "residuals": self.residuals.tolist(),
            "norms": self.norms.tolist(),
            "delta": self.delta,
            "m_upper": self.m_upper,
            "upper_bound": self.upper_bound,
        }


def eigenvector_residuals(
    inst: ModelPairInstance, m_upper: float | None = None
) -> EigenvectorReport:
    """Residuals of the explicit eigenvectors (coupling image of k_n,
    stacked over k_n) and the norm sandwich 1 <= ||v_n|| <= (M^2/delta^2+1)^{1/2}.

    ``m_upper`` is a polynomial-bound upper estimate for the pair; by
    default the Stein witness condition number, valid by von Neumann's
    inequality since the conjugated operator is a contraction.
    """
    from .similarity import lyapunov_similarity

    n = inst.dim
    lam = inst.zeros
    coords = inst.basis.kernel_coords()
    residuals = np.empty(n)
    norms = np.empty(n)
    for k in range(n):
        if n == 1:
            phi_k = RationalFunction([1.0])
        else:
            bn = inst.basis.b.omit(k)
            phi_k = bn.as_rational() * (1.0 / blaschke_eval(bn, lam[k]))
        top = coupling_block(inst, phi_k)[:, k]
        bottom = coords[:, k]
        v = np.concatenate([top, bottom])
        norms[k] = np.linalg.norm(v)
        residuals[k] = np.linalg.norm(inst.r @ v - lam[k] * v) / norms[k]
    delta = carleson_delta(lam).delta
    if m_upper is None:
        m_upper = lyapunov_similarity(inst.r).cond
    upper = float(np.sqrt(m_upper**2 / delta**2 + 1.0))
    return EigenvectorReport(
        residuals=residuals,
        norms=norms,
        delta=delta,
        m_upper=float(m_upper),
        upper_bound=upper,
    )


# ---------------------------------------------------------------------------
# shift-embedding witness


def _taylor_coefficients(phi: RationalFunction, count: int) -> np.ndarray:
    """Power-series coefficients of a rational function analytic at 0."""
    num = np.zeros(count, dtype=complex)
    num[: min(count, phi.num.size)] = phi.num[:count]
    den = np.zeros(count, dtype=complex)
    den[: min(count, phi.den.size)] = phi.den[:count]
    if den[0] == 0.0:
        raise InvariantViolation("denominator vanishes at 0")
    c = np.empty(count, dtype=complex)
    for j in range(count):
        acc = num[j]
        if j:
            acc -= np.dot(c[:j], den[j:0:-1])
        c[j] = acc / den[0]
    return c


@dataclass(frozen=True)
class ShiftWitnessReport:
    shift_dim: int
    tail_reserve: int
    tail_bound: float
    upper_left_residual: float
    lower_left_residual: float
    identity_residual: float
    restricted_min_singular: float

    def to_json(self) -> dict:
        return {
            "shift_dim": self.shift_dim,
            "tail_reserve": self.tail_reserve,
            "tail_bound": self.tail_bound,
            "upper_left_residual": self.upper_left_residual,
            "lower_left_residual": self.lower_left_residual,
            "identity_residual": self.identity_residual,
            "restricted_min_singular": self.restricted_min_singular,
        }


def shift_witness_report(
    t0,
    a,
    theta: BlaschkeProduct,
    shift_dim: int,
    tail_reserve: int | None = None,
) -> ShiftWitnessReport:
    """Witness certificates for R = [[T0, A], [0, V]] with V the exact
    coefficient shift on truncated power series.

    Checks, writing theta(R) = [[Z, A_theta], [0, theta(V)]]:
      (i)  Z and the lower-left block vanish;
      (ii) T0 A_theta + A theta(V) - A_theta V has residual below
           tail_bound + 1e-9;
      (iii) X = theta(R) restricted to vectors supported in the first
           shift_dim - d coordinates has smallest singular value at least
           1 - tail_bound.

    tail_bound is the computed ell-1 tail of the Taylor coefficients of
    theta beyond the reserve d; all truncation error lives in it.
    """
    t0 = np.asarray(t0, dtype=complex)
    a = np.asarray(a, dtype=complex)
    d0 = t0.shape[0]
    m = int(shift_dim)
    if a.shape != (d0, m):
        raise InvariantViolation(f"A must have shape {(d0, m)}; got {a.shape}")
    theta_t0 = blaschke_of_operator(theta, t0)
    if spectral_norm(theta_t0) > 1e-8:
        raise InvariantViolation("theta(T0) must vanish within 1e-8")

    r = float(np.max(np.abs(np.asarray(theta.zeros)))) if len(theta) else 0.0
    if tail_reserve is None:
        if r == 0.0:
            d = 2
        else:
            d = int(np.ceil(np.log(1e-10) / np.log(r)))
    else:
        d = int(tail_reserve)
    if d >= m:
        raise InvariantViolation(
            f"tail reserve {d} does not fit below shift_dim {m}; "
            "shift_dim too small for the requested zeros"
        )

    count = max(4 * m, m + 256)
    coeffs = _taylor_coefficients(theta.as_rational(), count)
    tail = float(np.sum(np.abs(coeffs[d:])))
    if r > 0.0:
        tail += float(np.abs(coeffs[-1]) * r / (1.0 - r))
    if tail > TAIL_BOUND_CAP:
        raise InvariantViolation(
            f"tail bound {tail:.3e} exceeds {TAIL_BOUND_CAP:g}; shift_dim too "
            "small for the requested zeros"
        )

    v = np.zeros((m, m), dtype=complex)
    idx = np.arange(m - 1)
    v[idx + 1, idx] = 1.0
    big = np.zeros((d0 + m, d0 + m), dtype=complex)
    big[:d0, :d0] = t0
    big[:d0, d0:] = a
    big[d0:, d0:] = v
    theta_r = blaschke_of_operator(theta, big)

    upper_left = float(spectral_norm(theta_r[:d0, :d0]))
    lower_left = float(spectral_norm(theta_r[d0:, :d0]))
    a_theta = theta_r[:d0, d0:]
    theta_v = theta_r[d0:, d0:]
    identity = t0 @ a_theta + a @ theta_v - a_theta @ v
    identity_res = float(spectral_norm(identity))

    x = theta_r[:, d0:]
    restricted = x[:, : m - d]
    smin = float(np.linalg.svd(restricted, compute_uv=False)[-1])
    return ShiftWitnessReport(
        shift_dim=m,
        tail_reserve=d,
        tail_bound=tail,
        upper_left_residual=upper_left,
        lower_left_residual=lower_left,
        identity_residual=identity_res,
        restricted_min_singular=smin,
    )
