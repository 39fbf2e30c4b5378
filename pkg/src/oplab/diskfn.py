"""Scalar function theory on the unit disk.

Blaschke factors and finite Blaschke products, the pseudohyperbolic
metric, divided differences, rational functions with all poles outside
the closed disk, and Hardy-space inner products by boundary quadrature.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npp

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InvariantViolation,
    PoleLocationError,
)

__all__ = [
    "BlaschkeProduct",
    "RationalFunction",
    "blaschke_eval",
    "blaschke_log_modulus",
    "pseudohyperbolic",
    "divided_difference",
    "h2_inner",
    "h2_norm",
]

# Zeros are kept this far from the boundary so that pole distances and
# boundary quadrature stay well conditioned.
BOUNDARY_MARGIN = 1e-6
# Below this distance to a factor's pole, evaluation is refused.
POLE_PROXIMITY_TOL = 1e-14
# Arguments closer than this are treated as confluent (derivative branch).
CONFLUENT_TOL = 1e-10
# Common numerator/denominator roots are cancelled within this tolerance.
CANCEL_TOL = 1e-10
# Trailing coefficients below this relative size are trimmed.
TRIM_RTOL = 1e-12

DEFAULT_QUAD_POINTS = 4096
QUAD_POINTS_CAP = 2**20
QUAD_STABLE_TOL = 1e-10
QUAD_FAIL_TOL = 1e-8


def _check_disk(z: complex, name: str = "point", margin: float = 0.0) -> complex:
    z = complex(z)
    if abs(z) >= 1.0 - margin:
        raise InvariantViolation(
            f"{name} must lie in the open unit disk"
            + (f" with margin {margin:g}" if margin else "")
            + f"; got |{name}| = {abs(z):.17g}"
        )
    return z


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing (high-order) coefficients that are relatively negligible."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return np.zeros(1, dtype=complex)
    keep = coeffs.size
    while keep > 1 and abs(coeffs[keep - 1]) <= TRIM_RTOL * scale:
        keep -= 1
    out = coeffs[:keep].copy()
    if keep == 1 and abs(out[0]) <= TRIM_RTOL * scale:
        return np.zeros(1, dtype=complex)
    return out


class RationalFunction:
    """Quotient of polynomials with all poles outside the closed unit disk.

    Coefficients are stored in ascending order.  On construction, common
    numerator/denominator roots are cancelled within ``CANCEL_TOL`` (the
    single source of coefficient noise: cancellation rebuilds the
    polynomials from companion-matrix roots) and the pole invariant is
    re-checked.

    Instances built from known linear factors (``from_factors``,
    Blaschke-product conversions, model-space kernels) additionally carry
    their root/pole data and evaluate through it: expanded coefficients of
    products with zeros clustered near the boundary lose many digits to
    cancellation near the cluster, while factor-wise evaluation does not.
    """

    __slots__ = ("num", "den", "_factored")

    def __init__(self, num, den=(1.0,)):
        num = _trim(num)
        den = _trim(den)
        if np.all(den == 0.0):
            raise InvariantViolation("denominator is identically zero")
        num, den = self._cancel(num, den)
        self._check_poles(den)
        self.num = num
        self.den = den
        self._factored = None

    @classmethod
    def from_factors(cls, scale, num_roots=(), den_roots=()) -> "RationalFunction":
        """scale * prod (z - r) / prod (z - p); the pole invariant is
        checked directly on the factor data."""
        scale = complex(scale)
        num_roots = tuple(complex(r) for r in num_roots)
        den_roots = tuple(complex(p) for p in den_roots)
        for p in den_roots:
            if abs(p) <= 1.0:
                raise PoleLocationError(
                    f"factor pole {p:.12g} lies in the closed unit disk"
                )
        obj = cls.__new__(cls)
        num = scale * npp.polyfromroots(num_roots) if num_roots else np.array([scale])
        den = npp.polyfromroots(den_roots) if den_roots else np.array([1.0 + 0.0j])
        obj.num = np.atleast_1d(num.astype(complex))
        obj.den = np.atleast_1d(den.astype(complex))
        obj._factored = (scale, num_roots, den_roots)
        return obj

    @property
    def factored(self):
        return self._factored

    @staticmethod
    def _cancel(num: np.ndarray, den: np.ndarray):
        if num.size < 2 or den.size < 2 or np.all(num == 0.0):
            return num, den
        nroots = list(npp.polyroots(num))
        droots = list(npp.polyroots(den))
        cancelled = False
        kept_d = []
        for r in droots:
            hit = None
            for i, s in enumerate(nroots):
                if abs(r - s) < CANCEL_TOL:
                    hit = i
                    break
            if hit is None:
                kept_d.append(r)
            else:
                nroots.pop(hit)
                cancelled = True
        if not cancelled:
            return num, den
        num_lead = num[-1]
        den_lead = den[-1]
        new_num = _trim(num_lead * npp.polyfromroots(nroots)) if nroots else np.array([num_lead])
        new_den = _trim(den_lead * npp.polyfromroots(kept_d)) if kept_d else np.array([den_lead])
        return np.atleast_1d(new_num.astype(complex)), np.atleast_1d(new_den.astype(complex))

    @staticmethod
    def _check_poles(den: np.ndarray) -> None:
        if den.size < 2:
            return
        roots = npp.polyroots(den)
        dden = npp.polyder(den)
        for r in roots:
            if abs(r) > 1.0:
                continue
            # Companion-matrix roots of clustered near-boundary
            # denominators can be off by far more than the cluster's
            # distance to the circle; polish before rejecting.
            z = r
            for _ in range(50):
                dv = npp.polyval(z, dden)
                if dv == 0.0:
                    break
                step = npp.polyval(z, den) / dv
                z = z - step
                if abs(step) < 1e-14 * max(1.0, abs(z)):
                    break
            if abs(z) <= 1.0:
                raise PoleLocationError(
                    f"denominator root {z:.12g} lies in the closed unit disk"
                )

    # -- evaluation -----------------------------------------------------

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self._factored is not None:
            scale, num_roots, den_roots = self._factored
            out = np.full(z.shape, scale, dtype=complex)
            for r in num_roots:
                out = out * (z - r)
            for p in den_roots:
                out = out / (z - p)
            return out
        return npp.polyval(z, self.num) / npp.polyval(z, self.den)

    def derivative(self) -> "RationalFunction":
        dn = npp.polyder(self.num) if self.num.size > 1 else np.zeros(1, dtype=complex)
        dd = npp.polyder(self.den) if self.den.size > 1 else np.zeros(1, dtype=complex)
        num = npp.polysub(npp.polymul(dn, self.den), npp.polymul(self.num, dd))
        return RationalFunction(num, npp.polymul(self.den, self.den))

    # -- algebra --------------------------------------------------------

    def __add__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        num = npp.polyadd(
            npp.polymul(self.num, other.den), npp.polymul(other.num, self.den)
        )
        return RationalFunction(num, npp.polymul(self.den, other.den))

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self) -> "RationalFunction":
        if self._factored is not None:
            s, nr, dr = self._factored
            return RationalFunction.from_factors(-s, nr, dr)
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self.__add__(-self._coerce(other))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other) -> "RationalFunction":
        if np.isscalar(other):
            if self._factored is not None:
                s, nr, dr = self._factored
                return RationalFunction.from_factors(s * complex(other), nr, dr)
            return RationalFunction(self.num * complex(other), self.den)
        other = self._coerce(other)
        if self._factored is not None and other._factored is not None:
            s1, nr1, dr1 = self._factored
            s2, nr2, dr2 = other._factored
            return RationalFunction.from_factors(s1 * s2, nr1 + nr2, dr1 + dr2)
        return RationalFunction(
            npp.polymul(self.num, other.num), npp.polymul(self.den, other.den)
        )

    def __rmul__(self, other):
        return self.__mul__(other)

    @staticmethod
    def _coerce(obj) -> "RationalFunction":
        if isinstance(obj, RationalFunction):
            return obj
        if np.isscalar(obj):
            return RationalFunction([complex(obj)])
        raise TypeError(f"cannot interpret {type(obj).__name__} as a rational function")

    def is_zero(self) -> bool:
        return bool(np.all(self.num == 0.0))

    def degree(self) -> tuple[int, int]:
        return self.num.size - 1, self.den.size - 1

    def __repr__(self):
        return f"RationalFunction(num={self.num.tolist()}, den={self.den.tolist()})"


def _factor_rational(lam: complex) -> RationalFunction:
    # (|lam|/lam)(lam - z)/(1 - conj(lam) z) = (1/|lam|)(z - lam)/(z - 1/conj(lam))
    if lam == 0.0:
        return RationalFunction.from_factors(1.0, (0.0,))
    return RationalFunction.from_factors(
        1.0 / abs(lam), (lam,), (1.0 / np.conj(lam),)
    )


@dataclass(frozen=True)
class BlaschkeProduct:
    """Finite Blaschke product with simple zeros.

    The factor at zero ``lam`` is ``(|lam|/lam) (lam - z) / (1 - conj(lam) z)``;
    by convention the factor at ``lam = 0`` is ``z`` (the paperless prefactor
    is undefined there and this choice keeps unit modulus on the boundary).
    """

    zeros: tuple[complex, ...]
    label: str = ""

    def __init__(self, zeros, label: str = ""):
        zs = tuple(
            _check_disk(z, "Blaschke zero", margin=BOUNDARY_MARGIN) for z in zeros
        )
        for i in range(len(zs)):
            for j in range(i + 1, len(zs)):
                if abs(zs[i] - zs[j]) < CONFLUENT_TOL:
                    raise InvariantViolation(
                        f"zeros {i} and {j} coincide within {CONFLUENT_TOL:g}; "
                        "simple-zero mode requires pairwise distinct zeros"
                    )
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "label", label)

    def __len__(self):
        return len(self.zeros)

    def __call__(self, z):
        return blaschke_eval(self, z)

    def omit(self, n: int) -> "BlaschkeProduct":
        """The product with the n-th zero removed (B_n)."""
        zs = self.zeros[:n] + self.zeros[n + 1 :]
        return BlaschkeProduct(zs, label=f"{self.label}\\{n}" if self.label else "")

    def as_rational(self) -> RationalFunction:
        out = RationalFunction.from_factors(1.0)
        for lam in self.zeros:
            out = out * _factor_rational(lam)
        return out


def blaschke_eval(b: BlaschkeProduct, z):
    """Evaluate a finite Blaschke product on the closed disk.

    Raises ``DegenerateInputError`` when z comes within ``POLE_PROXIMITY_TOL``
    of a factor's pole (only possible for |z| > 1, kept as a guard).
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zv = np.atleast_1d(z)
    out = np.ones_like(zv)
    for lam in b.zeros:
        if lam == 0.0:
            out = out * zv
            continue
        denom = 1.0 - np.conj(lam) * zv
        if np.any(np.abs(denom) < POLE_PROXIMITY_TOL):
            raise DegenerateInputError(
                f"evaluation point within {POLE_PROXIMITY_TOL:g} of the pole of "
                f"the factor at {lam:.12g}"
            )
        out = out * (abs(lam) / lam) * (lam - zv) / denom
    return out[0] if scalar else out.reshape(z.shape)


def blaschke_log_modulus(b: BlaschkeProduct, z):
    """Sum of log|factor| over the product; avoids underflow for long products.

    Returns -inf at the zeros themselves.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    zv = np.atleast_1d(z)
    acc = np.zeros(zv.shape, dtype=float)
    with np.errstate(divide="ignore"):
        for lam in b.zeros:
            if lam == 0.0:
                acc += np.log(np.abs(zv))
                continue
            denom = 1.0 - np.conj(lam) * zv
            if np.any(np.abs(denom) < POLE_PROXIMITY_TOL):
                raise DegenerateInputError(
                    f"evaluation point within {POLE_PROXIMITY_TOL:g} of the pole "
                    f"of the factor at {lam:.12g}"
                )
            acc += np.log(np.abs(lam - zv)) - np.log(np.abs(denom))
    return acc[0] if scalar else acc.reshape(z.shape)


def pseudohyperbolic(lam: complex, mu: complex) -> float:
    """Pseudohyperbolic distance |lam - mu| / |1 - conj(mu) lam|."""
    lam = _check_disk(lam, "lam")
    mu = _check_disk(mu, "mu")
    return abs(lam - mu) / abs(1.0 - np.conj(mu) * lam)


def divided_difference(phi: RationalFunction, lam: complex, mu: complex) -> complex:
    """(phi(lam) - phi(mu)) / (lam - mu), with the analytic derivative
    phi'(lam) in the confluent case |lam - mu| <= 1e-10."""
    lam = _check_disk(lam, "lam")
    mu = _check_disk(mu, "mu")
    if abs(lam - mu) > CONFLUENT_TOL:
        return complex((phi(lam) - phi(mu)) / (lam - mu))
    return complex(phi.derivative()(lam))


def _resolve_quad_points(quadrature_points: int | None) -> int:
    if quadrature_points is None:
        env = os.environ.get("OPLAB_QUAD_POINTS")
        quadrature_points = int(env) if env else DEFAULT_QUAD_POINTS
    n = int(quadrature_points)
    if n < 256 or (n & (n - 1)) != 0:
        raise InvariantViolation(
            f"quadrature_points must be a power of two >= 256; got {n}"
        )
    return n


def _circle_mean(f: RationalFunction, g: RationalFunction, n: int) -> complex:
    t = 2.0 * np.pi * np.arange(n) / n
    z = np.exp(1j * t)
    return complex(np.mean(f(z) * np.conj(g(z))))


def h2_inner(
    f: RationalFunction, g: RationalFunction, quadrature_points: int | None = None
) -> complex:
    """Hardy-space inner product (1/2pi) * integral of f conj(g) over the circle.

    Uniform trapezoid rule, spectrally accurate for functions analytic in a
    neighborhood of the closed disk.  The point count doubles until two
    consecutive refinements agree to ``QUAD_STABLE_TOL`` (cap 2**20); if the
    final doubling still moves the value by more than ``QUAD_FAIL_TOL`` the
    computation is rejected.
    """
    n = _resolve_quad_points(quadrature_points)
    coarse = _circle_mean(f, g, n)
    while True:
        fine = _circle_mean(f, g, 2 * n)
        diff = abs(fine - coarse)
        if diff < QUAD_STABLE_TOL:
            return fine
        if 2 * n >= QUAD_POINTS_CAP:
            if diff > QUAD_FAIL_TOL:
                raise ConvergenceError(
                    f"boundary quadrature not converged at {2 * n} points "
                    f"(last doubling moved the value by {diff:.3e})"
                )
            return fine
        n *= 2
        coarse = fine


def h2_norm(f: RationalFunction, quadrature_points: int | None = None) -> float:
    return float(np.sqrt(max(h2_inner(f, f, quadrature_points).real, 0.0)))
