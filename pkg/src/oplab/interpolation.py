"""Carleson-condition diagnostics and finite Nevanlinna-Pick interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npp

from .diskfn import BlaschkeProduct, RationalFunction, blaschke_log_modulus, _check_disk
from .errors import DegenerateInputError, InfeasibleError, InvariantViolation

__all__ = [
    "CarlesonReport",
    "PickData",
    "carleson_delta",
    "generalized_carleson_ratio",
    "default_disk_grid",
    "pick_feasible",
    "np_interpolate",
]

# PSD decision threshold on the smallest Pick eigenvalue (eigensolver noise).
PSD_TOL = -1e-10
# Relative bisection tolerance on the interpolation norm scale.
BISECT_RTOL = 1e-6
# Factors evaluating below this are skipped in the generalized ratio.
FACTOR_FLOOR = 1e-14
# Search cap for the feasible interpolation scale.
SCALE_CAP = 1e6


@dataclass(frozen=True)
class CarlesonReport:
    """delta = inf_n prod_{k != n} rho(lam_k, lam_n), with per-index detail."""

    delta: float
    argmin: int
    values: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "argmin": self.argmin,
            "values": list(self.values),
        }


def carleson_delta(zeros) -> CarlesonReport:
    """Carleson interpolation constant of a finite zero set.

    Per-index products of pseudohyperbolic distances are accumulated in log
    space so long families do not underflow.
    """
    zs = np.asarray([_check_disk(z, "zero") for z in zeros], dtype=complex)
    n = zs.size
    if n == 0:
        raise InvariantViolation("at least one zero is required")
    if n == 1:
        return CarlesonReport(delta=1.0, argmin=0, values=(1.0,))
    diff = np.abs(zs[:, None] - zs[None, :])
    if np.min(diff + np.eye(n)) < 1e-15:
        i, j = divmod(int(np.argmin(diff + np.eye(n))), n)
        raise InvariantViolation(f"duplicate zeros at indices {i} and {j}")
    denom = np.abs(1.0 - np.conj(zs[None, :]) * zs[:, None])
    rho = diff / denom
    np.fill_diagonal(rho, 1.0)
    logs = np.sum(np.log(rho), axis=1)
    values = np.exp(logs)
    argmin = int(np.argmin(values))
    return CarlesonReport(
        delta=float(values[argmin]), argmin=argmin, values=tuple(float(v) for v in values)
    )


def default_disk_grid(radii: int = 64, angles: int = 256, rmax: float = 1.0 - 1e-4):
    """Tensor grid with Chebyshev-spaced radii in [0, rmax]."""
    k = np.arange(radii)
    nodes = np.cos(np.pi * (2 * k + 1) / (2 * radii))
    rs = rmax * (nodes + 1.0) / 2.0
    ts = 2.0 * np.pi * np.arange(angles) / angles
    return (rs[:, None] * np.exp(1j * ts[None, :])).ravel()


def generalized_carleson_ratio(
    factors, grid=None, return_skipped: bool = False
):
    """Grid estimate of the generalized Carleson constant of a factorization.

    Evaluates min over the grid of |theta(z)| / inf_n |theta_n(z)| where
    theta is the product of the factors.  Grid points where some factor
    falls below ``FACTOR_FLOOR`` are skipped and counted; if every point is
    skipped the input is degenerate.
    """
    factors = list(factors)
    if not factors:
        raise InvariantViolation("at least one factor is required")
    if grid is None:
        grid = default_disk_grid()
    z = np.asarray(grid, dtype=complex).ravel()
    if z.size == 0 or np.any(np.abs(z) >= 1.0):
        raise InvariantViolation("grid must be nonempty and inside the open disk")
    logmods = np.stack([blaschke_log_modulus(f, z) for f in factors])
    log_theta = np.sum(logmods, axis=0)
    log_inf = np.min(logmods, axis=0)
    keep = log_inf >= np.log(FACTOR_FLOOR)
    skipped = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise DegenerateInputError(
            "every grid point fell within the factor floor; refine the factors or grid"
        )
    ratio = float(np.exp(np.min(log_theta[keep] - log_inf[keep])))
    if return_skipped:
        return ratio, skipped
    return ratio


@dataclass(frozen=True)
class PickData:
    """Nodes, targets, and the associated Pick matrix."""

    nodes: tuple[complex, ...]
    targets: tuple[complex, ...]

    def __init__(self, nodes, targets):
        ns = tuple(_check_disk(z, "node") for z in nodes)
        ts = tuple(complex(t) for t in targets)
        if len(ns) != len(ts):
            raise InvariantViolation("nodes and targets must have equal length")
        if len(ns) == 0:
            raise InvariantViolation("at least one node is required")
        for i in range(len(ns)):
            for j in range(i + 1, len(ns)):
                if ns[i] == ns[j]:
                    raise InvariantViolation(f"nodes {i} and {j} coincide")
        object.__setattr__(self, "nodes", ns)
        object.__setattr__(self, "targets", ts)

    @property
    def matrix(self) -> np.ndarray:
        lam = np.asarray(self.nodes)
        mu = np.asarray(self.targets)
        return (1.0 - mu[:, None] * np.conj(mu[None, :])) / (
            1.0 - lam[:, None] * np.conj(lam[None, :])
        )


def pick_feasible(data: PickData) -> tuple[bool, float]:
    """True iff the Pick matrix is positive semidefinite (within PSD_TOL),
    together with its smallest eigenvalue."""
    p = data.matrix
    smallest = float(np.linalg.eigvalsh((p + p.conj().T) / 2.0)[0])
    return smallest >= PSD_TOL, smallest


def _schur_interpolant(nodes: np.ndarray, values: np.ndarray):
    """Coefficients (num, den) of a Schur-class rational interpolant via the
    Schur-Nevanlinna reduction.  Assumes the scaled data is strictly solvable."""
    if nodes.size == 1:
        return np.array([values[0]]), np.array([1.0 + 0.0j])
    lam0, w0 = nodes[0], values[0]
    p = np.array([-lam0, 1.0], dtype=complex)  # z - lam0
    q = np.array([1.0, -np.conj(lam0)], dtype=complex)  # 1 - conj(lam0) z
    b0 = npp.polyval(nodes[1:], p) / npp.polyval(nodes[1:], q)
    reduced = ((values[1:] - w0) / (1.0 - np.conj(w0) * values[1:])) / b0
    n_in, d_in = _schur_interpolant(nodes[1:], reduced)
    num = npp.polyadd(w0 * npp.polymul(q, d_in), npp.polymul(p, n_in))
    den = npp.polyadd(npp.polymul(q, d_in), np.conj(w0) * npp.polymul(p, n_in))
    return num, den


def np_interpolate(nodes, targets) -> tuple[RationalFunction, float]:
    """Minimal-norm rational interpolant through (node, target) pairs.

    The minimal sup norm m is located by bisection on the Pick-matrix
    feasibility of targets/t; the interpolant is then built by the
    Schur-Nevanlinna recursion at the feasible scale m*(1 + BISECT_RTOL),
    so its boundary sup norm is at most m*(1 + 1e-6).
    """
    data = PickData(nodes, targets)
    lam = np.asarray(data.nodes, dtype=complex)
    mu = np.asarray(data.targets, dtype=complex)

    peak = float(np.max(np.abs(mu)))
    if peak == 0.0:
        return RationalFunction([0.0]), 0.0
    if np.all(np.abs(mu - mu[0]) == 0.0):
        return RationalFunction([mu[0]]), abs(mu[0])

    def feasible(t: float) -> bool:
        ok, _ = pick_feasible(PickData(data.nodes, tuple(mu / t)))
        return ok

    lo = peak
    if feasible(lo):
        m = lo
    else:
        hi = max(2.0 * lo, 1.0)
        while not feasible(hi):
            hi *= 2.0
            if hi > SCALE_CAP:
                raise InfeasibleError(
                    f"no feasible interpolation scale below {SCALE_CAP:g}"
                )
        while hi - lo > BISECT_RTOL * hi:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        m = hi

    scale = m * (1.0 + BISECT_RTOL)
    num, den = _schur_interpolant(lam, mu / scale)
    phi = RationalFunction(scale * num, den)

    residual = float(np.max(np.abs(phi(lam) - mu)))
    if residual >= 1e-8:
        raise DegenerateInputError(
            f"interpolation residual {residual:.3e} exceeds 1e-8; "
            "data too close to the solvability boundary"
        )
    return phi, m
