"""Dense finite-dimensional operator algebra.

Blaschke functional calculus by rational factor solves, block assembly
and the 3x3 -> 2x2 permutation identity, boundedness constants (power,
polynomial, Tadmor-Ritt), truncated isometric dilation, and matrix I/O.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._norms import spectral_norm
from .diskfn import BlaschkeProduct, RationalFunction
from .errors import (
    DegenerateInputError,
    DimensionError,
    DivergenceError,
    InvariantViolation,
    NotAContractionError,
    SpectralRadiusError,
)

__all__ = [
    "as_operator",
    "spectral_norm",
    "spectral_radius",
    "BlockOperator",
    "BoundReport",
    "blaschke_of_operator",
    "rational_of_operator",
    "poly_of_operator",
    "power_bound",
    "poly_bound_lower",
    "tadmor_ritt",
    "schaffer_dilation_trunc",
    "assemble_blocks",
    "r0_blocks",
    "permute_R0",
    "bound_report",
    "save_matrix",
    "load_matrix",
    "save_matrix_json",
    "load_matrix_json",
]

# Spectral radius must sit below 1 by this margin for the disk calculus.
RADIUS_TOL = 1e-10
# Norm cap above which a power scan is declared divergent.
POWER_OVERFLOW = 1e12
# Contraction tolerance for dilation input.
CONTRACTION_TOL = 1e-10
DEFAULT_TR_RADII = tuple(1.0 + 10.0**-k for k in range(1, 7))


def as_operator(a) -> np.ndarray:
    """Validate and return a square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"operator must be square; got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise InvariantViolation("operator entries must be finite")
    return m


def spectral_radius(t: np.ndarray) -> float:
    t = as_operator(t)
    if t.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(t))))


# ---------------------------------------------------------------------------
# functional calculus


def _require_strict_radius(t: np.ndarray) -> None:
    rho = spectral_radius(t)
    if rho >= 1.0 - RADIUS_TOL:
        raise SpectralRadiusError(
            f"spectral radius {rho:.17g} violates rho < 1 - {RADIUS_TOL:g}",
            radius=rho,
        )


def blaschke_of_operator(b: BlaschkeProduct, t) -> np.ndarray:
    """Evaluate a finite Blaschke product on an operator.

    Each factor is applied as an exact rational solve
    (|lam|/lam)(lam I - T)(I - conj(lam) T)^{-1}; the factors commute, so
    ordering only matters at roundoff level.  This preserves the
    annihilation identity theta(T) = 0 to near machine precision when the
    zeros of theta contain the spectrum of a diagonalizable T.
    """
    t = as_operator(t)
    _require_strict_radius(t)
    n = t.shape[0]
    eye = np.eye(n, dtype=complex)
    out = eye.copy()
    for lam in b.zeros:
        if lam == 0.0:
            out = out @ t
            continue
        num = lam * eye - t
        den = eye - np.conj(lam) * t
        out = out @ ((abs(lam) / lam) * np.linalg.solve(den.T, num.T).T)
    return out


def poly_of_operator(coeffs, t) -> np.ndarray:
    """Horner evaluation of a polynomial (ascending coefficients) on an operator."""
    t = as_operator(t)
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    n = t.shape[0]
    out = c[-1] * np.eye(n, dtype=complex)
    for k in range(c.size - 2, -1, -1):
        out = out @ t + c[k] * np.eye(n, dtype=complex)
    return out


def rational_of_operator(phi: RationalFunction, t) -> np.ndarray:
    """phi(T) = num(T) den(T)^{-1} for a rational phi with poles off the
    closed disk; requires spectral radius strictly below 1.

    For phi carrying its factorization the evaluation proceeds by paired
    linear-factor solves (the factors commute), which stays accurate when
    the zeros cluster near the boundary and expanded coefficients would
    cancel catastrophically.
    """
    t = as_operator(t)
    _require_strict_radius(t)
    if phi.factored is not None:
        scale, num_roots, den_roots = phi.factored
        n = t.shape[0]
        eye = np.eye(n, dtype=complex)
        out = scale * eye
        for i in range(max(len(num_roots), len(den_roots))):
            step = eye
            if i < len(num_roots):
                step = t - num_roots[i] * eye
            if i < len(den_roots):
                den = t - den_roots[i] * eye
                step = np.linalg.solve(den.T, step.T).T
            out = out @ step
        return out
    num = poly_of_operator(phi.num, t)
    den = poly_of_operator(phi.den, t)
    return np.linalg.solve(den.T, num.T).T


# ---------------------------------------------------------------------------
# boundedness constants


def power_bound(t, n_max: int) -> float:
    """max over 0 <= n <= n_max of ||T^n||, by repeated multiplication.

    Raises ``DivergenceError`` carrying the step if a norm exceeds
    ``POWER_OVERFLOW``.
    """
    t = as_operator(t)
    if n_max < 1:
        raise InvariantViolation("n_max must be at least 1")
    best = 1.0  # ||T^0||
    p = np.eye(t.shape[0], dtype=complex)
    for n in range(1, n_max + 1):
        p = p @ t
        norm = spectral_norm(p)
        if norm > POWER_OVERFLOW:
            raise DivergenceError(
                f"||T^{n}|| = {norm:.3e} exceeds the overflow cap", step=n, norm=norm
            )
        best = max(best, norm)
    return best


def _boundary_sup(coeffs: np.ndarray, extra_angles: np.ndarray) -> float:
    deg = coeffs.size - 1
    npts = max(4096, 32 * max(deg, 1))
    z = np.exp(2j * np.pi * np.arange(npts) / npts)
    if extra_angles.size:
        z = np.concatenate([z, np.exp(1j * extra_angles)])
    vals = np.polynomial.polynomial.polyval(z, coeffs)
    return float(np.max(np.abs(vals)))


def _poly_samples(degree: int, trials: int, rng) -> list[np.ndarray]:
    """Polynomial sample set: the constant, a Fejer-type kernel, a lacunary
    special, and seeded random-coefficient draws."""
    samples: list[np.ndarray] = [np.array([1.0 + 0.0j])]
    samples.append((1.0 - np.arange(degree + 1) / (degree + 1)).astype(complex))
    lac = np.zeros(degree + 1, dtype=complex)
    k = 1
    while k <= degree:
        lac[k] = 1.0
        k *= 2
    samples.append(lac)
    for _ in range(trials):
        samples.append(
            rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
        )
    return samples


def poly_bound_lower(t, degree: int = 24, trials: int = 24, seed: int = 0) -> float:
    """Lower estimate of the best polynomial bound M of T.

    Maximizes ||p(T)|| / sup_{|z|=1} |p| over random-coefficient samples,
    Fejer-kernel and lacunary specials, each refined by coordinate-wise
    local ascent.  Deterministic given the seed.  The boundary sup uses a
    dense grid augmented with the arguments of the eigenvalues of T, which
    keeps the estimate at most 1 for normal contractions.
    """
    t = as_operator(t)
    if degree < 1 or trials < 1:
        raise InvariantViolation("degree and trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = t.shape[0]
    eig_angles = np.angle(np.linalg.eigvals(t)) if n else np.zeros(0)

    # Cache powers of T when affordable; p(T) then costs one tensordot.
    cache_powers = (degree + 1) * n * n * 16 <= 64e6
    if cache_powers:
        powers = np.empty((degree + 1, n, n), dtype=complex)
        powers[0] = np.eye(n)
        for k in range(1, degree + 1):
            powers[k] = powers[k - 1] @ t

    def ratio(coeffs: np.ndarray) -> float:
        sup = _boundary_sup(coeffs, eig_angles)
        if sup == 0.0:
            return 0.0
        if cache_powers:
            pt = np.tensordot(coeffs, powers[: coeffs.size], axes=(0, 0))
        else:
            pt = poly_of_operator(coeffs, t)
        return spectral_norm(pt) / sup

    def ascend(coeffs: np.ndarray, value: float) -> tuple[np.ndarray, float]:
        best_c, best_v = coeffs, value
        scale = np.max(np.abs(coeffs)) or 1.0
        for step in (0.25, 0.05):
            for k in range(best_c.size):
                for direction in (1.0, -1.0, 1j, -1j):
                    cand = best_c.copy()
                    cand[k] += step * scale * direction
                    v = ratio(cand)
                    if v > best_v:
                        best_c, best_v = cand, v
        return best_c, best_v

    samples = _poly_samples(degree, trials, rng)

    best = 0.0
    for coeffs in samples:
        v = ratio(coeffs)
        _, v = ascend(coeffs, v)
        best = max(best, v)
    return best


def tadmor_ritt(t, radii=None, angles: int = 1024, with_report: bool = False):
    """max over the grid z = r e^{i theta} of |z - 1| ||(T - zI)^{-1}||.

    Grid points where the resolvent is numerically singular are skipped
    and reported.
    """
    t = as_operator(t)
    radii = DEFAULT_TR_RADII if radii is None else tuple(float(r) for r in radii)
    if any(r <= 1.0 for r in radii):
        raise InvariantViolation("all radii must exceed 1")
    n = t.shape[0]
    scale = max(1.0, spectral_norm(t))
    thetas = 2.0 * np.pi * np.arange(angles) / angles
    best = 0.0
    skipped: list[complex] = []
    eye = np.eye(n, dtype=complex)
    for r in radii:
        for th in thetas:
            z = r * np.exp(1j * th)
            smin = np.linalg.svd(t - z * eye, compute_uv=False)[-1]
            if smin < 1e-13 * scale:
                skipped.append(z)
                continue
            best = max(best, abs(z - 1.0) / smin)
    if with_report:
        return best, skipped
    return best


# ---------------------------------------------------------------------------
# block structure


class BlockOperator:
    """Grid of conforming blocks; ``None`` entries are declared-zero blocks."""

    def __init__(self, blocks):
        grid = [[None if b is None else np.asarray(b, dtype=complex) for b in row]
                for row in blocks]
        nrows = len(grid)
        ncols = len(grid[0]) if nrows else 0
        if any(len(row) != ncols for row in grid):
            raise DimensionError("ragged block grid")
        row_dims = [None] * nrows
        col_dims = [None] * ncols
        for i, row in enumerate(grid):
            for j, blk in enumerate(row):
                if blk is None:
                    continue
                if blk.ndim != 2:
                    raise DimensionError("blocks must be 2-d arrays")
                if row_dims[i] is None:
                    row_dims[i] = blk.shape[0]
                elif row_dims[i] != blk.shape[0]:
                    raise DimensionError(f"row {i} has conflicting block heights")
                if col_dims[j] is None:
                    col_dims[j] = blk.shape[1]
                elif col_dims[j] != blk.shape[1]:
                    raise DimensionError(f"column {j} has conflicting block widths")
        if any(d is None for d in row_dims) or any(d is None for d in col_dims):
            raise DimensionError("every block row and column needs at least one block")
        self.blocks = grid
        self.row_dims = tuple(row_dims)
        self.col_dims = tuple(col_dims)

    def assemble(self) -> np.ndarray:
        rows = []
        for i, row in enumerate(self.blocks):
            cells = []
            for j, blk in enumerate(row):
                if blk is None:
                    blk = np.zeros((self.row_dims[i], self.col_dims[j]), dtype=complex)
                cells.append(blk)
            rows.append(cells)
        return np.block(rows)

    def block(self, i: int, j: int) -> np.ndarray:
        blk = self.blocks[i][j]
        if blk is None:
            return np.zeros((self.row_dims[i], self.col_dims[j]), dtype=complex)
        return blk


def assemble_blocks(spec: BlockOperator) -> np.ndarray:
    return spec.assemble()


def r0_blocks(t0, v1, k, a, t1) -> BlockOperator:
    """The 3x3 operator [[T0, 0, A], [0, V1, K], [0, 0, T1]] on H0 + K1 + H1."""
    return BlockOperator(
        [
            [as_operator(t0), None, np.asarray(a, dtype=complex)],
            [None, as_operator(v1), np.asarray(k, dtype=complex)],
            [None, None, as_operator(t1)],
        ]
    )


def permute_R0(r0: BlockOperator) -> BlockOperator:
    """Reorder the 3x3 form on H0 + K1 + H1 to the 2x2 form on K1 + (H0 + H1).

    Pure coordinate permutation, so the certified zero pattern
    [[V1, *], [0, R]] with R = [[T0, A], [0, T1]] holds exactly.
    """
    if len(r0.row_dims) != 3 or len(r0.col_dims) != 3:
        raise DimensionError("expected a 3x3 block operator")
    if r0.row_dims != r0.col_dims:
        raise DimensionError("expected a square block structure")
    d0, k1, h1 = r0.row_dims
    m = r0.assemble()
    idx = np.concatenate(
        [np.arange(d0, d0 + k1), np.arange(0, d0), np.arange(d0 + k1, d0 + k1 + h1)]
    )
    p = m[np.ix_(idx, idx)]
    lower_left = p[k1:, :k1]
    if np.any(lower_left != 0.0):
        raise InvariantViolation(
            "permuted operator violates the expected exact zero pattern"
        )
    return BlockOperator([[p[:k1, :k1], p[:k1, k1:]], [None, p[k1:, k1:]]])


# ---------------------------------------------------------------------------
# dilation


def _psd_sqrt(h: np.ndarray, floor: float = -3e-10) -> np.ndarray:
    vals, vecs = np.linalg.eigh((h + h.conj().T) / 2.0)
    if np.min(vals, initial=0.0) < floor:
        raise NotAContractionError(
            f"defect operator has eigenvalue {np.min(vals):.3e} below the roundoff floor"
        )
    # Zeroing sub-roundoff eigenvalues keeps unitary inputs at exact zero
    # defect instead of sqrt-amplified noise.
    vals = np.where(vals < 1e-14, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def schaffer_dilation_trunc(t1, copies: int) -> BlockOperator:
    """Truncated isometric dilation of a contraction.

    Block operator on H + D^m (D the defect space): first block column
    [T1; D_{T1}; 0; ...], identity shift down the defect copies, zero
    elsewhere.  Satisfies P_H V^k |_H = T1^k for 0 <= k <= m.
    """
    t1 = as_operator(t1)
    if copies < 1:
        raise InvariantViolation("copies must be >= 1")
    norm = spectral_norm(t1)
    if norm > 1.0 + CONTRACTION_TOL:
        raise NotAContractionError(f"||T1|| = {norm:.17g} exceeds 1 + {CONTRACTION_TOL:g}")
    n = t1.shape[0]
    defect = _psd_sqrt(np.eye(n, dtype=complex) - t1.conj().T @ t1)
    m = copies
    grid: list[list[np.ndarray | None]] = [
        [None] * (m + 1) for _ in range(m + 1)
    ]
    grid[0][0] = t1
    grid[1][0] = defect
    eye = np.eye(n, dtype=complex)
    for j in range(2, m + 1):
        grid[j][j - 1] = eye
    # The last defect copy maps to nothing; anchor its column's dimension.
    grid[m][m] = np.zeros((n, n), dtype=complex)
    return BlockOperator(grid)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class BoundReport:
    power_bound: float
    poly_lower: float
    tadmor_ritt: float
    horizon: int

    def to_json(self) -> dict:
        return {
            "power_bound": self.power_bound,
            "poly_lower": self.poly_lower,
            "tadmor_ritt": self.tadmor_ritt,
            "horizon": self.horizon,
        }


def bound_report(
    t,
    n_max: int = 64,
    degree: int = 24,
    trials: int = 24,
    seed: int = 0,
    radii=None,
    angles: int = 1024,
) -> BoundReport:
    return BoundReport(
        power_bound=power_bound(t, n_max),
        poly_lower=poly_bound_lower(t, degree=degree, trials=trials, seed=seed),
        tadmor_ritt=tadmor_ritt(t, radii=radii, angles=angles),
        horizon=n_max,
    )


# ---------------------------------------------------------------------------
# matrix I/O: 16-byte header (int64 rows, int64 cols, little endian) then
# column-major complex doubles; JSON form uses nested [re, im] pairs.


def save_matrix(path, a) -> None:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError("only 2-d matrices are supported")
    with open(path, "wb") as fh:
        fh.write(np.array(a.shape, dtype="<i8").tobytes())
        fh.write(np.asfortranarray(a).astype("<c16").tobytes(order="F"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = np.frombuffer(fh.read(16), dtype="<i8")
        rows, cols = int(header[0]), int(header[1])
        data = np.frombuffer(fh.read(rows * cols * 16), dtype="<c16")
    return data.reshape((rows, cols), order="F").astype(complex)


def save_matrix_json(path, a) -> None:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError("only 2-d matrices are supported")
    payload = [[[float(v.real), float(v.imag)] for v in row] for row in a]
    with open(path, "w") as fh:
        json.dump({"rows": a.shape[0], "cols": a.shape[1], "entries": payload}, fh)


def load_matrix_json(path) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    entries = doc["entries"]
    out = np.array(
        [[complex(re, im) for re, im in row] for row in entries], dtype=complex
    )
    out = out.reshape((doc["rows"], doc["cols"]))
    return out
