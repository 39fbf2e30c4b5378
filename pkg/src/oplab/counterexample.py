"""Power-bounded counterexample laboratory.

Builds the perturbed basis x_{2n} = e_{2n},
x_{2n+1} = e_{2n+1} + sum_k a_{k-n} e_{2k}, the operator T x_n = lam_n x_n
for a strictly increasing lam in (0, 1), and measures the quantities whose
plateau/divergence split separates power boundedness from similarity to a
contraction: projection norms, sign-flip (unconditional-basis) constants,
Tadmor-Ritt and power constants, polynomial-bound lower estimates, and the
Stein witness condition number.

All scan quantities reduce to spectral norms of X diag(d) Xinv for varying
diagonals d, evaluated by the batched power-iteration kernel.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._norms import chunked_diag_norms
from .errors import InvariantViolation
from .operators import _boundary_sup, _poly_samples
from .similarity import stein_via_diagonalization

__all__ = [
    "CoeffSequence",
    "CounterexampleInstance",
    "ScanRow",
    "ScanReport",
    "make_sequence",
    "lambda_family",
    "build_instance",
    "projection_norms",
    "unconditional_constant",
    "hankel_toeplitz_norms",
    "stein_witness_cond",
    "counterexample_scan",
]

EIGEN_RESIDUAL_TOL = 1e-9
# The exact geometric family 1 - 2^{-(n+1)} stops being representable as a
# strictly increasing double sequence around n = 52; the shipped family
# compresses the exponent so the deepest rung stays at 2^{-EXPONENT_CAP}.
EXPONENT_CAP = 40.0
SCAN_TR_RADII = tuple(1.0 + 10.0**-k for k in range(1, 7))


@dataclass(frozen=True)
class CoeffSequence:
    """Nonnegative coefficient sequence with its running diagnostics."""

    a: np.ndarray
    kind: str

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        if self.kind != "custom" and np.any(arr < 0.0):
            raise InvariantViolation("built-in sequence kinds must be nonnegative")
        object.__setattr__(self, "a", arr)

    def __len__(self):
        return self.a.size

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.a)

    def weighted_square_sums(self) -> np.ndarray:
        n = np.arange(self.a.size, dtype=float)
        return np.cumsum(n * self.a**2)


def make_sequence(kind: str, n: int) -> CoeffSequence:
    """Built-in coefficient sequences.

    log_harmonic: a_k = 1/((k+2) ln(k+2)) -- weighted square sums bounded
    while the plain partial sums diverge (the engine of the counterexample).
    geometric: a_k = 2^{-k} -- everything converges (the control case).
    """
    if n < 2:
        raise InvariantViolation("sequence length must be at least 2")
    k = np.arange(n, dtype=float)
    if kind == "log_harmonic":
        a = 1.0 / ((k + 2.0) * np.log(k + 2.0))
    elif kind == "geometric":
        a = 2.0**-k
    else:
        raise InvariantViolation(f"unknown sequence kind {kind!r}")
    return CoeffSequence(a=a, kind=kind)


def lambda_family(kind: str, n: int) -> np.ndarray:
    """Built-in eigenvalue families, strictly increasing in (0, 1).

    "carleson": 1 - 2^{-(k+1)} while that is exactly representable
    (n <= EXPONENT_CAP); for larger n the exponent is compressed uniformly,
    1 - 2^{-(k+1) * cap/n}, keeping the family strictly increasing in double
    precision with the same deepest rung 1 - 2^{-cap}.
    "non_carleson": 1 - 1/(k+2)^2 (polynomially crowding family).
    """
    if n < 1:
        raise InvariantViolation("family length must be at least 1")
    k = np.arange(1, n + 1, dtype=float)
    if kind == "carleson":
        scale = min(1.0, EXPONENT_CAP / n)
        lam = 1.0 - 2.0 ** (-k * scale)
    elif kind == "non_carleson":
        lam = 1.0 - 1.0 / (k + 1.0) ** 2
    else:
        raise InvariantViolation(f"unknown lambda family {kind!r}")
    return lam


@dataclass(frozen=True)
class CounterexampleInstance:
    """Even-dimensional instance with exact triangular structure.

    In the permuted (even, odd) coordinate order the basis matrix is
    [[I, alpha], [0, I]] with alpha the lower-triangular Toeplitz a_{k-j},
    so the inverse is exact and T = [[D0, alpha D1 - D0 alpha], [0, D1]]
    carries the zero pattern and diagonal blocks exactly.
    """

    n: int
    a: CoeffSequence
    lam: np.ndarray
    x_basis: np.ndarray
    x_inv: np.ndarray
    t: np.ndarray
    d0: np.ndarray
    d1: np.ndarray
    a_block: np.ndarray
    perm: np.ndarray  # natural index of each permuted coordinate

    @property
    def half(self) -> int:
        return self.n // 2

    def permuted_factors(self):
        """(X, Xinv, lam) in the even-first coordinate order; T in that
        order equals X diag(lam) Xinv with block-triangular structure."""
        ix = self.perm
        return (
            self.x_basis[np.ix_(ix, ix)],
            self.x_inv[np.ix_(ix, ix)],
            self.lam[ix],
        )


def build_instance(a: CoeffSequence, lam, n: int | None = None) -> CounterexampleInstance:
    lam = np.asarray(lam, dtype=float)
    if n is None:
        n = lam.size
    if n % 2 or n < 2:
        raise InvariantViolation("instance dimension must be even and >= 2")
    if lam.size != n:
        raise InvariantViolation(f"lambda must have length {n}")
    if np.any(lam <= 0.0) or np.any(lam >= 1.0) or np.any(np.diff(lam) <= 0.0):
        raise InvariantViolation("lambda must be strictly increasing in (0, 1)")
    half = n // 2
    if len(a) < half:
        raise InvariantViolation(
            f"coefficient sequence too short: need {half}, got {len(a)}"
        )

    alpha = scipy.linalg.toeplitz(a.a[:half], np.zeros(half))
    eye = np.eye(half)
    lam_even = lam[0::2]
    lam_odd = lam[1::2]
    # Permuted order: even coordinates first, then odd.
    x_perm = np.block([[eye, alpha], [np.zeros((half, half)), eye]])
    xinv_perm = np.block([[eye, -alpha], [np.zeros((half, half)), eye]])
    a_block = alpha * lam_odd[None, :] - lam_even[:, None] * alpha
    t_perm = np.block(
        [[np.diag(lam_even), a_block], [np.zeros((half, half)), np.diag(lam_odd)]]
    )

    perm = np.concatenate([np.arange(0, n, 2), np.arange(1, n, 2)])
    unperm = np.argsort(perm)
    x = x_perm[np.ix_(unperm, unperm)]
    xinv = xinv_perm[np.ix_(unperm, unperm)]
    t = t_perm[np.ix_(unperm, unperm)]

    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise InvariantViolation(
            f"basis matrix numerically singular (cond ~ {sv[0] / sv[-1]:.3e})"
        )
    residual = np.max(
        np.linalg.norm(t @ x - x * lam[None, :], axis=0)
        / np.linalg.norm(x, axis=0)
    )
    if residual > EIGEN_RESIDUAL_TOL:
        raise InvariantViolation(f"eigen residual {residual:.3e} exceeds tolerance")
    inst = CounterexampleInstance(
        n=n,
        a=a,
        lam=lam,
        x_basis=x.astype(complex),
        x_inv=xinv.astype(complex),
        t=t.astype(complex),
        d0=np.diag(lam_even).astype(complex),
        d1=np.diag(lam_odd).astype(complex),
        a_block=a_block.astype(complex),
        perm=perm,
    )
    return inst


# ---------------------------------------------------------------------------
# measured quantities


def projection_norms(inst: CounterexampleInstance, tol: float = 1e-6) -> np.ndarray:
    """Norms of the basis projections P_n (x_k -> x_k for k <= n, else 0),
    built by basis conjugation of coordinate truncations."""
    x, xinv, _ = inst.permuted_factors()
    nat = inst.perm.astype(float)

    def maker(start, stop):
        thresh = np.arange(start, stop, dtype=float)
        return (nat[:, None] <= thresh[None, :]).astype(complex)

    return chunked_diag_norms(x, xinv, maker, inst.n, tol=tol, seed=11)


def _sign_pattern_norms(inst, patterns: np.ndarray, tol: float) -> np.ndarray:
    x, xinv, _ = inst.permuted_factors()
    cols = patterns[inst.perm, :].astype(complex)
    return chunked_diag_norms(
        x, xinv, lambda s, e: cols[:, s:e], cols.shape[1], tol=tol, seed=13
    )


def unconditional_constant(
    inst: CounterexampleInstance,
    samples: int = 2000,
    seed: int = 0,
    ascent_sweeps: int = 3,
    tol: float = 1e-6,
) -> float:
    """Lower bound on the sign-flip constant sup_eps ||X D_eps Xinv||.

    Randomized +-1 sampling seeded deterministically, a few structured
    patterns (all ones and the even/odd parity split, which drives the
    Toeplitz divergence), then greedy single-flip ascent from the best
    pattern found.
    """
    if samples < 1:
        raise InvariantViolation("samples must be >= 1")
    n = inst.n
    rng = np.random.default_rng(seed)
    specials = np.ones((n, 2))
    specials[1::2, 1] = -1.0  # parity pattern
    # Patterns drawn row-wise so sample sets nest as the budget grows,
    # making the lower bound monotone in `samples`.
    randoms = rng.choice([-1.0, 1.0], size=(samples, n)).T
    patterns = np.concatenate([specials, randoms], axis=1)
    vals = _sign_pattern_norms(inst, patterns, tol)
    best_idx = int(np.argmax(vals))
    best_val = float(vals[best_idx])
    best = patterns[:, best_idx].copy()

    for _ in range(ascent_sweeps):
        flips = np.tile(best[:, None], (1, n))
        flips[np.arange(n), np.arange(n)] *= -1.0
        vals = _sign_pattern_norms(inst, flips, tol)
        idx = int(np.argmax(vals))
        if vals[idx] <= best_val:
            break
        best_val = float(vals[idx])
        best = flips[:, idx].copy()
    return best_val


def hankel_toeplitz_norms(a: CoeffSequence, sizes) -> list[tuple[int, float, float]]:
    """Spectral norms of the m x m Hankel (entries a_{j+k}) and
    lower-triangular Toeplitz (entries a_{j-k}) truncations."""
    sizes = [int(m) for m in sizes]
    if any(m < 1 for m in sizes) or any(
        sizes[i] >= sizes[i + 1] for i in range(len(sizes) - 1)
    ):
        raise InvariantViolation("sizes must be ascending positive integers")
    need = 2 * max(sizes) - 1
    if len(a) < need:
        raise InvariantViolation(
            f"sequence too short for the largest Hankel block: need {need}"
        )
    rows = []
    for m in sizes:
        h = scipy.linalg.hankel(a.a[:m], a.a[m - 1 : 2 * m - 1])
        t = scipy.linalg.toeplitz(a.a[:m], np.zeros(m))
        rows.append(
            (m, float(np.linalg.norm(h, 2)), float(np.linalg.norm(t, 2)))
        )
    return rows


def _poly_lower_factored(
    inst: CounterexampleInstance, degree: int, trials: int, seed: int, tol: float
) -> float:
    """poly-bound lower estimate through the instance eigenstructure:
    ||p(T)|| = ||X diag(p(lam)) Xinv||, so batches of polynomials cost a
    handful of GEMMs."""
    x, xinv, lam = inst.permuted_factors()
    rng = np.random.default_rng(seed)
    eig_angles = np.zeros(1)  # spectrum is positive real: argument 0
    samples = _poly_samples(degree, trials, rng)

    def batch_ratios(coeff_list) -> np.ndarray:
        cols = np.stack(
            [np.polynomial.polynomial.polyval(lam, c) for c in coeff_list], axis=1
        ).astype(complex)
        norms = chunked_diag_norms(
            x, xinv, lambda s, e: cols[:, s:e], cols.shape[1], tol=tol, seed=17
        )
        sups = np.array([_boundary_sup(c, eig_angles) for c in coeff_list])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sups > 0.0, norms / sups, 0.0)
        return out

    ratios = batch_ratios(samples)
    best_idx = int(np.argmax(ratios))
    best_val = float(ratios[best_idx])
    best = samples[best_idx].copy()
    for step in (0.25, 0.05):
        scale = np.max(np.abs(best)) or 1.0
        candidates = []
        for k in range(best.size):
            for direction in (1.0, -1.0, 1j, -1j):
                cand = best.copy()
                cand[k] += step * scale * direction
                candidates.append(cand)
        vals = batch_ratios(candidates)
        idx = int(np.argmax(vals))
        if vals[idx] > best_val:
            best_val = float(vals[idx])
            best = candidates[idx]
    return best_val


def _power_bound_factored(inst: CounterexampleInstance, n_max: int, tol: float) -> float:
    x, xinv, lam = inst.permuted_factors()

    def maker(start, stop):
        return lam[:, None] ** np.arange(start, stop, dtype=float)[None, :]

    norms = chunked_diag_norms(x, xinv, maker, n_max + 1, tol=tol, seed=19)
    return float(np.max(norms))


def _tadmor_ritt_factored(
    inst: CounterexampleInstance, radii, angles: int, tol: float
) -> float:
    x, xinv, lam = inst.permuted_factors()
    thetas = 2.0 * np.pi * np.arange(angles) / angles
    zs = np.concatenate([r * np.exp(1j * thetas) for r in radii])

    def maker(start, stop):
        return 1.0 / (lam[:, None] - zs[None, start:stop])

    norms = chunked_diag_norms(x, xinv, maker, zs.size, tol=tol, seed=23)
    return float(np.max(np.abs(zs - 1.0) * norms))


def _witness_cond(inst: CounterexampleInstance) -> float:
    """Condition number of the similarity-to-contraction witness used by
    the scan: the normalized eigenbasis map, which conjugates T to the
    diagonal contraction diag(lam).

    The Stein witness (P - T^* P T = I) is not usable as a scan column
    here: its condition number carries an unavoidable 1/(1 - rho(T)^2)
    factor, which swamps the basis-conditioning signal the scan is after
    and diverges even for instances that are perfectly conjugated by a
    bounded witness.  The eigenbasis witness stays bounded exactly when a
    uniformly bounded similarity exists.
    """
    norms = np.linalg.norm(inst.x_basis, axis=0)
    sv = np.linalg.svd(inst.x_basis / norms[None, :], compute_uv=False)
    return float(sv[0] / sv[-1])


def stein_witness_cond(inst: CounterexampleInstance) -> float:
    """sqrt of the condition number of the exact Stein solution
    P - T^* P T = I (the condition number of the witness P^{1/2}).
    Dominated by (1 - rho(T)^2)^{-1/2}; exposed for diagnostics."""
    x, xinv, lam = inst.permuted_factors()
    p = stein_via_diagonalization(x, xinv, lam.astype(complex))
    vals = np.linalg.eigvalsh(p)
    if vals[0] <= 0.0:
        raise InvariantViolation(
            "Stein solution lost positive definiteness at this scale"
        )
    return float(np.sqrt(vals[-1] / vals[0]))


# ---------------------------------------------------------------------------
# the scan


@dataclass(frozen=True)
class ScanRow:
    n: int
    power_bound: float
    tadmor_ritt: float
    poly_lower: float
    uncond_lower: float
    lyap_cond: float

    def values(self) -> tuple:
        return (
            self.n,
            self.power_bound,
            self.tadmor_ritt,
            self.poly_lower,
            self.uncond_lower,
            self.lyap_cond,
        )


CSV_COLUMNS = ("N", "power_bound", "tadmor_ritt", "poly_lower", "uncond_lower", "lyap_cond")


@dataclass(frozen=True)
class ScanReport:
    rows: tuple[ScanRow, ...]
    params: dict

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.rows:
            vals = row.values()
            lines.append(
                ",".join([str(vals[0])] + [f"{v:.17e}" for v in vals[1:]])
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "rows": [
                dict(zip(("n",) + CSV_COLUMNS[1:], row.values())) for row in self.rows
            ],
        }

    def column(self, name: str) -> np.ndarray:
        idx = CSV_COLUMNS.index(name)
        return np.array([row.values()[idx] for row in self.rows])


def _scan_row(
    n: int,
    a_kind: str,
    lambda_kind: str,
    seed: int,
    tr_angles: int,
    uncond_samples: int,
    poly_degree: int,
    poly_trials: int,
    tol: float,
) -> ScanRow:
    inst = build_instance(make_sequence(a_kind, n // 2), lambda_family(lambda_kind, n))
    row_seed = seed * 1_000_003 + n
    return ScanRow(
        n=n,
        power_bound=_power_bound_factored(inst, 4 * n, tol),
        tadmor_ritt=_tadmor_ritt_factored(inst, SCAN_TR_RADII, tr_angles, tol),
        poly_lower=_poly_lower_factored(inst, poly_degree, poly_trials, row_seed, tol),
        uncond_lower=unconditional_constant(
            inst, samples=uncond_samples, seed=row_seed
        ),
        lyap_cond=_witness_cond(inst),
    )


def counterexample_scan(
    sizes,
    a_kind: str = "log_harmonic",
    lambda_kind: str = "carleson",
    seed: int = 0,
    tr_angles: int = 256,
    uncond_samples: int = 256,
    poly_degree: int = 24,
    poly_trials: int = 8,
    tol: float = 1e-6,
    workers: int | None = None,
) -> ScanReport:
    """One ScanRow per instance size: power bound over horizon 4N,
    Tadmor-Ritt constant, polynomial-bound lower estimate, sign-flip
    constant, and the condition number of the similarity witness (the
    ``lyap_cond`` column; see ``_witness_cond`` for why the scan's witness
    is the eigenbasis map rather than the Stein square root).

    All columns go through the shared eigenstructure of the instance;
    rows are independent and may run on parallel workers, merged in size
    order so reports stay deterministic.
    """
    sizes = [int(m) for m in sizes]
    if any(m % 2 for m in sizes) or any(
        sizes[i] >= sizes[i + 1] for i in range(len(sizes) - 1)
    ):
        raise InvariantViolation("sizes must be ascending even integers")

    def run(n):
        return _scan_row(
            n, a_kind, lambda_kind, seed, tr_angles, uncond_samples,
            poly_degree, poly_trials, tol,
        )

    if workers and workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, sizes))
    else:
        rows = [run(n) for n in sizes]
    rows.sort(key=lambda r: r.n)
    params = {
        "sizes": sizes,
        "a_kind": a_kind,
        "lambda_kind": lambda_kind,
        "seed": seed,
        "tr_angles": tr_angles,
        "uncond_samples": uncond_samples,
        "poly_degree": poly_degree,
        "poly_trials": poly_trials,
        "tol": tol,
    }
    return ScanReport(rows=tuple(rows), params=params)
