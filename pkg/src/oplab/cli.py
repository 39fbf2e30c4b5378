"""Batch front end: scenario ingestion, experiment orchestration, and
report emission.

Scenario files are JSON documents {"command": ..., "params": {...}}; every
randomized pipeline requires an explicit seed, so identical scenarios
produce byte-identical reports.  Outputs land under --out together with a
manifest recording the input hash, seed, tool version, tolerances, and the
module operations behind every emitted number.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .diskfn import BlaschkeProduct, RationalFunction, h2_inner, pseudohyperbolic
from .counterexample import (
    CoeffSequence,
    build_instance,
    counterexample_scan,
    lambda_family,
    make_sequence,
    unconditional_constant,
)
from .errors import InvariantViolation, OplabError
from .interpolation import carleson_delta, np_interpolate, pick_feasible, PickData
from .modelspace import (
    build_intertwiner,
    build_model_basis,
    coupling_block,
    coupling_block_oracle,
    eigenvector_residuals,
    geometric_zeros,
    make_pair_instance,
    random_coupling,
    shift_witness_report,
)
from .operators import (
    as_operator,
    assemble_blocks,
    blaschke_of_operator,
    load_matrix,
    power_bound,
    schaffer_dilation_trunc,
    spectral_radius,
    tadmor_ritt,
)
from .similarity import (
    eigenbasis_similarity,
    lyapunov_similarity,
    stein_via_diagonalization,
    sylvester_intertwiner,
)

COMMANDS = (
    "carleson",
    "interpolate",
    "similarity",
    "example41",
    "theorem23",
    "lemerdy-scan",
)

_NUMBER_OR_PAIR = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
    ]
}

_PARAM_SCHEMAS = {
    "carleson": {
        "type": "object",
        "required": ["zeros"],
        "additionalProperties": False,
        "properties": {
            "zeros": {"type": "array", "items": _NUMBER_OR_PAIR, "minItems": 1}
        },
    },
    "interpolate": {
        "type": "object",
        "required": ["nodes", "targets"],
        "additionalProperties": False,
        "properties": {
            "nodes": {"type": "array", "items": _NUMBER_OR_PAIR, "minItems": 1},
            "targets": {"type": "array", "items": _NUMBER_OR_PAIR, "minItems": 1},
        },
    },
    "similarity": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "matrix_file": {"type": "string"},
            "dim": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer"},
            "spectral_radius": {
                "type": "number",
                "exclusiveMinimum": 0,
                "maximum": 0.999,
            },
        },
        "anyOf": [{"required": ["matrix_file"]}, {"required": ["dim", "seed"]}],
    },
    "example41": {
        "type": "object",
        "required": ["n", "seed"],
        "additionalProperties": False,
        "properties": {
            "n": {"type": "integer", "minimum": 1, "maximum": 18},
            "seed": {"type": "integer"},
            "zeros": {"type": "array", "items": _NUMBER_OR_PAIR, "minItems": 1},
            "coupling_scale": {"type": "number", "minimum": 0},
            "alpha": {"type": "array", "items": _NUMBER_OR_PAIR},
        },
    },
    "theorem23": {
        "type": "object",
        "required": ["shift_dim", "seed"],
        "additionalProperties": False,
        "properties": {
            "shift_dim": {"type": "integer", "minimum": 8},
            "seed": {"type": "integer"},
            "zeros": {"type": "array", "items": _NUMBER_OR_PAIR, "minItems": 1},
            "n_zeros": {"type": "integer", "minimum": 1, "maximum": 8},
            "coupling_scale": {"type": "number", "minimum": 0},
            "tail_reserve": {"type": "integer", "minimum": 1},
        },
    },
    "lemerdy-scan": {
        "type": "object",
        "required": ["sizes", "seed"],
        "additionalProperties": False,
        "properties": {
            "sizes": {
                "type": "array",
                "items": {"type": "integer", "minimum": 2},
                "minItems": 1,
            },
            "seed": {"type": "integer"},
            "a_kind": {"enum": ["log_harmonic", "geometric"]},
            "lambda_kind": {"enum": ["carleson", "non_carleson"]},
            "tr_angles": {"type": "integer", "minimum": 16},
            "uncond_samples": {"type": "integer", "minimum": 1},
            "poly_degree": {"type": "integer", "minimum": 1},
            "poly_trials": {"type": "integer", "minimum": 1},
        },
    },
}

_SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["command", "params"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {"type": "object"},
    },
}


def _as_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


# ---------------------------------------------------------------------------
# command handlers: each returns (outputs, operations, tolerances, failures)


def _run_carleson(params, seed_unused, workers):
    zeros = [_as_complex(z) for z in params["zeros"]]
    report = carleson_delta(zeros)
    doc = report.to_json()
    doc["zeros"] = [_pair(z) for z in zeros]
    return (
        {"carleson.json": _dumps(doc)},
        ["interpolation.carleson_delta"],
        {},
        [],
    )


def _run_interpolate(params, seed_unused, workers):
    nodes = [_as_complex(z) for z in params["nodes"]]
    targets = [_as_complex(z) for z in params["targets"]]
    phi, minimal_norm = np_interpolate(nodes, targets)
    arr_nodes = np.array(nodes)
    residual = float(np.max(np.abs(phi(arr_nodes) - np.array(targets))))
    grid = np.exp(2j * np.pi * np.arange(4096) / 4096)
    boundary_sup = float(np.max(np.abs(phi(grid))))
    feasible, smallest = pick_feasible(PickData(nodes, targets))
    failures = []
    if residual >= 1e-8:
        failures.append(f"interpolation residual {residual:.3e} >= 1e-8")
    if boundary_sup > minimal_norm * (1.0 + 1e-6):
        failures.append(
            f"boundary sup {boundary_sup:.17g} exceeds minimal norm * (1 + 1e-6)"
        )
    doc = {
        "minimal_norm": minimal_norm,
        "residual": residual,
        "boundary_sup": boundary_sup,
        "pick_feasible_at_one": feasible,
        "pick_smallest_eigenvalue": smallest,
        "numerator": [_pair(c) for c in phi.num],
        "denominator": [_pair(c) for c in phi.den],
    }
    return (
        {"interpolate.json": _dumps(doc)},
        [
            "interpolation.np_interpolate",
            "interpolation.pick_feasible",
        ],
        {"residual": 1e-8, "norm_slack": 1e-6},
        failures,
    )


def _run_similarity(params, seed, workers):
    if "matrix_file" in params:
        t = load_matrix(params["matrix_file"])
        ops = ["operators.load_matrix", "similarity.lyapunov_similarity"]
    else:
        dim = params["dim"]
        rho = params.get("spectral_radius", 0.9)
        rng = np.random.default_rng(params["seed"])
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        t = g * (rho / spectral_radius(g))
        ops = ["similarity.lyapunov_similarity"]
    witness = lyapunov_similarity(t)
    failures = []
    if witness.conjugated_norm > 1.0 + 1e-8:
        failures.append(
            f"conjugated norm {witness.conjugated_norm:.17g} exceeds 1 + 1e-8"
        )
    if witness.stein_min_eig is not None and witness.stein_min_eig < -1e-10:
        failures.append(
            f"Stein inequality violated: min eig {witness.stein_min_eig:.3e}"
        )
    doc = witness.to_json()
    doc["dim"] = t.shape[0]
    return ({"similarity.json": _dumps(doc)}, ops, {
        "contraction_slack": 1e-8,
        "stein_psd": 1e-10,
    }, failures)


def _run_example41(params, seed, workers):
    n = params["n"]
    if "zeros" in params:
        zeros = [_as_complex(z) for z in params["zeros"]]
        if len(zeros) != n:
            raise InvariantViolation("zeros length must equal n")
    else:
        zeros = list(geometric_zeros(n))
    scale = params.get("coupling_scale", 1.0)
    coupling = random_coupling(n, params["seed"], scale)
    inst = make_pair_instance(BlaschkeProduct(zeros), coupling)
    alpha = None
    if "alpha" in params:
        alpha = np.array([_as_complex(v) for v in params["alpha"]])
    intertwiner = build_intertwiner(inst, alpha)
    eigreport = eigenvector_residuals(inst)
    failures = []
    if intertwiner.equation_residual >= 1e-8:
        failures.append(
            f"intertwiner equation residual {intertwiner.equation_residual:.3e} >= 1e-8"
        )
    if intertwiner.offdiag_residual >= 1e-8:
        failures.append(
            f"block conjugation residual {intertwiner.offdiag_residual:.3e} >= 1e-8"
        )
    if float(np.max(eigreport.residuals)) >= 1e-8:
        failures.append(
            f"eigenvector residual {np.max(eigreport.residuals):.3e} >= 1e-8"
        )
    if float(np.min(eigreport.norms)) < 1.0 - 1e-10:
        failures.append("eigenvector norm fell below the lower sandwich bound")
    if float(np.max(eigreport.norms)) > eigreport.upper_bound * (1 + 1e-10):
        failures.append("eigenvector norm exceeded the upper sandwich bound")
    doc = {
        "zeros": [_pair(complex(z)) for z in zeros],
        "intertwiner": intertwiner.to_json(),
        "eigenvectors": eigreport.to_json(),
    }
    return (
        {"example41.json": _dumps(doc)},
        [
            "modelspace.build_model_basis",
            "modelspace.make_pair_instance",
            "modelspace.build_intertwiner",
            "modelspace.eigenvector_residuals",
        ],
        {"residual": 1e-8, "norm_slack": 1e-10},
        failures,
    )


def _run_theorem23(params, seed, workers):
    if "zeros" in params:
        zeros = [_as_complex(z) for z in params["zeros"]]
    else:
        zeros = list(geometric_zeros(params.get("n_zeros", 3)))
    m = params["shift_dim"]
    scale = params.get("coupling_scale", 1.0)
    rng = np.random.default_rng(params["seed"])
    d0 = len(zeros)
    a = scale * (rng.standard_normal((d0, m)) + 1j * rng.standard_normal((d0, m)))
    t0 = np.diag(np.array(zeros, dtype=complex))
    report = shift_witness_report(
        t0, a, BlaschkeProduct(zeros), m, params.get("tail_reserve")
    )
    failures = []
    if report.upper_left_residual >= 1e-9:
        failures.append(
            f"upper-left block residual {report.upper_left_residual:.3e} >= 1e-9"
        )
    if report.lower_left_residual >= 1e-9:
        failures.append(
            f"lower-left block residual {report.lower_left_residual:.3e} >= 1e-9"
        )
    if report.identity_residual >= report.tail_bound + 1e-9:
        failures.append(
            f"commutation identity residual {report.identity_residual:.3e} exceeds "
            "tail bound + 1e-9"
        )
    if report.restricted_min_singular < 1.0 - report.tail_bound:
        failures.append("restricted smallest singular value below 1 - tail bound")
    doc = report.to_json()
    doc["zeros"] = [_pair(complex(z)) for z in zeros]
    return (
        {"theorem23.json": _dumps(doc)},
        ["modelspace.shift_witness_report"],
        {"zero_block": 1e-9, "identity_slack": 1e-9},
        failures,
    )


def _run_lemerdy_scan(params, seed, workers):
    report = counterexample_scan(
        params["sizes"],
        a_kind=params.get("a_kind", "log_harmonic"),
        lambda_kind=params.get("lambda_kind", "carleson"),
        seed=params["seed"],
        tr_angles=params.get("tr_angles", 256),
        uncond_samples=params.get("uncond_samples", 256),
        poly_degree=params.get("poly_degree", 24),
        poly_trials=params.get("poly_trials", 8),
        workers=workers,
    )
    doc = report.to_json()
    monotone = {}
    for name in ("power_bound", "tadmor_ritt", "poly_lower", "uncond_lower", "lyap_cond"):
        col = report.column(name)
        monotone[name] = bool(np.all(np.diff(col) > 0.0)) if col.size > 1 else False
    doc["strictly_increasing"] = monotone
    return (
        {"lemerdy_scan.csv": report.csv_text(), "lemerdy_scan.json": _dumps(doc)},
        ["counterexample.counterexample_scan"],
        {"norm_tol": report.params["tol"]},
        [],
    )


_HANDLERS = {
    "carleson": _run_carleson,
    "interpolate": _run_interpolate,
    "similarity": _run_similarity,
    "example41": _run_example41,
    "theorem23": _run_theorem23,
    "lemerdy-scan": _run_lemerdy_scan,
}


def run_scenario_doc(scenario: dict, out_dir: Path, input_hash: str, workers=None) -> int:
    """Validate and execute a parsed scenario document; returns the exit code."""
    try:
        jsonschema.validate(scenario, _SCENARIO_SCHEMA)
        command = scenario["command"]
        jsonschema.validate(scenario["params"], _PARAM_SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        print(f"input error at {path}: {exc.message}", file=sys.stderr)
        return 1
    params = scenario["params"]
    seed = params.get("seed")
    try:
        outputs, operations, tolerances, failures = _HANDLERS[command](
            params, seed, workers
        )
    except OplabError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "input_sha256": input_hash,
        "seed": seed,
        "tool_version": __version__,
        "tolerances": tolerances,
        "operations": operations,
        "outputs": sorted(outputs),
        "certificates_passed": not failures,
        "failures": failures,
    }
    outputs = dict(outputs)
    outputs["manifest.json"] = _dumps(manifest)
    for name, text in sorted(outputs.items()):
        (out_dir / name).write_text(text)
    if failures:
        for f in failures:
            print(f"certificate failure: {f}", file=sys.stderr)
        return 2
    return 0


def run_scenario(path, out_dir=None, workers=None) -> int:
    path = Path(path)
    try:
        raw = path.read_bytes()
        scenario = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    digest = hashlib.sha256(raw).hexdigest()
    out = Path(out_dir) if out_dir else Path(f"{path.stem}-out")
    return run_scenario_doc(scenario, out, digest, workers)


# ---------------------------------------------------------------------------
# selftest


def _selftest_checks():
    rng = np.random.default_rng(522)
    b = BlaschkeProduct([0.5])

    def close(x, y, tol):
        return abs(x - y) <= tol

    def check_quad_guard():
        try:
            h2_inner(RationalFunction([1.0]), RationalFunction([1.0]), 300)
        except InvariantViolation:
            return True
        return False

    def check_dilation():
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        t1 = 0.8 * g / np.linalg.norm(g, 2)
        v = assemble_blocks(schaffer_dilation_trunc(t1, 6))
        p = np.eye(2, v.shape[0] - 2).T
        res = 0.0
        vk = np.eye(v.shape[0])
        tk = np.eye(2)
        for _ in range(6):
            vk = vk @ v
            tk = tk @ t1
            res = max(res, float(np.linalg.norm(vk[:2, :2] - tk, 2)))
        return res < 1e-10

    def check_pair():
        inst = make_pair_instance(
            BlaschkeProduct(geometric_zeros(5)), random_coupling(5, 7)
        )
        phi = BlaschkeProduct([0.3]).as_rational()
        lhs = coupling_block(inst, phi)
        rhs = coupling_block_oracle(inst, phi)
        return float(np.max(np.abs(lhs - rhs))) < 1e-8 * max(
            1.0, float(np.max(np.abs(rhs)))
        )

    def check_counterexample():
        lam = lambda_family("carleson", 8)
        inst = build_instance(make_sequence("geometric", 4), lam)
        one = unconditional_constant(inst, samples=4, seed=3)
        zero_inst = build_instance(CoeffSequence(a=np.zeros(4), kind="custom"), lam)
        flat = unconditional_constant(zero_inst, samples=4, seed=3)
        return one >= 1.0 and close(flat, 1.0, 1e-12)

    def check_stein_routes():
        g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        t = 0.7 * g / np.linalg.norm(g, 2)
        w = lyapunov_similarity(t)
        vals, vecs = np.linalg.eig(t)
        p2 = stein_via_diagonalization(vecs, np.linalg.inv(vecs), vals)
        p1 = w.x @ w.x
        return float(np.linalg.norm(p1 - p2, 2)) < 1e-8 * float(
            np.linalg.norm(p1, 2)
        )

    checks = [
        ("diskfn", "zero of own factor", lambda: abs(b(0.5)) < 1e-15),
        ("diskfn", "inner on boundary", lambda: close(abs(b(np.exp(1.3j))), 1.0, 1e-12)),
        ("diskfn", "factor at origin", lambda: close(b(0.0), 0.5, 1e-15)),
        ("diskfn", "pseudohyperbolic hand value",
         lambda: close(pseudohyperbolic(0.5, 0.75), 0.4, 1e-15)),
        ("diskfn", "Cauchy kernel norm",
         lambda: close(h2_inner(RationalFunction([1.0], [1.0, -0.5]),
                                RationalFunction([1.0], [1.0, -0.5])), 4.0 / 3.0, 1e-10)),
        ("diskfn", "quadrature guard", check_quad_guard),
        ("interpolation", "three-zero delta",
         lambda: close(carleson_delta([0.5, 0.75, 0.875]).delta, 0.14545454545454545, 1e-12)),
        ("interpolation", "two-node minimal norm",
         lambda: close(np_interpolate([0.0, 0.5], [0.0, 0.25])[1], 0.5, 2e-6)),
        ("operators", "diagonal annihilation",
         lambda: float(np.max(np.abs(blaschke_of_operator(
             BlaschkeProduct([0.2, 0.5 + 0.1j]), np.diag([0.2, 0.5 + 0.1j])
         )))) < 1e-12),
        ("operators", "transient power growth",
         lambda: power_bound(np.array([[0.9, 5.0], [0.0, 0.9]]), 64) > 5.0),
        ("operators", "scalar resolvent bound",
         lambda: close(tadmor_ritt(np.diag([0.5]), radii=(1.1,), angles=64),
                       max(abs(1.1 * np.exp(2j * np.pi * k / 64) - 1)
                           / abs(1.1 * np.exp(2j * np.pi * k / 64) - 0.5)
                           for k in range(64)), 1e-12)),
        ("operators", "dilation identity", check_dilation),
        ("similarity", "nilpotent Stein closed form",
         lambda: close(lyapunov_similarity(np.array([[0.0, 1.0], [0.0, 0.0]])).conjugated_norm,
                       1.0 / np.sqrt(2.0), 1e-10)),
        ("similarity", "scalar Sylvester",
         lambda: close(sylvester_intertwiner(np.array([[0.0]]), np.array([[0.5]]),
                                             np.array([[1.0]]))[0, 0], -2.0, 1e-12)),
        ("similarity", "Stein route agreement", check_stein_routes),
        ("modelspace", "coupling-block oracle pair", check_pair),
        ("counterexample", "sign-flip baseline", check_counterexample),
    ]
    return checks


def selftest() -> int:
    checks = _selftest_checks()
    width = max(len(f"{mod}.{name}") for mod, name, _ in checks)
    failures = 0
    for mod, name, fn in checks:
        try:
            ok = bool(fn())
        except Exception:
            ok = False
        status = "pass" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{(mod + '.' + name).ljust(width)}  {status}")
    print(f"selftest: {len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 2


# ---------------------------------------------------------------------------
# argument parsing


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="oplab",
        description="finite-dimensional operator-theory laboratory",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="execute a JSON scenario file")
    p_run.add_argument("scenario", help="path to the scenario JSON document")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--parallel", type=int, default=None,
                       help="fan independent scan rows across this many workers")

    sub.add_parser("selftest", help="run the built-in deterministic check table")

    p_car = sub.add_parser("carleson", help="Carleson constant of a zero set")
    p_car.add_argument("--zeros", nargs="+", type=float, required=True,
                       help="real zeros in (-1, 1)")
    p_car.add_argument("--out", default="carleson-out", help="output directory")

    args = parser.parse_args(argv)
    if args.subcommand == "run":
        code = run_scenario(args.scenario, args.out, args.parallel)
    elif args.subcommand == "selftest":
        code = selftest()
    else:
        scenario = {"command": "carleson", "params": {"zeros": list(args.zeros)}}
        canonical = json.dumps(scenario, sort_keys=True).encode()
        code = run_scenario_doc(
            scenario, Path(args.out), hashlib.sha256(canonical).hexdigest()
        )
    raise SystemExit(code)


if __name__ == "__main__":
    main()
