"""Command-line front end.

Each command writes one JSON report (stdout when no ``--output`` is given).
Exit status: 0 pass, 2 invalid input, 3 contract violation, 4 bandwidth
overflow. Failing runs still write a report carrying a ``reason`` field.

The environment variable KOSZUL_TOLERANCE, when set, replaces every default
contract tolerance; ``--tol name=value`` overrides single entries on top.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BandwidthOverflowError, ContractViolation, KoszulError, NonFiniteGroupError, ValidationError
from .forms import FlatTorusSpace, PQForm, metric_from_json
from .hessian import (
    CROSS_TOL,
    HESSIAN_TOL,
    RESIDUAL_TOL,
    MetricField,
    decompose_on_product,
    decompose_on_torus,
    hessian_defect,
)
from .hodge import cohomology_report, spectrum, spectrum_csv
from .kunneth import SPAN_TOL, ProductSpace, anticommutation_residual, laplacian_sum_check, verify_kunneth
from .quotient import INVARIANCE_TOL, decompose_on_quotient, group_from_json

COMMANDS = (
    "cohomology",
    "spectrum",
    "kunneth-check",
    "hessian-check",
    "hessian-decompose",
    "product-decompose",
    "quotient-decompose",
    "laplacian-sum-check",
)

THEOREMS = {
    "cohomology": "cohomology:TorusCohomology",
    "spectrum": "hodge:KoszulLaplacian",
    "kunneth-check": "kunneth:Theorem-main",
    "hessian-check": "hessian:del-g-criterion",
    "hessian-decompose": "hessian:torus-decomposition",
    "product-decompose": "hessian:HessianMetricsOnproducctsOfManifolds",
    "quotient-decompose": "hessian:flat-quotient-decomposition",
    "laplacian-sum-check": "kunneth:SumOfLaplacians",
}

DEFAULT_TOLERANCES = {
    "hessian": HESSIAN_TOL,
    "residual": RESIDUAL_TOL,
    "span": SPAN_TOL,
    "cross": CROSS_TOL,
    "laplacian_sum": 1e-10,
    "invariance": INVARIANCE_TOL,
}

TOLERANCE_ENV = "KOSZUL_TOLERANCE"

EXIT_OK, EXIT_VALIDATION, EXIT_CONTRACT, EXIT_BANDWIDTH = 0, 2, 3, 4


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    output: str | None = None
    bandwidth: int | None = None
    grid_resolution: int | None = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        merged = resolve_tolerances(self.tolerances)
        self.tolerances = merged
        if self.bandwidth is not None and self.bandwidth < 0:
            raise ValidationError("bandwidth must be non-negative")
        if self.grid_resolution is not None and self.grid_resolution < 1:
            raise ValidationError("grid resolution must be positive")


def resolve_tolerances(overrides=None, environ=None):
    environ = os.environ if environ is None else environ
    tol = dict(DEFAULT_TOLERANCES)
    if environ.get(TOLERANCE_ENV):
        try:
            value = float(environ[TOLERANCE_ENV])
        except ValueError as exc:
            raise ValidationError(f"{TOLERANCE_ENV} is not a number") from exc
        tol = {k: value for k in tol}
    for key, value in (overrides or {}).items():
        if key not in tol:
            raise ValidationError(f"unknown tolerance {key!r}; known: {sorted(tol)}")
        tol[key] = float(value)
    bad = [k for k, v in tol.items() if not (v > 0 and np.isfinite(v))]
    if bad:
        raise ValidationError(f"tolerances must be positive: {bad}")
    return tol


class _Outcome(Exception):
    """Carries a finished result with a non-zero status out of a command."""

    def __init__(self, status, reason, result):
        super().__init__(reason)
        self.status, self.reason, self.result = status, reason, result


# input loading


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc.msg}") from exc


def _load_metric(path, n):
    if path is None:
        return None
    data = _read_json(path)
    if int(data.get("dim", -1)) != n:
        raise ValidationError(f"metric dimension {data.get('dim')} does not match form dimension {n}")
    return metric_from_json(data)


def _load_form(path, metric_path=None, factor_split=None, bandwidth=None):
    data = _read_json(path)
    if not isinstance(data, dict) or "dim" not in data:
        raise ValidationError(f"{path}: missing 'dim'")
    metric = _load_metric(metric_path, int(data["dim"]))
    form = PQForm.from_json(data, metric, factor_split)
    if bandwidth is not None and bandwidth != form.space.bandwidth:
        form = form.with_bandwidth(bandwidth)
    return form


def _load_metric_field(cfg, factor_split=None):
    form = _load_form(cfg.inputs["input"], cfg.inputs.get("metric"), factor_split, cfg.bandwidth)
    if form.bidegree != (1, 1):
        raise ValidationError("metric-field JSON must have p = q = 1")
    return MetricField(form)


# commands


def _cmd_cohomology(cfg):
    n = int(cfg.options["dim"])
    if not 1 <= n <= 6:
        raise ValidationError("dimension must be between 1 and 6")
    B = 1 if cfg.bandwidth is None else cfg.bandwidth
    return cohomology_report(n, B), FlatTorusSpace.identity(n, B)


def _cmd_spectrum(cfg):
    n = int(cfg.options["dim"])
    metric = _load_metric(cfg.inputs.get("metric"), n)
    B = 2 if cfg.bandwidth is None else cfg.bandwidth
    space = FlatTorusSpace(n, B, metric)
    spec = spectrum(space, int(cfg.options["p"]), int(cfg.options["q"]), int(cfg.options["count"]))
    csv_path = cfg.options.get("csv")
    if csv_path:
        _atomic_write(csv_path, spectrum_csv(spec))
    result = {
        "p": spec.p,
        "q": spec.q,
        "truncated": spec.truncated,
        "entries": [
            {
                "eigenvalue": e.eigenvalue,
                "multiplicity": e.multiplicity,
                "example_k": list(e.example_k),
                "complete": e.complete,
            }
            for e in spec
        ],
    }
    if any(e.eigenvalue < -1e-12 for e in spec):
        raise _Outcome(EXIT_CONTRACT, "negative-eigenvalue", result)
    return result, space


def _cmd_kunneth(cfg):
    m, n = int(cfg.options["left"]), int(cfg.options["right"])
    B = 1 if cfg.bandwidth is None else cfg.bandwidth
    prod = ProductSpace.identity(m, n, B)
    if cfg.options.get("p") is None or cfg.options.get("q") is None:
        pairs = [(p, q) for p in range(m + n + 1) for q in range(m + n + 1)]
    else:
        pairs = [(int(cfg.options["p"]), int(cfg.options["q"]))]
    checks = [verify_kunneth(prod, p, q, cfg.tolerances["span"]) for p, q in pairs]
    result = checks[0] if len(checks) == 1 else {"checks": checks, "pass": all(c["pass"] for c in checks)}
    if not all(c["pass"] for c in checks):
        raise _Outcome(EXIT_CONTRACT, "kunneth-span-check-failed", result)
    return result, prod.total


def _cmd_hessian_check(cfg):
    g = _load_metric_field(cfg)
    defect = hessian_defect(g)
    result = {"defect_norm": defect.norm, "agreement": defect.agreement, "hessian": defect.norm <= cfg.tolerances["hessian"]}
    if not result["hessian"]:
        raise _Outcome(EXIT_CONTRACT, "not-hessian", result)
    return result, g.space


def _cmd_hessian_decompose(cfg):
    g = _load_metric_field(cfg)
    dec = decompose_on_torus(g, cfg.grid_resolution, cfg.tolerances["hessian"])
    result = dec.to_json()
    result["potential"] = dec.potential.to_json()
    result["spd"]["status"] = dec.spd_certificate.status
    if dec.residual > cfg.tolerances["residual"]:
        raise _Outcome(EXIT_CONTRACT, "reconstruction-residual", result)
    if dec.spd_certificate.status == "not-positive":
        raise _Outcome(EXIT_CONTRACT, "not-positive", result)
    return result, g.space


def _cmd_product_decompose(cfg):
    m = int(cfg.options["left_dim"])
    data = _read_json(cfg.inputs["input"])
    n_total = int(data.get("dim", 0))
    if not 1 <= m < n_total:
        raise ValidationError(f"left dimension {m} must lie strictly between 0 and {n_total}")
    g = _load_metric_field(cfg, factor_split=(m, n_total - m))
    G = g.space.metric
    left = FlatTorusSpace(m, g.space.bandwidth, G[:m, :m])
    right = FlatTorusSpace(n_total - m, g.space.bandwidth, G[m:, m:])
    prod = ProductSpace(left, right)
    if prod.total != g.space:
        raise ValidationError("background metric is not block diagonal for this split")
    tol = cfg.tolerances
    dec = decompose_on_product(g, prod, cfg.grid_resolution, tol["hessian"], tol["residual"], tol["cross"])
    result = dec.to_json()
    if not dec.passed:
        raise _Outcome(EXIT_CONTRACT, dec.failures[0], result)
    return result, g.space


def _cmd_quotient_decompose(cfg):
    g = _load_metric_field(cfg)
    group = group_from_json(_read_json(cfg.inputs["group"]))
    tol = cfg.tolerances
    dec = decompose_on_quotient(g, group, cfg.grid_resolution, tol["invariance"], tol["residual"], tol["hessian"])
    result = dec.to_json()
    result["free"] = group.free
    worst = max(dec.flat_invariance, dec.one_form_invariance)
    if worst > tol["invariance"]:
        raise _Outcome(EXIT_CONTRACT, "output-not-invariant", result)
    return result, g.space


def _cmd_laplacian_sum(cfg):
    a = _load_form(cfg.inputs["left"], cfg.inputs.get("left_metric"))
    b = _load_form(cfg.inputs["right"], cfg.inputs.get("right_metric"))
    B = max(a.space.bandwidth, b.space.bandwidth) if cfg.bandwidth is None else cfg.bandwidth
    a, b = a.with_bandwidth(B), b.with_bandwidth(B)
    prod = ProductSpace(a.space, b.space)
    result = {
        "laplacian_sum_residual": laplacian_sum_check(a, b, prod),
        "anticommutation_residual": anticommutation_residual(a, b, prod),
    }
    result["pass"] = max(result.values()) <= cfg.tolerances["laplacian_sum"]
    if not result["pass"]:
        raise _Outcome(EXIT_CONTRACT, "laplacian-sum-residual", result)
    return result, prod.total


HANDLERS = {
    "cohomology": _cmd_cohomology,
    "spectrum": _cmd_spectrum,
    "kunneth-check": _cmd_kunneth,
    "hessian-check": _cmd_hessian_check,
    "hessian-decompose": _cmd_hessian_decompose,
    "product-decompose": _cmd_product_decompose,
    "quotient-decompose": _cmd_quotient_decompose,
    "laplacian-sum-check": _cmd_laplacian_sum,
}


# reporting


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def render_report(cfg: RunConfig, status, reason, result, space=None, message=None):
    report = {
        "tool": "koszul",
        "version": __version__,
        "command": cfg.command,
        "theorem": THEOREMS[cfg.command],
        "tolerances": cfg.tolerances,
        "bandwidth": None if space is None else space.bandwidth,
        "metric": None if space is None else space.to_json(),
        "status": "pass" if status == EXIT_OK else "fail",
        "exit_code": status,
        "reason": reason,
        "result": result,
    }
    if message is not None:
        report["message"] = message
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one command, write its report, return the exit status."""
    stdout = stdout or sys.stdout
    space = None
    message = None
    result = None
    try:
        result, space = HANDLERS[cfg.command](cfg)
        status, reason = EXIT_OK, None
    except _Outcome as out:
        status, reason, result = out.status, out.reason, out.result
    except BandwidthOverflowError as exc:
        status, reason, message = EXIT_BANDWIDTH, exc.reason, str(exc)
    except ContractViolation as exc:
        status, reason, message = EXIT_CONTRACT, exc.reason, str(exc)
        if hasattr(exc, "defect_norm"):
            result = {"defect_norm": exc.defect_norm}
    except (ValidationError, NonFiniteGroupError) as exc:
        status, reason, message = EXIT_VALIDATION, exc.reason, str(exc)
    except KoszulError as exc:
        status, reason, message = EXIT_VALIDATION, exc.reason, str(exc)
    text = render_report(cfg, status, reason, result, space, message)
    if cfg.output:
        _atomic_write(cfg.output, text)
    else:
        stdout.write(text)
    return status


# argument parsing


def _parse_tol(items):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--tol expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError as exc:
            raise ValidationError(f"--tol value for {name!r} is not a number") from exc
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="koszul", description="Dolbeault-Koszul calculus on flat tori.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", "-o", help="report path (default: stdout)")
        p.add_argument("--bandwidth", type=int)
        p.add_argument("--grid-resolution", type=int)
        p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override")
        return p

    p = common(sub.add_parser("cohomology", help="dim H^{p,q}(T^n) table"))
    p.add_argument("--dim", type=int, required=True)

    p = common(sub.add_parser("spectrum", help="lowest Box eigenvalues"))
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--metric", help="metric JSON")
    p.add_argument("--csv", help="also write the spectrum as CSV plot data")

    p = common(sub.add_parser("kunneth-check", help="harmonic Kunneth check on T^m x T^n"))
    p.add_argument("--left", type=int, required=True)
    p.add_argument("--right", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)

    for name, text in (("hessian-check", "test del g = 0"), ("hessian-decompose", "g = flat + Hess f")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--input", required=True, help="metric-field JSON")
        p.add_argument("--metric", help="background metric JSON")

    p = common(sub.add_parser("product-decompose", help="g = g_M + g_N + D alpha"))
    p.add_argument("--input", required=True)
    p.add_argument("--metric")
    p.add_argument("--left-dim", type=int, required=True)

    p = common(sub.add_parser("quotient-decompose", help="averaged decomposition on T^n / group"))
    p.add_argument("--input", required=True)
    p.add_argument("--metric")
    p.add_argument("--group", required=True, help="group JSON")

    p = common(sub.add_parser("laplacian-sum-check", help="Box(a x b) = Box a x b + a x Box b"))
    p.add_argument("--left", required=True, help="PQForm JSON on the first factor")
    p.add_argument("--right", required=True, help="PQForm JSON on the second factor")
    p.add_argument("--left-metric")
    p.add_argument("--right-metric")
    return parser


def config_from_args(args) -> RunConfig:
    ns = vars(args)
    input_keys = ("input", "metric", "group", "left_metric", "right_metric")
    inputs = {k: ns[k] for k in input_keys if ns.get(k)}
    if args.command == "laplacian-sum-check":
        inputs["left"], inputs["right"] = args.left, args.right
    skip = set(input_keys) | {"command", "output", "bandwidth", "grid_resolution", "tol"}
    options = {k: v for k, v in ns.items() if k not in skip}
    if args.command == "laplacian-sum-check":
        options = {}
    return RunConfig(
        command=args.command,
        inputs=inputs,
        output=args.output,
        bandwidth=args.bandwidth,
        grid_resolution=args.grid_resolution,
        tolerances=_parse_tol(args.tol),
        options=options,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValidationError as exc:
        # report what we can without a valid config
        payload = {"status": "fail", "exit_code": EXIT_VALIDATION, "reason": exc.reason, "message": str(exc)}
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
