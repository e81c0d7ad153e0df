"""Command line entry point.

Exit codes: 0 success, 2 invalid input, 3 a requested check or probe failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ZETA, FAMILIES, DomainError, ModelHandle, ResponseMatrix, ValidationError
from .infer import infer_alternating, infer_subgradient, solve_convex
from .models import reduced_objective
from .simulate import GroundTruth, SimConfig, evaluate, generate
from .verify import (
    Battery,
    check_axiom1,
    check_axiom2,
    check_p1,
    check_p2,
    check_p3,
    find_axiom1_eps,
    jensen_probe,
    theorem1_witness,
    _axis,
)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SurfaceGrid:
    model: ModelHandle
    y: int
    x_step: float
    w_step: float
    rows: tuple[tuple[float, float, float], ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "w", "L"])
        for row in self.rows:
            writer.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()


def emit_surface(m: ModelHandle, y: int = 1, step: float = 0.01) -> SurfaceGrid:
    """Objective values on [0, 1] x [0, W_max - zeta], x outer, w inner."""
    if not (0 < step <= 0.1):
        raise ValidationError(f"step must lie in (0, 0.1], got {step}")
    if y not in (0, 1):
        raise ValidationError("y must be 0 or 1")
    xs = _axis(1.0, step)
    ws = np.minimum(_axis(m.w_max, step), m.w_max - ZETA)
    rows = tuple(
        (float(x), float(w), reduced_objective(m, float(x), float(w), y)) for x in xs for w in ws
    )
    return SurfaceGrid(m, y, step, step, rows)


def model_report(m: ModelHandle) -> dict:
    return {"family": m.family, "w_max": m.w_max, "n": m.n, "noise_cdf": m.noise_cdf}


# -- argument handling ----------------------------------------------------------


def _load_json_arg(value: str):
    text = value if value.lstrip().startswith("{") else Path(value).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {value!r}: {exc}") from None


def _model(args) -> ModelHandle:
    if getattr(args, "config", None):
        cfg = _load_json_arg(args.config)
        if args.model and args.model != cfg.get("family"):
            raise ValidationError("--model disagrees with the family in --config")
        return ModelHandle.from_dict(cfg)
    if not args.model:
        raise UsageError("--model or --config is required")
    return ModelHandle(
        args.model, w_max=args.w_max, n=args.n, noise_cdf=args.noise_cdf, minimax_raw=args.minimax_raw
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for randomized commands")
    return args.seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convexcrowd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=FAMILIES)
    model.add_argument("--config", help="model config as a JSON file or inline JSON object")
    model.add_argument("--w-max", type=float, default=1.0)
    model.add_argument("--n", type=int, default=1)
    model.add_argument("--noise-cdf", choices=("logistic", "gaussian"), default="logistic")
    model.add_argument("--minimax-raw", action="store_true", help="minimax form without the leading minus")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("simulate", parents=[out], help="draw a synthetic Dawid-Skene instance")
    p.add_argument("--config", required=True, help="simulation config as a JSON file or inline JSON object")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("infer", parents=[model, out], help="estimate answers and abilities")
    p.add_argument("--responses", required=True, help="response matrix JSON file")
    p.add_argument("--method", choices=("alternating", "subgradient", "epigraph"))
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--step0", type=float, default=0.5)
    p.add_argument("--truth", help="ground-truth JSON to score the result against")

    p = sub.add_parser("check", parents=[model, out], help="verify properties and axioms")
    p.add_argument("--all", action="store_true", help="P1, P2, P3 and Axiom 1")
    p.add_argument("--property", action="append", choices=("p1", "p2", "p3", "axiom1", "axiom2"), default=[])
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float, default=0.1)

    p = sub.add_parser("witness", parents=[model, out], help="evaluate the constructive Jensen violation")
    p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("probe", parents=[model, out], help="random search for a Jensen violation")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--expect",
        choices=("violation", "convex"),
        default="violation",
        help="outcome that counts as success (default: violation found)",
    )

    p = sub.add_parser("surface", parents=[model, out], help="objective surface as CSV (x,w,L)")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--y", type=int, choices=(0, 1), default=1)
    return parser


# -- subcommands ----------------------------------------------------------------


def _cmd_simulate(args) -> int:
    obj = _load_json_arg(args.config)
    if args.seed is not None:
        obj = {**obj, "seed": args.seed}
    elif "seed" not in obj:
        raise UsageError("--seed is required (or a 'seed' field in the config)")
    truth, Y = generate(SimConfig.from_dict(obj))
    if args.out:
        out = Path(args.out)
        out.write_text(Y.to_json() + "\n")
        out.with_name(out.stem + ".truth.json").write_text(_json(truth.to_dict()))
    else:
        sys.stdout.write(_json({"responses": Y.to_dict(), "truth": truth.to_dict()}))
    return EXIT_OK


def _cmd_infer(args) -> int:
    if not args.model and not args.config:
        args.model = "dawid_skene"
    m = _model(args)
    Y = ResponseMatrix.from_json(Path(args.responses).read_text())
    method = args.method or {"dawid_skene": "alternating", "convex_pl": "epigraph"}.get(m.family, "subgradient")
    if method == "alternating":
        result = infer_alternating(m, Y, args.restarts, _require_seed(args))
    elif method == "epigraph":
        result = solve_convex(Y, m)
    else:
        result = infer_subgradient(m, Y, args.steps, args.step0)
    report = {"model": model_report(m), **result.to_dict()}
    if args.truth:
        truth = GroundTruth.from_dict(_load_json_arg(args.truth))
        report["metrics"] = evaluate(result, truth)
    _emit(_json(report), args.out)
    return EXIT_OK


def _cmd_check(args) -> int:
    m = _model(args)
    wanted = ["p1", "p2", "p3", "axiom1"] if args.all else list(dict.fromkeys(args.property))
    if not wanted:
        raise UsageError("choose --all or at least one --property")
    reports = []
    for name in wanted:
        if name == "p1":
            reports.append(check_p1(m))
        elif name == "p2":
            reports.append(check_p2(m))
        elif name == "p3":
            reports.append(check_p3(m))
        elif name == "axiom2":
            reports.append(check_axiom2(m))
        else:
            eps = args.eps if args.eps is not None else find_axiom1_eps(m, args.delta)
            reports.append(check_axiom1(m, eps))
    battery = Battery(reports)
    _emit(_json({"model": model_report(m), **battery.to_dict()}), args.out)
    return EXIT_OK if battery.passed else EXIT_FAILED


def _cmd_witness(args) -> int:
    m = _model(args)
    rep = theorem1_witness(m, args.eps)
    _emit(_json({"model": model_report(m), "eps": args.eps, **rep.to_dict()}), args.out)
    return EXIT_OK if rep.violated else EXIT_FAILED


def _cmd_probe(args) -> int:
    m = _model(args)
    if args.trials < 1:
        raise ValidationError("--trials must be at least 1")
    rep = jensen_probe(m, args.trials, _require_seed(args))
    body = {
        "model": model_report(m),
        "trials": args.trials,
        "seed": args.seed,
        "found": rep is not None,
        "witness": None if rep is None else rep.to_dict(),
    }
    _emit(_json(body), args.out)
    ok = (rep is not None) if args.expect == "violation" else (rep is None)
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_surface(args) -> int:
    grid = emit_surface(_model(args), args.y, args.step)
    _emit(grid.to_csv(), args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "infer": _cmd_infer,
    "check": _cmd_check,
    "witness": _cmd_witness,
    "probe": _cmd_probe,
    "surface": _cmd_surface,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"convexcrowd: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValidationError, DomainError, OSError) as exc:
        print(f"convexcrowd: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
