"""Command-line front end: ``bornlab <command> ...``.

Exit codes: 0 success, 1 an undeclared violation (or a failed fit), 2 a
usage, rule-spec or g-expression error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import math
import os
import socket
import sys
import tempfile

import numpy as np

from . import __version__
from .axioms import (
    BLOCK,
    CHECK_STREAMS,
    bargmann_context_scan,
    check_opf_algebra,
    default_jobs,
    run_desiderata,
    scan_to_csv,
    star_product,
    swapped_star_product,
)
from .config import tolerances, using_tolerances
from .errors import BornLabError, DSLError
from .gleason import born_assignment, conjugated_frame, povm_gleason_fit, reconstruct_density, rule_frame
from .linalg import DensityMatrix, encode_matrix, trace_distance
from .rules import parse_rule
from .sampling import GENERATOR_NAME, SeededRng, haar_unitary, random_density

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

STREAM_HIDDEN = 0
STREAM_CONJUGATION = 4

RULE_HELP = {
    "born": "|<psi|phi_i>|^2; context-free, continuous",
    "preskill:g=<expr>": "g(|<psi|phi_i>|) renormalised over the basis; g(0)=0, g>=0",
    "maxoverlap[:tie_epsilon=<float>]": "uniform over the outcomes of largest overlap; discontinuous",
    "first-coordinate": "self-test rule: Born reweighted by 1+|phi_i[0]|^2 (breaks unitary invariance)",
    "n-scaled": "self-test rule: dimension-dependent blend of Born and x^4 (breaks dimension independence)",
}


class UsageError(Exception):
    pass


def parse_dims(tokens: list[str]) -> list[int]:
    """``["2..4", "7"]`` -> ``[2, 3, 4, 7]``. Commas also separate items."""
    dims = []
    for token in tokens:
        for item in filter(None, token.replace(",", " ").split()):
            lo, sep, hi = item.partition("..")
            try:
                if sep:
                    a, b = int(lo), int(hi)
                    if b < a:
                        raise UsageError(f"empty range {item!r}")
                    dims.extend(range(a, b + 1))
                else:
                    dims.append(int(item))
            except ValueError:
                raise UsageError(f"bad dimension {item!r}") from None
    if not dims:
        raise UsageError("no dimensions given")
    if any(d < 2 for d in dims):
        raise UsageError("dimensions must be >= 2")
    return dims


def parse_hidden(text: str, dim: int | None, rng: SeededRng) -> DensityMatrix:
    """``pure``, ``random`` (rank uniform in 1..d), ``mixed:<rank>`` or ``diag:a,b,...``."""
    kind, _, arg = text.partition(":")
    if kind == "diag":
        try:
            weights = [float(w) for w in arg.split(",")]
        except ValueError:
            raise UsageError(f"bad diag weights {arg!r}") from None
        if dim is not None and dim != len(weights):
            raise UsageError(f"diag has {len(weights)} entries but --dim is {dim}")
        try:
            return DensityMatrix(np.diag(np.array(weights, dtype=complex)))
        except BornLabError as exc:
            raise UsageError(f"diag weights do not form a density: {exc}") from None
    d = 3 if dim is None else dim
    if kind == "pure" and not arg:
        rank = 1
    elif kind == "random" and not arg:
        rank = int(rng.generator.integers(1, d + 1))
    elif kind == "mixed":
        try:
            rank = int(arg)
        except ValueError:
            raise UsageError(f"bad rank {arg!r}") from None
        if not 1 <= rank <= d:
            raise UsageError(f"rank must lie in 1..{d}")
    else:
        raise UsageError(f"unknown hidden state {text!r}; use pure, random, mixed:<rank> or diag:<a,b,...>")
    return random_density(d, rank, rng)


def _finite(obj):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _envelope(args, body: dict) -> dict:
    report = {"tool": "bornlab", "version": __version__, "command": args.command}
    if not args.deterministic:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        report["host"] = socket.gethostname()
    report.update(body)
    return _finite(report)


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bornlab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _emit_json(args, body: dict) -> None:
    _emit(args, json.dumps(_envelope(args, body), indent=2, allow_nan=False) + "\n")


def _tolerances(args):
    tol = tolerances()
    if getattr(args, "tie_epsilon", None) is not None:
        tol = dataclasses.replace(tol, tie_epsilon=args.tie_epsilon)
    return tol


def cmd_check(args) -> int:
    dims = parse_dims(args.dims)
    tol = _tolerances(args)
    with using_tolerances(tol):
        rule = parse_rule(args.rule)
    jobs = args.jobs or default_jobs()
    report = run_desiderata(rule, dims, args.trials, args.seed, jobs=jobs, tol=tol)
    _emit_json(args, report.to_json())
    for des, verdict in report.verdicts().items():
        print(f"{des.value}: {verdict}", file=sys.stderr)
    return report.exit_code


def cmd_reconstruct(args) -> int:
    rng = SeededRng(args.seed)
    rho = parse_hidden(args.hidden, args.dim, rng.substream(STREAM_HIDDEN))
    d = rho.dim
    hidden = {"spec": args.hidden, "rank": int(np.linalg.matrix_rank(rho.entries, tol=1e-10)),
              "entries": encode_matrix(rho.entries)}
    if args.povm:
        if args.assignment == "born":
            assignment = born_assignment(rho)
        else:
            born = born_assignment(rho)
            assignment = lambda e: born(e) ** 2
        result = povm_gleason_fit(assignment, d, rng, provenance={"assignment": args.assignment})
        conj_err = None
    else:
        with using_tolerances(_tolerances(args)):
            rule = parse_rule(args.rule)
        oracle = rule_frame(rule, rho, seed=args.seed)
        result = reconstruct_density(oracle, rng)
        u = haar_unitary(d, rng.substream(STREAM_CONJUGATION))
        conj = reconstruct_density(conjugated_frame(oracle, u), rng)
        conj_err = trace_distance(conj.rho_hat, result.rho_hat.conjugate(u))
    body = result.to_json()
    body["hidden"] = hidden
    body["trace_distance"] = trace_distance(result.rho_hat, rho)
    if conj_err is not None:
        body["covariance_trace_distance"] = conj_err
    body["threshold"] = args.threshold
    ok = result.residual_max < args.threshold
    body["verdict"] = "pass" if ok else "fail"
    _emit_json(args, body)
    print(f"residual_max={result.residual_max:.3g} trace_distance={body['trace_distance']:.3g}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_opf_check(args) -> int:
    dims = parse_dims(args.dims)
    star = swapped_star_product if args.self_test else star_product
    checks = check_opf_algebra(dims, args.trials, SeededRng(args.seed), star=star)
    failed = any(c.failed for c in checks.values())
    body = {
        "dims": dims,
        "trials": args.trials,
        "seed": args.seed,
        "self_test": args.self_test,
        "rng": {"generator": GENERATOR_NAME, "stream_layout": "(trial,)"},
        "results": {name: c.to_json() for name, c in checks.items()},
    }
    _emit_json(args, body)
    for name, c in checks.items():
        print(f"{name}: {'fail' if c.failed else 'pass'}", file=sys.stderr)
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_bargmann_scan(args) -> int:
    tol = _tolerances(args)
    with using_tolerances(tol):
        rule = parse_rule(args.rule)
        rng = SeededRng(args.seed, (CHECK_STREAMS["context"], args.dim))
        rows = bargmann_context_scan(rule, args.dim, args.trials, rng)
    if args.format == "csv":
        _emit(args, scan_to_csv(rows))
    else:
        _emit_json(args, {
            "rule": rule.identifier,
            "dim": args.dim,
            "trials": args.trials,
            "seed": args.seed,
            "rng": {"generator": GENERATOR_NAME,
                    "stream_layout": f"(check={CHECK_STREAMS['context']}, dim, block) with {BLOCK} trials per block"},
            "rows": [dataclasses.asdict(r) for r in rows],
        })
    return EXIT_OK


def cmd_rules_list(args) -> int:
    width = max(map(len, RULE_HELP))
    for name, text in RULE_HELP.items():
        print(f"{name:<{width}}  {text}")
    return EXIT_OK


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bornlab", description="Probe probability rules for quantum measurements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=1000):
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--output", "-o", help="write the report here (atomically) instead of stdout")
        p.add_argument("--deterministic", action="store_true", help="omit timestamp and host from the report")
        if trials:
            p.add_argument("--trials", type=_positive, default=trials)

    p = sub.add_parser("check", help="run every desideratum check on a rule")
    p.add_argument("--rule", required=True)
    p.add_argument("--dims", nargs="+", default=["2..4"])
    p.add_argument("--jobs", type=_positive, default=None, help="worker processes (default: available cores)")
    p.add_argument("--tie-epsilon", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reconstruct", help="fit the density behind a rule or an effect assignment")
    p.add_argument("--rule", default="born")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--hidden", default="pure", help="pure, random, mixed:<rank> or diag:<a,b,...>")
    p.add_argument("--povm", action="store_true", help="fit p(E) on effects instead of rays")
    p.add_argument("--assignment", choices=("born", "squared"), default="born")
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--tie-epsilon", type=float, default=None)
    common(p, trials=0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("opf-check", help="check the OPF composition identities")
    p.add_argument("--dims", nargs="+", default=["2", "3"])
    p.add_argument("--self-test", action="store_true", help="use a deliberately wrong star product")
    common(p)
    p.set_defaults(func=cmd_opf_check)

    p = sub.add_parser("bargmann-scan", help="tabulate context discrepancy against Bargmann invariants")
    p.add_argument("--rule", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--tie-epsilon", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_bargmann_scan)

    p = sub.add_parser("rules-list", help="list the builtin rules")
    p.set_defaults(func=cmd_rules_list, deterministic=True, output=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "dim", None) is not None and args.dim < 2:
        print("error: --dim must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DSLError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, BornLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
