"""Command-line entry point.

Exit codes:
    0  success
    2  usage error (bad flags, unknown theorem id, unknown fixture)
    3  input error (missing file, malformed JSON or CSV, invalid table)
    4  inconsistent orientation evidence
    5  hyperedge candidate budget exceeded
    6  assumption check failed under --strict-assumptions
    7  size limit exceeded (dense table or supervariable cap)
    8  unique-information optimizer did not converge, or an atom fell below its tolerance
    9  verification battery reported failures
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import fixtures, verify
from .bayesnet import (
    BayesianNetwork,
    bn_from_dict,
    bn_to_dict,
    check_collider_amplification,
    check_faithfulness,
    check_persistent_relevance,
    joint_from_bn,
    random_bn,
)
from .broja import ConvergenceError
from .discovery import (
    DEFAULT_CANDIDATE_BUDGET,
    BudgetError,
    InconsistencyError,
    discover_bayesnet,
    discover_hypergraph,
)
from .hypergraph import BayesianHypergraph, bh_from_dict, bh_to_dict, check_hypergraph_collider_amplification
from .pid import MEASURES, ZERO_THRESHOLD, SupervariableCapError, pid_bivariate, pid_trivariate
from .probcore import ProbabilityError, TableSizeError, dumps, read_samples_csv, table_from_dict, table_to_dict

log = logging.getLogger("pidcausal")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INCONSISTENT = 4
EXIT_BUDGET = 5
EXIT_QUARANTINE = 6
EXIT_SIZE = 7
EXIT_CONVERGENCE = 8
EXIT_VERIFY_FAILED = 9


class UsageError(Exception):
    pass


class QuarantineError(Exception):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple = ()
    measure: str = "imin"
    threshold: float = ZERO_THRESHOLD
    max_edge_size: int = 4
    seed: int = 0
    out: str | None = None
    verbosity: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise UsageError("--threshold must be positive")
        if self.measure not in MEASURES:
            raise UsageError(f"unknown measure {self.measure!r}")
        for p in self.inputs:
            if not Path(p).is_file():
                raise FileNotFoundError(f"input file not found: {p}")


def write_atomic(path: str | None, text: str) -> None:
    """Write to a temp file beside ``path`` and rename it into place; stdout when no path."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str):
    """Read a joint table (JSON or sample CSV), a network or a hypergraph model."""
    text = Path(path).read_text(encoding="utf-8")
    if path.lower().endswith(".csv"):
        return read_samples_csv(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProbabilityError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ProbabilityError(f"{path}: expected a JSON object")
    if "cpts" in data:
        return bn_from_dict(data)
    if "potentials" in data:
        return bh_from_dict(data)
    if "probabilities" in data:
        return table_from_dict(data)
    raise ProbabilityError(f"{path}: not a joint table, network or hypergraph (no probabilities/cpts/potentials)")


def as_table(model):
    if isinstance(model, BayesianNetwork):
        return joint_from_bn(model)
    if isinstance(model, BayesianHypergraph):
        return model.joint()
    return model


def _split(arg: str | None) -> list[str]:
    return [s.strip() for s in arg.split(",") if s.strip()] if arg else []


# -- commands -----------------------------------------------------------------------

def cmd_pid(cfg: RunConfig, args) -> int:
    table = as_table(load_model(cfg.inputs[0]))
    names = table.names
    target = args.target or names[-1]
    if target not in names:
        raise UsageError(f"unknown target {target!r}; variables are {names}")
    sources = [s.split("+") for s in _split(args.sources)] or [[n] for n in names if n != target]
    for group in sources:
        for n in group:
            if n not in names:
                raise UsageError(f"unknown source variable {n!r}; variables are {names}")
    if len(sources) == 2:
        atoms = pid_bivariate(table, sources[0], sources[1], [target], cfg.measure)
        report = {"sources": [list(g) for g in sources], "target": target, "atoms": atoms.to_json()}
    elif len(sources) == 3:
        if not MEASURES[cfg.measure].lattice_compatible:
            raise UsageError(f"measure {cfg.measure!r} only supports two sources")
        atoms = pid_trivariate(table, sources, [target], cfg.measure)
        report = {"sources": [list(g) for g in sources], "target": target, "measure": cfg.measure,
                  "atoms": atoms.to_json()}
    else:
        raise UsageError(f"need 2 or 3 source groups, got {len(sources)}; use --sources")
    write_atomic(cfg.out, dumps(report))
    return EXIT_OK


def assumption_report(model, table, measure: str, threshold: float) -> dict:
    rep = {"persistent_relevance": check_persistent_relevance(table, measure=measure, threshold=threshold).passed}
    if isinstance(model, BayesianNetwork):
        rep["faithfulness"] = check_faithfulness(model, table=table).passed
        rep["collider_amplification"] = check_collider_amplification(model, table=table).passed
    elif isinstance(model, BayesianHypergraph):
        rep["hypergraph_collider_amplification"] = check_hypergraph_collider_amplification(model, table=table).passed
    return rep


def _discover(cfg: RunConfig, args, run) -> int:
    model = load_model(cfg.inputs[0])
    table = as_table(model)
    if args.strict_assumptions:
        rep = assumption_report(model, table, cfg.measure, cfg.threshold)
        failed = sorted(k for k, ok in rep.items() if not ok)
        if failed:
            raise QuarantineError(f"assumption checks failed: {', '.join(failed)}", rep)
    result = run(table)
    write_atomic(cfg.out, dumps(result.to_json()))
    return EXIT_OK


def cmd_discover_bn(cfg: RunConfig, args) -> int:
    return _discover(cfg, args, lambda t: discover_bayesnet(
        t, cfg.measure, cfg.threshold, workers=args.workers))


def cmd_discover_hg(cfg: RunConfig, args) -> int:
    if cfg.max_edge_size < 2:
        raise UsageError("--max-edge-size must be at least 2")
    return _discover(cfg, args, lambda t: discover_hypergraph(
        t, cfg.measure, cfg.threshold, max_edge_size=cfg.max_edge_size, budget=args.budget, workers=args.workers))


def cmd_verify(cfg: RunConfig, args) -> int:
    theorems = _split(args.theorem) or list(verify.THEOREMS)
    bad = [t for t in theorems if t not in verify.THEOREMS]
    if bad:
        raise UsageError(f"unknown theorem id(s) {bad}; choose from {list(verify.THEOREMS)}")
    if cfg.inputs:
        manifest = json.loads(Path(cfg.inputs[0]).read_text(encoding="utf-8"))
        if not isinstance(manifest, dict) or "batteries" not in manifest:
            raise ProbabilityError(f"{cfg.inputs[0]}: manifest needs a 'batteries' object")
    else:
        manifest = verify.default_manifest(cfg.seed)
    if args.no_desiderata:
        manifest = {**manifest, "desiderata": {}}
    verdicts, desiderata = verify.run_battery(manifest, theorems, cfg.threshold, cfg.measure)
    lines = "".join(json.dumps(v.to_json(), sort_keys=True) + "\n" for v in verdicts)
    lines += "".join(json.dumps(d.to_json(), sort_keys=True) + "\n" for d in desiderata)
    summary = verify.summary_csv(verdicts, desiderata)
    if cfg.out:
        out = Path(cfg.out)
        write_atomic(str(out / "manifest.json"), dumps(manifest))
        write_atomic(str(out / "verdicts.jsonl"), lines)
        write_atomic(str(out / "summary.csv"), summary)
    else:
        sys.stdout.write(summary)
    return EXIT_VERIFY_FAILED if any(v.status == "fail" for v in verdicts) else EXIT_OK


def cmd_gen(cfg: RunConfig, args) -> int:
    if args.what == "random-bn":
        bn = random_bn(args.nodes, args.edge_probability, args.concentration, cfg.seed)
        payload = bn_to_dict(bn)
    elif args.what == "fig1c-random":
        payload = bh_to_dict(fixtures.fig1c_random(cfg.seed))
    elif args.what in fixtures.FIXTURES:
        model = fixtures.FIXTURES[args.what].build()
        payload = bn_to_dict(model) if isinstance(model, BayesianNetwork) else bh_to_dict(model)
    elif args.what == "relevance-counterexample":
        payload = table_to_dict(fixtures.relevance_counterexample())
    else:
        choices = ["random-bn", "fig1c-random", "relevance-counterexample", *fixtures.FIXTURES]
        raise UsageError(f"unknown generator {args.what!r}; choose from {choices}")
    if args.joint:
        model = load_model_dict(payload)
        payload = table_to_dict(as_table(model))
    write_atomic(cfg.out, dumps(payload))
    return EXIT_OK


def load_model_dict(data: dict):
    if "cpts" in data:
        return bn_from_dict(data)
    if "potentials" in data:
        return bh_from_dict(data)
    return table_from_dict(data)


# -- parser -------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, inputs: str | None = "input"):
    if inputs == "input":
        p.add_argument("input", help="joint table JSON, sample CSV, network JSON or hypergraph JSON")
    p.add_argument("--measure", choices=sorted(MEASURES), default="imin")
    p.add_argument("--threshold", type=float, default=ZERO_THRESHOLD, help="zero threshold in bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (a directory for verify); stdout if omitted")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pidcausal", description=__doc__.splitlines()[0],
                                 epilog="exit codes: 0 ok, 2 usage, 3 input, 4 inconsistent, 5 budget, "
                                        "6 quarantined, 7 size, 8 numerical, 9 verification failures")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pid", help="decompose I(sources; target)")
    _common(p)
    p.add_argument("--sources", help="comma-separated source groups; join variables in a group with '+'")
    p.add_argument("--target", help="target variable (default: last variable)")
    p.set_defaults(func=cmd_pid)

    for name, func, helptext in (("discover-bn", cmd_discover_bn, "recover a network equivalence class"),
                                 ("discover-hg", cmd_discover_hg, "recover maximal directed hyperedges")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--strict-assumptions", action="store_true",
                       help="refuse to run when an assumption check fails")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--max-edge-size", type=int, default=4)
        if name == "discover-hg":
            p.add_argument("--budget", type=int, default=DEFAULT_CANDIDATE_BUDGET)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the brute-force claim batteries")
    _common(p, inputs=None)
    p.add_argument("manifest", nargs="?", help="manifest JSON (default: built-in fixtures and seeded batches)")
    p.add_argument("--theorem", help=f"comma-separated subset of {','.join(verify.THEOREMS)}")
    p.add_argument("--no-desiderata", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a fixture or seeded random model")
    _common(p, inputs=None)
    p.add_argument("what", help="fixture name, random-bn, fig1c-random or relevance-counterexample")
    p.add_argument("--nodes", type=int, default=5)
    p.add_argument("--edge-probability", type=float, default=0.4)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--joint", action="store_true", help="write the joint table instead of the model")
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        inputs = tuple(x for x in (getattr(args, "input", None), getattr(args, "manifest", None)) if x)
        cfg = RunConfig(args.command, inputs, args.measure, args.threshold,
                        getattr(args, "max_edge_size", 4), args.seed, args.out, args.verbose)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InconsistencyError as exc:
        print(f"inconsistent orientations: {exc}", file=sys.stderr)
        for line in getattr(exc, "trail", ())[-10:]:
            print(f"  {line}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except QuarantineError as exc:
        print(f"quarantined: {exc}", file=sys.stderr)
        print(dumps(exc.report), end="", file=sys.stderr)
        return EXIT_QUARANTINE
    except (TableSizeError, SupervariableCapError) as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"numerical: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ProbabilityError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
