"""Batch runner: ``invforge {toy,limit,verify,sample}``.

Exit codes: 0 all rows pass, 1 some verification failed, 2 bad configuration,
3 an element budget was exceeded.  Every run writes a manifest listing each
output file with its sha256.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__
from .classes import SHIPPED, get_class
from .diagnostics import delta_report, gamma_report, graph_type_catalog
from .errors import InvforgeError, ParseError, StageBudgetExceeded
from .io import read_structure, write_report, write_structure
from .structures import FinStructure
from .toy import AxiomSchedule, build_stages

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

POLICIES = {
    "witness": "canonical-witness",
    "duplicate": "class-duplicate",
    "extension": "class-extend-language",
    "split": "class-split-type",
    "schedule": "dovetail",
}


class ConfigError(Exception):
    pass


def _add_common(p, stages=True):
    p.add_argument("--class", dest="class_name", default="graphs",
                   help=f"one of {', '.join(SHIPPED)}")
    if stages:
        p.add_argument("--stages", type=int, default=4)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="json additionally dumps the last stage (or the sample) as a structure")
    p.add_argument("--element-cap", type=int, default=5000)


def build_parser():
    parser = argparse.ArgumentParser(prog="invforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="toy construction with delta and gamma reports")
    _add_common(p)
    p.add_argument("--seed-structure", help="JSON structure for stage 0 (default: one vertex)")
    p.add_argument("--max-vars", type=int, default=3, help="largest tuple size in the delta report")

    p = sub.add_parser("limit", help="inverse-limit construction with mass checks and eta report")
    _add_common(p)
    p.add_argument("--depth", type=int, default=None, help="deepest eta depth (default: --stages)")

    p = sub.add_parser("sample", help="draw one sampled structure from a limit stage")
    _add_common(p, stages=False)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--samples", type=int, default=4, help="number of points k")

    p = sub.add_parser("verify", help="check stored structures against a class")
    p.add_argument("paths", nargs="+")
    p.add_argument("--class", dest="class_name", default="graphs")
    p.add_argument("--out", default=None)
    return parser


# -- helpers ---------------------------------------------------------------------------
def _class(name):
    try:
        return get_class(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out, config, files, rows, started):
    passed = sum(1 for r in rows if r.passed)
    manifest = {
        "config": config,
        "version": __version__,
        "policies": POLICIES,
        "seconds": round(time.time() - started, 3),
        "summary": {"rows": len(rows), "pass": passed, "fail": len(rows) - passed},
        "files": {os.path.basename(f): _sha256(f) for f in files},
    }
    path = os.path.join(out, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return manifest


def _print_rows(rows, stream=sys.stdout):
    for r in rows:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.run_id} n={r.n} {r.quantity} {r.type_id} "
              f"est={r.estimate:.6g} sigma={r.sigma:.3g} bound={r.bound:.6g}", file=stream)


def _finish(args, config, files, rows, started):
    report = os.path.join(args.out, "report.csv")
    write_report(rows, report)
    _write_manifest(args.out, config, [report] + files, rows, started)
    _print_rows(rows)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def _one_vertex(cls):
    sig = cls.signature_at(1)
    return FinStructure(sig, ["v0"], {})


# -- subcommands ------------------------------------------------------------------------
def cmd_toy(args, started):
    _check(args.stages >= 1, "--stages must be >= 1")
    _check(args.trials >= 1, "--trials must be >= 1")
    _check(args.max_vars >= 1, "--max-vars must be >= 1")
    cls = _class(args.class_name)
    if args.seed_structure:
        seed_s = read_structure(args.seed_structure)
    else:
        seed_s = _one_vertex(cls)
    schedule = AxiomSchedule.neighbours_first(cls.templates())
    stages = build_stages(seed_s, cls, args.stages, schedule, element_cap=args.element_cap)
    run_id = f"toy:{args.class_name}:{args.seed}"
    rows = delta_report(stages, graph_type_catalog(args.max_vars), args.trials, args.seed, run_id)
    rows += gamma_report(stages, schedule, args.trials, args.seed, run_id=run_id)
    files = []
    if args.format == "json":
        path = os.path.join(args.out, "stage.json")
        write_structure(stages[-1].structure, path)
        files.append(path)
    return _finish(args, vars(args), files, rows, started)


def cmd_limit(args, started):
    from .limit import build_limit, eta_report, verify_suite, write_gen_log
    _check(args.stages >= 2, "--stages must be >= 2 for the inverse-limit construction")
    _check(args.trials >= 1, "--trials must be >= 1")
    depth = args.depth if args.depth is not None else args.stages
    _check(3 <= depth <= args.stages or args.stages < 3, "--depth must lie in 3..--stages")
    cls = _class(args.class_name)
    top = build_limit(cls, args.stages, seed=args.seed)
    stages = [top.truncate(n) for n in range(2, args.stages + 1)]
    run_id = f"limit:{args.class_name}:{args.seed}"
    rows = verify_suite(stages, run_id=run_id, seed=args.seed, cap=args.element_cap)
    if cls.declared_splitting_order is not None and args.stages >= 3:
        deep = top.truncate(depth)
        rows += eta_report(deep, list(range(3, depth + 1)), args.trials, args.seed, run_id=run_id)
    log = os.path.join(args.out, "gen_log.jsonl")
    write_gen_log(top, log)
    files = [log]
    if args.format == "json":
        from .limit import materialize_stage
        s, _order = materialize_stage(top, cap=args.element_cap)
        path = os.path.join(args.out, "stage.json")
        write_structure(s, path)
        files.append(path)
    return _finish(args, vars(args), files, rows, started)


def cmd_sample(args, started):
    from .limit import build_limit, sample_invariant
    _check(args.depth >= 2, "--depth must be >= 2")
    _check(args.samples >= 0, "--samples must be >= 0")
    cls = _class(args.class_name)
    stage = build_limit(cls, args.depth, seed=args.seed)
    sample = sample_invariant(stage, args.samples, args.seed)
    path = os.path.join(args.out, "sample.json")
    write_structure(sample.structure, path, addresses=sample.addresses)
    unassigned = 1 - stage.total_mass()
    print(f"sampled {args.samples} points at depth {args.depth}; collision={sample.collision_flag}; "
          f"unassigned mass={unassigned}")
    _write_manifest(args.out, vars(args), [path], [], started)
    return EXIT_OK


def cmd_verify(args, started):
    from .diagnostics import ReportRow
    cls = _class(args.class_name)
    rows = []
    for path in args.paths:
        try:
            s = read_structure(path)
            problems = cls.violations(s)
        except (ParseError, OSError, ValueError) as exc:
            problems = [f"unreadable: {exc}"]
        ok = not problems
        label = "ok" if ok else "; ".join(str(p) for p in problems[:5])
        rows.append(ReportRow(path, 0, "membership", label, float(ok), 0.0, 1.0, ok))
    _print_rows(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report = os.path.join(args.out, "verify.csv")
        write_report(rows, report)
        _write_manifest(args.out, vars(args), [report], rows, started)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


COMMANDS = {"toy": cmd_toy, "limit": cmd_limit, "sample": cmd_sample, "verify": cmd_verify}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "run":
        argv = argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    started = time.time()
    try:
        if getattr(args, "out", None) and args.command != "verify":
            os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, started)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, InvforgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
