"""Command line front end: ``stochreo <command> <file.reo> ...``.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
failure.  Data goes to stdout or files, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

from . import analysis as AN
from .ctmc import build_ctmc
from .dsl import DslError, default_loss_metric, load
from .errors import ReoError
from .stochastic import StructureWarning, to_dot_s, validate_s

OK, INVALID, USAGE, NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def write_atomic(path: str | os.PathLike, text: str):
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _loss_spec(arg: str | None, spec) -> AN.LossProbability:
    if arg:
        lossy, slash, success = arg.partition("/")
        if not slash:
            raise UsageError("--loss expects <lossy>/<success>, e.g. γaL/γab")
        return AN.LossProbability(_names(lossy), _names(success))
    found = default_loss_metric(spec)
    if found is None:
        raise UsageError("the connector has no lossy sync; give the metric with --loss")
    return AN.LossProbability(*found)


def _metric_spec(args, spec) -> AN.MetricSpec:
    if getattr(args, "throughput", None):
        return AN.Throughput(_names(args.throughput))
    return _loss_spec(args.loss, spec)


def _note_merges(c):
    for note in c.merge_notes:
        print(f"note: {note}", file=sys.stderr)


def cmd_check(args) -> int:
    _, S = load(args.file)
    report = validate_s(S)
    if report.ok:
        print(f"ok: {len(S.states)} states, {len(S.transitions)} transitions")
        return OK
    for v in report:
        print(f"violation: {v}", file=sys.stderr)
    return INVALID


def cmd_automaton(args) -> int:
    _, S = load(args.file)
    text = to_dot_s(S) if args.dot else str(S) + "\n"
    _emit(text, args.output)
    return OK


def cmd_ctmc(args) -> int:
    _, S = load(args.file)
    c = build_ctmc(S, merge=not args.no_merge)
    _note_merges(c)
    if args.prism:
        sta, tra = AN.export_prism(c)
        write_atomic(f"{args.prism}.sta", sta)
        write_atomic(f"{args.prism}.tra", tra)
        print(f"wrote {args.prism}.sta and {args.prism}.tra: "
              f"{len(c)} states, {len(c.transitions)} transitions", file=sys.stderr)
    if args.dot:
        _emit(AN.export_dot(c), args.output)
    elif not args.prism:
        lines = [f"states {len(c)}", f"transitions {len(c.transitions)}"]
        lines += [f"{i} {s.label}" for i, s in enumerate(c.states)]
        lines += [f"{i} -> {j} {name} {rate!r}" for i, j, rate, name in c.edges()]
        _emit("\n".join(lines) + "\n", args.output)
    return OK


def cmd_steady(args) -> int:
    spec, S = load(args.file)
    metric = _metric_spec(args, spec)
    c = build_ctmc(S, merge=not args.no_merge)
    _note_merges(c)
    pi = AN.steady_state(c)
    value = AN.metric(c, pi, metric)
    print(repr(value))
    print(f"residual {pi.residual:.3g}", file=sys.stderr)
    return OK


def cmd_sweep(args) -> int:
    spec, S = load(args.file)
    metric = _metric_spec(args, spec)
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.linear:
        if args.steps == 1:
            grid = [args.start]
        else:
            grid = [args.start + (args.stop - args.start) * k / (args.steps - 1)
                    for k in range(args.steps)]
    else:
        grid = AN.log_grid(args.start, args.stop, args.steps)
    rows = AN.sweep(S, args.vary, grid, metric, merge=not args.no_merge)
    text = AN.sweep_csv(rows)
    if args.csv:
        write_atomic(args.csv, text)
    else:
        sys.stdout.write(text)
    return OK


def cmd_simulate(args) -> int:
    spec, S = load(args.file)
    c = build_ctmc(S, merge=not args.no_merge)
    _note_merges(c)
    res = AN.simulate(c, args.horizon, args.seed)
    out = {
        **res.meta,
        "events": res.events,
        "absorbed": res.absorbed,
        "flows": dict(sorted(res.flow_counts.items())),
        "arrivals": dict(sorted(res.arrival_counts.items())),
        "occupancy": {s.label: float(x) for s, x in zip(c.states, res.occupancy_fractions())},
    }
    try:
        loss = _loss_spec(args.loss, spec)
        out["loss"] = res.loss_fraction(loss.lossy, loss.success)
    except (UsageError, AN.ZeroDenominator):
        pass
    _emit(json.dumps(out, ensure_ascii=False, indent=2) + "\n", args.output)
    return OK


def _emit(text: str, output: str | None):
    if output:
        write_atomic(output, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochreo",
                                description="Compose stochastic Reo connectors and analyse their CTMCs.")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, merge=False, output=True):
        c = sub.add_parser(name, help=help_text)
        c.add_argument("file", help="connector file (.reo)")
        if merge:
            c.add_argument("--no-merge", action="store_true",
                           help="keep every micro state instead of merging completed groups")
        if output:
            c.add_argument("-o", "--output", help="write data to this file instead of stdout")
        c.set_defaults(func=func)
        return c

    command("check", cmd_check, "validate a connector", output=False)
    c = command("automaton", cmd_automaton, "print the composed automaton")
    c.add_argument("--dot", action="store_true")
    c = command("ctmc", cmd_ctmc, "derive the CTMC", merge=True)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--dot", action="store_true")
    g.add_argument("--prism", metavar="PREFIX", help="write PREFIX.sta and PREFIX.tra")
    c = command("steady", cmd_steady, "steady-state metric", merge=True, output=False)
    c.add_argument("--loss", metavar="LOSSY/SUCCESS",
                   help="comma-separated rate names; defaults to the file's lossy syncs")
    c.add_argument("--throughput", metavar="NAMES")
    c = command("sweep", cmd_sweep, "metric over a grid of one rate", merge=True, output=False)
    c.add_argument("--vary", required=True, help="boundary node or rate name")
    c.add_argument("--from", dest="start", type=float, required=True)
    c.add_argument("--to", dest="stop", type=float, required=True)
    c.add_argument("--steps", type=int, required=True)
    c.add_argument("--linear", action="store_true", help="evenly spaced grid (default: log spaced)")
    c.add_argument("--csv", help="output CSV path (default: stdout)")
    c.add_argument("--loss", metavar="LOSSY/SUCCESS")
    c.add_argument("--throughput", metavar="NAMES")
    c = command("simulate", cmd_simulate, "stochastic simulation", merge=True)
    c.add_argument("--horizon", type=float, required=True)
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--loss", metavar="LOSSY/SUCCESS")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StructureWarning)
        try:
            code = args.func(args)
        except UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            code = USAGE
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = USAGE
        except (AN.ReducibleChain, AN.SingularSystem, AN.NotConverged, AN.ZeroDenominator) as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            code = NUMERICAL
        except (DslError, ReoError, ValueError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            code = INVALID
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
