"""Command-line entry point.

Subcommands: check (parse + model diagnostics), regions (list clock
regions), solve (winning base regions for an objective encoding), synth
(extract and save a controller), simulate (play a controller against an
adversary), explain (print an objective formula, its Zielonka tree, and the
memory bound). Exit codes: 0 success, 1 error (including usage errors),
2 empty winning set / failed simulation verdict.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .errors import TagsynthError
from .gamespec import (parse_controller, parse_gamespec, region_token,
                       serialize_controller)
from .model import validate_model
from .objectives import formula_to_muller
from .regions import _sort_key, enumerate_regions, pretty
from .simulator import make_adversary, parse_script, run
from .synthesis import (OBJECTIVES, _pipeline, _tree_for, objective_formula,
                        sure_safe, synthesize)

__version__ = "0.1.0"


@dataclass
class CommandOutcome:
    exit_code: int
    report: str
    artifacts: tuple = ()


def _read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_model(path):
    return parse_gamespec(_read(path))


def _clock_names(n):
    base = ["x", "y"]
    while len(base) < n:
        base.append(f"x{len(base) + 1}")
    return base[:n]


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------

def _cmd_check(args):
    model, safe = _load_model(args.file)
    diags = validate_model(model)
    if args.json:
        report = json.dumps({
            "name": model.name,
            "locations": len(model.locations),
            "clocks": len(model.clocks),
            "edges": len(model.edges),
            "safe": sorted(safe),
            "diagnostics": diags,
        }, sort_keys=True)
        return CommandOutcome(0, report)
    lines = [f"parsed {model.name}: {len(model.locations)} locations, "
             f"{len(model.clocks)} clocks, {len(model.edges)} edges, "
             f"safe set {{{', '.join(sorted(safe))}}}"]
    for d in diags:
        lines.append(f"warning: {d}")
    if not diags:
        lines.append("model diagnostics: clean")
    return CommandOutcome(0, "\n".join(lines))


def _cmd_regions(args):
    model, _ = _load_model(args.file)
    regs = sorted(enumerate_regions(model), key=_sort_key)
    if args.json:
        return CommandOutcome(0, json.dumps(
            {"count": len(regs), "regions": [region_token(r) for r in regs]},
            sort_keys=True))
    lines = [pretty(r) for r in regs]
    if args.verbose:
        lines.append(f"total: {len(regs)} regions")
    return CommandOutcome(0, "\n".join(lines))


def _cmd_solve(args):
    model, safe = _load_model(args.file)
    game, arena, condition, tree, win_nodes, strat, cert = _pipeline(
        model, safe, args.objective, args.phi_star_literal_as_printed)
    if args.json:
        return CommandOutcome(0, json.dumps({
            "objective": args.objective,
            "arena_nodes": arena.n,
            "m_f": cert.m_f,
            "winning_states": len(cert.winning),
            "winning_regions": [region_token(r) for r in cert.winning_regions],
        }, sort_keys=True))
    lines = [f"objective: {args.objective}",
             f"arena nodes: {arena.n}",
             f"memory bound m_F: {cert.m_f}",
             f"winning abstract states: {len(cert.winning)}",
             f"winning base regions: {len(cert.winning_regions)}"]
    lines += [f"  {pretty(r)}" for r in cert.winning_regions]
    if args.dump_zielonka:
        lines.append("")
        lines.append(condition.describe())
        lines.append("zielonka tree:")
        lines.append(tree.dump())
    if args.dump_arena:
        lines.append("")
        lines.append("arena edges:")
        for v in range(arena.n):
            labels = ",".join(sorted(arena.label_set(v)))
            for w in arena.succ[v]:
                lines.append(f"{v} -> {w} [{labels}]")
    return CommandOutcome(0, "\n".join(lines))


def _cmd_synth(args):
    model, safe = _load_model(args.file)
    if args.objective == "tick":
        if args.output:
            print("error: the tick encoding certifies winning regions but "
                  "exports no controller; drop -o or pick phi-dagger/phi-star",
                  file=sys.stderr)
            return CommandOutcome(1, "")
        ctrl, cert = None, sure_safe(model, safe, "tick")
    else:
        ctrl, cert = synthesize(model, safe, args.objective,
                                do_cross_validate=args.cross_validate)
    lines = [f"winning base regions ({len(cert.winning_regions)}):"]
    lines += [f"  {pretty(r)}" for r in cert.winning_regions]
    agree = True
    if cert.per_encoding:
        keys = sorted(cert.per_encoding)
        for enc in keys:
            lines.append(f"cross-validate {enc}: "
                         f"{len(cert.per_encoding[enc])} regions")
        agree = len({cert.per_encoding[k] for k in keys}) == 1
        lines.append("cross-validation: encodings agree" if agree else
                     "cross-validation: ENCODINGS DISAGREE")
    artifacts = ()
    if ctrl is not None:
        lines.append(f"controller: {ctrl.memory_states} memory states, "
                     f"{len(ctrl.observations)} observations")
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(serialize_controller(ctrl))
            lines.append(f"controller written to {args.output}")
            artifacts = (args.output,)
    if args.json:
        report = json.dumps({
            "objective": args.objective,
            "m_f": cert.m_f,
            "winning_regions": [region_token(r) for r in cert.winning_regions],
            "memory_states": None if ctrl is None else ctrl.memory_states,
            "controller": args.output if ctrl is not None and args.output else None,
            "encodings_agree": agree if cert.per_encoding else None,
        }, sort_keys=True)
    else:
        report = "\n".join(lines)
    if not agree:
        return CommandOutcome(1, report, artifacts)
    if not cert.winning_regions:
        return CommandOutcome(2, report, artifacts)
    return CommandOutcome(0, report, artifacts)


def _cmd_simulate(args):
    model, safe = _load_model(args.file)
    ctrl = parse_controller(_read(args.controller))
    script = parse_script(_read(args.script)) if args.script else None
    adversary = make_adversary(args.adversary, script)
    threshold = None
    if args.threshold is not None:
        try:
            threshold = Fraction(args.threshold)
        except (ValueError, ZeroDivisionError):
            print(f"error: cannot read --threshold {args.threshold!r} as a "
                  f"rational", file=sys.stderr)
            return CommandOutcome(1, "")
    records, verdict = run(
        model, safe, ctrl, adversary,
        rounds=args.rounds, seed=args.seed, threshold=threshold,
        suffix=args.suffix, trace_path=args.trace,
        check_regions=args.check_regions, tie_choice=args.tie)
    artifacts = (args.trace,) if args.trace else ()
    if args.json:
        report = json.dumps({
            "passed": verdict.passed,
            "reason": verdict.reason,
            "rounds": verdict.rounds,
            "elapsed": f"{verdict.elapsed.numerator}/{verdict.elapsed.denominator}",
            "blameless_suffix": verdict.blameless_suffix,
            "trace": args.trace,
        }, sort_keys=True)
    else:
        lines = [f"verdict: {'PASS' if verdict.passed else 'FAIL'}",
                 f"reason: {verdict.reason}",
                 f"rounds played: {verdict.rounds}",
                 f"time elapsed: {verdict.elapsed}",
                 f"blame-free suffix: {verdict.blameless_suffix}"]
        if args.trace:
            lines.append(f"trace written to {args.trace}")
        report = "\n".join(lines)
    return CommandOutcome(0 if verdict.passed else 2, report, artifacts)


def _cmd_explain(args):
    if args.file and args.clocks is not None:
        print("error: give a game file or --clocks N, not both",
              file=sys.stderr)
        return CommandOutcome(1, "")
    if args.file:
        model, _ = _load_model(args.file)
        clocks = sorted(model.clocks)
    elif args.clocks is not None:
        if args.clocks < 0:
            print("error: --clocks must be nonnegative", file=sys.stderr)
            return CommandOutcome(1, "")
        clocks = _clock_names(args.clocks)
    else:
        print("error: explain needs a game file or --clocks N",
              file=sys.stderr)
        return CommandOutcome(1, "")
    formula = objective_formula(args.objective, clocks,
                                args.phi_star_literal_as_printed)
    condition = formula_to_muller(formula)
    tree = _tree_for(condition)
    if args.json:
        return CommandOutcome(0, json.dumps({
            "objective": args.objective,
            "clocks": clocks,
            "formula": str(formula),
            "derived_atoms": list(condition.atom_names),
            "m_f": tree.m_f,
        }, sort_keys=True))
    lines = [f"objective {args.objective} over clocks "
             f"{{{', '.join(clocks)}}}:",
             f"  {formula}",
             "",
             condition.describe(),
             "",
             "zielonka tree:",
             tree.dump(),
             f"memory bound m_F = {tree.m_f}"]
    return CommandOutcome(0, "\n".join(lines))


_HANDLERS = {
    "check": _cmd_check,
    "regions": _cmd_regions,
    "solve": _cmd_solve,
    "synth": _cmd_synth,
    "simulate": _cmd_simulate,
    "explain": _cmd_explain,
}


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="tagsynth",
        description="Receptive controller synthesis for safety objectives "
                    "in timed automaton games.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, metavar="COMMAND")

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--verbose", action="store_true",
                        help="extra detail in the report")
        sp.add_argument("--json", action="store_true",
                        help="machine-readable report")
        return sp

    sp = add("check", "parse a game file and print model diagnostics")
    sp.add_argument("file")

    sp = add("regions", "print every clock region, sorted")
    sp.add_argument("file")

    sp = add("solve", "compute winning base regions for an objective")
    sp.add_argument("file")
    sp.add_argument("--objective", choices=OBJECTIVES, default="phi-dagger")
    sp.add_argument("--phi-star-literal-as-printed", action="store_true",
                    help="use the bl1=true literal variant of phi-star")
    sp.add_argument("--dump-arena", action="store_true",
                    help="emit the turn arena as a sorted edge list")
    sp.add_argument("--dump-zielonka", action="store_true",
                    help="emit the Zielonka tree with per-node memory")

    sp = add("synth", "synthesize a finite-memory controller")
    sp.add_argument("file")
    sp.add_argument("-o", "--output", help="write the controller here")
    sp.add_argument("--objective", choices=OBJECTIVES, default="phi-dagger")
    sp.add_argument("--cross-validate", action="store_true",
                    help="check all encodings report the same regions")

    sp = add("simulate", "play a controller against an adversary")
    sp.add_argument("file")
    sp.add_argument("controller")
    sp.add_argument("--adversary", default="random",
                    choices=["random", "zeno", "scripted", "interactive"])
    sp.add_argument("--rounds", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threshold", default=None,
                    help="elapsed-time pass threshold, rational (default rounds/4)")
    sp.add_argument("--suffix", type=int, default=None,
                    help="blame-free suffix pass length (default rounds/4)")
    sp.add_argument("--trace", help="write a JSONL trace here")
    sp.add_argument("--script", help="JSON move list for --adversary scripted")
    sp.add_argument("--tie", type=int, choices=[1, 2], default=2,
                    help="scheduler choice on equal delays")
    sp.add_argument("--check-regions", action="store_true",
                    help="cross-check every round against the region game")

    sp = add("explain", "print an objective formula, Zielonka tree, and m_F")
    sp.add_argument("file", nargs="?")
    sp.add_argument("--clocks", type=int, default=None,
                    help="synthesize clock names instead of reading a model")
    sp.add_argument("--objective", choices=OBJECTIVES, default="phi-dagger")
    sp.add_argument("--phi-star-literal-as-printed", action="store_true")

    return p


def dispatch(argv=None) -> CommandOutcome:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return CommandOutcome(0 if code == 0 else 1, "")
    try:
        return _HANDLERS[args.cmd](args)
    except (TagsynthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandOutcome(1, "")


def main(argv=None) -> int:
    outcome = dispatch(argv)
    if outcome.report:
        print(outcome.report)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
