"""Command-line driver: ``dphaser {simulate,verify,replay,bench}``.

Exit codes: 0 success, 1 usage, 2 violation or fault, 3 incomplete.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import bench
from .phaser import PhaserError, build, parse_modes
from .scenarios import SCENARIOS, scenario_factory
from .state import KINDS, MUTATIONS
from .verifier import ExploreConfig, explore, replay

OK, USAGE, VIOLATION, INCOMPLETE = 0, 1, 2, 3

BENCH_HELP = f"""\
CSV output (one file, two tables separated by a blank line):
  {",".join(bench.CSV_FIELDS)}
      one row per --n value; hops are signal-tree hops to the head,
      insert counts cover search and splice messages, delete counts
      cover unlink and ack messages
  {",".join(bench.PROMOTE_FIELDS)}
      one row per --C value; promotion messages per inserted node
  a final comment line reports the fitted a,b of mean = a*log2(C) + b
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _kinds(text: str) -> list[str]:
    out = [k.strip() for k in text.split(",") if k.strip()]
    for k in out:
        if k not in KINDS:
            raise argparse.ArgumentTypeError(f"invalid message kind {k!r}")
    return out


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dphaser", description="Distributed phaser simulator, verifier and benchmarks.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a scripted phaser to quiescence and write a JSONL trace")
    sim.add_argument("--n", type=int, default=4, help="team size (all tasks signal and wait)")
    sim.add_argument("--modes", help='mode mix such as "4sw,2s,2w"; overrides --n')
    sim.add_argument("--phases", type=int, default=2)
    sim.add_argument("--p", type=float, default=0.5)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--policy", default="fifo", help="fifo, random, or adversarial:KIND")
    sim.add_argument("--mutation", choices=MUTATIONS)
    sim.add_argument("--out", default="trace.jsonl")

    ver = sub.add_parser("verify", help="explore every schedule of a built-in scenario")
    ver.add_argument("--scenario", required=True)
    ver.add_argument("--depth", type=int, default=2000)
    ver.add_argument("--decompose", type=_kinds, help="kind[,kind...]: one run per kind")
    ver.add_argument("--mutation", choices=MUTATIONS)
    ver.add_argument("--out", default="report.json",
                     help="report path; a counterexample goes to PATH.counterexample.json")

    rep = sub.add_parser("replay", help="re-run a counterexample and check its state digest")
    rep.add_argument("counterexample")
    rep.add_argument("--out", help="write the replayed JSONL trace here")

    bn = sub.add_parser("bench", help="complexity measurements as CSV", epilog=BENCH_HELP,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    bn.add_argument("--n", type=_ints, default=[16, 64, 256])
    bn.add_argument("--C", type=_ints, default=[4, 16, 64])
    bn.add_argument("--p", type=float, default=0.5)
    bn.add_argument("--seeds", type=int, default=100)
    bn.add_argument("--out", default="-")
    return ap


def cmd_simulate(a) -> int:
    if a.modes:
        team = list(enumerate(parse_modes(a.modes), start=1))
    else:
        if a.n < 1:
            raise ValueError("n must be >= 1")
        team = [(i + 1, "sw") for i in range(a.n)]
    ph = build(team, a.phases, a.p, a.seed, a.policy, a.mutation)
    res = ph.world.run_to_quiescence()
    ph.world.write_trace(a.out)
    if ph.world.faults or not res.quiesced:
        print(f"not quiescent after {res.steps} steps; faults={len(ph.world.faults)}", file=sys.stderr)
        return VIOLATION
    print(f"quiesced after {res.steps} deliveries; trace in {a.out}")
    return OK


def cmd_verify(a) -> int:
    if a.scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {a.scenario!r}; choose from {', '.join(SCENARIOS)}")
    make_world = scenario_factory(a.scenario, a.mutation)
    kinds = a.decompose or [None]
    reports = [explore(ExploreConfig(make_world, a.depth, decompose=k)) for k in kinds]
    doc = {"scenario": a.scenario, "mutation": a.mutation, "reports": [r.to_json() for r in reports]}
    with open(a.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"{'kind':<18}{'states':>10}{'depth':>8}{'violations':>12}")
    for r in reports:
        print(f"{r.kind or '(full)':<18}{r.states_visited:>10}{r.max_depth:>8}{len(r.violations):>12}")
    bad = [v for r in reports for v in r.violations]
    if bad:
        v = bad[0]
        path = a.out + ".counterexample.json"
        with open(path, "w") as fh:
            json.dump({"scenario": a.scenario, "mutation": a.mutation, **v.to_json()}, fh, indent=2)
        print(f"{v.predicate}: {v.detail}; counterexample in {path}", file=sys.stderr)
        return VIOLATION
    if not all(r.complete for r in reports):
        print("depth bound reached; exploration incomplete", file=sys.stderr)
        return INCOMPLETE
    return OK


def cmd_replay(a) -> int:
    with open(a.counterexample) as fh:
        cx = json.load(fh)
    world = replay(scenario_factory(cx["scenario"], cx.get("mutation")), cx["schedule"])
    if a.out:
        world.write_trace(a.out)
    got = f"{world.digest():016x}"
    if got != cx["digest"]:
        print(f"digest mismatch: replay {got}, recorded {cx['digest']}", file=sys.stderr)
        return VIOLATION
    print(f"reproduced state {got} ({cx['predicate']}: {cx['detail']})")
    return OK


def cmd_bench(a) -> int:
    if a.seeds < 1 or any(n < 1 for n in a.n) or any(c < 1 for c in a.C):
        raise ValueError("n, C and seeds must be >= 1")
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(bench.CSV_FIELDS)
        for n in a.n:
            w.writerow(bench.bench_n(n, a.p, a.seeds).csv())
        fh.write("\n")
        w.writerow(bench.PROMOTE_FIELDS)
        pts = bench.bench_promote(a.C, a.p, a.seeds)
        for c, m in pts:
            w.writerow([c, a.p, a.seeds, m])
        if len(pts) >= 2:
            fa, fb = bench.fit_log(pts)
            fh.write(f"# fit a={fa:.4f} b={fb:.4f}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return OK


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "replay": cmd_replay, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    a = ap.parse_args(argv)
    try:
        return COMMANDS[a.cmd](a)
    except (ValueError, PhaserError) as e:
        ap.print_usage(sys.stderr)
        print(f"dphaser: error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
