"""Command line entry point: ``twtlplan {compile,run,bench,verify}``.

Exit codes
  0   success (run/verify: every agent safe and satisfied)
  1   verify found a safety violation
  2   verify found an unsatisfied agent
  3   run: some agent's task is infeasible from its start
  4   run: an agent was left without a conflict-free horizon path
  5   run: max_rounds reached before every agent was satisfied
  64  usage error (bad flags, unreadable or invalid input files)
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from . import SCENARIOS, scenario_paths, twtl
from .automaton import compile_relaxed_dfsa
from .environment import build_grid, load_environment
from .errors import (EnvironmentSpecError, MalformedTrace, MissionInfeasible, NoSafePath,
                     TimeoutNotSatisfied, TwtlSyntaxError)
from .sim import nominal_relaxations, run_mission, setup_mission
from .trace import Trace
from .verify import check_safety, check_satisfaction, exit_code

EXIT_INFEASIBLE = 3
EXIT_NO_SAFE_PATH = 4
EXIT_TIMEOUT = 5
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_mission_args(p):
    p.add_argument("--scenario", choices=SCENARIOS,
                   help="use a bundled scenario instead of --env/--formulas")
    p.add_argument("--env", help="environment JSON file")
    p.add_argument("--formulas", help="formula file, one formula per line")
    p.add_argument("--tie-break", choices=("deterministic", "seeded"), default="deterministic")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-rounds", type=_positive)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twtlplan", description=__doc__.split("\n")[0],
                     epilog="exit codes: 0 ok, 1 violation, 2 unsatisfied, 3 infeasible, "
                            "4 no safe path, 5 timeout, 64 usage")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile formulas and print automaton sizes")
    p.add_argument("--formulas", required=True)
    p.add_argument("--env", help="take the alphabet from this environment's labels")
    p.add_argument("--export-automata", metavar="DIR", help="write one edge list per formula")

    p = sub.add_parser("run", help="plan and simulate a mission")
    _add_mission_args(p)
    p.add_argument("--horizon", type=_positive, default=1)
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--export-automata", metavar="DIR")

    p = sub.add_parser("bench", help="time the online planner over horizons and team sizes")
    _add_mission_args(p)
    p.add_argument("--bench-h", type=_int_list, default=[2, 3, 4], help="e.g. 2,3,4")
    p.add_argument("--bench-n", type=_int_list, help="team sizes, first n agents (default: all)")
    p.add_argument("--out", help="also write the table as CSV to this directory")

    p = sub.add_parser("verify", help="check a trace for safety and task satisfaction")
    p.add_argument("trace")
    p.add_argument("--env", help="also check that every step is a move of this environment")
    p.add_argument("--formulas", help="override the formulas recorded in the trace")
    p.add_argument("--out", help="write the JSON report here")
    return parser


def _mission_inputs(args):
    if args.scenario:
        if args.env or args.formulas:
            raise UsageError("--scenario excludes --env and --formulas")
        env_path, formula_path = scenario_paths(args.scenario)
    else:
        if not (args.env and args.formulas):
            raise UsageError("need --env and --formulas (or --scenario)")
        env_path, formula_path = args.env, args.formulas
    if args.tie_break == "seeded" and args.seed is None:
        raise UsageError("--tie-break seeded needs --seed")
    if args.tie_break == "deterministic" and args.seed is not None:
        raise UsageError("--seed only applies to --tie-break seeded")
    return load_environment(env_path), twtl.parse_formula_file(formula_path)


def _export(dirname, automata):
    os.makedirs(dirname, exist_ok=True)
    for k, aut in automata:
        with open(os.path.join(dirname, f"formula{k}.dfa.txt"), "w", encoding="utf-8") as fh:
            fh.write(aut.to_text())


def cmd_compile(args) -> int:
    formulas = twtl.parse_formula_file(args.formulas)
    base = build_grid(load_environment(args.env)).alphabet() if args.env else frozenset()
    automata = []
    print("formula\tstates\ttransitions\twindows\ttext")
    for k, phi in enumerate(formulas):
        alphabet = base | {frozenset([l]) for l in twtl.labels(phi)} | {frozenset()}
        aut = compile_relaxed_dfsa(phi, alphabet)
        automata.append((k, aut))
        print(f"{k}\t{aut.n_states}\t{aut.n_transitions}\t{len(twtl.windows(phi))}\t"
              f"{twtl.format_formula(phi)}")
    if args.export_automata:
        _export(args.export_automata, automata)
    return 0


def _fmt_tau(tau):
    return "" if tau is None else " ".join(str(v) for v in tau)


def _write_tau_csv(path, nominal, safe):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "nominal_tau", "nominal_tr", "safe_tau", "safe_tr"])
        for i in sorted(safe):
            n, s = nominal.get(i), safe[i]
            w.writerow([i, _fmt_tau(n), twtl.tr_norm(n) if n else "",
                        _fmt_tau(s), twtl.tr_norm(s) if s else ""])


def cmd_run(args) -> int:
    spec, formulas = _mission_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    try:
        mission = setup_mission(spec, formulas, args.horizon, args.tie_break, args.seed)
    except MissionInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.export_automata:
        _export(args.export_automata, [(c.agent_id, c.product.dfa) for c in mission.contexts])
    nominal = nominal_relaxations(mission)
    code = 0
    try:
        trace = run_mission(mission, args.max_rounds)
    except NoSafePath as exc:
        print(f"no safe path: {exc}", file=sys.stderr)
        trace, code = exc.trace, EXIT_NO_SAFE_PATH
    except TimeoutNotSatisfied as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        trace, code = exc.trace, EXIT_TIMEOUT

    trace.write(os.path.join(args.out, "trace.jsonl"))
    trace.write_energy_csv(os.path.join(args.out, "energy.csv"))
    trace.write_timing_csv(os.path.join(args.out, "timing.csv"))
    _write_tau_csv(os.path.join(args.out, "tau.csv"), nominal, trace.tau)
    safety = check_safety(trace, mission.ts)
    sat = check_satisfaction(trace)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump({"status": trace.status, "safety": safety.to_dict(),
                   "satisfaction": sat.to_dict()}, fh, indent=2)
        fh.write("\n")

    times = trace.iteration_times()
    print(f"status {trace.status}, rounds {trace.n_rounds}, horizon {args.horizon}")
    print(f"offline {trace.offline_time:.3f} s, online {sum(times):.3f} s, "
          f"avg iteration {sum(times) / max(len(times), 1):.6f} s")
    print("agent\tnominal_tau\tsafe_tau\tround")
    for i, a in sat.agents.items():
        print(f"{i}\t{_fmt_tau(nominal.get(i))}\t{_fmt_tau(a.tau)}\t"
              f"{'' if a.round is None else a.round}")
    print(f"safe {safety.safe}, sum |tau|_TR {sat.total_tr}")
    return code or exit_code(safety, sat)


def cmd_bench(args) -> int:
    spec, formulas = _mission_inputs(args)
    sizes = args.bench_n or [len(spec.agents)]
    for n in sizes:
        if not 1 <= n <= len(spec.agents):
            raise UsageError(f"--bench-n {n} outside 1..{len(spec.agents)}")
    rows = []
    print("H\tn\trounds\tstatus\ttotal_online_s\tavg_iteration_s")
    for n in sizes:
        sub = spec.with_agents(spec.agents[:n])
        for h in args.bench_h:
            if h < 1:
                raise UsageError("horizons must be >= 1")
            mission = setup_mission(sub, formulas, h, args.tie_break, args.seed)
            try:
                trace = run_mission(mission, args.max_rounds)
            except (NoSafePath, TimeoutNotSatisfied) as exc:
                trace = exc.trace
            times = trace.iteration_times()
            row = (h, n, trace.n_rounds, trace.status, sum(times),
                   sum(times) / max(len(times), 1))
            rows.append(row)
            print("%d\t%d\t%d\t%s\t%.4f\t%.6f" % row, flush=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["horizon", "agents", "rounds", "status", "total_online_s",
                        "avg_iteration_s"])
            w.writerows(rows)
    return 0


def cmd_verify(args) -> int:
    trace = Trace.read(args.trace)
    ts = build_grid(load_environment(args.env)) if args.env else None
    formulas = None
    if args.formulas:
        parsed = twtl.parse_formula_file(args.formulas)
        formulas = {a: parsed[k] for k, a in enumerate(trace.agent_ids) if k < len(parsed)}
        if len(formulas) != len(trace.agent_ids):
            raise UsageError("fewer formulas than agents in the trace")
    safety = check_safety(trace, ts)
    sat = check_satisfaction(trace, formulas)
    for v in safety.violations:
        print(f"violation round {v.round}: {v.kind} agents {v.agents[0]},{v.agents[1]} "
              f"at {' -> '.join(map(str, v.states))}")
    for i, a in sat.agents.items():
        state = f"satisfied at round {a.round}, tau ({_fmt_tau(a.tau)}), tr {a.tr}" \
            if a.satisfied else "unsatisfied"
        print(f"agent {i}: {state}")
    code = exit_code(safety, sat)
    print(["OK", "VIOLATION", "UNSATISFIED"][code])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"safety": safety.to_dict(), "satisfaction": sat.to_dict(),
                       "exit_code": code}, fh, indent=2)
            fh.write("\n")
    return code


COMMANDS = {"compile": cmd_compile, "run": cmd_run, "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, OSError, EnvironmentSpecError, TwtlSyntaxError, MalformedTrace) as exc:
        print(f"twtlplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
