"""Command-line front end.

Exit codes: 0 on success, 1 when a run completed but its result failed
verification or hit a resource cap, 2 on usage, precondition or file
format errors. Every artifact starts with a ``# config: {...}`` comment
holding the full run configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .errors import FormatError, PreconditionError, ResourceError, RoundBudgetExceeded
from .estimator import (FORBIDDEN, SINK, ProbEstimate, estimates_to_csv, event_probabilities)
from .graph_core import (DEFAULT_ATTEMPT_CAP, format_graph, generate_regular_high_girth, girth,
                         parse_graph, validate)
from .local_sim import (AlgorithmTable, GatherAlgorithm, eval_table, format_table, parse_table, parse_tape,
                        run_message_passing, sample_tape)
from .mt_solver import moser_tardos_solve
from .problems import (format_colouring, format_lll, format_orientation, parse_lll,
                       parse_orientation, verify_colouring, verify_orientation)
from .reduction import (build_so_lll_instance, contract_colour2, elect_leaders, lift_orientation,
                        orientation_from_assignment, sidecar, solve_so_via_lll)
from .speedup import (iterate_to_zero, random_node_table, speedup_step, zero_round_floor,
                      zero_round_tables)


@dataclass
class RunConfig:
    subcommand: str
    seed: int | None = None
    R: int | None = None
    n: int | None = None
    d: int | None = None
    girth_min: int | None = None
    t: int | None = None
    samples: int | None = None
    delta: float | None = None
    phase_cap: int | None = None
    paths: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values = vars(args)
        known = {k: values.get(k) for k in ("seed", "R", "n", "d", "girth_min", "t", "samples", "delta",
                                            "phase_cap")}
        paths = {k: v for k, v in values.items()
                 if k not in known and k not in ("command", "func") and v is not None}
        return cls(args.command, **known, paths={k: (str(v) if isinstance(v, Path) else v)
                                                 for k, v in paths.items()})

    def comment(self) -> str:
        return "config: " + json.dumps(asdict(self), sort_keys=True)


class VerifiedFailure(Exception):
    """The run finished but its output failed verification."""


def _read(path) -> str:
    with open(path) as fh:
        return fh.read()


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _load_algorithm(paths: Sequence[str]):
    tables = [parse_table(_read(p), p) for p in paths]
    if len(tables) == 1 and not tables[0].ball.edge_rooted:
        return tables[0]
    if any(not tb.ball.edge_rooted for tb in tables):
        raise PreconditionError("pass one node table or one edge table per colour")
    family = {tb.ball.root_colour: tb for tb in tables}
    d = tables[0].ball.d
    if sorted(family) != list(range(d)):
        raise PreconditionError(f"edge family needs exactly one table per colour 0..{d - 1}")
    return family


def _host(args) -> Any:
    if getattr(args, "graph", None):
        return parse_graph(_read(args.graph), args.graph)
    return generate_regular_high_girth(args.n, args.d, args.girth_min, args.graph_seed)


# --- subcommands -------------------------------------------------------------

def cmd_gen(args, cfg):
    g = generate_regular_high_girth(args.n, args.d, args.girth_min, args.seed, args.attempt_cap)
    _emit(format_graph(g, [cfg.comment()]), args.output)


def cmd_girth(args, cfg):
    report = girth(parse_graph(_read(args.graph), args.graph))
    value = "inf" if report.girth is None or report.girth == float("inf") else report.girth
    print(json.dumps({"girth": value, "witness_cycle": list(report.witness_cycle or [])}))


def cmd_validate(args, cfg):
    g = parse_graph(_read(args.graph), args.graph)
    verdict = validate(g, require_colouring=not args.uncoloured)
    if not verdict:
        raise VerifiedFailure(f"invalid: {verdict.reason} (witness {verdict.witness})")
    print("ok")


def cmd_validate_orientation(args, cfg):
    g = parse_graph(_read(args.graph), args.graph)
    sinks = verify_orientation(g, parse_orientation(_read(args.orientation), args.orientation))
    if sinks:
        raise VerifiedFailure(f"{len(sinks)} sinks: {sinks[:20]}")
    print("sinkless")


def cmd_contract(args, cfg):
    cmap = contract_colour2(parse_graph(_read(args.input), args.input))
    _emit(format_graph(cmap.contracted, [cfg.comment()]), args.output)
    if args.sidecar:
        Path(args.sidecar).write_text(json.dumps({"config": asdict(cfg), **sidecar(cmap)}, indent=1))


def cmd_reduce(args, cfg):
    g = parse_graph(_read(args.input), args.input)
    if args.solve:
        result = solve_so_via_lll(g, args.seed, args.phase_cap, args.R)
        cmap, leaders, instance = result.cmap, result.leaders, result.instance
    else:
        cmap = contract_colour2(g)
        instance = build_so_lll_instance(cmap.contracted)
        leaders = elect_leaders(cmap, sample_tape(g, args.R, args.seed)) if args.seed is not None else None
    if args.contracted:
        Path(args.contracted).write_text(format_graph(cmap.contracted, [cfg.comment()]))
    if args.lll:
        Path(args.lll).write_text(format_lll(instance, [cfg.comment()]))
    if args.sidecar:
        Path(args.sidecar).write_text(json.dumps({"config": asdict(cfg), **sidecar(cmap, leaders)}, indent=1))
    if not args.solve:
        return
    print(json.dumps(result.stats.as_dict()))
    if result.orientation is None:
        raise VerifiedFailure("Moser-Tardos hit its phase cap")
    _emit(format_orientation(result.orientation, [cfg.comment()]), args.orientation)
    sinks = verify_orientation(g, result.orientation)
    if sinks:
        raise VerifiedFailure(f"lifted orientation has sinks {sinks}")


def cmd_solve_mt(args, cfg):
    instance = parse_lll(_read(args.input), args.input)
    assignment, stats = moser_tardos_solve(instance, args.seed, args.phase_cap)
    record = {**stats.as_dict(), "config": asdict(cfg)}
    if args.output:
        Path(args.output).write_text(json.dumps({**record, "assignment": assignment.value}))
    print(json.dumps(stats.as_dict()))
    if not stats.success:
        raise VerifiedFailure("phase cap reached")
    if args.graph:
        gp = parse_graph(_read(args.graph), args.graph)
        sigma = orientation_from_assignment(gp, assignment)
        _emit(format_orientation(sigma, [cfg.comment()]), args.orientation)


def cmd_lift(args, cfg):
    g = parse_graph(_read(args.input), args.input)
    cmap = contract_colour2(g)
    sigma = parse_orientation(_read(args.contracted_orientation), args.contracted_orientation)
    leaders = elect_leaders(cmap, sample_tape(g, args.R, args.seed))
    lifted = lift_orientation(sigma, cmap, leaders)
    _emit(format_orientation(lifted, [cfg.comment()]), args.output)
    sinks = verify_orientation(g, lifted)
    if sinks:
        raise VerifiedFailure(f"lifted orientation has sinks {sinks}")


def cmd_gen_table(args, cfg):
    table = random_node_table(args.d, args.t, args.R, args.seed)
    _emit(format_table(table, [cfg.comment()]), args.output)


def cmd_run_alg(args, cfg):
    g = parse_graph(_read(args.graph), args.graph)
    alg = _load_algorithm(args.table)
    R = alg.R if isinstance(alg, AlgorithmTable) else alg[0].R
    tape = parse_tape(_read(args.tape), args.tape) if args.tape else sample_tape(g, R, args.seed)
    if tape.R != R or len(tape) != g.n:
        raise PreconditionError(f"tape must give {R} bits to each of {g.n} nodes")
    result = eval_table(alg, g, tape)
    rounds = None
    if args.message_passing:
        gather = GatherAlgorithm(alg)
        run = run_message_passing(gather, g, tape, gather.declared_rounds)
        rounds = run.rounds_used
        if isinstance(alg, AlgorithmTable) and tuple(run.outputs) != tuple(result.colour):
            raise VerifiedFailure("message-passing run disagrees with table evaluation")
    if isinstance(alg, AlgorithmTable):
        _emit(format_colouring(result, [cfg.comment()]), args.output)
        bad = verify_colouring(g, result)
        summary = {"forbidden_edges": len(bad)}
    else:
        _emit(format_orientation(result, [cfg.comment()]), args.output)
        bad = verify_orientation(g, result)
        summary = {"sinks": len(bad), "ties": len(result.ties)}
    if rounds is not None:
        summary["rounds_used"] = rounds
    print(json.dumps(summary), file=sys.stderr)
    if bad:
        raise VerifiedFailure(f"output is not sinkless: {bad[:20]}")


def cmd_speedup(args, cfg):
    B = parse_table(_read(args.table), args.table)
    host = parse_graph(_read(args.graph), args.graph)
    p_in = event_probabilities(B, host, FORBIDDEN, budget=args.budget)
    step = speedup_step(B, p_in.value, args.budget)
    sink = event_probabilities(step.orientation, host, SINK, budget=args.budget)
    p_out = event_probabilities(step.colouring, host, FORBIDDEN, budget=args.budget)
    _emit(format_table(step.colouring, [cfg.comment()]), args.output)
    if args.orientation_prefix:
        for c, table in step.orientation.items():
            Path(f"{args.orientation_prefix}.c{c}.txt").write_text(format_table(table, [cfg.comment()]))
    K, L = step.config.K, step.config.L
    summary = {
        "p": _frac(p_in.value), "K": _frac(K), "L": _frac(L),
        "sink": _frac(sink.value), "sink_bound_6K": float(6 * K), "sink_tie_mass": _frac(sink.tie_mass),
        "p_out": _frac(p_out.value), "p_out_bound_4L": float(4 * L), "p_out_tie_mass": _frac(p_out.tie_mass),
        "step_bound": step.bound,
        "holds": sink.value <= 6 * K + sink.tie_mass and p_out.value <= 4 * L + p_out.tie_mass,
    }
    print(json.dumps(summary), file=sys.stderr)
    if not summary["holds"]:
        raise VerifiedFailure("speedup bound violated")


def cmd_iterate(args, cfg):
    B = (parse_table(_read(args.table), args.table) if args.table
         else random_node_table(args.d, args.t, args.R, args.seed))
    trace = iterate_to_zero(B, _host(args), args.budget)
    _emit(trace.to_csv([cfg.comment()]), args.output)
    if not trace.holds():
        raise VerifiedFailure("a trace inequality failed")


def cmd_estimate(args, cfg):
    alg = _load_algorithm(args.table)
    g = parse_graph(_read(args.graph), args.graph)
    out = event_probabilities(alg, g, args.event, args.mode, args.aggregate, args.samples, args.seed,
                              args.delta, args.budget)
    estimates: list[ProbEstimate] = out if isinstance(out, list) else [out]
    if args.format == "csv":
        _emit(estimates_to_csv(estimates, [cfg.comment()]), args.output)
    else:
        rows = []
        for e in estimates:
            row = asdict(e)
            for k in ("value", "tie_mass"):
                if isinstance(row[k], Fraction):
                    row[k] = _frac(row[k])
            row["site"] = list(e.site) if isinstance(e.site, tuple) else e.site
            rows.append(row)
        _emit(json.dumps({"config": asdict(cfg), "estimates": rows}, indent=1) + "\n", args.output)


def cmd_zero_round(args, cfg):
    if args.table:
        floor = zero_round_floor(parse_table(_read(args.table), args.table))
        print(json.dumps({"max_q_squared": _frac(floor)}))
        if floor < Fraction(1, 9):
            raise VerifiedFailure("floor below 1/9")
        return
    if not args.enumerate:
        raise PreconditionError("pass --enumerate or --table")
    floors = [zero_round_floor(tb) for tb in zero_round_tables(args.R, args.d)]
    low = min(floors)
    ok = all(f >= Fraction(1, 9) for f in floors)
    print(json.dumps({"tables": len(floors), "min_max_q_squared": _frac(low), "all_at_least_1_9": ok}))
    if not ok:
        raise VerifiedFailure("some 0-round table beats 1/9")


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sinkless", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def host_options(p):
        p.add_argument("--graph", help="host graph file (otherwise generated)")
        p.add_argument("--n", type=int, default=20)
        p.add_argument("--girth-min", type=int, default=6)
        p.add_argument("--graph-seed", type=int, default=0)

    p = add("gen", cmd_gen, "generate a d-regular edge-coloured high-girth graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--girth-min", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attempt-cap", type=int, default=DEFAULT_ATTEMPT_CAP)
    p.add_argument("-o", "--output")

    p = add("girth", cmd_girth, "report girth and a shortest cycle")
    p.add_argument("graph")

    p = add("validate", cmd_validate, "check regularity, simplicity and the edge colouring")
    p.add_argument("graph")
    p.add_argument("--uncoloured", action="store_true", help="accept graphs without colours")

    p = add("validate-orientation", cmd_validate_orientation, "check that an orientation is sinkless")
    p.add_argument("graph")
    p.add_argument("orientation")

    p = add("contract", cmd_contract, "contract colour-2 edges into a 4-regular graph")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--sidecar")

    p = add("reduce", cmd_reduce, "build the LLL instance for a 3-regular graph, optionally solve and lift")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--contracted")
    p.add_argument("--lll")
    p.add_argument("--sidecar")
    p.add_argument("--solve", action="store_true")
    p.add_argument("--orientation", help="lifted orientation output (with --solve)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--R", type=int, default=2)
    p.add_argument("--phase-cap", type=int)

    p = add("solve-mt", cmd_solve_mt, "solve an LLL instance by Moser-Tardos resampling")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-cap", type=int)
    p.add_argument("-o", "--output", help="JSON record with the assignment")
    p.add_argument("--graph", help="4-regular graph the instance encodes; emits its orientation")
    p.add_argument("--orientation")

    p = add("lift", cmd_lift, "lift an orientation of the contracted graph back to the 3-regular graph")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--contracted-orientation", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--R", type=int, default=2)
    p.add_argument("-o", "--output")

    p = add("gen-table", cmd_gen_table, "random node table of radius t")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = add("run-alg", cmd_run_alg, "evaluate a table algorithm on a graph")
    p.add_argument("--table", action="append", required=True, help="node table, or one edge table per colour")
    p.add_argument("--graph", required=True)
    p.add_argument("--tape")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--message-passing", action="store_true", help="cross-check by a gather-then-decide run")
    p.add_argument("-o", "--output")

    p = add("speedup", cmd_speedup, "one colouring -> orientation -> colouring step")
    p.add_argument("--table", required=True)
    p.add_argument("--graph", required=True, help="host of girth > 2t+1 for measuring probabilities")
    p.add_argument("--orientation-prefix")
    p.add_argument("--budget", type=int, default=24)
    p.add_argument("-o", "--output")

    p = add("iterate", cmd_iterate, "apply speedup steps down to 0 rounds; CSV trace")
    p.add_argument("--table")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=24)
    host_options(p)
    p.add_argument("-o", "--output")

    p = add("estimate", cmd_estimate, "sink or forbidden-configuration probabilities")
    p.add_argument("--table", action="append", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--event", choices=[SINK, FORBIDDEN], required=True)
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--aggregate", choices=["max", "sites"], default="max")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=24)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-o", "--output")

    p = add("zero-round", cmd_zero_round, "0-round floor max_c q_c^2")
    p.add_argument("--enumerate", action="store_true")
    p.add_argument("--table")
    p.add_argument("--R", type=int, default=2)
    p.add_argument("--d", type=int, default=3)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig.from_args(args)
    try:
        args.func(args, cfg)
    except VerifiedFailure as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except (ResourceError, RoundBudgetExceeded) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except (FormatError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
