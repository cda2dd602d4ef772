"""Command-line interface: ``offload-opt {solve,evaluate,sweep,verify,gen}``.

Exit codes: 0 ok, 1 usage/parse/validation error, 2 infeasible.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Any, List, Optional

from .errors import DeadlineInfeasible, InvalidInstance, MalformedPlan, OffloadError
from .evaluator import CostBreakdown, evaluate
from .experiments import FleetDistribution, EvalDefaults, SweepConfig, gen_instance, parse_values, sweep
from .model import FrequencySchedule, Instance, OffloadPlan, instance_to_dict, load_instance
from .solver import P0Solution, solve_p0

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _default_seed(seed: Optional[int], fallback: int = 0) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("OFFLOAD_OPT_SEED")
    if env is None:
        return fallback
    try:
        return int(env)
    except ValueError:
        raise _Usage(f"OFFLOAD_OPT_SEED must be an integer, got {env!r}")


def _inline_instance(args) -> Instance:
    defaults = EvalDefaults(tau_d=math.inf if args.tau_d is None else args.tau_d)
    return gen_instance(
        FleetDistribution(N=args.n_servers), defaults, args.alpha, args.m, _default_seed(args.seed)
    )


def _read_instance(args) -> Instance:
    if args.instance:
        try:
            return load_instance(args.instance)
        except (OSError, ValueError) as exc:
            raise _Usage(f"cannot read instance {args.instance}: {exc}")
    return _inline_instance(args)


def solution_to_dict(instance: Instance, sol: P0Solution) -> dict:
    cb = evaluate(instance, sol.plan)
    plan = sol.plan
    f_local = plan.schedule.segments[0][1] if plan.schedule.segments else None
    return {
        "branch": sol.branch,
        "x0": plan.x0,
        "allocations": [
            {"id": instance.servers[i].id, "fraction": x} for i, x in sorted(plan.allocations.items())
        ],
        "f_local_hz": f_local,
        "objective_j": sol.opt_value,
        "delay_s": cb.delay,
        "energy_j": cb.energy,
        "certified": sol.optimality_certified,
        "gates": {
            "qbar_star": sol.gates.qbar_star,
            "qbar_max": sol.gates.qbar_max,
            "q_m": sol.gates.q_m,
        },
    }


def breakdown_to_dict(instance: Instance, cb: CostBreakdown) -> dict:
    return {
        "E_l_j": cb.E_l,
        "E_lp_j": cb.E_lp,
        "D_l_s": cb.D_l,
        "D_lp_s": cb.D_lp,
        "servers": [
            {"id": instance.servers[d.index].id, "D_ps_s": d.D_ps, "D_sc_s": d.D_sc, "R_s": d.R} for d in cb.servers
        ],
        "R_max_s": cb.R_max,
        "delay_s": cb.delay,
        "energy_j": cb.energy,
        "objective_j": cb.objective,
        "feasible": cb.feasible,
        "violations": list(cb.violations),
    }


def plan_from_dict(instance: Instance, data: dict) -> OffloadPlan:
    """Plan JSON: ``x0``, ``allocations`` [{id, fraction}], and either
    ``schedule`` [{cycles, frequency_hz}] or a uniform ``f_local_hz``."""
    try:
        x0 = float(data["x0"])
        ids = {s.id: k for k, s in enumerate(instance.servers)}
        alloc = {}
        for a in data.get("allocations", []):
            if a["id"] not in ids:
                raise MalformedPlan(f"unknown server id {a['id']!r}")
            alloc[ids[a["id"]]] = float(a["fraction"])
        B0 = instance.task.gamma_A * instance.task.L
        if "schedule" in data:
            segs = tuple((float(s["cycles"]), float(s["frequency_hz"])) for s in data["schedule"])
            schedule = FrequencySchedule(segs)
        elif data.get("f_local_hz") is not None:
            schedule = FrequencySchedule.uniform(B0 * x0, float(data["f_local_hz"]))
        else:
            schedule = FrequencySchedule()
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPlan(f"malformed plan: {exc!r}") from exc
    return OffloadPlan(x0=x0, allocations=alloc, schedule=schedule)


# -- subcommands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    inst = _read_instance(args)
    sol = solve_p0(inst)
    print(dumps(solution_to_dict(inst, sol)))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    inst = _read_instance(args)
    try:
        with open(args.plan) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise _Usage(f"cannot read plan {args.plan}: {exc}")
    cb = evaluate(inst, plan_from_dict(inst, data))
    print(dumps(breakdown_to_dict(inst, cb)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        values = parse_values(args.values, args.vary)
        config = SweepConfig(
            vary=args.vary,
            values=values,
            alpha=args.alpha,
            m=args.m,
            trials=args.trials,
            seed=_default_seed(args.seed),
            dist=FleetDistribution(N=args.n_servers),
            defaults=EvalDefaults(tau_d=math.inf if args.tau_d is None else args.tau_d),
        )
    except ValueError as exc:
        raise _Usage(str(exc))
    result = sweep(config, jobs=args.jobs)
    text = result.to_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(result.summary_table())
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.level, _default_seed(args.seed, fallback=42))
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name:<22} {r.seconds:7.2f}s  {r.detail}")
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_USAGE


def cmd_gen(args) -> int:
    inst = _inline_instance(args)
    text = dumps(instance_to_dict(inst))
    if args.out in (None, "-"):
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _add_inline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-servers", type=int, default=100, help="fleet size for generated instances")
    p.add_argument("--alpha", type=float, default=20.0, help="delay weight, J/s")
    p.add_argument("--m", type=int, default=5, help="max servers per task")
    p.add_argument("--tau-d", type=float, default=None, help="deadline in seconds (default: unbounded)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (fallback: $OFFLOAD_OPT_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="offload-opt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance and print the plan as JSON")
    p.add_argument("--instance", help="instance JSON file; omit to generate one from the flags below")
    _add_inline_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="cost breakdown of an explicit plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True, help="plan JSON (the output of solve is accepted)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="compare policies over an m- or alpha-sweep, write CSV")
    p.add_argument("--vary", choices=("m", "alpha"), required=True)
    p.add_argument("--values", required=True, help="comma list, ranges like 1..10 allowed")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="CSV path, or - for stdout")
    p.add_argument("--alpha", type=float, default=20.0, help="fixed alpha when varying m")
    p.add_argument("--m", type=int, default=5, help="fixed m when varying alpha")
    p.add_argument("--n-servers", type=int, default=100)
    p.add_argument("--tau-d", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle and identity self-checks")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write a random instance JSON")
    _add_inline_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DeadlineInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidInstance as exc:
        for v in exc.violations:
            print(f"invalid instance: {v.code}: {v.message}", file=sys.stderr)
        return EXIT_USAGE
    except (_Usage, MalformedPlan, OffloadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
