"""Self-check suite behind ``offload-opt verify``.

Each check returns a :class:`CheckResult`; ``run_suite`` collects them.  The
quick level uses coarse grids and few draws and finishes in seconds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import solver
from .evaluator import evaluate
from .model import FrequencySchedule, OffloadPlan, derive_params, default_device, default_task
from .oracle import GridSpec, best_subset_bruteforce, grid_search_p1, jensen_check, random_small_instance
from .selection import best_prefix_aggregates, prefix_qbar, rank_servers, subset_aggregates


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class Level:
    oracle_instances: int
    grid_step: float
    oracle_tol: float
    subset_instances: int
    subset_max_n: int
    jensen_trials: int
    identity_draws: int
    monotone_grids: int


LEVELS = {
    "quick": Level(6, 1e-2, 0.05, 10, 8, 200, 200, 20),
    "full": Level(50, 1e-3, 0.02, 50, 12, 1000, 1000, 100),
}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-12)


def check_opt_local(level: Level, rng) -> CheckResult:
    B0 = default_task().gamma_A * default_task().L
    dev = default_device()
    f = solver.fbar(20.0, dev.kappa, dev.f_max)
    val = solver.opt_local(B0, dev.kappa, 20.0, dev)
    ok = f == 1e9 and _rel(val, 8.6016) <= 1e-6
    return CheckResult("opt_local", ok, f"fbar={f!r} opt_local={val!r}")


def check_oracle(level: Level, rng) -> CheckResult:
    grid = GridSpec(level.grid_step, level.grid_step, level.grid_step)
    worst = 0.0
    below = 0
    for _ in range(level.oracle_instances):
        n = int(rng.integers(1, 4))
        inst = random_small_instance(rng, n, m=n)
        p = derive_params(inst)
        agg = best_prefix_aggregates(p.q0, p.q, n)
        closed = solver.solve_p1(p.q0, agg, p, inst.alpha, inst.device).opt_value
        brute, _ = grid_search_p1(inst, list(agg.indices), grid)
        worst = max(worst, _rel(brute, closed))
        if closed > brute * (1 + 1e-9) + 1e-12:
            below += 1
    ok = worst <= level.oracle_tol and below == 0
    return CheckResult("oracle_equivalence", ok, f"max rel gap {worst:.3e} (tol {level.oracle_tol}); grid below closed form: {below}")


def check_subsets(level: Level, rng) -> CheckResult:
    worst = 0.0
    for _ in range(level.subset_instances):
        N = int(rng.integers(2, level.subset_max_n + 1))
        inst = random_small_instance(rng, N)
        _, brute = best_subset_bruteforce(inst)
        p = derive_params(inst)
        agg = best_prefix_aggregates(p.q0, p.q, inst.m)
        ranked = solver.solve_p1(p.q0, agg, p, inst.alpha, inst.device).opt_value
        worst = max(worst, _rel(ranked, brute))
    return CheckResult("subset_selection", worst <= 1e-9, f"max rel gap {worst:.3e}")


def check_jensen(level: Level, rng) -> CheckResult:
    rep = jensen_check(2.8672e8, 0.15, trials=level.jensen_trials, seed=int(rng.integers(2**31)))
    return CheckResult("jensen", rep.passed, f"worst margin {rep.worst_margin:.3e} J, uniform rel err {rep.uniform_rel_error:.1e}")


def check_identities(level: Level, rng) -> CheckResult:
    worst = {"h1": 0.0, "cubic": 0.0, "cont": 0.0, "equal": 0.0, "balance": 0.0}
    for _ in range(level.identity_draws):
        inst = random_small_instance(rng, int(rng.integers(1, 8)))
        p = derive_params(inst)
        agg = best_prefix_aggregates(p.q0, p.q, inst.m)
        s = solver.solve_p1(p.q0, agg, p, inst.alpha, inst.device)
        c = solver.cubic_rhs(agg.Qbar, p.K, p.phi, inst.alpha)
        y = s.y_star
        worst["cubic"] = max(worst["cubic"], abs(2 * y**3 + 3 * y**2 - c) / max(1.0, c))
        h1, _, _, _ = solver.h_values(s.x0_star, agg.Qbar, agg.Qu, p.K, p.phi, inst.alpha)
        worst["h1"] = max(worst["h1"], _rel(h1, s.opt_value))
        r_star = solver.delay_supremum(p.K, inst.alpha)
        b1, b2 = solver.region_bounds(agg.Qbar, agg.Qu, r_star)
        a1, _, a3, _ = solver.h_values(b1, agg.Qbar, agg.Qu, p.K, p.phi, inst.alpha)
        _, c2, c3, _ = solver.h_values(b2, agg.Qbar, agg.Qu, p.K, p.phi, inst.alpha)
        worst["cont"] = max(worst["cont"], _rel(a1, a3), _rel(c2, c3))
        plan = OffloadPlan(
            x0=s.x0_star,
            allocations=s.allocation_map(),
            schedule=FrequencySchedule.uniform(p.B0 * s.x0_star, s.f_local),
        )
        cb = evaluate(inst, plan)
        Rs = [d.R for d in cb.servers]
        worst["equal"] = max(worst["equal"], max(_rel(r, s.r_max) for r in Rs))
        worst["balance"] = max(worst["balance"], _rel(cb.D_l, cb.R_max))
    ok = worst["cubic"] <= 1e-10 and all(worst[k] <= 1e-9 for k in ("h1", "cont", "equal", "balance"))
    return CheckResult("analytic_identities", ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def check_monotone(level: Level, rng) -> CheckResult:
    bad = 0
    for _ in range(level.monotone_grids):
        inst = random_small_instance(rng, 1)
        p = derive_params(inst)
        grid = np.sort(rng.uniform(0.01, 1.0, size=25))
        opts, delays = [], []
        for Qbar in grid:
            agg = subset_aggregates(0.0, [Qbar])
            s = solver.solve_p1(0.0, agg, p, inst.alpha, inst.device)
            opts.append(s.opt_value)
            delays.append(s.r_max)
        if not (np.all(np.diff(opts) > 0) and np.all(np.diff(delays) > 0)):
            bad += 1
        q = rng.uniform(0.05, 0.5, size=int(rng.integers(2, 50)))
        Qn = prefix_qbar(float(rng.uniform(0.01, 0.3)), rank_servers(q).q_sorted)
        if np.any(np.diff(Qn) > 0):
            bad += 1
    return CheckResult("monotonicity", bad == 0, f"violations: {bad}")


def check_gate_soundness(level: Level, rng) -> CheckResult:
    bad = 0
    for _ in range(level.monotone_grids):
        inst = random_small_instance(rng, 5, m=int(rng.integers(1, 6)))
        p = derive_params(inst)
        agg = best_prefix_aggregates(p.q0, p.q, inst.m)
        tau = float(rng.uniform(0.05, 0.4))
        g = solver.gates(p, inst.device, inst.alpha, tau, agg.Qbar)
        s = solver.solve_p1(p.q0, agg, p, inst.alpha, inst.device)
        if g.gate_ok and (s.r_max > tau * (1 + 1e-9) or s.f_local > inst.device.f_max * (1 + 1e-9)):
            bad += 1
    return CheckResult("gate_soundness", bad == 0, f"violations: {bad}")


CHECKS: List[Callable] = [
    check_opt_local,
    check_identities,
    check_monotone,
    check_gate_soundness,
    check_jensen,
    check_subsets,
    check_oracle,
]


def run_suite(level: str = "quick", seed: int = 42) -> List[CheckResult]:
    cfg = LEVELS[level]
    out = []
    for check in CHECKS:
        rng = np.random.default_rng([seed, len(out)])
        t = time.perf_counter()
        try:
            res = check(cfg, rng)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            res = CheckResult(check.__name__.removeprefix("check_"), False, f"error: {exc!r}")
        out.append(CheckResult(res.name, res.passed, res.detail, time.perf_counter() - t))
    return out
