"""Brute-force verifiers for the closed-form solver.

Nothing here touches the solver's closed forms: the grid search rebuilds all
delays from the raw rates and capacities and reports the objective of its best
candidate through :func:`offload_opt.evaluator.evaluate`.  The subset search is
the exception by design: it enumerates subsets and scores each one with the
fixed-subset solver, to check that ranking by q picks the best one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import FleetTooLarge, SubsetTooLarge
from .evaluator import evaluate
from .model import (
    DeviceSpec,
    FrequencySchedule,
    Instance,
    OffloadPlan,
    ServerSpec,
    TaskSpec,
    derive_params,
    default_device,
)
from .selection import subset_aggregates
from .solver import solve_p1

MAX_GRID_SUBSET = 3
MAX_BRUTEFORCE_N = 12


@dataclass(frozen=True)
class GridSpec:
    x0_step: float = 1e-3
    allocation_step: float = 1e-3
    delay_step: float = 1e-3

    def __post_init__(self):
        for name in ("x0_step", "allocation_step", "delay_step"):
            v = getattr(self, name)
            if not (0 < v <= 0.1):
                raise ValueError(f"{name} must lie in (0, 0.1], got {v!r}")


def _compositions(n: int, units: int) -> np.ndarray:
    """All nonnegative integer n-vectors summing to ``units`` (n <= 3)."""
    if n == 1:
        return np.array([[units]])
    k = np.arange(units + 1)
    if n == 2:
        return np.column_stack([k, units - k])
    i, j = np.meshgrid(k, k, indexing="ij")
    keep = i + j <= units
    i, j = i[keep], j[keep]
    return np.column_stack([i, j, units - i - j])


def grid_search_p1(instance: Instance, subset: Sequence[int], grid: GridSpec = GridSpec()) -> Tuple[float, OffloadPlan]:
    """Minimize the fixed-subset objective by exhaustive grid scan.

    Scans the local share x0, the split of the offloaded share over the
    subset (a discretized simplex) and the local finish time D_l.  The
    objective is nondecreasing in the slowest server chain, so the simplex is
    reduced to its min-max point before the (x0, D_l) scan; this is exact on
    the grid.  Returns the objective excluding the constant uplink and tail
    terms, together with the best plan.
    """
    subset = [int(i) for i in subset]
    n = len(subset)
    if n > MAX_GRID_SUBSET:
        raise SubsetTooLarge(f"grid search supports at most {MAX_GRID_SUBSET} servers, got {n}")
    if n == 0:
        raise SubsetTooLarge("subset must be non-empty")

    task, dev = instance.task, instance.device
    L = float(task.L)
    B0 = task.gamma_A * L
    kappa, alpha = dev.kappa, instance.alpha
    uplink = L / dev.r_hp
    phi = dev.P_tx * uplink
    unit = np.array([L / instance.servers[i].r + task.gamma_A * L / instance.servers[i].c for i in subset])

    # min over the simplex of the slowest per-server tail, per unit of offloaded share
    units = int(round(1.0 / grid.allocation_step))
    comp = _compositions(n, units)
    tails = (comp * unit).max(axis=1) / units
    best_split = comp[int(np.argmin(tails))] / units
    tail = float(tails.min())

    x0 = np.linspace(0.0, 1.0, int(round(1.0 / grid.x0_step)) + 1)
    R = (1.0 - x0) * (uplink + tail)
    R[-1] = 0.0  # nothing offloaded

    d_hi = uplink + float(unit.max()) + B0 * float(np.cbrt(2.0 * kappa / alpha))
    D = d_hi * np.arange(1, int(round(1.0 / grid.delay_step)) + 1) * grid.delay_step

    B = B0 * x0[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        obj = kappa * B**3 / D**2 - phi * x0[:, None] + alpha * np.maximum(D, R[:, None])
        obj[B / D > dev.f_max] = np.inf
    obj[0, :] = alpha * R[0]  # x0 = 0: no local cycles, D_l is moot
    k, j = np.unravel_index(int(np.argmin(obj)), obj.shape)

    xk = float(x0[k])
    alloc = {}
    if xk < 1.0:
        alloc = {i: (1.0 - xk) * float(a) for i, a in zip(subset, best_split) if a > 0}
        # evaluate() wants the fractions to sum to one
        last = max(alloc)
        alloc[last] = 1.0 - xk - math.fsum(v for i, v in alloc.items() if i != last)
    schedule = FrequencySchedule.uniform(B0 * xk, B0 * xk / float(D[j])) if xk > 0 else FrequencySchedule()
    plan = OffloadPlan(x0=xk, allocations=alloc, schedule=schedule)
    cb = evaluate(instance, plan)
    value = cb.objective - phi - (dev.E_t if xk < 1.0 else 0.0)
    return value, plan


def best_subset_bruteforce(instance: Instance) -> Tuple[Tuple[int, ...], float]:
    """Exhaustively find the subset (size <= m) with the lowest fixed-subset optimum."""
    N = instance.N
    if N > MAX_BRUTEFORCE_N:
        raise FleetTooLarge(f"brute force supports N <= {MAX_BRUTEFORCE_N}, got {N}")
    params = derive_params(instance)
    best: Optional[Tuple[int, ...]] = None
    best_val = math.inf
    for size in range(1, instance.m + 1):
        for combo in itertools.combinations(range(N), size):
            agg = subset_aggregates(params.q0, params.q[list(combo)], combo)
            val = solve_p1(params.q0, agg, params, instance.alpha, instance.device).opt_value
            if val < best_val:
                best, best_val = combo, val
    return best, best_val


@dataclass(frozen=True)
class JensenReport:
    passed: bool
    trials: int
    worst_margin: float  # min over trials of energy - bound, joules
    uniform_rel_error: float


def jensen_check(B: float, R: float, trials: int = 1000, seed: int = 42, kappa: float = 1e-26) -> JensenReport:
    """Random piecewise schedules with B cycles in R seconds never beat uniform speed."""
    rng = np.random.default_rng(seed)
    bound = kappa * B**3 / R**2
    worst = math.inf
    ok = True
    for _ in range(trials):
        k = int(rng.integers(1, 17))
        cycles = B * rng.dirichlet(np.ones(k))
        times = R * rng.dirichlet(np.ones(k))
        # pin the totals exactly
        cycles[-1] = B - math.fsum(cycles[:-1])
        times[-1] = R - math.fsum(times[:-1])
        if cycles[-1] <= 0 or times[-1] <= 0:
            continue
        freqs = cycles / times
        energy = kappa * math.fsum(cycles * freqs**2)
        margin = energy - bound
        worst = min(worst, margin)
        if margin < -1e-9:
            ok = False
    uniform = FrequencySchedule.uniform(B, B / R).energy(kappa)
    rel = abs(uniform - bound) / bound
    return JensenReport(passed=ok and rel <= 1e-12, trials=trials, worst_margin=worst, uniform_rel_error=rel)


def random_small_instance(
    rng: np.random.Generator,
    n_servers: int,
    m: Optional[int] = None,
    alpha_range: Tuple[float, float] = (5.0, 150.0),
    device: Optional[DeviceSpec] = None,
) -> Instance:
    """A randomized instance around the evaluation settings, for property checks."""
    base = device or default_device()
    dev = DeviceSpec(
        f_max=base.f_max,
        kappa=base.kappa,
        P_tx=base.P_tx,
        E_t=base.E_t,
        r_hp=float(rng.uniform(2e6, 1e7)),
    )
    task = TaskSpec(L=int(rng.integers(100_000, 1_000_000)), gamma_A=float(rng.uniform(300, 1500)))
    servers = tuple(
        ServerSpec(id=f"s{i}", r=float(rng.uniform(1e8, 1e9)), c=float(rng.uniform(1e9, 4e9))) for i in range(n_servers)
    )
    alpha = float(rng.uniform(*alpha_range))
    if m is None:
        m = int(rng.integers(1, n_servers + 1))
    return Instance(task=task, device=dev, servers=servers, alpha=alpha, m=m)
