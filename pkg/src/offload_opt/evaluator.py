"""Policy-independent cost accounting and the four offloading policies.

``evaluate`` is the single source of truth for what a plan costs.  Every
policy (including the optimizer) is just a plan constructor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

from .errors import EmptyFleet, MalformedPlan
from .model import FrequencySchedule, Instance, OffloadPlan, derive_params
from .selection import best_prefix_aggregates
from .solver import local_frequency, solve_p0

# re-exported for callers that think of plans as evaluator types
__all__ = [
    "CostBreakdown",
    "FrequencySchedule",
    "OffloadPlan",
    "POLICIES",
    "evaluate",
    "policy_local",
    "policy_mec",
    "policy_mixed",
    "policy_tos",
]

_SUM_TOL = 1e-9
_CYCLE_RTOL = 1e-6
_FEAS_RTOL = 1e-9
_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class ServerDelay:
    index: int
    D_ps: float
    D_sc: float
    R: float


@dataclass(frozen=True)
class CostBreakdown:
    E_l: float
    E_lp: float
    D_l: float
    D_lp: float
    servers: Tuple[ServerDelay, ...]
    R_max: float
    objective: float
    feasible: bool
    violations: List[str] = field(default_factory=list)

    @property
    def delay(self) -> float:
        return max(self.D_l, self.R_max)

    @property
    def energy(self) -> float:
        return self.E_l + self.E_lp


def _check_plan(instance: Instance, plan: OffloadPlan, B0: float) -> None:
    x0 = plan.x0
    if not (0.0 <= x0 <= 1.0):
        raise MalformedPlan(f"x0={x0!r} outside [0, 1]")
    for i, x in plan.allocations.items():
        if not (0 <= i < instance.N):
            raise MalformedPlan(f"server index {i} out of range for N={instance.N}")
        if not (x >= 0):
            raise MalformedPlan(f"negative allocation {x!r} for server {i}")
    total = x0 + math.fsum(plan.allocations.values())
    if abs(total - 1.0) > _SUM_TOL:
        raise MalformedPlan(f"fractions sum to {total!r}, expected 1")
    for b, f in plan.schedule.segments:
        if not (b >= 0 and f > 0):
            raise MalformedPlan(f"bad schedule segment ({b!r}, {f!r})")
    cycles = plan.schedule.total_cycles
    need = B0 * x0
    if abs(cycles - need) > _CYCLE_RTOL * max(need, 1.0):
        raise MalformedPlan(f"schedule covers {cycles!r} cycles, plan needs {need!r}")


def evaluate(instance: Instance, plan: OffloadPlan) -> CostBreakdown:
    task, dev = instance.task, instance.device
    L = float(task.L)
    B0 = task.gamma_A * L
    _check_plan(instance, plan, B0)

    x0 = plan.x0
    D_l = plan.schedule.delay
    E_l = plan.schedule.energy(dev.kappa)
    D_lp = (1.0 - x0) * L / dev.r_hp

    delays = []
    for i, x in sorted(plan.allocations.items()):
        if x <= 0:
            continue
        s = instance.servers[i]
        D_ps = x * L / s.r
        D_sc = task.gamma_A * x * L / s.c
        delays.append(ServerDelay(i, D_ps, D_sc, D_lp + D_ps + D_sc))
    R_max = max((d.R for d in delays), default=0.0)

    offloads = x0 < 1.0 - _TAIL_TOL
    E_lp = dev.P_tx * (1.0 - x0) * L / dev.r_hp + (dev.E_t if offloads else 0.0)
    overall = max(D_l, R_max)
    objective = E_l + E_lp + instance.alpha * overall

    violations = []
    if overall > task.tau_d * (1 + _FEAS_RTOL):
        violations.append(f"deadline: overall delay {overall:.9g} s > tau_d {task.tau_d:.9g} s")
    if len(delays) > instance.m:
        violations.append(f"server_count: {len(delays)} servers > m={instance.m}")
    if plan.schedule.max_frequency > dev.f_max * (1 + _FEAS_RTOL):
        violations.append(f"frequency: {plan.schedule.max_frequency:.9g} Hz > f_max {dev.f_max:.9g} Hz")

    return CostBreakdown(
        E_l=E_l,
        E_lp=E_lp,
        D_l=D_l,
        D_lp=D_lp,
        servers=tuple(delays),
        R_max=R_max,
        objective=objective,
        feasible=not violations,
        violations=violations,
    )


# -- policies -----------------------------------------------------------------


def policy_local(instance: Instance) -> OffloadPlan:
    """Whole task on the device at the cost-optimal uniform frequency."""
    B0 = instance.task.gamma_A * instance.task.L
    dev = instance.device
    f = local_frequency(B0, dev.kappa, instance.alpha, dev, instance.task.tau_d)
    return OffloadPlan(x0=1.0, allocations={}, schedule=FrequencySchedule.uniform(B0, f))


def _equalized(instance: Instance, x0: float) -> Tuple[Dict[int, float], float]:
    if instance.N == 0:
        raise EmptyFleet("policy needs at least one server")
    params = derive_params(instance)
    agg = best_prefix_aggregates(params.q0, params.q, instance.m)
    alloc = (1.0 - x0) / (agg.Q * agg.q)
    return {int(i): float(x) for i, x in zip(agg.indices, alloc)}, (1.0 - x0) * agg.Qbar


def policy_mec(instance: Instance) -> OffloadPlan:
    """Everything offloaded to the m best servers, split to equalize delays."""
    alloc, _ = _equalized(instance, 0.0)
    return OffloadPlan(x0=0.0, allocations=alloc, schedule=FrequencySchedule())


def policy_mixed(instance: Instance) -> OffloadPlan:
    """Local share fixed at 1/(1+m); local CPU paced to finish with the servers."""
    x0 = 1.0 / (1.0 + instance.m)
    alloc, r_max = _equalized(instance, x0)
    B = instance.task.gamma_A * instance.task.L * x0
    f = min(B / r_max, instance.device.f_max)
    return OffloadPlan(x0=x0, allocations=alloc, schedule=FrequencySchedule.uniform(B, f))


def policy_tos(instance: Instance) -> OffloadPlan:
    return solve_p0(instance).plan


POLICIES: Dict[str, Callable[[Instance], OffloadPlan]] = {
    "tos": policy_tos,
    "local": policy_local,
    "mec": policy_mec,
    "mixed": policy_mixed,
}
