"""Closed-form optimizer for the delay-energy offloading problem.

For a fixed server subset the optimum depends on the subset only through
``Qbar = q0 + 1/sum(1/q_i)``.  With ``y = x0 / (1 - x0)`` the optimal local
share solves ``2y^3 + 3y^2 = (phi + alpha*Qbar) * Qbar^2 / K``; the local CPU
then runs at a single frequency chosen so the local finish time equals the
slowest server chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DeadlineInfeasible, DeadlineInfeasibleLocally, NegativeRHS, OffloadError, PoleAtOne
from .model import (
    UNBOUNDED,
    DerivedParams,
    DeviceSpec,
    FrequencySchedule,
    Instance,
    OffloadPlan,
    derive_params,
    ensure_valid,
)
from .selection import SubsetAggregates, best_prefix_aggregates

_FEAS_RTOL = 1e-9


def _cbrt(x: float) -> float:
    # np.cbrt is exact on perfect cubes where x ** (1/3) is not
    return float(np.cbrt(x))


@dataclass(frozen=True)
class P1Solution:
    x0_star: float
    y_star: float
    opt_value: float  # joules, excludes phi and E_t
    r_max: float
    f_local: float
    allocations: np.ndarray  # aligned with the subset
    indices: Optional[np.ndarray] = None
    assumption_holds: bool = True  # local energy exceeds uplink energy of the local share

    def allocation_map(self) -> Dict[int, float]:
        if self.indices is None:
            raise OffloadError("subset indices unknown")
        return {int(i): float(x) for i, x in zip(self.indices, self.allocations)}


@dataclass(frozen=True)
class FeasibilityGates:
    qbar_star: float  # inf when unbounded
    qbar_max: float  # inf when unbounded
    q_m: float
    gate_ok: bool


@dataclass(frozen=True)
class P0Solution:
    branch: str  # "local" or "offload"
    plan: OffloadPlan
    opt_value: float
    gates: FeasibilityGates
    optimality_certified: bool
    opt_local: Optional[float]  # None when local execution misses the deadline
    p1: Optional[P1Solution] = None

    @property
    def offload_value(self) -> Optional[float]:
        return None if self.p1 is None else self.p1.opt_value


# -- frequency ------------------------------------------------------------------


def fbar(alpha: float, kappa: float, f_max: float) -> float:
    """Energy-delay optimal uniform frequency, capped at f_max."""
    f = _cbrt(alpha / (2.0 * kappa))
    return f if f <= f_max else f_max


def local_frequency(B0: float, kappa: float, alpha: float, device: DeviceSpec, tau_d: float = UNBOUNDED) -> float:
    """Uniform frequency for running all B0 cycles locally within tau_d.

    The cost is convex in f, so when the unconstrained choice is too slow the
    deadline-feasible optimum is f = B0 / tau_d.
    """
    f = fbar(alpha, kappa, device.f_max)
    if B0 / f > tau_d:
        f = B0 / tau_d
        if f > device.f_max * (1 + _FEAS_RTOL):
            raise DeadlineInfeasibleLocally(
                f"local execution needs {f:.6g} Hz > f_max={device.f_max:.6g} Hz to meet tau_d={tau_d:.6g} s"
            )
        f = min(f, device.f_max)
    return f


def opt_local(B0: float, kappa: float, alpha: float, device: DeviceSpec, tau_d: float = UNBOUNDED) -> float:
    f = local_frequency(B0, kappa, alpha, device, tau_d)
    return B0 * (kappa * f * f + alpha / f)


# -- characteristic cubic -----------------------------------------------------


def solve_cubic(c: float) -> float:
    """Unique y >= 0 with 2y^3 + 3y^2 = c.

    Newton from an upper bound on a convex increasing function decreases
    monotonically onto the root; bisection takes over if a step ever leaves
    the bracket.
    """
    if c < 0 or math.isnan(c):
        raise NegativeRHS(f"cubic right-hand side must be >= 0, got {c!r}")
    if c == 0:
        return 0.0
    if math.isinf(c):
        return math.inf

    lo, hi = 0.0, min(math.sqrt(c / 3.0), _cbrt(c / 2.0))
    y = hi
    for _ in range(200):
        g = (2.0 * y + 3.0) * y * y - c
        if g == 0.0:
            return y
        if g > 0:
            hi = y
        else:
            lo = y
        step = g / (6.0 * y * (y + 1.0))
        y_new = y - step
        if not (lo <= y_new <= hi):
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) <= 4e-16 * y:
            y = y_new
            break
        y = y_new
    return y


def cubic_rhs(Qbar: float, K: float, phi: float, alpha: float) -> float:
    return (phi + alpha * Qbar) * Qbar * Qbar / K


# -- P1: fixed subset ---------------------------------------------------------


def solve_p1(q0: float, agg: SubsetAggregates, params: DerivedParams, alpha: float, device: DeviceSpec) -> P1Solution:
    """Optimal split, frequency and cost for a fixed server subset.

    ``q0`` is taken from the caller so that hypothetical subsets can be probed;
    ``agg.Qbar`` must already include it.
    """
    K, phi, B0 = params.K, params.phi, params.B0
    Qbar = agg.Qbar
    y = solve_cubic(cubic_rhs(Qbar, K, phi, alpha))
    one_minus_x0 = 1.0 / (1.0 + y)
    x0 = y * one_minus_x0
    alloc = one_minus_x0 / (agg.Q * agg.q)
    r_max = Qbar * one_minus_x0
    xi = y / Qbar
    e_local = K * x0 * xi * xi  # K x0^3 / r_max^2
    return P1Solution(
        x0_star=x0,
        y_star=y,
        opt_value=3.0 * K * xi * xi - phi,
        r_max=r_max,
        f_local=B0 * xi,
        allocations=alloc,
        indices=agg.indices,
        assumption_holds=bool(x0 == 0.0 or e_local > phi * x0),
    )


def delay_at(Qbar: float, K: float, phi: float, alpha: float) -> float:
    """Overall delay of the fixed-subset optimum as a function of Qbar."""
    y = solve_cubic(cubic_rhs(Qbar, K, phi, alpha))
    return Qbar / (1.0 + y)


def delay_supremum(K: float, alpha: float) -> float:
    """Limit of ``delay_at`` as Qbar grows; the delay never reaches it."""
    return _cbrt(2.0 * K / alpha)


def qbar_deadline_bound(K: float, phi: float, alpha: float, tau_d: float) -> float:
    """Largest Qbar whose optimal delay still meets tau_d (bisection)."""
    if math.isinf(tau_d) or tau_d >= delay_supremum(K, alpha):
        return UNBOUNDED
    # delay_at(Q) < Q, so the crossing lies above tau_d
    lo = tau_d
    hi = 2.0 * tau_d
    while delay_at(hi, K, phi, alpha) < tau_d:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return UNBOUNDED
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if delay_at(mid, K, phi, alpha) < tau_d:
            lo = mid
        else:
            hi = mid
    return lo


def qbar_frequency_bound(B0: float, K: float, phi: float, alpha: float, f_max: float) -> float:
    denom = alpha * B0**3 - 2.0 * K * f_max**3
    if denom <= 0:
        return UNBOUNDED
    return (3.0 * K * f_max**2 * B0 - phi * B0**3) / denom


def gates(params: DerivedParams, device: DeviceSpec, alpha: float, tau_d: float, Qm: float) -> FeasibilityGates:
    q_star = qbar_deadline_bound(params.K, params.phi, alpha, tau_d)
    q_fmax = qbar_frequency_bound(params.B0, params.K, params.phi, alpha, device.f_max)
    return FeasibilityGates(qbar_star=q_star, qbar_max=q_fmax, q_m=Qm, gate_ok=bool(Qm <= min(q_star, q_fmax)))


# -- piecewise reduced objective ---------------------------------------------


def h_values(x: float, Qbar: float, Qu: float, K: float, phi: float, alpha: float) -> Tuple[float, float, float, int]:
    """Evaluate the three pieces of the reduced objective at local share x.

    Returns ``(h1, h2, h3, region)`` where region is 1, 3 or 2 for
    ``x`` in ``[0, b1]``, ``[b1, b2]``, ``[b2, 1]`` with
    ``b1 = Qbar/(R*+Qbar)`` and ``b2 = Qu/(R*+Qu)``.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    if x == 1.0:
        raise PoleAtOne("h1 and h2 have a pole at x = 1")
    r_star = delay_supremum(K, alpha)
    cube = x**3 / (1.0 - x) ** 2
    h1 = K / Qbar**2 * cube - phi * x + alpha * (1.0 - x) * Qbar
    h2 = K / Qu**2 * cube - phi * x + alpha * (1.0 - x) * Qu
    h3 = (K / r_star**2 - phi + alpha * r_star) * x
    b1, b2 = region_bounds(Qbar, Qu, r_star)
    region = 1 if x <= b1 else (3 if x <= b2 else 2)
    return h1, h2, h3, region


def region_bounds(Qbar: float, Qu: float, r_star: float) -> Tuple[float, float]:
    return Qbar / (r_star + Qbar), Qu / (r_star + Qu)


# -- P0: Algorithm TOS ----------------------------------------------------------


def _local_plan(B0: float, f: float) -> OffloadPlan:
    return OffloadPlan(x0=1.0, allocations={}, schedule=FrequencySchedule.uniform(B0, f))


def solve_p0(instance: Instance) -> P0Solution:
    """Rank servers, solve the best-m subset in closed form, compare with local."""
    ensure_valid(instance)
    params = derive_params(instance)
    dev, alpha = instance.device, instance.alpha
    tau_d = instance.task.tau_d

    try:
        f_loc = local_frequency(params.B0, dev.kappa, alpha, dev, tau_d)
        local_cost = params.B0 * (dev.kappa * f_loc * f_loc + alpha / f_loc)
    except DeadlineInfeasibleLocally:
        f_loc, local_cost = None, None

    if instance.N == 0:
        if local_cost is None:
            raise DeadlineInfeasible("no servers and local execution misses the deadline")
        g = FeasibilityGates(UNBOUNDED, UNBOUNDED, math.nan, True)
        return P0Solution("local", _local_plan(params.B0, f_loc), local_cost, g, True, local_cost)

    m = instance.m
    agg = best_prefix_aggregates(params.q0, params.q, m)
    p1 = solve_p1(params.q0, agg, params, alpha, dev)
    g = gates(params, dev, alpha, tau_d, agg.Qbar)
    offload_cost = p1.opt_value + params.phi + dev.E_t
    offload_ok = p1.r_max <= tau_d * (1 + _FEAS_RTOL) and p1.f_local <= dev.f_max * (1 + _FEAS_RTOL)

    if local_cost is not None and (not offload_ok or local_cost <= offload_cost):
        return P0Solution("local", _local_plan(params.B0, f_loc), local_cost, g, g.gate_ok, local_cost, p1)
    if not offload_ok:
        raise DeadlineInfeasible(
            f"offloading delay {p1.r_max:.6g} s / frequency {p1.f_local:.6g} Hz infeasible and local execution misses the deadline"
        )
    plan = OffloadPlan(
        x0=p1.x0_star,
        allocations=p1.allocation_map(),
        schedule=FrequencySchedule.uniform(params.B0 * p1.x0_star, p1.f_local),
    )
    return P0Solution("offload", plan, offload_cost, g, g.gate_ok, local_cost, p1)
