"""Seeded comparison sweeps of TOS against the local / MEC / mixed baselines."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import OffloadError
from .evaluator import POLICIES, evaluate
from .model import UNBOUNDED, DeviceSpec, Instance, ServerSpec, TaskSpec
from .solver import solve_p0

POLICY_ORDER = ("tos", "local", "mec", "mixed")
CSV_COLUMNS = (
    "param_name",
    "param_value",
    "policy",
    "trial",
    "objective_j",
    "delay_s",
    "energy_j",
    "normalized",
    "certified",
)


@dataclass(frozen=True)
class FleetDistribution:
    N: int = 100
    r_range: Tuple[float, float] = (1e8, 1e9)
    c_range: Tuple[float, float] = (1e9, 4e9)

    def __post_init__(self):
        for lo, hi in (self.r_range, self.c_range):
            if not (0 < lo < hi):
                raise ValueError(f"bad range ({lo}, {hi})")
        if self.N < 0:
            raise ValueError("N must be >= 0")


@dataclass(frozen=True)
class EvalDefaults:
    r_hp: float = 2.5e6
    P_tx: float = 0.5
    E_t: float = 0.15
    kappa: float = 1e-26
    f_max: float = 2e9
    L: int = 409600
    gamma_A: float = 700.0
    tau_d: float = UNBOUNDED  # never stated for the evaluation; override explicitly

    def device(self) -> DeviceSpec:
        return DeviceSpec(f_max=self.f_max, kappa=self.kappa, P_tx=self.P_tx, E_t=self.E_t, r_hp=self.r_hp)

    def task(self) -> TaskSpec:
        return TaskSpec(L=self.L, gamma_A=self.gamma_A, tau_d=self.tau_d)


@dataclass(frozen=True)
class SweepConfig:
    vary: str  # "m" or "alpha"
    values: Tuple[float, ...]
    alpha: float = 20.0  # used when varying m
    m: int = 5  # used when varying alpha
    trials: int = 100
    seed: int = 0
    dist: FleetDistribution = field(default_factory=FleetDistribution)
    defaults: EvalDefaults = field(default_factory=EvalDefaults)

    def __post_init__(self):
        if self.vary not in ("m", "alpha"):
            raise ValueError(f"vary must be 'm' or 'alpha', got {self.vary!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.values:
            raise ValueError("values must be non-empty")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    policy: str
    trial: int
    objective_j: float
    delay_s: float
    energy_j: float
    normalized: float
    certified: bool


@dataclass
class SweepResult:
    config: SweepConfig
    rows: List[SweepRow]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.param_name,
                    _fmt(r.param_value),
                    r.policy,
                    r.trial,
                    _fmt(r.objective_j),
                    _fmt(r.delay_s),
                    _fmt(r.energy_j),
                    _fmt(r.normalized),
                    "true" if r.certified else "false",
                ]
            )
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def means(self) -> Dict[float, Dict[str, Dict[str, float]]]:
        """Mean objective/delay/energy/normalized per parameter value and policy (NaN rows skipped)."""
        acc: Dict[float, Dict[str, List[Tuple[float, float, float, float]]]] = {}
        for r in self.rows:
            acc.setdefault(r.param_value, {}).setdefault(r.policy, []).append(
                (r.objective_j, r.delay_s, r.energy_j, r.normalized)
            )
        out: Dict[float, Dict[str, Dict[str, float]]] = {}
        for value, per_policy in acc.items():
            out[value] = {}
            for pol, vals in per_policy.items():
                arr = np.array(vals, dtype=float)
                with np.errstate(invalid="ignore"):
                    m = np.nanmean(arr, axis=0) if np.isfinite(arr).any() else np.full(4, np.nan)
                out[value][pol] = dict(zip(("objective", "delay", "energy", "normalized"), m.tolist()))
        return out

    def summary_table(self) -> str:
        """Mean normalized cost per policy per parameter value, as fixed-width text."""
        means = self.means()
        name = self.config.vary
        lines = [f"{name:>10} " + " ".join(f"{p:>10}" for p in POLICY_ORDER)]
        for value in self.config.values:
            cells = " ".join(f"{means[value][p]['normalized']:>10.4f}" for p in POLICY_ORDER)
            lines.append(f"{_fmt(value):>10} {cells}")
        return "\n".join(lines)


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return "nan"
    return format(float(x), ".9g")


def gen_instance(
    dist: FleetDistribution,
    defaults: EvalDefaults,
    alpha: float,
    m: int,
    seed: Union[int, Sequence[int]],
) -> Instance:
    """Sample a fleet uniformly within the distribution's ranges.

    ``m`` larger than the fleet is clamped to N.
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(*dist.r_range, size=dist.N)
    c = rng.uniform(*dist.c_range, size=dist.N)
    servers = tuple(ServerSpec(id=f"s{i}", r=float(ri), c=float(ci)) for i, (ri, ci) in enumerate(zip(r, c)))
    return Instance(
        task=defaults.task(),
        device=defaults.device(),
        servers=servers,
        alpha=float(alpha),
        m=int(min(m, dist.N)) if dist.N else int(m),
    )


def _trial_rows(config: SweepConfig, value, trial: int) -> List[SweepRow]:
    if config.vary == "m":
        alpha, m = config.alpha, int(value)
    else:
        alpha, m = float(value), config.m
    # fleets are shared across parameter values (paired comparison)
    inst = gen_instance(config.dist, config.defaults, alpha, m, (config.seed, trial))

    try:
        tos = solve_p0(inst)
    except OffloadError:
        tos = None
    certified = tos is not None and tos.optimality_certified

    results = {}
    for pol in POLICY_ORDER:
        try:
            if pol == "tos":
                if tos is None:
                    raise OffloadError("no feasible plan")
                plan = tos.plan
            else:
                plan = POLICIES[pol](inst)
            cb = evaluate(inst, plan)
            results[pol] = (cb.objective, cb.delay, cb.energy) if cb.feasible else (math.nan,) * 3
        except OffloadError:
            results[pol] = (math.nan,) * 3
    base = results["tos"][0]
    rows = []
    for pol in POLICY_ORDER:
        obj, delay, energy = results[pol]
        norm = 1.0 if pol == "tos" and not math.isnan(base) else obj / base
        rows.append(SweepRow(config.vary, value, pol, trial, obj, delay, energy, norm, certified))
    return rows


def _value_rows(args) -> List[SweepRow]:
    config, value = args
    rows: List[SweepRow] = []
    for t in range(config.trials):
        rows.extend(_trial_rows(config, value, t))
    return rows


def sweep(config: SweepConfig, jobs: Optional[int] = 1) -> SweepResult:
    """Run every policy on ``trials`` seeded instances per parameter value.

    Output rows are in canonical order (value, trial, policy) regardless of
    ``jobs``.
    """
    tasks = [(config, v) for v in config.values]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) == 1:
        chunks = [_value_rows(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            chunks = list(ex.map(_value_rows, tasks))
    order = {v: k for k, v in enumerate(config.values)}
    pol_idx = {p: k for k, p in enumerate(POLICY_ORDER)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (order[r.param_value], r.trial, pol_idx[r.policy]))
    return SweepResult(config=config, rows=rows)


def parse_values(text: str, vary: str) -> Tuple[float, ...]:
    """Parse ``"1,5,8"`` or a range ``"1..10"`` into parameter values."""
    out: List[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part) if vary == "m" else float(part))
    if vary == "m":
        return tuple(int(v) for v in out)
    return tuple(float(v) for v in out)
