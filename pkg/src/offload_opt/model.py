"""Domain types for a single offloading problem and the constants derived from it.

Units throughout: bits, bits/s, Hz (cycles/s), joules, seconds.  The delay
weight ``alpha`` is in J/s so the objective comes out in joules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from operator import attrgetter
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInstance

UNBOUNDED = math.inf


@dataclass(frozen=True)
class TaskSpec:
    L: int  # input size, bits
    gamma_A: float  # cycles per bit
    tau_d: float = UNBOUNDED  # deadline, seconds


@dataclass(frozen=True)
class DeviceSpec:
    f_max: float
    kappa: float
    P_tx: float
    E_t: float
    r_hp: float


@dataclass(frozen=True)
class ServerSpec:
    id: str
    r: float  # AP -> server rate, bits/s
    c: float  # cycles/s


@dataclass(frozen=True)
class Instance:
    task: TaskSpec
    device: DeviceSpec
    servers: Tuple[ServerSpec, ...]
    alpha: float
    m: int

    def __post_init__(self):
        if not isinstance(self.servers, tuple):
            object.__setattr__(self, "servers", tuple(self.servers))

    @property
    def N(self) -> int:
        return len(self.servers)

    @cached_property
    def r_array(self) -> np.ndarray:
        return np.fromiter(map(attrgetter("r"), self.servers), dtype=float, count=self.N)

    @cached_property
    def c_array(self) -> np.ndarray:
        return np.fromiter(map(attrgetter("c"), self.servers), dtype=float, count=self.N)


@dataclass(frozen=True)
class DerivedParams:
    B0: float  # total cycles, gamma_A * L
    K: float  # kappa * B0**3
    phi: float  # P_tx * L / r_hp, joules
    q0: float  # L / r_hp, seconds
    q: np.ndarray = field(repr=False)  # per-server L/r_i + gamma_A*L/c_i, input order


@dataclass(frozen=True)
class FrequencySchedule:
    """Piecewise-constant local CPU frequency.

    Each segment is ``(cycles, frequency_hz)``; a uniform schedule has one
    segment.  Per-cycle storage is pointless at ~1e8 cycles.
    """

    segments: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def uniform(cls, cycles: float, frequency: float) -> "FrequencySchedule":
        if cycles <= 0:
            return cls(())
        return cls(((float(cycles), float(frequency)),))

    @property
    def total_cycles(self) -> float:
        return math.fsum(b for b, _ in self.segments)

    @property
    def delay(self) -> float:
        return math.fsum(b / f for b, f in self.segments)

    def energy(self, kappa: float) -> float:
        return kappa * math.fsum(b * f * f for b, f in self.segments)

    @property
    def max_frequency(self) -> float:
        return max((f for _, f in self.segments), default=0.0)


@dataclass(frozen=True)
class OffloadPlan:
    """Decision variables: local fraction, per-server fractions, local schedule.

    ``allocations`` maps server index (into ``Instance.servers``) to its
    fraction; a server is selected iff it appears with a positive fraction.
    """

    x0: float
    allocations: Dict[int, float]
    schedule: FrequencySchedule

    @property
    def selected(self) -> List[int]:
        return [i for i, x in self.allocations.items() if x > 0]


class Violation(NamedTuple):
    code: str
    message: str


def derive_params(instance: Instance) -> DerivedParams:
    task, dev = instance.task, instance.device
    L = float(task.L)
    B0 = task.gamma_A * L
    q = L / instance.r_array + B0 / instance.c_array
    return DerivedParams(
        B0=B0,
        K=dev.kappa * B0**3,
        phi=dev.P_tx * L / dev.r_hp,
        q0=L / dev.r_hp,
        q=q,
    )


def _duplicate_ids(servers: Sequence[ServerSpec]) -> List[str]:
    """Sorted list of ids that occur more than once.

    Sorting 64-bit hashes in numpy scales better than a Python set on large
    fleets; only ids whose hashes collide are compared exactly.
    """
    ids = list(map(attrgetter("id"), servers))
    h = np.fromiter(map(hash, ids), dtype=np.int64, count=len(ids))
    hs = np.sort(h)
    clash = hs[1:][hs[1:] == hs[:-1]]
    if clash.size == 0:
        return []
    suspects = {ids[k] for k in np.flatnonzero(np.isin(h, clash))}
    seen, dups = set(), set()
    for i in ids:
        if i in suspects:
            (dups if i in seen else seen).add(i)
    return sorted(dups)


def validate(instance: Instance) -> List[Violation]:
    """Return every violated standing constraint; an empty list means valid.

    An empty fleet is allowed (the task then runs locally) unless the deadline
    cannot be met even at ``f_max``.
    """
    out: List[Violation] = []

    def positive(name, value):
        if not (value > 0):
            out.append(Violation("NonPositiveField", f"{name} must be > 0, got {value!r}"))

    task, dev = instance.task, instance.device
    positive("task.L", task.L)
    positive("task.gamma_A", task.gamma_A)
    positive("task.tau_d", task.tau_d)
    for name in ("f_max", "kappa", "P_tx", "E_t", "r_hp"):
        positive(f"device.{name}", getattr(dev, name))
    positive("alpha", instance.alpha)

    N = instance.N
    if N:
        r, c = instance.r_array, instance.c_array
        for k in np.flatnonzero(~(r > 0)):
            out.append(Violation("NonPositiveField", f"servers[{k}].r must be > 0"))
        for k in np.flatnonzero(~(c > 0)):
            out.append(Violation("NonPositiveField", f"servers[{k}].c must be > 0"))
        dups = _duplicate_ids(instance.servers)
        if dups:
            out.append(Violation("DuplicateServerId", f"duplicate ids: {dups[:10]}"))
        if instance.m < 1:
            out.append(Violation("NonPositiveField", f"m must be >= 1, got {instance.m}"))
        elif instance.m > N:
            out.append(Violation("MExceedsN", f"m={instance.m} exceeds N={N}"))
    elif not out:
        B0 = task.gamma_A * task.L
        if B0 / dev.f_max > task.tau_d:
            out.append(
                Violation(
                    "EmptyFleetWithOffloadRequired",
                    "no servers and local execution at f_max misses the deadline",
                )
            )
    return out


def ensure_valid(instance: Instance) -> None:
    violations = validate(instance)
    if violations:
        raise InvalidInstance(violations)


# -- JSON ---------------------------------------------------------------------


def instance_to_dict(instance: Instance) -> Dict[str, Any]:
    t, d = instance.task, instance.device
    return {
        "task": {
            "L_bits": int(t.L),
            "tau_d_s": None if math.isinf(t.tau_d) else float(t.tau_d),
            "gamma_A": float(t.gamma_A),
        },
        "device": {
            "f_max_hz": float(d.f_max),
            "kappa": float(d.kappa),
            "P_tx_w": float(d.P_tx),
            "E_t_j": float(d.E_t),
            "r_hp_bps": float(d.r_hp),
        },
        "servers": [{"id": s.id, "r_bps": float(s.r), "c_hz": float(s.c)} for s in instance.servers],
        "alpha": float(instance.alpha),
        "m": int(instance.m),
    }


def instance_from_dict(data: Dict[str, Any]) -> Instance:
    """Build an Instance from the JSON schema; raises ValueError on shape errors."""
    try:
        t, d = data["task"], data["device"]
        tau = t.get("tau_d_s")
        L = t["L_bits"]
        if isinstance(L, bool) or not isinstance(L, int):
            raise ValueError(f"task.L_bits must be an integer, got {L!r}")
        task = TaskSpec(L=L, gamma_A=float(t["gamma_A"]), tau_d=UNBOUNDED if tau is None else float(tau))
        device = DeviceSpec(
            f_max=float(d["f_max_hz"]),
            kappa=float(d["kappa"]),
            P_tx=float(d["P_tx_w"]),
            E_t=float(d["E_t_j"]),
            r_hp=float(d["r_hp_bps"]),
        )
        servers = tuple(
            ServerSpec(id=str(s["id"]), r=float(s["r_bps"]), c=float(s["c_hz"])) for s in data["servers"]
        )
        m = data["m"]
        if isinstance(m, bool) or not isinstance(m, int):
            raise ValueError(f"m must be an integer, got {m!r}")
        return Instance(task=task, device=device, servers=servers, alpha=float(data["alpha"]), m=m)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance: {exc!r}") from exc


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def default_device() -> DeviceSpec:
    return DeviceSpec(f_max=2e9, kappa=1e-26, P_tx=0.5, E_t=0.15, r_hp=2.5e6)


def default_task(tau_d: float = UNBOUNDED) -> TaskSpec:
    # 50 KB read as 50 * 1024 * 8 bits
    return TaskSpec(L=409600, gamma_A=700.0, tau_d=tau_d)


def make_instance(
    servers: Sequence[ServerSpec],
    alpha: float = 20.0,
    m: Optional[int] = None,
    task: Optional[TaskSpec] = None,
    device: Optional[DeviceSpec] = None,
) -> Instance:
    """Convenience constructor defaulting to the evaluation settings."""
    servers = tuple(servers)
    if m is None:
        m = min(5, len(servers))
    return Instance(
        task=task or default_task(),
        device=device or default_device(),
        servers=servers,
        alpha=alpha,
        m=m,
    )
