"""Server ranking by per-unit delay q_i and subset aggregates (Q, Q-bar, Q_u)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyFleet, EmptySubset


@dataclass(frozen=True)
class ServerRanking:
    order: np.ndarray  # server indices by ascending q, ties by index
    q_sorted: np.ndarray

    def prefix(self, n: int) -> np.ndarray:
        return self.order[:n]


@dataclass(frozen=True)
class SubsetAggregates:
    n: int
    Q: float  # sum of 1/q_i, 1/s
    Qbar: float  # q0 + 1/Q
    Qu: float  # q0 + max q_i
    q: np.ndarray = field(repr=False)
    indices: Optional[np.ndarray] = field(default=None, repr=False)


def rank_servers(q: Sequence[float]) -> ServerRanking:
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise EmptyFleet("cannot rank an empty fleet")
    order = np.argsort(q, kind="stable")
    return ServerRanking(order=order, q_sorted=q[order])


def subset_aggregates(q0: float, q_subset: Sequence[float], indices: Optional[Sequence[int]] = None) -> SubsetAggregates:
    q = np.asarray(q_subset, dtype=float)
    if q.size == 0:
        raise EmptySubset("subset must contain at least one server")
    Q = float(np.sum(1.0 / q))
    return SubsetAggregates(
        n=int(q.size),
        Q=Q,
        Qbar=q0 + 1.0 / Q,
        Qu=q0 + float(q.max()),
        q=q,
        indices=None if indices is None else np.asarray(indices, dtype=np.intp),
    )


def prefix_qbar(q0: float, q_sorted: Sequence[float]) -> np.ndarray:
    """Q(n) for n = 1..N over the ranked prefix."""
    return q0 + 1.0 / np.cumsum(1.0 / np.asarray(q_sorted, dtype=float))


def smallest_m(q: Sequence[float], m: int) -> np.ndarray:
    """Indices of the m smallest q, ascending, ties by index.

    Same result as ``rank_servers(q).prefix(m)`` but linear in N: a partition
    finds the m-th smallest value, and only the servers at or below it are
    sorted.
    """
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise EmptyFleet("cannot rank an empty fleet")
    m = min(m, q.size)
    if m >= q.size:
        return np.argsort(q, kind="stable")
    cut = np.partition(q, m - 1)[m - 1]
    below = np.flatnonzero(q < cut)
    ties = np.flatnonzero(q == cut)[: m - below.size]
    idx = np.concatenate([below, ties])
    return idx[np.argsort(q[idx], kind="stable")]


def best_prefix_aggregates(q0: float, q: Sequence[float], m: int) -> SubsetAggregates:
    """Aggregates of the m smallest-q servers (the optimal subset)."""
    q = np.asarray(q, dtype=float)
    idx = smallest_m(q, m)
    return subset_aggregates(q0, q[idx], idx)
