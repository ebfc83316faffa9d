"""Single-station multiclass queue under generalized priority policies.

Buffers are numbered 1..n in type-major order: type 1 visits 1..J_1, then
type 2, and so on.  Parts arrive only at times ``m*M``; within such a time
step arrivals are realized before the service decision.  Service takes one
time unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

from .walk import format_rational, parse_rational


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class QueueSystem:
    visits: tuple[int, ...]
    slot: int
    arrival_probs: tuple[Fraction, ...]

    def __post_init__(self):
        if self.slot < 1:
            raise ValueError("slot length M must be >= 1")
        if len(self.visits) != len(self.arrival_probs):
            raise ValueError("one arrival probability per type")
        if any(j < 1 for j in self.visits):
            raise ValueError("every type visits at least once")
        if any(not 0 <= p <= 1 for p in self.arrival_probs):
            raise ValueError("arrival probabilities must lie in [0,1]")

    @classmethod
    def make(cls, visits, slot, arrival_probs):
        return cls(tuple(visits), int(slot), tuple(Fraction(p) for p in arrival_probs))

    @property
    def types(self) -> int:
        return len(self.visits)

    @property
    def n(self) -> int:
        return sum(self.visits)

    def buffer(self, i: int, j: int) -> int:
        """0-based buffer index of type ``i`` on visit ``j`` (both 0-based)."""
        return sum(self.visits[:i]) + j

    @cached_property
    def routing(self) -> list[tuple[int, int | None]]:
        """For each buffer: (type, next buffer or None when the part leaves)."""
        out = []
        for i, J in enumerate(self.visits):
            for j in range(J):
                out.append((i, self.buffer(i, j + 1) if j + 1 < J else None))
        return out

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return tuple(p / self.slot for p in self.arrival_probs)


def load_factor(system: QueueSystem) -> tuple[Fraction, bool]:
    """``rho = sum_i J_i * p_i / M`` and whether ``rho < 1``."""
    rho = sum((J * lam for J, lam in zip(system.visits, system.rates)), Fraction(0))
    return rho, rho < 1


def _bits(occupancy: Sequence[int]) -> int:
    return sum(1 << k for k, x in enumerate(occupancy) if x > 0)


@dataclass(frozen=True)
class PriorityPolicy:
    """``table[b]`` is the 1-based buffer to serve (0 = idle) for occupancy bits ``b``.

    Bit ``k-1`` of ``b`` is set when buffer ``k`` is nonempty.
    """

    n: int
    table: tuple[int, ...]
    order: tuple[int, ...] | None = None  # buffers from highest to lowest priority

    def __post_init__(self):
        if len(self.table) != 1 << self.n:
            raise PolicyError(f"policy table needs {1 << self.n} entries, got {len(self.table)}")
        for b, k in enumerate(self.table):
            if not 0 <= k <= self.n:
                raise PolicyError(f"u({b:0{self.n}b}) = {k} is not a buffer")
            if k and not b >> (k - 1) & 1:
                raise PolicyError(f"u serves empty buffer {k} at occupancy bits {b:0{self.n}b}")

    @classmethod
    def from_priority(cls, order: Sequence[int], n: int | None = None) -> "PriorityPolicy":
        order = tuple(order)
        n = n or len(order)
        if sorted(order) != list(range(1, n + 1)):
            raise PolicyError(f"priority order must be a permutation of 1..{n}")
        table = []
        for b in range(1 << n):
            table.append(next((k for k in order if b >> (k - 1) & 1), 0))
        return cls(n, tuple(table), order)

    @classmethod
    def idle(cls, n: int) -> "PriorityPolicy":
        return cls(n, (0,) * (1 << n))

    def theta(self) -> dict[int, int]:
        """Rank of each buffer (1 = highest priority)."""
        if self.order is None:
            raise PolicyError("policy was not built from a priority order")
        return {k: r + 1 for r, k in enumerate(self.order)}

    def __call__(self, occupancy: Sequence[int]) -> int:
        return self.table[_bits(occupancy)]


@dataclass(frozen=True)
class QueueState:
    buffers: tuple[int, ...]
    phase: int = 0

    @property
    def total(self) -> int:
        return sum(self.buffers)


def serve(system: QueueSystem, policy: PriorityPolicy, buffers: list[int]) -> int | None:
    """One unit of service in place; returns the type of a departing part, if any."""
    k = policy(buffers)
    if not k:
        return None
    buffers[k - 1] -= 1
    i, nxt = system.routing[k - 1]
    if nxt is None:
        return i
    buffers[nxt] += 1
    return None


def queue_step(system: QueueSystem, policy: PriorityPolicy, state: QueueState, arrivals: Sequence[int] = ()) -> QueueState:
    """Advance one time unit.  ``arrivals`` (0/1 per type) is used only at phase 0."""
    buffers = list(state.buffers)
    if state.phase == 0:
        for i, a in enumerate(arrivals):
            if a:
                buffers[system.buffer(i, 0)] += 1
    serve(system, policy, buffers)
    return QueueState(tuple(buffers), (state.phase + 1) % system.slot)


@dataclass
class EmbeddedChain:
    """The system observed at times ``m*M`` (just before arrivals)."""

    system: QueueSystem
    policy: PriorityPolicy
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def empty(self) -> tuple[int, ...]:
        return (0,) * self.system.n

    def successors(self, buffers: tuple[int, ...]) -> list[tuple[tuple[int, ...], Fraction]]:
        buffers = tuple(buffers)
        hit = self._cache.get(buffers)
        if hit is not None:
            return hit
        out: dict = {}
        probs = self.system.arrival_probs
        for draw in product((0, 1), repeat=self.system.types):
            pr = Fraction(1)
            for a, p in zip(draw, probs):
                pr *= p if a else 1 - p
            if pr == 0:
                continue
            state = QueueState(buffers, 0)
            state = queue_step(self.system, self.policy, state, draw)
            for _ in range(self.system.slot - 1):
                state = queue_step(self.system, self.policy, state)
            out[state.buffers] = out.get(state.buffers, Fraction(0)) + pr
        result = list(out.items())
        self._cache[buffers] = result
        return result


def embedded_chain(system: QueueSystem, policy: PriorityPolicy) -> EmbeddedChain:
    return EmbeddedChain(system, policy)


@dataclass
class QueueStats:
    epochs: int
    mean_at_epochs: np.ndarray
    time_average: np.ndarray
    empty_fraction: float
    arrivals: int
    departures: int
    final: tuple[int, ...]
    totals: np.ndarray  # system content at each epoch


def queue_simulate(system: QueueSystem, policy: PriorityPolicy, horizon: int, seed: int, start=None) -> QueueStats:
    """Run ``horizon`` slots of length M; statistics are taken at slot starts."""
    rng = np.random.default_rng(seed)
    probs = np.array([float(p) for p in system.arrival_probs])
    draws = (rng.random((horizon, system.types)) < probs).tolist()
    entry = [system.buffer(i, 0) for i in range(system.types)]
    buffers = list(start) if start is not None else [0] * system.n
    n = system.n
    epoch_sum = [0] * n
    unit_sum = [0] * n
    totals = np.zeros(horizon, dtype=np.int64)
    empty = 0
    arrived = departed = 0
    for m in range(horizon):
        total = sum(buffers)
        totals[m] = total
        empty += total == 0
        for k in range(n):
            epoch_sum[k] += buffers[k]
        for i, a in enumerate(draws[m]):
            if a:
                buffers[entry[i]] += 1
                arrived += 1
        for _ in range(system.slot):
            for k in range(n):
                unit_sum[k] += buffers[k]
            if serve(system, policy, buffers) is not None:
                departed += 1
        if min(buffers) < 0:
            raise AssertionError("negative buffer")
    return QueueStats(
        horizon,
        np.array(epoch_sum) / horizon,
        np.array(unit_sum) / (horizon * system.slot),
        empty / horizon,
        arrived,
        departed,
        tuple(buffers),
        totals,
    )


# ---------------------------------------------------------------- file I/O


def load_queue_spec(path) -> tuple[QueueSystem, PriorityPolicy]:
    doc = json.loads(Path(path).read_text())
    return queue_from_json(doc)


def queue_from_json(doc) -> tuple[QueueSystem, PriorityPolicy]:
    try:
        visits = list(doc["visits"])
        if "types" in doc and doc["types"] != len(visits):
            raise ValueError(f"types = {doc['types']} but {len(visits)} visit counts given")
        system = QueueSystem.make(visits, doc["slot"], [parse_rational(p) for p in doc["arrival_probs"]])
        pol = doc.get("policy", {})
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed queue spec: {exc}") from None
    if "table" in pol:
        policy = PriorityPolicy(system.n, tuple(int(k) for k in pol["table"]))
    elif "priority_order" in pol:
        policy = PriorityPolicy.from_priority(pol["priority_order"], system.n)
    else:
        policy = PriorityPolicy.from_priority(range(1, system.n + 1))
    return system, policy


def queue_to_json(system: QueueSystem, policy: PriorityPolicy) -> dict:
    pol = {"priority_order": list(policy.order)} if policy.order else {"table": list(policy.table)}
    return {
        "types": system.types,
        "visits": list(system.visits),
        "slot": system.slot,
        "arrival_probs": [format_rational(p) for p in system.arrival_probs],
        "policy": pol,
    }
