"""Compile two-counter machines into constrained random walks.

Coordinate layout (0-based) for a machine with states ``s_0..s_{m-1}``,
where ``s_0`` is the state of the halting configuration ``(s_0, 0, 0)``:

* ``0 .. m-2``  one unit coordinate per non-halting state ``s_1..s_{m-1}``
* ``m-1, m``    the two counters
* ``m+1``       ``q1``, the time-bookkeeping coordinate
* ``m+2``       ``q2``, the Bernoulli survival flag
* ``m+3``       ``q3`` (optional), the ray coordinate used for rate estimates

While ``q2 = 1`` the walk runs the machine and ``q1`` grows so that the
potential ``z1 + z2 + q1`` equals the elapsed time.  When ``q2`` drops to
0 the state unit is retired in the same step, so the L1 norm at that moment
equals the elapsed time; afterwards the walk drains one unit per step back
to the origin.  From the origin the machine is restarted with probability
``p``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .machine import Configuration, CounterMachine, StuckError, cm_step, machine_from_json, machine_to_json
from .walk import (
    DeadFaceError,
    State,
    TransitionKernel,
    face_of,
    format_rational,
    split_pm2,
    step_distribution,
)


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    m: int
    with_q3: bool = False
    q1_partner: int | None = None  # set when +-2 steps were split

    @property
    def state_coords(self) -> range:
        return range(0, self.m - 1)

    @property
    def z1(self) -> int:
        return self.m - 1

    @property
    def z2(self) -> int:
        return self.m

    @property
    def q1(self) -> int:
        return self.m + 1

    @property
    def q2(self) -> int:
        return self.m + 2

    @property
    def q3(self) -> int | None:
        return self.m + 3 if self.with_q3 else None

    @property
    def dimension(self) -> int:
        return self.m + 3 + int(self.with_q3) + int(self.q1_partner is not None)

    def q1_value(self, state: Sequence[int]) -> int:
        v = state[self.q1]
        return v + state[self.q1_partner] if self.q1_partner is not None else v

    def to_json(self) -> dict:
        return {"m": self.m, "with_q3": self.with_q3, "q1_partner": self.q1_partner}


@dataclass(frozen=True)
class LinearCertificate:
    w: tuple[Fraction, ...]
    gamma: Fraction
    exception_set: tuple[State, ...]

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("drift gamma must be positive")
        if any(x < 0 for x in self.w):
            raise ValueError("weights must be nonnegative")

    def to_json(self) -> dict:
        return {
            "w": [format_rational(x) for x in self.w],
            "gamma": format_rational(self.gamma),
            "exception_set": [list(s) for s in self.exception_set],
        }

    @classmethod
    def from_json(cls, doc) -> "LinearCertificate":
        from .walk import parse_rational

        return cls(
            tuple(parse_rational(x) for x in doc["w"]),
            parse_rational(doc["gamma"]),
            tuple(tuple(s) for s in doc.get("exception_set", [])),
        )


@dataclass(frozen=True)
class CompiledWalk:
    kernel: TransitionKernel
    machine: CounterMachine
    order: tuple[str, ...]  # order[i] is the machine state encoded as s_i
    p: Fraction
    layout: Layout
    lyapunov: LinearCertificate

    @property
    def dimension(self) -> int:
        return self.kernel.dimension

    @property
    def origin(self) -> State:
        return (0,) * self.kernel.dimension

    def encode(self, config: Configuration) -> State:
        return encode(self.order, config)

    def decode(self, q: Sequence[int]) -> Configuration:
        return decode(self.order, q)

    def successors(self, state):
        return step_distribution(self.kernel, state)


def state_order(machine: CounterMachine) -> tuple[str, ...]:
    h = machine.halting
    if h.z1 or h.z2:
        raise ReductionError("the halting configuration must have both counters at zero")
    if machine.m < 2:
        raise ReductionError("need at least two machine states (one besides the halting state)")
    return (h.state,) + tuple(s for s in machine.states if s != h.state)


def encode(order: Sequence[str], config: Configuration) -> State:
    """``(s_i, z1, z2) -> (e_i, z1, z2)`` in Z_+^{m+1}; ``s_0`` has no unit."""
    m = len(order)
    q = [0] * (m + 1)
    i = order.index(config.state)
    if i:
        q[i - 1] = 1
    q[m - 1], q[m] = config.z1, config.z2
    return tuple(q)


def decode(order: Sequence[str], q: Sequence[int]) -> Configuration:
    m = len(order)
    units = [i for i in range(m - 1) if q[i]]
    if len(units) > 1 or any(q[i] > 1 for i in units):
        raise ValueError(f"{tuple(q)} does not encode a configuration")
    state = order[units[0] + 1] if units else order[0]
    return Configuration(state, q[m - 1], q[m])


def _config_face(order, mask) -> tuple[int, tuple[int, int]] | None:
    """State index and guard for a Q-face, or None for non-configuration faces."""
    m = len(order)
    units = [i for i in range(m - 1) if mask >> i & 1]
    if len(units) > 1:
        return None
    i = units[0] + 1 if units else 0
    return i, (mask >> (m - 1) & 1, mask >> m & 1)


def _machine_delta(machine, order, i, guard) -> tuple[list[int], int] | None:
    """Increment of Q implementing one machine step, and the counter change."""
    key = (order[i], guard)
    if key not in machine.gamma:
        return None
    nxt, action = machine.gamma[key]
    j = order.index(nxt)
    m = len(order)
    dq = [0] * (m + 1)
    if i:
        dq[i - 1] -= 1
    if j:
        dq[j - 1] += 1
    dz = 0
    if abs(action) == 1:
        dq[m - 1] += action
        dz = action
    elif abs(action) == 2:
        dq[m] += action // 2
        dz = action // 2
    return dq, dz


def _closure(rules_for_face, unit_coords, dimension, max_faces):
    """Faces reachable from the origin face, with their rules."""
    rules = {}
    seen = {0}
    queue = deque([0])
    while queue:
        mask = queue.popleft()
        face_rules = rules_for_face(mask)
        if not face_rules:
            continue
        rules[mask] = tuple(face_rules)
        for delta, prob in face_rules:
            if prob == 0:
                continue
            targets = [mask]
            for i, x in enumerate(delta):
                if x > 0:
                    targets = [t | 1 << i for t in targets]
                elif x < 0:
                    if i in unit_coords:
                        targets = [t & ~(1 << i) for t in targets]
                    else:
                        targets = [t for u in targets for t in (u | 1 << i, u & ~(1 << i))]
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    if len(seen) > max_faces:
                        raise ReductionError(f"face closure exceeded {max_faces} faces")
                    queue.append(t)
    return rules


def _all_faces(rules_for_face, dimension, max_faces):
    if 1 << dimension > max_faces:
        raise ReductionError(f"2^{dimension} faces exceed the cap of {max_faces}")
    rules = {}
    for mask in range(1 << dimension):
        face_rules = rules_for_face(mask)
        if face_rules:
            rules[mask] = tuple(face_rules)
    return rules


def _smallest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def compile_deterministic(machine: CounterMachine, faces: str = "reachable", max_faces: int = 1 << 16) -> TransitionKernel:
    """Deterministic walk in Z_+^{m+1} that runs the machine.

    Configuration faces move by the machine update; any other face moves by
    ``-e_i`` for its smallest coordinate ``i``.  ``faces="all"`` materializes
    every face instead of only those reachable from the origin.
    """
    order = state_order(machine)
    m = len(order)
    d = m + 1

    def rules_for_face(mask):
        cf = _config_face(order, mask)
        if cf is None:
            delta = [0] * d
            delta[_smallest(mask)] = -1
            return [(tuple(delta), Fraction(1))]
        step = _machine_delta(machine, order, *cf)
        if step is None:
            return None
        return [(tuple(step[0]), Fraction(1))]

    if faces == "all":
        rules = _all_faces(rules_for_face, d, max_faces)
    else:
        rules = _closure(rules_for_face, set(range(m - 1)), d, max_faces)
    meta = {"kind": "deterministic", "order": list(order), "machine": machine_to_json(machine)}
    return TransitionKernel(d, rules, frozenset(), meta)


def compile_extended(
    machine: CounterMachine,
    p,
    with_q3: bool = False,
    C=None,
    strict_steps: bool = False,
    faces: str = "reachable",
    max_faces: int = 1 << 18,
) -> CompiledWalk:
    """Stochastic walk whose return time to the origin encodes halting.

    Parameters
    ----------
    p : rational in (0, 1)
        Survival probability of the ``q2`` flag.
    with_q3 : bool
        Append the ray coordinate ``q3``.
    C : rational, optional
        Weight of ``q2`` in the linear certificate.  Defaults to the smallest
        value giving drift -1: ``2/(1-p)``, or ``3/(1-p)`` with ``q3``.
    strict_steps : bool
        Split the +2 steps of ``q1`` over a partner coordinate so that every
        increment lies in {-1, 0, 1}.
    """
    p = Fraction(p)
    if not 0 < p < 1:
        raise ReductionError(f"p = {format_rational(p)} outside (0,1)")
    order = state_order(machine)
    m = len(order)
    lay = Layout(m, with_q3)
    d = lay.dimension
    state_bits = sum(1 << i for i in lay.state_coords)
    qbar_bits = (1 << (m + 3)) - 1

    def vec(**kw):
        v = [0] * d
        for name, x in kw.items():
            v[getattr(lay, name)] += x
        return v

    def tick(v):
        if with_q3:
            v[lay.q3] += 1
        return v

    def machine_move(i, guard, q2_change):
        step = _machine_delta(machine, order, i, guard)
        if step is None:
            return None
        dq, dz = step
        v = list(dq) + [0] * (d - m - 1)
        v[lay.q1] += 1 - dz
        v[lay.q2] += q2_change
        return tick(v)

    def drop_move(i):
        v = vec(q1=1, q2=-1)
        if i:
            v[i - 1] -= 1
        return tick(v)

    def rules_for_face(mask):
        q2_on = mask >> lay.q2 & 1
        q_mask = mask & ((1 << (m + 1)) - 1)
        if q2_on:
            cf = _config_face(order, q_mask)
            if cf is None:
                return None
            if q_mask == 0:
                # machine sits in its halting configuration: stop and drain
                return [(tuple(drop_move(0)), Fraction(1))]
            stay = machine_move(*cf, 0)
            if stay is None:
                return None
            return [(tuple(stay), p), (tuple(drop_move(cf[0])), 1 - p)]
        if mask & qbar_bits == 0:
            if mask == 0:
                start = machine_move(0, (0, 0), +1)
                if start is None:
                    return None
                return [(tuple(start), p), (tuple(tick(vec(q1=1))), 1 - p)]
            return [(tuple(vec(q3=-1)), Fraction(1))]
        v = [0] * d
        v[_smallest(mask & qbar_bits)] = -1
        return [(tuple(v), Fraction(1))]

    units = set(lay.state_coords) | {lay.q2}
    if faces == "all":
        rules = _all_faces(rules_for_face, d, max_faces)
    else:
        rules = _closure(rules_for_face, units, d, max_faces)

    if C is None:
        C = Fraction(3 if with_q3 else 2) / (1 - p)
    C = Fraction(C)
    w = [Fraction(0)] * d
    w[lay.z1] = w[lay.z2] = w[lay.q1] = Fraction(1)
    w[lay.q2] = C
    if with_q3:
        w[lay.q3] = Fraction(1)

    meta = {
        "kind": "compiled",
        "p": format_rational(p),
        "order": list(order),
        "layout": lay.to_json(),
        "machine": machine_to_json(machine),
    }
    kernel = TransitionKernel(d, rules, frozenset({lay.q1}), meta)
    if strict_steps:
        kernel = split_pm2(kernel)
        lay = replace(lay, q1_partner=d)
        w.append(w[lay.q1])
        kernel = replace(kernel, meta=dict(kernel.meta, layout=lay.to_json()))
    cert = LinearCertificate(tuple(w), Fraction(1), ((0,) * kernel.dimension,))
    return CompiledWalk(kernel, machine, order, p, lay, cert)


def compiled_from_kernel(kernel: TransitionKernel, machine: CounterMachine | None = None) -> CompiledWalk | None:
    """Recover compile metadata stored in a kernel file, if present."""
    meta = kernel.meta or {}
    if meta.get("kind") != "compiled":
        return None
    from .walk import parse_rational

    if machine is None and "machine" in meta:
        machine = machine_from_json(meta["machine"])
    lay_doc = meta["layout"]
    lay = Layout(lay_doc["m"], lay_doc.get("with_q3", False), lay_doc.get("q1_partner"))
    p = parse_rational(meta["p"])
    d = kernel.dimension
    w = [Fraction(0)] * d
    w[lay.z1] = w[lay.z2] = w[lay.q1] = Fraction(1)
    w[lay.q2] = Fraction(3 if lay.with_q3 else 2) / (1 - p)
    if lay.with_q3:
        w[lay.q3] = Fraction(1)
    if lay.q1_partner is not None:
        w[lay.q1_partner] = Fraction(1)
    cert = LinearCertificate(tuple(w), Fraction(1), ((0,) * d,))
    return CompiledWalk(kernel, machine, tuple(meta["order"]), p, lay, cert)


# ---------------------------------------------------------------- lockstep check


@dataclass
class BisimulationReport:
    steps_checked: int
    divergence: tuple[int, State, State | None] | None = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.divergence is None


def _stay_successor(kernel: TransitionKernel, state: State, q2: int) -> State:
    """Successor along the branch that keeps (or sets) the survival flag."""
    rules = kernel.rules.get(face_of(state))
    if not rules:
        raise DeadFaceError(state)
    for delta, prob in rules:
        if prob > 0 and state[q2] + delta[q2] == 1:
            return tuple(c + x for c, x in zip(state, delta))
    raise DeadFaceError(state)


def bisimulation_check(machine: CounterMachine, walk, steps: int) -> BisimulationReport:
    """Run machine and walk side by side and compare encodings.

    ``walk`` is either a deterministic kernel in Z_+^{m+1} or a compiled
    walk, in which case the branch with ``q2 = 1`` is followed.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    order = state_order(machine)
    m = len(order)
    config = machine.halting
    if isinstance(walk, CompiledWalk):
        kernel, q2 = walk.kernel, walk.layout.q2
    else:
        kernel, q2 = walk, None
    state = (0,) * kernel.dimension
    for t in range(1, steps + 1):
        try:
            config = cm_step(machine, config)
        except StuckError as exc:
            return BisimulationReport(t - 1, note=f"machine stuck: {exc}")
        expected = encode(order, config)
        try:
            if q2 is None:
                (state, _), = step_distribution(kernel, state)
            else:
                state = _stay_successor(kernel, state, q2)
        except (DeadFaceError, ValueError):
            return BisimulationReport(t - 1, (t, expected, None), "walk has no matching transition")
        got = tuple(state[: m + 1])
        if got != expected:
            return BisimulationReport(t - 1, (t, expected, got))
        if config == machine.halting:
            return BisimulationReport(t, note=f"machine halted at step {t}")
    return BisimulationReport(steps)


def cycle_path(walk: CompiledWalk, successes: int, max_steps: int = 1 << 20) -> list[State]:
    """Deterministic excursion from the origin with exactly ``successes`` survivals.

    The only randomness of a compiled walk is the survival flag, so an
    excursion is pinned down by how many times the flag survives.  Returns
    the visited states from the origin back to the origin (both included).
    """
    q2 = walk.layout.q2
    state = walk.origin
    path = [state]
    left = successes
    for _ in range(max_steps):
        rules = walk.kernel.rules.get(face_of(state))
        if not rules:
            raise DeadFaceError(state)
        live = [(dl, pr) for dl, pr in rules if pr > 0]
        if len(live) == 1:
            delta = live[0][0]
        else:
            want = 1 if left > 0 else 0
            delta = next(dl for dl, _ in live if state[q2] + dl[q2] == want)
            left -= 1
        state = tuple(c + x for c, x in zip(state, delta))
        path.append(state)
        if state == walk.origin:
            return path
    raise ReductionError(f"excursion did not close within {max_steps} steps")
