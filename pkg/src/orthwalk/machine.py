"""Two-counter machines.

Actions follow the usual encoding: ``+1``/``-1`` change the first counter,
``+2``/``-2`` change the second counter, ``0`` leaves both alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

ACTIONS = (-2, -1, 0, 1, 2)
GUARDS = ((0, 0), (0, 1), (1, 0), (1, 1))


class MachineError(Exception):
    """Malformed machine definition."""


class StuckError(Exception):
    """The update map is undefined at the current (state, guard) pair."""


@dataclass(frozen=True)
class Configuration:
    state: str
    z1: int = 0
    z2: int = 0

    def __post_init__(self):
        if self.z1 < 0 or self.z2 < 0:
            raise MachineError(f"negative counter in {self}")

    @property
    def guard(self) -> tuple[int, int]:
        return (int(self.z1 > 0), int(self.z2 > 0))

    def __str__(self):
        return f"({self.state},{self.z1},{self.z2})"


@dataclass(frozen=True)
class CounterMachine:
    """``gamma[(state, guard)] = (next_state, action)``; may be partial."""

    states: tuple[str, ...]
    gamma: Mapping[tuple[str, tuple[int, int]], tuple[str, int]]
    halting: Configuration = field(default=None)

    def __post_init__(self):
        if len(set(self.states)) != len(self.states) or not self.states:
            raise MachineError("states must be a nonempty list of distinct names")
        known = set(self.states)
        for (s, b), (t, a) in self.gamma.items():
            if s not in known or t not in known:
                raise MachineError(f"rule {s}{b} -> ({t},{a}) uses an unknown state")
            if tuple(b) not in GUARDS:
                raise MachineError(f"rule at {s}: guard {b} is not a 0/1 pair")
            if a not in ACTIONS:
                raise MachineError(f"rule at {s}{b}: action {a} not in {ACTIONS}")
            if a == -1 and b[0] == 0:
                raise MachineError(f"rule at {s}{b}: decrements counter 1 while it is zero")
            if a == -2 and b[1] == 0:
                raise MachineError(f"rule at {s}{b}: decrements counter 2 while it is zero")
        if self.halting is None:
            object.__setattr__(self, "halting", Configuration(self.states[0], 0, 0))
        if self.halting.state not in known:
            raise MachineError(f"halting state {self.halting.state!r} is unknown")

    @classmethod
    def from_table(cls, states, table, halting=None):
        """``table`` maps ``(state, (b1, b2))`` to ``(next, action)``."""
        return cls(tuple(states), {(s, tuple(b)): (t, a) for (s, b), (t, a) in table.items()}, halting)

    @property
    def m(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Halted:
    steps: int


@dataclass(frozen=True)
class Running:
    config: Configuration


def apply_action(config: Configuration, nxt: str, action: int) -> Configuration:
    z1, z2 = config.z1, config.z2
    if abs(action) == 1:
        z1 += action
    elif abs(action) == 2:
        z2 += action // 2
    return Configuration(nxt, z1, z2)


def cm_step(machine: CounterMachine, config: Configuration) -> Configuration:
    key = (config.state, config.guard)
    if key not in machine.gamma:
        raise StuckError(f"update undefined at state {config.state} with guard {config.guard} ({config})")
    nxt, action = machine.gamma[key]
    return apply_action(config, nxt, action)


def cm_run(machine: CounterMachine, start: Configuration, max_steps: int):
    """Run until the halting configuration is entered at some step T >= 1.

    Starting in the halting configuration does not count as halting; the
    machine has to come back to it.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    config = start
    for t in range(1, max_steps + 1):
        config = cm_step(machine, config)
        if config == machine.halting:
            return Halted(t)
    return Running(config)


def trace(machine: CounterMachine, start: Configuration, steps: int) -> list[Configuration]:
    """Configurations at times 0..steps, stopping early on halting."""
    out = [start]
    config = start
    for _ in range(steps):
        config = cm_step(machine, config)
        out.append(config)
        if config == machine.halting:
            break
    return out


# ---------------------------------------------------------------- file I/O


def machine_to_json(machine: CounterMachine) -> dict:
    return {
        "states": list(machine.states),
        "rules": [
            {"state": s, "guard": list(b), "next": t, "action": a}
            for (s, b), (t, a) in sorted(machine.gamma.items(), key=lambda kv: (machine.states.index(kv[0][0]), kv[0][1]))
        ],
        "halting": {"state": machine.halting.state, "z1": machine.halting.z1, "z2": machine.halting.z2},
    }


def machine_from_json(doc) -> CounterMachine:
    try:
        states = doc["states"]
        gamma = {}
        for k, r in enumerate(doc["rules"]):
            key = (r["state"], tuple(r["guard"]))
            if key in gamma:
                raise MachineError(f"rules[{k}]: duplicate rule for {key}")
            gamma[key] = (r["next"], int(r["action"]))
        h = doc.get("halting")
        halting = Configuration(h["state"], int(h.get("z1", 0)), int(h.get("z2", 0))) if h else None
    except (KeyError, TypeError) as exc:
        raise MachineError(f"malformed machine file: {exc}") from None
    return CounterMachine(tuple(states), gamma, halting)


def load_machine(path) -> CounterMachine:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MachineError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return machine_from_json(doc)


def save_machine(machine: CounterMachine, path) -> None:
    Path(path).write_text(json.dumps(machine_to_json(machine), indent=1) + "\n")


def parse_configuration(text: str) -> Configuration:
    parts = [p.strip() for p in text.strip("()").split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 'state,z1,z2', got {text!r}")
    return Configuration(parts[0], int(parts[1]), int(parts[2]))


# Small machines used throughout the tests and scripts.

def halting_machine() -> CounterMachine:
    """Leaves (s0,0,0) and comes back after exactly two steps."""
    return CounterMachine.from_table(
        ["s0", "s1"], {("s0", (0, 0)): ("s1", 1), ("s1", (1, 0)): ("s0", -1)}
    )


def looping_machine() -> CounterMachine:
    """Counts up forever on the first counter; never returns."""
    return CounterMachine.from_table(
        ["s0", "s1"], {("s0", (0, 0)): ("s1", 1), ("s1", (1, 0)): ("s1", 1)}
    )
