"""Constrained homogeneous random walks on the nonnegative integer orthant.

A walk in Z_+^d is described by a face-homogeneous kernel: the law of the
increment depends only on which coordinates of the current state are
positive.  Faces are stored internally as integer bitmasks (bit ``i`` set
iff coordinate ``i`` is positive); files and printed output use 1-based
coordinate indices.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

State = tuple[int, ...]
Delta = tuple[int, ...]
Rule = tuple[Delta, Fraction]

_RATIONAL = re.compile(r"^\s*(\d+)\s*(?:/\s*(\d+)\s*)?$")


class WalkError(Exception):
    """Base class for walk errors."""


class KernelFormatError(WalkError):
    """A kernel file could not be parsed."""


class DeadFaceError(WalkError):
    """The walk reached a face for which no transition rule exists."""

    def __init__(self, state: State):
        self.state = tuple(state)
        super().__init__(
            f"dead face {format_face(face_of(state), len(state))} reached at state {format_state(state)}"
        )


class DimensionError(WalkError):
    pass


def parse_rational(text) -> Fraction:
    """Parse ``"num/den"`` (or an integer string) into a Fraction.

    Decimal input is rejected on purpose: probabilities must be exact.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise ValueError(f"expected a rational string like '1/2', got {text!r}")
    m = _RATIONAL.match(str(text))
    if not m:
        raise ValueError(f"expected a rational string like '1/2', got {text!r}")
    num, den = int(m.group(1)), int(m.group(2) or 1)
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def face_of(state: Sequence[int]) -> int:
    mask = 0
    for i, c in enumerate(state):
        if c > 0:
            mask |= 1 << i
    return mask


def face_members(mask: int, dimension: int) -> tuple[int, ...]:
    """0-based coordinate indices in the face."""
    return tuple(i for i in range(dimension) if mask >> i & 1)


def face_from_members(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        mask |= 1 << i
    return mask


def format_face(mask: int, dimension: int) -> str:
    return "{" + ",".join(str(i + 1) for i in face_members(mask, dimension)) + "}"


def format_state(state: Sequence[int]) -> str:
    return "(" + ",".join(str(c) for c in state) + ")"


def parse_state(text: str, dimension: int | None = None) -> State:
    """Parse ``"0,1,0"``; ``"origin"`` needs the dimension."""
    text = text.strip()
    if text == "origin":
        if dimension is None:
            raise ValueError("'origin' needs a known dimension")
        return (0,) * dimension
    try:
        state = tuple(int(c) for c in text.strip("()").split(","))
    except ValueError:
        raise ValueError(f"cannot parse state {text!r}") from None
    if any(c < 0 for c in state):
        raise ValueError(f"state {text!r} has a negative coordinate")
    if dimension is not None and len(state) != dimension:
        raise DimensionError(f"state {text!r} has {len(state)} coordinates, kernel has {dimension}")
    return state


@dataclass(frozen=True)
class TransitionKernel:
    """Face-homogeneous transition law ``p(face, delta)``.

    ``rules`` maps a face bitmask to ``(delta, prob)`` pairs.  Faces missing
    from ``rules`` are legal here; reaching one at run time raises
    :class:`DeadFaceError`.  ``lenient_steps`` holds 0-based coordinates on
    which increments of magnitude 2 are allowed.
    """

    dimension: int
    rules: Mapping[int, tuple[Rule, ...]]
    lenient_steps: frozenset[int] = frozenset()
    meta: Mapping = field(default_factory=dict, compare=False)

    @classmethod
    def from_rules(cls, dimension, rules, lenient_steps=(), meta=None):
        """Build from an iterable of ``(face_members, delta, prob)`` (0-based members)."""
        table: dict[int, list[Rule]] = {}
        for members, delta, prob in rules:
            table.setdefault(face_from_members(members), []).append(
                (tuple(int(x) for x in delta), Fraction(prob))
            )
        return cls(
            dimension,
            {k: tuple(v) for k, v in table.items()},
            frozenset(lenient_steps),
            dict(meta or {}),
        )

    def faces(self) -> list[int]:
        return sorted(self.rules)

    def successors(self, state: State) -> list[tuple[State, Fraction]]:
        return step_distribution(self, state)


def step_distribution(kernel: TransitionKernel, state: Sequence[int]) -> list[tuple[State, Fraction]]:
    """All successors of ``state`` with positive probability."""
    if len(state) != kernel.dimension:
        raise DimensionError(f"state has {len(state)} coordinates, kernel has {kernel.dimension}")
    rules = kernel.rules.get(face_of(state))
    if not rules:
        raise DeadFaceError(tuple(state))
    out: dict[State, Fraction] = {}
    for delta, prob in rules:
        if prob == 0:
            continue
        nxt = tuple(c + d for c, d in zip(state, delta))
        if min(nxt) < 0:
            raise WalkError(f"rule {delta} drives state {format_state(state)} negative")
        out[nxt] = out.get(nxt, Fraction(0)) + prob
    return list(out.items())


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        return "valid" if self.ok else "\n".join(self.violations)


def validate_kernel(kernel: TransitionKernel) -> ValidationReport:
    """Check normalization, boundary consistency and step sizes on every face."""
    report = ValidationReport()
    d = kernel.dimension
    for mask in kernel.faces():
        name = format_face(mask, d)
        seen = set()
        total = Fraction(0)
        for delta, prob in kernel.rules[mask]:
            if len(delta) != d:
                report.violations.append(f"face {name}: delta {list(delta)} has wrong length")
                continue
            if prob < 0 or prob > 1:
                report.violations.append(f"face {name}: probability {format_rational(prob)} outside [0,1]")
            if delta in seen:
                report.violations.append(f"face {name}: duplicate delta {list(delta)}")
            seen.add(delta)
            total += prob
            for i, x in enumerate(delta):
                bound = 2 if i in kernel.lenient_steps else 1
                if abs(x) > bound:
                    report.violations.append(
                        f"face {name}: delta {list(delta)} has step {x} on coordinate {i + 1}"
                    )
                if prob > 0 and x < 0 and not mask >> i & 1:
                    report.violations.append(
                        f"face {name}: negative move off face, delta {list(delta)} on coordinate {i + 1}"
                    )
                if prob > 0 and x <= -2 and mask >> i & 1:
                    # -2 on a positive coordinate is only safe when the value is >= 2,
                    # which the face alone cannot guarantee
                    report.violations.append(
                        f"face {name}: step -2 on coordinate {i + 1} may leave the orthant"
                    )
        if total != 1:
            report.violations.append(f"face {name}: face mass {format_rational(total)} != 1")
    return report


def simulate(kernel: TransitionKernel, start: Sequence[int], horizon: int, seed: int) -> list[State]:
    """Sample a trajectory of ``horizon`` steps; the result has ``horizon + 1`` states."""
    if len(start) != kernel.dimension:
        raise DimensionError(f"start has {len(start)} coordinates, kernel has {kernel.dimension}")
    rng = np.random.default_rng(seed)
    tables = {
        mask: (
            [delta for delta, p in rules if p > 0],
            np.cumsum([float(p) for _, p in rules if p > 0]),
        )
        for mask, rules in kernel.rules.items()
    }
    state = tuple(start)
    path = [state]
    for _ in range(horizon):
        entry = tables.get(face_of(state))
        if entry is None or not entry[0]:
            raise DeadFaceError(state)
        deltas, cum = entry
        if len(deltas) == 1:
            delta = deltas[0]
        else:
            k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            delta = deltas[min(k, len(deltas) - 1)]
        state = tuple(c + x for c, x in zip(state, delta))
        if min(state) < 0:
            raise WalkError(f"negative coordinate at {format_state(state)}")
        path.append(state)
    return path


def lazy(kernel: TransitionKernel, hold=Fraction(1, 2)) -> TransitionKernel:
    """Mix every face law with a self-loop of probability ``hold``.

    The stationary law is unchanged; the result is aperiodic.
    """
    hold = Fraction(hold)
    zero = (0,) * kernel.dimension
    rules = {}
    for mask, face_rules in kernel.rules.items():
        merged: dict[Delta, Fraction] = {zero: hold}
        for delta, p in face_rules:
            merged[delta] = merged.get(delta, Fraction(0)) + (1 - hold) * p
        rules[mask] = tuple(merged.items())
    return TransitionKernel(kernel.dimension, rules, kernel.lenient_steps, dict(kernel.meta, lazy=str(hold)))


def split_pm2(kernel: TransitionKernel) -> TransitionKernel:
    """Remove +-2 steps by doubling each lenient coordinate.

    Lenient coordinate ``c`` gets a partner ``c'`` appended after the
    existing coordinates; the original value is ``x_c + x_c'``.  A step of
    +-2 becomes +-1 on both, a step of +-1 touches ``c`` (or ``c'`` for a
    decrement when ``c`` is empty).  The image preserves the L1 norm of
    every trajectory, and summing each pair recovers the original walk.
    """
    lenient = sorted(kernel.lenient_steps)
    d = kernel.dimension
    partner = {c: d + k for k, c in enumerate(lenient)}
    new_d = d + len(lenient)
    rules: dict[int, tuple[Rule, ...]] = {}
    for mask, face_rules in kernel.rules.items():
        # each positive lenient coordinate splits into 3 positivity patterns
        variants = [mask]
        for c in lenient:
            if mask >> c & 1:
                both = 1 << c | 1 << partner[c]
                variants = [v & ~(1 << c) | pat for v in variants for pat in (1 << c, 1 << partner[c], both)]
        for vmask in variants:
            out = []
            for delta, p in face_rules:
                nd = list(delta) + [0] * len(lenient)
                ok = True
                for c in lenient:
                    x = delta[c]
                    c2 = partner[c]
                    if x == 2:
                        nd[c], nd[c2] = 1, 1
                    elif x == -2:
                        if not (vmask >> c & 1 and vmask >> c2 & 1):
                            ok = False
                        nd[c], nd[c2] = -1, -1
                    elif x == -1 and not vmask >> c & 1:
                        nd[c], nd[c2] = 0, -1
                if not ok and p > 0:
                    raise WalkError(
                        f"cannot split -2 step {list(delta)} on face {format_face(vmask, new_d)}"
                    )
                out.append((tuple(nd), p))
            rules[vmask] = tuple(out)
    return TransitionKernel(new_d, rules, frozenset(), dict(kernel.meta, split_from=d))


# ---------------------------------------------------------------- file I/O


def kernel_to_json(kernel: TransitionKernel) -> dict:
    rules = []
    for mask in kernel.faces():
        for delta, p in kernel.rules[mask]:
            rules.append(
                {
                    "face": [i + 1 for i in face_members(mask, kernel.dimension)],
                    "delta": list(delta),
                    "prob": format_rational(p),
                }
            )
    doc = {
        "dimension": kernel.dimension,
        "lenient_steps": [i + 1 for i in sorted(kernel.lenient_steps)],
        "rules": rules,
    }
    if kernel.meta:
        doc["meta"] = dict(kernel.meta)
    return doc


def kernel_from_json(doc) -> TransitionKernel:
    if not isinstance(doc, dict):
        raise KernelFormatError("kernel file must hold a JSON object")
    for key in ("dimension", "rules"):
        if key not in doc:
            raise KernelFormatError(f"missing field '{key}'")
    d = doc["dimension"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise KernelFormatError(f"field 'dimension': expected a positive integer, got {d!r}")
    lenient = doc.get("lenient_steps", [])
    if not isinstance(lenient, list) or not all(isinstance(i, int) and 1 <= i <= d for i in lenient):
        raise KernelFormatError(f"field 'lenient_steps': expected 1-based indices in 1..{d}")
    if not isinstance(doc["rules"], list):
        raise KernelFormatError("field 'rules': expected a list")
    entries = []
    for k, r in enumerate(doc["rules"]):
        where = f"rules[{k}]"
        if not isinstance(r, dict):
            raise KernelFormatError(f"{where}: expected an object")
        for key in ("face", "delta", "prob"):
            if key not in r:
                raise KernelFormatError(f"{where}: missing field '{key}'")
        face = r["face"]
        if not isinstance(face, list) or not all(isinstance(i, int) and 1 <= i <= d for i in face):
            raise KernelFormatError(f"{where}.face: expected 1-based indices in 1..{d}")
        delta = r["delta"]
        if not isinstance(delta, list) or len(delta) != d or not all(isinstance(x, int) for x in delta):
            raise KernelFormatError(f"{where}.delta: expected {d} integers")
        try:
            prob = parse_rational(r["prob"])
        except ValueError as exc:
            raise KernelFormatError(f"{where}.prob: {exc}") from None
        entries.append(([i - 1 for i in face], delta, prob))
    return TransitionKernel.from_rules(d, entries, [i - 1 for i in lenient], doc.get("meta"))


def load_kernel(path) -> TransitionKernel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return kernel_from_json(doc)
    except KernelFormatError as exc:
        raise KernelFormatError(f"{path}: {exc}") from None


def save_kernel(kernel: TransitionKernel, path) -> None:
    Path(path).write_text(json.dumps(kernel_to_json(kernel), indent=1) + "\n")
