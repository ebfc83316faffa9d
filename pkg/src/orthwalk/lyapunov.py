"""Linear and geometric drift checks for face-homogeneous walks.

For ``Phi(q) = w.q`` and ``Phi_g(q) = exp(delta * w.q)`` the one-step drift
depends on the face only, so the infinite family of state-wise conditions
reduces to one inequality per materialized face.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .walk import (
    DimensionError,
    State,
    TransitionKernel,
    face_of,
    format_face,
    step_distribution,
)


class LyapunovError(ValueError):
    pass


def _dot(w, delta):
    return sum(a * b for a, b in zip(w, delta))


def _exception_faces(kernel: TransitionKernel, exception_set) -> set[int]:
    # a face is exempt only when every state on it is exceptional; for a
    # finite exception set that can only happen for the origin's face
    origin = (0,) * kernel.dimension
    return {0} if origin in {tuple(s) for s in exception_set} else set()


@dataclass
class LinearCheck:
    ok: bool
    face: int | None
    drift: Fraction | None
    drifts: dict[int, Fraction] = field(default_factory=dict)

    def describe(self, dimension: int) -> str:
        if self.ok:
            worst = max(self.drifts.values()) if self.drifts else None
            return f"pass (worst face drift {worst})"
        return f"fail on face {format_face(self.face, dimension)} with drift {self.drift}"


def face_drift(kernel: TransitionKernel, w: Sequence, mask: int) -> Fraction:
    return sum((_dot(w, delta) * prob for delta, prob in kernel.rules[mask]), Fraction(0))


def check_linear(kernel: TransitionKernel, w: Sequence, gamma) -> LinearCheck:
    """Expected change of ``w.q`` must be ``<= -gamma`` on every nonempty face.

    Exact rational comparison.  On failure the worst face is reported.
    """
    if len(w) != kernel.dimension:
        raise DimensionError(f"weight vector has {len(w)} entries, kernel has {kernel.dimension}")
    w = [Fraction(x) for x in w]
    if any(x < 0 for x in w):
        raise LyapunovError("weights must be nonnegative")
    gamma = Fraction(gamma)
    drifts = {mask: face_drift(kernel, w, mask) for mask in kernel.faces() if mask}
    if not drifts:
        return LinearCheck(True, None, None, drifts)
    worst = max(drifts, key=lambda k: (drifts[k], -k))
    ok = drifts[worst] <= -gamma
    return LinearCheck(ok, None if ok else worst, None if ok else drifts[worst], drifts)


@dataclass(frozen=True)
class GeometricCertificate:
    """``Phi_g(q) = exp(delta * w.q)`` with contraction ``gamma_g`` off ``exception_set``."""

    delta: float
    w: tuple[float, ...]
    gamma_g: float
    exception_set: tuple[State, ...]
    b_max: float = math.nan

    def __post_init__(self):
        if self.delta < 0 or any(x < 0 for x in self.w):
            raise LyapunovError("delta and weights must be nonnegative (Phi_g >= 1)")
        if not 0 < self.gamma_g < 1:
            raise LyapunovError(f"gamma_g = {self.gamma_g} must lie in (0,1)")

    def log_phi(self, state: Sequence[int]) -> float:
        return self.delta * float(np.dot(self.w, state))

    def phi(self, state: Sequence[int]) -> float:
        return math.exp(self.log_phi(state))

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "w": list(self.w),
            "gamma_g": self.gamma_g,
            "exception_set": [list(s) for s in self.exception_set],
            "b_max": self.b_max,
        }

    @classmethod
    def from_json(cls, doc) -> "GeometricCertificate":
        return cls(
            float(doc["delta"]),
            tuple(float(x) for x in doc["w"]),
            float(doc["gamma_g"]),
            tuple(tuple(s) for s in doc.get("exception_set", [])),
            float(doc.get("b_max", math.nan)),
        )


def log_face_ratio(kernel: TransitionKernel, w: Sequence[float], delta: float, mask: int) -> float:
    """``log E[Phi_g(q + D)] / Phi_g(q)`` on a face, computed in log space."""
    rules = [(d, p) for d, p in kernel.rules[mask] if p > 0]
    exps = np.array([delta * float(np.dot(w, d)) for d, _ in rules])
    probs = np.array([float(p) for _, p in rules])
    return float(logsumexp(exps, b=probs))


def _slope(kernel, w, delta, mask):
    # d/d(delta) of the face moment function
    rules = [(d, p) for d, p in kernel.rules[mask] if p > 0]
    s = np.array([float(np.dot(w, d)) for d, _ in rules])
    probs = np.array([float(p) for _, p in rules])
    return float(np.sum(probs * s * np.exp(delta * s)))


@dataclass
class GeometricCheck:
    ok: bool
    face: int | None = None
    ratio: float | None = None
    state: State | None = None
    ratios: dict = field(default_factory=dict)


def check_geometric(
    kernel: TransitionKernel,
    cert: GeometricCertificate,
    states: Sequence[Sequence[int]] | None = None,
    phi: Callable[[Sequence[int]], float] | None = None,
) -> GeometricCheck:
    """Verify the multiplicative drift ``E[Phi_g(next)] / Phi_g(q) <= gamma_g``.

    Without ``states`` the check runs face by face in closed form.  With
    ``states`` each listed state outside the exception set is checked
    directly, using ``phi`` if given (any tabulated function) or the
    certificate's exponential otherwise.
    """
    if len(cert.w) != kernel.dimension:
        raise DimensionError("certificate and kernel dimensions differ")
    exempt = {tuple(s) for s in cert.exception_set}
    if states is None:
        skip = _exception_faces(kernel, cert.exception_set)
        ratios = {
            mask: math.exp(log_face_ratio(kernel, cert.w, cert.delta, mask))
            for mask in kernel.faces()
            if mask not in skip
        }
        if not ratios:
            return GeometricCheck(True, ratios=ratios)
        worst = max(ratios, key=lambda k: (ratios[k], -k))
        if ratios[worst] <= cert.gamma_g:
            return GeometricCheck(True, ratios=ratios)
        return GeometricCheck(False, worst, ratios[worst], ratios=ratios)
    ratios = {}
    for s in states:
        s = tuple(s)
        if s in exempt:
            continue
        if phi is None:
            r = sum(float(p) * math.exp(cert.log_phi(n) - cert.log_phi(s)) for n, p in step_distribution(kernel, s))
        else:
            r = sum(float(p) * phi(n) for n, p in step_distribution(kernel, s)) / phi(s)
        ratios[s] = r
        if r > cert.gamma_g:
            return GeometricCheck(False, face_of(s), r, s, ratios)
    return GeometricCheck(True, ratios=ratios)


def geometric_from_linear(
    kernel: TransitionKernel,
    w: Sequence,
    gamma,
    exception_set=None,
    delta_hi: float = 10.0,
    iterations: int = 60,
) -> GeometricCertificate:
    """Turn a linear certificate into an exponential one.

    The worst face moment ``max_face E[exp(delta * w.D)]`` is convex in
    ``delta``; bisection on the sign of its right derivative over
    ``(0, delta_hi]`` finds the ``delta`` with the largest margin.  Flat
    stretches resolve toward the smaller ``delta``.
    """
    lin = check_linear(kernel, w, gamma)
    if not lin.ok:
        raise LyapunovError(
            f"no contracting delta: linear drift fails on face "
            f"{format_face(lin.face, kernel.dimension)} (drift {lin.drift})"
        )
    if exception_set is None:
        exception_set = ((0,) * kernel.dimension,)
    wf = tuple(float(x) for x in w)
    skip = _exception_faces(kernel, exception_set)
    faces = [mask for mask in kernel.faces() if mask not in skip]
    if not faces:
        raise LyapunovError("no faces outside the exception set")

    def worst(delta):
        vals = {mask: log_face_ratio(kernel, wf, delta, mask) for mask in faces}
        top = max(vals.values())
        return top, [mask for mask, v in vals.items() if v >= top - 1e-12]

    lo, hi = 0.0, float(delta_hi)
    top_hi, active = worst(hi)
    if max(_slope(kernel, wf, hi, mask) for mask in active) < 0:
        lo = hi
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            _, active = worst(mid)
            if max(_slope(kernel, wf, mid, mask) for mask in active) < 0:
                lo = mid
            else:
                hi = mid
    delta = lo if lo > 0 else hi
    top, _ = worst(delta)
    gamma_g = math.exp(top)
    if not gamma_g < 1:
        moments = {format_face(m, kernel.dimension): math.exp(log_face_ratio(kernel, wf, delta, m)) for m in faces}
        raise LyapunovError(f"no contracting delta in (0, {delta_hi}]; face moments at delta={delta}: {moments}")
    # absorb rounding so the certificate re-verifies with the same arithmetic
    gamma_g = min(gamma_g * (1 + 1e-12), math.nextafter(1.0, 0.0))
    cert = GeometricCertificate(delta, wf, gamma_g, tuple(tuple(s) for s in exception_set))
    return GeometricCertificate(delta, wf, gamma_g, cert.exception_set, _b_max(kernel, cert))


def _b_max(kernel, cert) -> float:
    vals = []
    for x in cert.exception_set:
        mask = face_of(x)
        if mask in kernel.rules:
            vals.append(math.exp(cert.log_phi(x) + log_face_ratio(kernel, cert.w, cert.delta, mask)))
    return max(vals) if vals else math.nan


@dataclass(frozen=True)
class MixingInputs:
    nu: float
    p_B_min: Fraction
    gamma_g: float
    b_max: float
    warnings: tuple[str, ...] = ()


def mixing_inputs(kernel: TransitionKernel, cert: GeometricCertificate) -> MixingInputs:
    """Quantities the exponential mixing constants depend on.

    ``nu`` is the largest one-step ratio ``Phi_g(q')/Phi_g(q)``,
    ``p_B_min`` the smallest one-step probability between exception states.
    """
    top = max(
        float(np.dot(cert.w, d)) for rules in kernel.rules.values() for d, p in rules if p > 0
    )
    nu = math.exp(cert.delta * top)
    B = [tuple(s) for s in cert.exception_set]
    p_min = None
    for x in B:
        succ = dict(step_distribution(kernel, x))
        for y in B:
            pxy = succ.get(y, Fraction(0))
            p_min = pxy if p_min is None else min(p_min, pxy)
    p_min = Fraction(0) if p_min is None else p_min
    notes = []
    if p_min == 0:
        msg = "p_B_min = 0: exception states are not all linked in one step; mixing bounds are vacuous"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    return MixingInputs(nu, p_min, cert.gamma_g, _b_max(kernel, cert), tuple(notes))

