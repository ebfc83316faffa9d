"""Return times, stationary probabilities and rate estimates.

Every routine here takes a *chain*: any object with a ``successors(state)``
method returning ``(state, probability)`` pairs.  Transition kernels,
compiled walks and embedded queueing chains all qualify.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .machine import Halted, cm_run
from .reduction import CompiledWalk, compiled_from_kernel, cycle_path
from .walk import DeadFaceError, State, TransitionKernel, face_of


class StationaryError(RuntimeError):
    pass


class StateSpaceTooLarge(StationaryError):
    pass


@dataclass
class SparseDistribution:
    mass: dict
    leaked: float | Fraction = 0

    def total(self):
        """Mass still held by states (excludes ``leaked``)."""
        return sum(self.mass.values(), type(self.leaked)(0))

    def get(self, state, default=0):
        return self.mass.get(tuple(state), default)


def as_compiled(chain) -> CompiledWalk | None:
    if isinstance(chain, CompiledWalk):
        return chain
    if isinstance(chain, TransitionKernel):
        return compiled_from_kernel(chain)
    return None


class _Successors:
    """Memoized successor lists, optionally converted to floats."""

    def __init__(self, chain, exact: bool):
        self.chain = chain
        self.exact = exact
        self.cache: dict = {}

    def __call__(self, state):
        out = self.cache.get(state)
        if out is None:
            out = self.chain.successors(state)
            if not self.exact:
                out = [(s, float(p)) for s, p in out]
            self.cache[state] = out
        return out


def iter_propagate(
    chain, start, horizon: int, tau: float = 0.0, exact: bool = True, max_states: int = 2_000_000
) -> Iterator[SparseDistribution]:
    """Yield the law of the chain at times 0..horizon.

    States whose mass falls below ``tau`` are dropped into ``leaked``; in
    exact mode ``tau`` must be 0.
    """
    if exact and tau:
        raise ValueError("truncation is only available in float mode")
    succ = _Successors(chain, exact)
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    dist = {tuple(start): one}
    leaked = zero
    yield SparseDistribution(dict(dist), leaked)
    for _ in range(horizon):
        new: dict = {}
        for s, m in dist.items():
            for n, p in succ(s):
                new[n] = new.get(n, zero) + m * p
        if tau:
            small = [s for s, m in new.items() if m < tau]
            for s in small:
                leaked += new.pop(s)
        if len(new) > max_states:
            raise StateSpaceTooLarge(f"{len(new)} states exceed the cap of {max_states}")
        dist = new
        yield SparseDistribution(dict(dist), leaked)


def propagate(chain, start, horizon: int, tau: float = 0.0, exact: bool = True, max_states: int = 2_000_000):
    return list(iter_propagate(chain, start, horizon, tau, exact, max_states))


# ---------------------------------------------------------------- reachability and exact solves


def reachable(chain, seed, max_states: int = 100_000) -> tuple[list, dict]:
    """Breadth-first closure; returns the states and their successor lists."""
    seed = tuple(seed)
    order = [seed]
    succ = {}
    queue = deque([seed])
    seen = {seed}
    while queue:
        s = queue.popleft()
        out = chain.successors(s)
        succ[s] = out
        for n, p in out:
            if p > 0 and n not in seen:
                seen.add(n)
                if len(seen) > max_states:
                    raise StateSpaceTooLarge(
                        f"reachable class exceeds {max_states} states; use return_time or Monte Carlo instead"
                    )
                order.append(n)
                queue.append(n)
    return order, succ


def communicating_class(chain, seed, max_states: int = 100_000) -> tuple[list, dict]:
    """Closed communicating class of ``seed``; raises if ``seed`` is transient."""
    order, succ = reachable(chain, seed, max_states)
    back = {s: [] for s in order}
    for s in order:
        for n, p in succ[s]:
            if p > 0:
                back[n].append(s)
    seed = tuple(seed)
    seen = {seed}
    queue = deque([seed])
    while queue:
        s = queue.popleft()
        for r in back[s]:
            if r not in seen:
                seen.add(r)
                queue.append(r)
    if len(seen) != len(order):
        raise StationaryError("seed state is transient: some reachable states never return to it")
    return order, succ


def _solve_sparse(rows: list[dict], rhs: list, n: int) -> list:
    """Exact Gaussian elimination on sparse rational rows."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    pivots: dict[int, int] = {}
    by_col: dict[int, set] = {}
    for i, r in enumerate(rows):
        for j in r:
            by_col.setdefault(j, set()).add(i)
    used = set()
    for _ in range(n):
        # pick the unused row with the fewest entries, then its sparsest column
        cand = [i for i in range(len(rows)) if i not in used and rows[i]]
        if not cand:
            break
        i = min(cand, key=lambda k: len(rows[k]))
        j = min(rows[i], key=lambda c: len(by_col.get(c, ())))
        used.add(i)
        pivots[j] = i
        piv = rows[i][j]
        for k in list(by_col.get(j, ())):
            if k == i:
                continue
            f = rows[k][j] / piv
            for c, v in rows[i].items():
                nv = rows[k].get(c, 0) - f * v
                if nv == 0:
                    if c in rows[k]:
                        del rows[k][c]
                        by_col[c].discard(k)
                else:
                    if c not in rows[k]:
                        by_col.setdefault(c, set()).add(k)
                    rows[k][c] = nv
            rhs[k] -= f * rhs[i]
    if len(pivots) < n:
        raise StationaryError("singular system")
    x = [None] * n
    for j, i in pivots.items():
        x[j] = rhs[i] / rows[i][j]
    return x


def solve_stationary_exact(chain, seed_state, max_states: int = 5000) -> dict:
    """Stationary law on the communicating class of ``seed_state``, in exact rationals."""
    order, succ = communicating_class(chain, seed_state, max_states)
    index = {s: k for k, s in enumerate(order)}
    n = len(order)
    # balance: pi(y) - sum_x pi(x) P(x,y) = 0, last equation replaced by normalization
    cols: list[dict] = [dict() for _ in range(n)]
    for s in order:
        i = index[s]
        cols[i][i] = cols[i].get(i, 0) + Fraction(1)
        for t, p in succ[s]:
            if p:
                j = index[t]
                cols[j][i] = cols[j].get(i, 0) - Fraction(p)
    rows = cols[:-1] + [{k: Fraction(1) for k in range(n)}]
    rhs = [Fraction(0)] * (n - 1) + [Fraction(1)]
    x = _solve_sparse(rows, rhs, n)
    return {s: x[index[s]] for s in order}


def mean_return_finite(chain, target, max_states: int = 5000) -> Fraction:
    """Expected first-return time via the hitting-time equations (no stationary solve)."""
    order, succ = communicating_class(chain, target, max_states)
    target = tuple(target)
    others = [s for s in order if s != target]
    index = {s: k for k, s in enumerate(others)}
    rows, rhs = [], []
    for s in others:
        row = {index[s]: Fraction(1)}
        for t, p in succ[s]:
            if t != target and p:
                row[index[t]] = row.get(index[t], 0) - Fraction(p)
        rows.append({k: v for k, v in row.items() if v})
        rhs.append(Fraction(1))
    h = _solve_sparse(rows, rhs, len(others)) if others else []
    return 1 + sum((Fraction(p) * h[index[t]] for t, p in succ[target] if t != target), Fraction(0))


# ---------------------------------------------------------------- excursions of compiled walks


@dataclass
class Excursions:
    """First ``K + 1`` excursions from the origin of a compiled walk.

    Excursion ``t`` has probability ``(1-p) p^t``; the tail ``t > K`` is
    closed by continuing the last observed affine trend of the lengths and
    the last observed visit counts (both checked over ``window`` entries).
    """

    walk: CompiledWalk
    K: int
    paths: list
    probs: list
    window: int = 4

    @classmethod
    def enumerate(cls, walk: CompiledWalk, K: int = 48, window: int = 4, halting_budget: int = 100_000):
        if walk.machine is not None:
            run = cm_run(walk.machine, walk.machine.halting, halting_budget)
            if isinstance(run, Halted):
                K = max(K, run.steps + window + 1)
        p = walk.p
        paths = [cycle_path(walk, t) for t in range(K + 1)]
        probs = [(1 - p) * p**t for t in range(K + 1)]
        ex = cls(walk, K, paths, probs, window)
        ex._check_tail()
        return ex

    @property
    def lengths(self) -> list[int]:
        return [len(path) - 1 for path in self.paths]

    @property
    def tail_mass(self) -> Fraction:
        return self.walk.p ** (self.K + 1)

    @property
    def slope(self) -> int:
        L = self.lengths
        return L[-1] - L[-2]

    @property
    def halts(self) -> bool:
        return self.paths[-1] == self.paths[-2]

    def _check_tail(self):
        L = self.lengths
        steps = {L[k] - L[k - 1] for k in range(len(L) - self.window, len(L))}
        if len(steps) != 1:
            raise StationaryError(f"excursion lengths not affine over the last {self.window} terms: {L[-self.window - 1:]}")

    def visits(self, state) -> list[int]:
        state = tuple(state)
        return [path[:-1].count(state) for path in self.paths]

    def expectation(self, values: Sequence[int], slope: int = 0) -> Fraction:
        """``E[f(t)]`` for a per-excursion quantity continued affinely past ``K``."""
        head = sum((pr * v for pr, v in zip(self.probs, values)), Fraction(0))
        p = self.walk.p
        return head + self.tail_mass * (values[-1] + Fraction(slope) / (1 - p))

    def mean_length(self) -> Fraction:
        return self.expectation(self.lengths, self.slope)

    def visit_rate(self, state) -> Fraction:
        v = self.visits(state)
        if len(set(v[-self.window:])) != 1:
            raise StationaryError(f"visit counts to {state} not settled by excursion {self.K}")
        return self.expectation(v)

    def pi(self, state) -> Fraction:
        """Stationary probability by renewal-reward over excursions."""
        return self.visit_rate(state) / self.mean_length()


# ---------------------------------------------------------------- return times


@dataclass
class ReturnTimeReport:
    target: State
    pmf_prefix: list
    tail_mass: Fraction | float
    mean_lower: Fraction | float
    mean_exact: Fraction | None = None
    pi_estimate: Fraction | None = None
    tail_model: str = "none"
    mode: str = "exact"
    mc_mean: float | None = None
    mc_stderr: float | None = None
    episodes: int = 0


def first_return_pmf(chain, target, horizon: int, max_states: int = 2_000_000) -> tuple[list, Fraction]:
    """Taboo propagation: mass is removed when it re-enters ``target``."""
    target = tuple(target)
    succ = _Successors(chain, True)
    dist = {target: Fraction(1)}
    pmf = []
    for t in range(1, horizon + 1):
        new: dict = {}
        for s, m in dist.items():
            for n, p in succ(s):
                new[n] = new.get(n, 0) + m * p
        hit = new.pop(target, 0)
        if hit:
            pmf.append((t, hit))
        if len(new) > max_states:
            raise StateSpaceTooLarge(f"{len(new)} states exceed the cap of {max_states}")
        dist = {s: m for s, m in new.items() if m}
        if not dist:
            break
    return pmf, 1 - sum((m for _, m in pmf), Fraction(0))


def return_time(
    chain,
    target,
    horizon: int = 200,
    mode: str = "exact",
    episodes: int = 100_000,
    seed: int = 0,
    max_states: int = 5000,
) -> ReturnTimeReport:
    """First-return time law to ``target``.

    Exact mode propagates the taboo law up to ``horizon``.  The mean is
    closed exactly when the tail vanishes, when the class is finite
    (hitting-time equations), or for compiled walks targeting the origin
    (excursion enumeration, cross-checked against the propagated prefix).
    """
    target = tuple(target)
    if mode == "mc":
        return _return_time_mc(chain, target, horizon, episodes, seed)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    pmf, tail = first_return_pmf(chain, target, horizon)
    head = sum((t * m for t, m in pmf), Fraction(0))
    report = ReturnTimeReport(target, pmf, tail, head + (horizon + 1) * tail)
    if tail == 0:
        report.mean_exact, report.tail_model = head, "none"
    else:
        walk = as_compiled(chain)
        if walk is not None and target == walk.origin:
            ex = Excursions.enumerate(walk)
            law = {}
            for L, pr in zip(ex.lengths, ex.probs):
                law[L] = law.get(L, 0) + pr
            if ex.halts:
                law[ex.lengths[-1]] += ex.tail_mass
            for t, m in pmf:
                if law.get(t, 0) != m and t <= max(ex.lengths):
                    raise StationaryError(f"propagated return law disagrees with excursions at step {t}")
            report.mean_exact, report.tail_model = ex.mean_length(), f"excursions (affine beyond {ex.K})"
        else:
            try:
                report.mean_exact = mean_return_finite(chain, target, max_states)
                report.tail_model = "finite class"
            except StateSpaceTooLarge:
                pass
    if report.mean_exact is not None:
        report.pi_estimate = 1 / report.mean_exact
    return report


# ---------------------------------------------------------------- Monte Carlo


def _rule_tables(kernel: TransitionKernel):
    faces = kernel.faces()
    width = max(len(kernel.rules[f]) for f in faces)
    d = kernel.dimension
    index = np.full(1 << d, -1, dtype=np.int64)
    cum = np.full((len(faces), width), 2.0)
    deltas = np.zeros((len(faces), width, d), dtype=np.int64)
    for k, f in enumerate(faces):
        index[f] = k
        acc = 0.0
        for r, (delta, p) in enumerate(kernel.rules[f]):
            acc += float(p)
            cum[k, r] = acc
            deltas[k, r] = delta
        cum[k, len(kernel.rules[f]) - 1] = 2.0  # absorb rounding in the last rule
    return index, cum, deltas


def mc_return_times(
    kernel: TransitionKernel, target, episodes: int, horizon: int, seed: int, block: int = 1 << 14
) -> np.ndarray:
    """Sampled first-return times, 0 for episodes still out at ``horizon``.

    Episodes are grouped into fixed blocks; block ``b`` draws from the
    generator seeded with ``(seed, b)``, so results do not depend on how
    blocks are distributed over workers.
    """
    if kernel.dimension > 22:
        raise StationaryError("vectorized sampler supports dimension <= 22")
    index, cum, deltas = _rule_tables(kernel)
    target = np.asarray(target, dtype=np.int64)
    weights = 1 << np.arange(kernel.dimension, dtype=np.int64)
    out = np.zeros(episodes, dtype=np.int64)
    for b, lo in enumerate(range(0, episodes, block)):
        hi = min(lo + block, episodes)
        rng = np.random.default_rng([seed, b])
        states = np.tile(target, (hi - lo, 1))
        ids = np.arange(lo, hi)
        for t in range(1, horizon + 1):
            masks = (states > 0) @ weights
            fi = index[masks]
            if (fi < 0).any():
                raise DeadFaceError(tuple(int(c) for c in states[np.argmax(fi < 0)]))
            u = rng.random(len(states))
            k = (u[:, None] >= cum[fi]).sum(axis=1)
            states = states + deltas[fi, k]
            back = (states == target).all(axis=1)
            if back.any():
                out[ids[back]] = t
                states, ids = states[~back], ids[~back]
            if not len(ids):
                break
    return out


def _return_time_mc(chain, target, horizon, episodes, seed) -> ReturnTimeReport:
    kernel = chain.kernel if isinstance(chain, CompiledWalk) else chain
    times = mc_return_times(kernel, target, episodes, horizon, seed)
    done = times[times > 0]
    counts = np.bincount(done, minlength=horizon + 1) if len(done) else np.zeros(horizon + 1)
    pmf = [(t, counts[t] / episodes) for t in range(1, horizon + 1) if counts[t]]
    tail = 1 - len(done) / episodes
    mean = float(done.mean()) if len(done) else math.nan
    se = float(done.std(ddof=1) / math.sqrt(len(done))) if len(done) > 1 else math.nan
    lower = (done.sum() + (horizon + 1) * (episodes - len(done))) / episodes
    return ReturnTimeReport(
        target, pmf, tail, float(lower), None, None, "censored" if tail else "none", "mc", mean, se, episodes
    )


# ---------------------------------------------------------------- approximation with mixing bounds


@dataclass
class ApproxResult:
    lower: float
    upper: float
    p_t: float
    t: int
    R: float
    rho: float
    certified: bool
    leaked: float = 0.0

    def contains(self, x) -> bool:
        return self.lower <= float(x) <= self.upper


def required_time(R: float, rho: float, phi_start: float, epsilon: float) -> int:
    """Smallest ``t >= 0`` with ``phi_start * R * rho**t <= epsilon``."""
    if R * phi_start <= epsilon:
        return 0
    return max(0, math.ceil(math.log(epsilon / (R * phi_start)) / math.log(rho)))


def transient_curve(chain, start, x0, horizon: int, tau: float = 1e-15, max_states: int = 2_000_000) -> np.ndarray:
    """``P(Q(t) = x0 | Q(0) = start)`` for t = 0..horizon, in floating point."""
    x0 = tuple(x0)
    return np.array(
        [dist.mass.get(x0, 0.0) for dist in iter_propagate(chain, start, horizon, tau, False, max_states)]
    )


def fit_mixing_constants(chain, x0, start, phi_start: float = 1.0, t_fit: int = 400, safety: float = 2.0):
    """Empirical ``(R, rho)`` from the transient decay of ``P(Q(t) = x0)``.

    Not a certificate: the limit is taken as the value at ``t_fit``, ``rho``
    as the geometric rate of the error over the second quarter of the
    window, and ``R`` as the smallest constant dominating the error over the
    first half, scaled by ``safety``.
    """
    curve = transient_curve(chain, start, x0, t_fit)
    limit = curve[-1]
    err = np.abs(curve - limit)
    half = t_fit // 2
    lo, hi = t_fit // 4, half
    ts = np.arange(lo, hi + 1)
    e = err[lo : hi + 1]
    keep = e > 1e-300
    if keep.sum() < 2:
        rho = 0.5
    else:
        slope = np.polyfit(ts[keep], np.log(e[keep]), 1)[0]
        rho = float(np.exp(slope))
    if not rho < 1:
        raise StationaryError(
            f"no geometric decay of P(Q(t)={x0}) (rate {rho:.4f}); the chain may be periodic, try lazy=True"
        )
    rho = min(rho ** (1 / safety), 1 - 1e-9) if rho > 0 else 0.5
    R = float(np.max(err[: half + 1] / (phi_start * rho ** np.arange(half + 1)))) * safety
    return max(R, 1e-300), rho


def approx_stationary(
    chain,
    cert,
    x0,
    epsilon: float,
    R: float | None = None,
    rho: float | None = None,
    start=None,
    heuristic: bool = False,
    lazy: bool = False,
    max_t: int = 1_000_000,
    tau: float = 1e-15,
) -> ApproxResult:
    """Two-sided interval for ``pi(x0)`` from the transient law at a large time.

    With ``(R, rho)`` such that ``|P^t(start, .) - pi| <= Phi_g(start) R rho^t``
    in the weighted norm, the indicator of ``x0`` is a valid test function
    (``Phi_g >= 1``), so ``t`` is chosen with ``Phi_g(start) R rho^t <= epsilon``.
    ``heuristic=True`` fits ``(R, rho)`` from the chain instead; the result is
    then flagged as not certified.  ``lazy=True`` runs the same computation on
    the lazy version of the chain, which has the same stationary law and is
    aperiodic.
    """
    from .walk import lazy as make_lazy

    kernel = chain.kernel if isinstance(chain, CompiledWalk) else chain
    if lazy:
        kernel = make_lazy(kernel)
    if start is None:
        start = (0,) * kernel.dimension
    start, x0 = tuple(start), tuple(x0)
    phi_start = cert.phi(start) if cert is not None else 1.0
    if heuristic:
        R, rho = fit_mixing_constants(kernel, x0, start, phi_start)
    elif R is None or rho is None:
        raise ValueError("certified mode needs R and rho")
    if not (R > 0 and 0 < rho < 1):
        raise ValueError("need R > 0 and 0 < rho < 1")
    t = required_time(R, rho, phi_start, epsilon)
    if t > max_t:
        raise StationaryError(f"required time t = {t} exceeds the cap {max_t}")
    dist = None
    for dist in iter_propagate(kernel, start, t, tau, False):
        pass
    p_t = dist.mass.get(x0, 0.0)
    return ApproxResult(max(0.0, p_t - epsilon), p_t + epsilon, p_t, t, R, rho, not heuristic, float(dist.leaked))


# ---------------------------------------------------------------- rays and rates


@dataclass
class CycleDecomposition:
    n: int
    prob_In: Fraction
    E_R_given_In: Fraction
    E_R_given_not_In: Fraction | None
    E_R: Fraction
    pi: Fraction


def ray_closed_form(p, n: int) -> dict:
    """Reference closed-form expressions for the ray ``n * e_q3``.

    Kept for comparison only; exact excursion enumeration of the compiled
    walk does not reproduce them (see README).
    """
    p = Fraction(p)
    pn = p**n
    given_in = 4 - p
    given_not = (2 / (1 - p) - given_in * pn) / (1 - pn) if pn != 1 else None
    inv_pi = given_not / pn + given_in if given_not is not None else None
    return {
        "prob_In": pn,
        "E_R": 2 / (1 - p),
        "E_R_given_In": given_in,
        "E_R_given_not_In": given_not,
        "pi": 1 / inv_pi if inv_pi is not None else None,
    }


def ray_state(v: Sequence, n: int) -> State:
    return tuple(int(math.floor(Fraction(x) * n)) for x in v)


def conditional_cycles(walk: CompiledWalk, n: int, K: int = 48) -> CycleDecomposition:
    """Split excursions from the origin by whether they visit ``n * e_q3``."""
    if walk.layout.q3 is None:
        raise StationaryError("conditional cycles need the q3 coordinate")
    if walk.machine is not None and isinstance(cm_run(walk.machine, walk.machine.halting, 4 * K), Halted):
        raise StationaryError("machine halts; the cycle formulas concern non-halting machines")
    ex = Excursions.enumerate(walk, K)
    if ex.halts:
        raise StationaryError("excursions stop growing: machine halts")
    v = [0] * walk.dimension
    v[walk.layout.q3] = 1
    x = ray_state(v, n)
    hit = [int(c > 0) for c in ex.visits(x)]
    if len(set(hit[-ex.window:])) != 1:
        raise StationaryError(f"visit indicator for n={n} not settled; raise K")
    L = ex.lengths
    prob_in = ex.expectation(hit)
    r_in = ex.expectation([h * l for h, l in zip(hit, L)], ex.slope * hit[-1])
    r_all = ex.mean_length()
    given_in = r_in / prob_in
    given_not = (r_all - r_in) / (1 - prob_in) if prob_in != 1 else None
    return CycleDecomposition(n, prob_in, given_in, given_not, r_all, ex.pi(x))


@dataclass
class LdrReport:
    direction: tuple
    points: list  # (n, pi, log(pi)/n)
    slope_estimate: float | None
    L_minus: float | None
    L_plus: float | None
    infinite: bool
    zero_from: int | None = None


def _ray_pis(chain, v, n_max, max_states):
    walk = as_compiled(chain)
    if walk is not None:
        ex = Excursions.enumerate(walk, max(48, 2 * n_max + 8))
        return [ex.pi(ray_state(v, n)) for n in range(1, n_max + 1)]
    kernel_dim = chain.dimension
    pi = solve_stationary_exact(chain, (0,) * kernel_dim, max_states)
    return [pi.get(ray_state(v, n), Fraction(0)) for n in range(1, n_max + 1)]


def ldrate(chain, v: Sequence, n_max: int, fit_from: int | None = None, max_states: int = 5000) -> LdrReport:
    """``log pi(floor(v n)) / n`` along a ray, with a slope fit.

    Compiled walks are handled by excursion enumeration; other chains need
    a finite class.  The reported limit keeps its sign (it is <= 0 whenever
    it is finite).  ``infinite`` flags rays whose probabilities vanish from
    some ``n`` on.
    """
    if not any(v) or any(Fraction(x) < 0 for x in v):
        raise ValueError("direction must be nonzero and nonnegative")
    pis = _ray_pis(chain, v, n_max, max_states)
    points = []
    for n, pi in enumerate(pis, start=1):
        points.append((n, pi, math.log(pi) / n if pi > 0 else -math.inf))
    zero_from = None
    for n in range(n_max, 0, -1):
        if pis[n - 1] == 0:
            zero_from = n
        else:
            break
    infinite = zero_from is not None
    if fit_from is None:
        fit_from = max(1, n_max // 3)
    fit = [(n, math.log(pi)) for n, pi, _ in points if n >= fit_from and pi > 0]
    slope = float(np.polyfit(*zip(*fit), 1)[0]) if len(fit) >= 2 else None
    upper = [r for n, pi, r in points if n > n_max // 2 and pi > 0]
    L_minus = -math.inf if infinite else (min(upper) if upper else None)
    L_plus = -math.inf if infinite else (max(upper) if upper else None)
    return LdrReport(tuple(v), points, slope, L_minus, L_plus, infinite, zero_from)
