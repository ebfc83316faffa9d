import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthwalk.lyapunov import geometric_from_linear
from orthwalk.machine import halting_machine, looping_machine
from orthwalk.reduction import compile_extended
from orthwalk.stationary import (
    Excursions,
    StateSpaceTooLarge,
    StationaryError,
    approx_stationary,
    conditional_cycles,
    fit_mixing_constants,
    ldrate,
    mc_return_times,
    propagate,
    ray_closed_form,
    required_time,
    return_time,
    solve_stationary_exact,
    transient_curve,
)
from orthwalk.walk import TransitionKernel, lazy

from conftest import shuttle_machine

F = Fraction
HALF = F(1, 2)


def walk_of(make, p=HALF, **kw):
    return compile_extended(make(), p, **kw)


def unit_ray(walk):
    v = [0] * walk.dimension
    v[walk.layout.q3] = 1
    return v


# ---------------------------------------------------------------- propagation


def test_propagate_birth_death(bd):
    dists = propagate(bd, (0,), 2)
    assert dists[2].mass == {(0,): 1}


def test_propagate_loop_return_mass():
    walk = walk_of(looping_machine)
    dists = propagate(walk, walk.origin, 4)
    assert dists[2].mass[walk.origin] == HALF
    assert all(d.total() == 1 and d.leaked == 0 for d in dists)


def test_propagate_float_truncation_accounts_for_leak():
    walk = walk_of(looping_machine)
    last = propagate(walk, walk.origin, 60, tau=1e-9, exact=False)[-1]
    assert last.leaked > 0
    assert last.total() + last.leaked == pytest.approx(1.0, abs=1e-12)


def test_propagate_state_cap():
    walk = walk_of(shuttle_machine)
    with pytest.raises(StateSpaceTooLarge, match="cap"):
        propagate(walk, walk.origin, 200, max_states=10)


# ---------------------------------------------------------------- return times and exact solves


def test_return_time_halt():
    walk = walk_of(halting_machine)
    r = return_time(walk, walk.origin)
    assert r.mean_exact == F(7, 2) and r.pi_estimate == F(2, 7)
    assert sum(m for _, m in r.pmf_prefix) + r.tail_mass == 1


def test_return_time_loop_closes_tail():
    walk = walk_of(looping_machine)
    r = return_time(walk, walk.origin, horizon=40)
    assert r.tail_mass == HALF**20
    assert r.mean_exact == 4 and r.pi_estimate == F(1, 4)
    assert r.mean_lower < 4


def test_return_time_birth_death(bd):
    r = return_time(bd, (0,))
    assert r.mean_exact == 2 and r.pi_estimate == HALF


def test_return_time_short_horizon():
    walk = walk_of(halting_machine)
    r = return_time(walk, walk.origin, horizon=1)
    assert r.pmf_prefix == [] and r.tail_mass == 1


def test_solve_examples(bd):
    assert solve_stationary_exact(bd, (0,)) == {(0,): HALF, (1,): HALF}
    walk = walk_of(halting_machine)
    assert solve_stationary_exact(walk, walk.origin)[walk.origin] == F(2, 7)
    walk = walk_of(halting_machine, F(1, 4))
    assert solve_stationary_exact(walk, walk.origin)[walk.origin] == F(24, 63)


def test_solve_refuses_infinite_class():
    walk = walk_of(looping_machine)
    with pytest.raises(StateSpaceTooLarge):
        solve_stationary_exact(walk, walk.origin, max_states=200)


@pytest.mark.parametrize("p", [F(1, 5), HALF, F(4, 5)])
def test_excursions_agree_with_exact_solve(p):
    walk = walk_of(halting_machine, p)
    ex = Excursions.enumerate(walk)
    pi = solve_stationary_exact(walk, walk.origin)
    assert all(ex.pi(s) == q for s, q in pi.items())


def _finite_kernel(rng, d):
    """Origin jumps into the unit cube; every nonempty face only moves down."""
    rules = []
    for mask in range(1 << d):
        members = [i for i in range(d) if mask >> i & 1]
        if members:
            deltas = {tuple(-int(rng.integers(0, 2)) if i in members else 0 for i in range(d)) for _ in range(3)}
            deltas.add(tuple(-1 if i == members[0] else 0 for i in range(d)))
        else:
            deltas = {tuple(int(rng.integers(0, 2)) for _ in range(d)) for _ in range(3)} - {(0,) * d}
            deltas.add(tuple(int(i == 0) for i in range(d)))
        deltas = sorted(deltas)
        weights = rng.integers(1, 10, len(deltas))
        rules += [(members, dl, F(int(w), int(weights.sum()))) for dl, w in zip(deltas, weights)]
    return TransitionKernel.from_rules(d, rules)


@pytest.mark.parametrize("seed", range(5))
def test_kac_identity_random_finite_kernels(seed):
    rng = np.random.default_rng(seed)
    kernel = _finite_kernel(rng, int(rng.integers(2, 4)))
    pi = solve_stationary_exact(kernel, (0,) * kernel.dimension)
    assert sum(pi.values()) == 1
    for state, mass in pi.items():
        assert mass * return_time(kernel, state, horizon=5).mean_exact == 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_kac_identity_property(seed):
    rng = np.random.default_rng(seed)
    kernel = _finite_kernel(rng, 2)
    pi = solve_stationary_exact(kernel, (0, 0))
    for state, mass in pi.items():
        assert mass * return_time(kernel, state).mean_exact == 1


# ---------------------------------------------------------------- Monte Carlo


@pytest.mark.parametrize("make,exact", [(halting_machine, 3.5), (looping_machine, 4.0)])
def test_mc_within_four_sigma(make, exact):
    walk = walk_of(make)
    for seed in range(10):
        times = mc_return_times(walk.kernel, walk.origin, 100_000, 2000, seed)
        assert (times > 0).all()
        se = times.std(ddof=1) / math.sqrt(len(times))
        assert abs(times.mean() - exact) < 4 * se


def test_mc_is_block_reproducible():
    walk = walk_of(halting_machine)
    a = mc_return_times(walk.kernel, walk.origin, 50_000, 100, seed=5)
    b = mc_return_times(walk.kernel, walk.origin, 50_000, 100, seed=5)
    assert (a == b).all()
    small = mc_return_times(walk.kernel, walk.origin, 50_000, 100, seed=5, block=1 << 14)
    assert (small == a).all()


def test_return_time_mc_mode():
    walk = walk_of(halting_machine)
    r = return_time(walk, walk.origin, mode="mc", episodes=200_000, seed=1)
    assert abs(r.mc_mean - 3.5) < 4 * r.mc_stderr


# ---------------------------------------------------------------- approximation


def test_required_time():
    assert required_time(2.0, 0.5, 1.0, 0.25) == 3
    assert required_time(1.0, 0.5, 1.0, 2.0) == 0


def test_approx_halt_certified_with_checked_constants():
    walk = walk_of(halting_machine)
    truth = F(2, 7)
    kernel = lazy(walk.kernel)
    R, rho = fit_mixing_constants(kernel, walk.origin, walk.origin)
    curve = transient_curve(kernel, walk.origin, walk.origin, 20)
    assert all(abs(c - float(truth)) <= R * rho**t for t, c in enumerate(curve))
    # holding half the time halves the drift
    cert = geometric_from_linear(kernel, walk.lyapunov.w, HALF)
    res = approx_stationary(walk, cert, walk.origin, 1e-3, R=R, rho=rho, lazy=True)
    assert res.certified and res.contains(truth)


def test_approx_large_epsilon_is_trivial():
    walk = walk_of(halting_machine)
    res = approx_stationary(walk, None, walk.origin, 2.0, R=1.0, rho=0.5, lazy=True)
    assert res.t == 0 and res.lower == 0.0 and res.contains(F(2, 7))


def test_approx_heuristic_loop():
    walk = walk_of(looping_machine)
    res = approx_stationary(walk, None, walk.origin, 1e-4, heuristic=True, lazy=True)
    assert not res.certified
    assert res.contains(F(1, 4))


def test_heuristic_fit_detects_periodicity():
    walk = walk_of(halting_machine)
    with pytest.raises(StationaryError, match="lazy"):
        approx_stationary(walk, None, walk.origin, 1e-3, heuristic=True)


def test_approx_needs_constants():
    walk = walk_of(halting_machine)
    with pytest.raises(ValueError):
        approx_stationary(walk, None, walk.origin, 1e-3)


# ---------------------------------------------------------------- rays


def test_ray_closed_form_values():
    cf = ray_closed_form(HALF, 3)
    assert cf["pi"] == F(14, 505)
    assert cf["E_R_given_In"] == F(7, 2)
    assert cf["E_R_given_not_In"] == F(57, 14)
    assert cf["E_R"] == 4


def test_conditional_cycles_structure():
    walk = walk_of(looping_machine, with_q3=True)
    for n in range(1, 8):
        cyc = conditional_cycles(walk, n)
        # weighted split must reproduce the overall mean cycle length
        if cyc.prob_In < 1:
            total = cyc.prob_In * cyc.E_R_given_In + (1 - cyc.prob_In) * cyc.E_R_given_not_In
            assert total == cyc.E_R
        assert cyc.pi == Excursions.enumerate(walk).pi(tuple(n * x for x in unit_ray(walk)))


def test_conditional_cycles_trivial_n():
    walk = walk_of(looping_machine, with_q3=True)
    cyc = conditional_cycles(walk, 0)
    assert cyc.prob_In == 1 and cyc.E_R_given_not_In is None


def test_conditional_cycles_rejects_halting():
    with pytest.raises(StationaryError, match="halts"):
        conditional_cycles(walk_of(halting_machine, with_q3=True), 3)


@pytest.mark.parametrize("p", [F(1, 4), HALF, F(3, 4)])
def test_ldrate_slope_and_regression_bound(p):
    walk = walk_of(looping_machine, p, with_q3=True)
    rep = ldrate(walk, unit_ray(walk), 12)
    assert not rep.infinite
    assert rep.slope_estimate == pytest.approx(math.log(p), abs=0.02)
    for n, _, rate in rep.points:
        assert abs(rate - math.log(p)) <= 2.2 / n


def test_ldrate_halting_is_infinite():
    walk = walk_of(halting_machine, with_q3=True)
    rep = ldrate(walk, unit_ray(walk), 10)
    assert rep.infinite and rep.zero_from <= 4
    assert rep.L_minus == -math.inf


def test_ldrate_finite_kernel(bd):
    rep = ldrate(bd, [1], 4)
    assert rep.infinite and rep.zero_from == 2


def test_ldrate_rejects_bad_direction(bd):
    with pytest.raises(ValueError):
        ldrate(bd, [0], 4)
