import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from orthwalk.lyapunov import (
    GeometricCertificate,
    LyapunovError,
    check_geometric,
    check_linear,
    face_drift,
    geometric_from_linear,
    mixing_inputs,
)
from orthwalk.machine import halting_machine, looping_machine
from orthwalk.reduction import compile_extended
from orthwalk.walk import DimensionError, TransitionKernel, face_of

from conftest import birth_death, shuttle_machine

F = Fraction


def bd_cert(delta=1.0, gamma_g=0.5):
    return GeometricCertificate(delta, (1.0,), gamma_g, ((0,),))


def test_linear_birth_death(bd):
    res = check_linear(bd, [1], 1)
    assert res.ok and res.drifts == {1: F(-1)}


def test_linear_failure_reports_face():
    res = check_linear(birth_death(up_on_positive=True), [1], 1)
    assert not res.ok and res.face == 1 and res.drift == 1
    assert "{1}" in res.describe(1)


def test_linear_dimension_mismatch(bd):
    with pytest.raises(DimensionError):
        check_linear(bd, [1, 1], 1)


def test_linear_compiled_loop():
    walk = compile_extended(looping_machine(), F(1, 2))
    assert check_linear(walk.kernel, walk.lyapunov.w, 1).ok


def test_geometric_birth_death(bd):
    res = check_geometric(bd, bd_cert())
    assert res.ok
    assert res.ratios[1] == pytest.approx(math.exp(-1), abs=1e-15)
    res = check_geometric(bd, bd_cert(gamma_g=0.3))
    assert not res.ok and res.face == 1 and res.ratio == pytest.approx(0.3679, abs=1e-4)


def test_geometric_zero_delta_is_degenerate(bd):
    res = check_geometric(bd, bd_cert(delta=0.0))
    assert not res.ok and res.ratio == 1.0


def test_certificate_rejects_bad_gamma():
    with pytest.raises(LyapunovError):
        GeometricCertificate(1.0, (1.0,), 1.0, ())


def test_from_linear_birth_death(bd):
    cert = geometric_from_linear(bd, [1], 1)
    assert cert.delta > 0
    assert cert.gamma_g == pytest.approx(math.exp(-cert.delta), rel=1e-9)
    assert check_geometric(bd, cert).ok


@pytest.mark.parametrize("make", [halting_machine, looping_machine, shuttle_machine])
def test_from_linear_compiled(make):
    walk = compile_extended(make(), F(1, 2))
    cert = geometric_from_linear(walk.kernel, walk.lyapunov.w, walk.lyapunov.gamma)
    assert 0 < cert.gamma_g < 1
    assert check_geometric(walk.kernel, cert).ok


def test_from_linear_without_contraction():
    k = TransitionKernel.from_rules(1, [((), (0,), F(1)), ((0,), (0,), F(1))])
    with pytest.raises(LyapunovError, match="no contracting delta"):
        geometric_from_linear(k, [1], 1)


def test_mixing_inputs_birth_death(bd):
    with pytest.warns(UserWarning, match="p_B_min = 0"):
        mi = mixing_inputs(bd, bd_cert())
    assert mi.nu == pytest.approx(math.e)
    assert mi.p_B_min == 0 and mi.warnings


def test_mixing_inputs_lazy_origin():
    k = TransitionKernel.from_rules(1, [((), (1,), F(1, 2)), ((), (0,), F(1, 2)), ((0,), (-1,), F(1))])
    mi = mixing_inputs(k, bd_cert())
    assert mi.p_B_min == F(1, 2) and not mi.warnings


def test_mixing_inputs_small_delta(bd):
    with pytest.warns(UserWarning):
        mi = mixing_inputs(bd, bd_cert(delta=1e-9))
    assert mi.nu == pytest.approx(1.0)


def test_certificate_json_round_trip():
    walk = compile_extended(halting_machine(), F(1, 2))
    cert = geometric_from_linear(walk.kernel, walk.lyapunov.w, 1)
    assert GeometricCertificate.from_json(cert.to_json()) == cert


# ---------------------------------------------------------------- properties

ps = st.fractions(min_value=F(1, 20), max_value=F(19, 20), max_denominator=20)


@settings(max_examples=40, deadline=None)
@given(ps, st.fractions(min_value=0, max_value=5, max_denominator=8))
def test_certificate_threshold(p, extra):
    # any C at or above 2/(1-p) passes with gamma = 1
    C = 2 / (1 - p) + extra
    walk = compile_extended(looping_machine(), p, C=C)
    assert check_linear(walk.kernel, walk.lyapunov.w, 1).ok
    q2 = walk.layout.q2
    for mask in walk.kernel.faces():
        if mask >> q2 & 1:
            assert face_drift(walk.kernel, walk.lyapunov.w, mask) == 1 - C * (1 - p)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=F(1, 20), max_value=F(1, 2), max_denominator=20), st.floats(0.05, 0.99))
def test_certificate_fails_below_threshold(p, frac):
    C = F(frac).limit_denominator(100) / (1 - p)
    walk = compile_extended(looping_machine(), p, C=C)
    res = check_linear(walk.kernel, walk.lyapunov.w, 1)
    assert not res.ok
    assert res.drift == 1 - C * (1 - p) > 0


@settings(max_examples=15, deadline=None)
@given(ps, st.sampled_from([halting_machine, looping_machine, shuttle_machine]))
def test_sampled_and_closed_form_agree(p, make):
    walk = compile_extended(make(), p)
    cert = geometric_from_linear(walk.kernel, walk.lyapunov.w, 1)
    closed = check_geometric(walk.kernel, cert)
    assert closed.ok
    sampled = check_geometric(walk.kernel, cert, states=_frontier(walk, 300))
    assert sampled.ok
    for s, r in sampled.ratios.items():
        assert r == pytest.approx(closed.ratios[face_of(s)], abs=1e-12)


def _frontier(walk, limit):
    seen, todo = {walk.origin}, [walk.origin]
    while todo and len(seen) < limit:
        s = todo.pop()
        for n, _ in walk.successors(s):
            if n not in seen:
                seen.add(n)
                todo.append(n)
    return seen
