import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthwalk.queueing import (
    PolicyError,
    PriorityPolicy,
    QueueState,
    QueueSystem,
    embedded_chain,
    load_factor,
    queue_from_json,
    queue_simulate,
    queue_step,
    queue_to_json,
)
from orthwalk.stationary import propagate, solve_stationary_exact

F = Fraction


def test_load_factor_examples():
    assert load_factor(QueueSystem.make([1], 2, [F(1, 2)])) == (F(1, 4), True)
    assert load_factor(QueueSystem.make([2, 3], 1, [F(1, 2), F(1, 5)])) == (F(8, 5), False)
    assert load_factor(QueueSystem.make([2, 1], 3, [0, 0]))[0] == 0


def test_inconsistent_policy_rejected():
    with pytest.raises(PolicyError, match="empty buffer 2"):
        PriorityPolicy(2, (0, 2, 2, 1))
    with pytest.raises(PolicyError):
        PriorityPolicy(2, (0, 1))
    with pytest.raises(PolicyError):
        PriorityPolicy.from_priority([1, 1])


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(1, 6))))
def test_priority_policy_characterization(order):
    pol = PriorityPolicy.from_priority(order)
    theta = pol.theta()
    explicit = PriorityPolicy(5, pol.table)
    for b in range(1 << 5):
        bits = [b >> (k - 1) & 1 for k in range(1, 6)]
        assert explicit(bits) == pol(bits)
        k = pol.table[b]
        if not b:
            assert k == 0
            continue
        assert bits[k - 1] == 1
        assert all(bits[i - 1] == 0 for i in range(1, 6) if theta[i] < theta[k])


def test_single_service():
    s = QueueSystem.make([1], 1, [0])
    pol = PriorityPolicy.from_priority([1])
    assert queue_step(s, pol, QueueState((1,))).buffers == (0,)


def test_routing_to_next_visit():
    s = QueueSystem.make([2], 1, [0])
    pol = PriorityPolicy.from_priority([1, 2])
    assert queue_step(s, pol, QueueState((1, 0))).buffers == (0, 1)
    assert queue_step(s, pol, QueueState((0, 1))).buffers == (0, 0)


def test_idling_policy_only_grows():
    s = QueueSystem.make([1, 1], 2, [F(1, 3), F(1, 4)])
    stats = queue_simulate(s, PriorityPolicy.idle(2), 2000, seed=3)
    assert stats.departures == 0
    assert (np.diff(stats.totals) >= 0).all()
    assert np.polyfit(np.arange(len(stats.totals)), stats.totals, 1)[0] > 0


def test_embedded_chain_examples():
    pol = PriorityPolicy.from_priority([1])
    chain = embedded_chain(QueueSystem.make([1], 2, [F(1, 2)]), pol)
    assert chain.successors((0,)) == [((0,), F(1))]
    # arrivals come first, so the part is served in the same slot
    chain = embedded_chain(QueueSystem.make([1], 1, [F(1, 2)]), pol)
    assert chain.successors((0,)) == [((0,), F(1))]
    chain = embedded_chain(QueueSystem.make([1], 1, [0]), pol)
    assert solve_stationary_exact(chain, chain.empty) == {(0,): 1}


def test_embedded_chain_two_types():
    s = QueueSystem.make([2, 1], 2, [F(1, 2), F(1, 4)])
    chain = embedded_chain(s, PriorityPolicy.from_priority([2, 1, 3]))
    succ = dict(chain.successors((0, 0, 0)))
    # only when both arrive is there more work (three units) than service (two)
    assert succ == {(0, 0, 0): F(7, 8), (0, 0, 1): F(1, 8)}
    assert sum(succ.values()) == 1


def test_zero_arrivals_stay_empty():
    s = QueueSystem.make([2, 1], 2, [0, 0])
    stats = queue_simulate(s, PriorityPolicy.from_priority([1, 2, 3]), 100, seed=0)
    assert stats.mean_at_epochs.tolist() == [0, 0, 0] and stats.empty_fraction == 1.0


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(1, 3), min_size=1, max_size=3),
    st.integers(1, 4),
    st.data(),
)
def test_simulation_bookkeeping(visits, slot, data):
    n = sum(visits)
    probs = [data.draw(st.fractions(0, 1, max_denominator=6)) for _ in visits]
    order = data.draw(st.permutations(list(range(1, n + 1))))
    s = QueueSystem.make(visits, slot, probs)
    stats = queue_simulate(s, PriorityPolicy.from_priority(order), 300, data.draw(st.integers(0, 1000)))
    assert min(stats.final) >= 0
    assert stats.departures <= stats.arrivals
    assert stats.arrivals - stats.departures == sum(stats.final)


def test_finite_time_law_matches_simulation():
    # two types, three buffers; load 5/8 but queues build up within a block
    s = QueueSystem.make([2, 1], 2, [F(1, 2), F(1, 4)])
    pol = PriorityPolicy.from_priority([2, 1, 3])
    chain = embedded_chain(s, pol)
    horizon = 8
    law = propagate(chain, chain.empty, horizon)[horizon].mass
    p_empty = float(law.get((0, 0, 0), 0))
    mean_total = float(sum(m * sum(x) for x, m in law.items()))
    runs = 4000
    finals = np.array([sum(queue_simulate(s, pol, horizon, seed).final) for seed in range(runs)])
    se_empty = math.sqrt(p_empty * (1 - p_empty) / runs)
    assert abs((finals == 0).mean() - p_empty) < 4 * se_empty
    assert abs(finals.mean() - mean_total) < 4 * finals.std(ddof=1) / math.sqrt(runs)


def test_spec_round_trip():
    s = QueueSystem.make([2, 1], 3, [F(1, 2), F(1, 7)])
    for pol in (PriorityPolicy.from_priority([3, 1, 2]), PriorityPolicy(3, PriorityPolicy.from_priority([2, 3, 1]).table)):
        assert queue_from_json(queue_to_json(s, pol)) == (s, pol)


def test_spec_rejects_decimals_and_bad_counts():
    doc = {"types": 1, "visits": [1], "slot": 2, "arrival_probs": ["0.5"]}
    with pytest.raises(ValueError):
        queue_from_json(doc)
    doc = {"types": 2, "visits": [1], "slot": 2, "arrival_probs": ["1/2"]}
    with pytest.raises(ValueError, match="types"):
        queue_from_json(doc)
