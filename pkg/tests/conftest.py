from fractions import Fraction

import pytest

from orthwalk.machine import CounterMachine, halting_machine, looping_machine
from orthwalk.walk import TransitionKernel

HALF = Fraction(1, 2)


def birth_death(up_on_positive=False):
    rules = [((0,), (-1,) if not up_on_positive else (1,), Fraction(1)), ((), (1,), Fraction(1))]
    return TransitionKernel.from_rules(1, rules)


def shuttle_machine():
    """Never halts; moves counter 1 into counter 2 and back, growing by one each round.

    Uses every action and every guard pattern.
    """
    table = {("s0", (0, 0)): ("s1", 1)}
    for g in ((1, 0), (1, 1)):
        table[("s1", g)] = ("s2", -1)
    table[("s1", (0, 1))] = ("s3", 0)
    for g in ((0, 0), (0, 1), (1, 0), (1, 1)):
        table[("s2", g)] = ("s1", 2)
        table[("s4", g)] = ("s3", 1)
    for g in ((0, 1), (1, 1)):
        table[("s3", g)] = ("s4", -2)
    table[("s3", (1, 0))] = ("s1", 1)
    return CounterMachine.from_table(["s0", "s1", "s2", "s3", "s4"], table)


@pytest.fixture
def bd():
    return birth_death()


@pytest.fixture
def m_halt():
    return halting_machine()


@pytest.fixture
def m_loop():
    return looping_machine()
