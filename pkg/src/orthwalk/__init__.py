"""Constrained homogeneous random walks on the nonnegative orthant."""

__version__ = "0.1.0"

from .walk import (
    TransitionKernel,
    lazy,
    load_kernel,
    save_kernel,
    simulate,
    split_pm2,
    step_distribution,
    validate_kernel,
)
from .machine import Configuration, CounterMachine, cm_run, halting_machine, looping_machine
from .reduction import bisimulation_check, compile_deterministic, compile_extended, compiled_from_kernel
from .lyapunov import check_geometric, check_linear, geometric_from_linear, mixing_inputs
from .stationary import (
    Excursions,
    approx_stationary,
    conditional_cycles,
    ldrate,
    return_time,
    solve_stationary_exact,
)
from .queueing import PriorityPolicy, QueueSystem, embedded_chain, load_factor, queue_simulate
