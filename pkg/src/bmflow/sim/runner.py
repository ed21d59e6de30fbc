"""Drive a simulation: step, record diagnostics, keep audit history."""
from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import BalanceTracker, diagnostics, history_sample
from .params import ModelParams
from .state import FieldState, InitialData, initial_state
from .stepper import Simulator


@dataclass
class RunResult:
    state: FieldState
    records: list
    history: list = field(default_factory=list)
    steps: int = 0


def run_simulation(params: ModelParams, grid_size: int, dt: float, t_end: float,
                   seed: int = 0, init: InitialData | None = None, quad_orders=(12, 24),
                   cadence: int = 1, keep_history: bool = False, on_record=None,
                   on_step=None, state: FieldState | None = None) -> RunResult:
    """Advance to ``t_end`` with step ``dt`` (reduced by the CFL bound when needed).

    A diagnostics record is taken every ``cadence`` steps and at the end;
    ``on_record(rec)`` and ``on_step(state, nstep)`` are optional callbacks.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    sim = Simulator(params, grid_size, quad_orders)
    if state is None:
        state = initial_state(sim.grid, init or InitialData(), seed)
    tracker = BalanceTracker()
    records, history = [], []
    nstep = 0

    def record(st, rates):
        rec = tracker.update(diagnostics(st, params, sim.grid, rates))
        records.append(rec)
        if keep_history:
            history.append(history_sample(st, rates, params))
        if on_record is not None:
            on_record(rec)

    rates = sim.evaluate(state)
    record(state, rates)
    tol = 1e-12 * max(1.0, t_end)
    while state.time < t_end - tol:
        h = min(dt, t_end - state.time, sim.cfl(state, rates))
        state, _ = sim.step(state, h, rates)
        nstep += 1
        rates = sim.evaluate(state)
        if on_step is not None:
            on_step(state, nstep)
        if nstep % cadence == 0 or state.time >= t_end - tol:
            record(state, rates)
    return RunResult(state, records, history, nstep)
