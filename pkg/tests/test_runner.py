import numpy as np
import pytest

from bmflow.sim.params import ModelParams
from bmflow.sim.runner import run_simulation
from bmflow.sim.state import InitialData

P = ModelParams()


def test_cadence_and_final_record():
    res = run_simulation(P, 8, 0.01, 0.05, seed=1, cadence=2)
    times = [r.time for r in res.records]
    assert res.steps == 5
    assert times[0] == 0.0 and times[-1] == pytest.approx(0.05)
    assert len(times) == 1 + 2 + 1      # start, steps 2 and 4, end


def test_callbacks_see_every_step():
    seen, recs = [], []
    res = run_simulation(P, 8, 0.01, 0.03, on_step=lambda s, n: seen.append((n, s.time)),
                         on_record=recs.append)
    assert [n for n, _ in seen] == [1, 2, 3]
    assert recs == res.records


def test_deterministic_for_a_seed():
    a = run_simulation(P, 8, 0.01, 0.03, seed=7)
    b = run_simulation(P, 8, 0.01, 0.03, seed=7)
    c = run_simulation(P, 8, 0.01, 0.03, seed=8)
    assert a.state.u.tobytes() == b.state.u.tobytes()
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]
    assert not np.array_equal(a.state.u, c.state.u)


def test_restart_from_state_matches_straight_run():
    full = run_simulation(P, 8, 0.01, 0.04, seed=3)
    half = run_simulation(P, 8, 0.01, 0.02, seed=3)
    rest = run_simulation(P, 8, 0.01, 0.04, state=half.state)
    # a fresh solver loses the multiplier warm start, so agreement is to
    # the Newton tolerance rather than bitwise
    assert np.max(np.abs(rest.state.q - full.state.q)) < 1e-11
    assert rest.state.time == pytest.approx(full.state.time)


def test_zero_length_and_bad_arguments():
    res = run_simulation(P, 8, 0.01, 0.0, init=InitialData(kind="equilibrium"))
    assert res.steps == 0 and len(res.records) == 1
    with pytest.raises(ValueError):
        run_simulation(P, 8, 0.0, 1.0)
