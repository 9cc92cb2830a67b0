import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsma.errors import ConfigError
from ucsma.graph import from_edge_list
from ucsma.arrivals import ArrivalProcess
from ucsma.engine import Simulator
from ucsma.queues import (LinkQueue, ceil_integral, export_avg_queue, fluid_step,
                          integrate_service, report)


def test_drain_while_active():
    q = integrate_service(LinkQueue(backlog=3.0), [(0.0, 1.5)], 1.5)
    assert q.backlog == pytest.approx(1.5)


def test_no_negative_backlog():
    q = integrate_service(LinkQueue(backlog=0.5), [(0.0, 2.0)], 2.0)
    assert q.backlog == 0.0 and q.served == pytest.approx(0.5)


def test_arrival_then_service():
    q = integrate_service(LinkQueue(), [(0.0, 3.0)], 3.0, arrivals=[1.0])
    assert q.backlog == pytest.approx(0.0)
    assert q.served == pytest.approx(1.0)


def test_interval_validation():
    with pytest.raises(ConfigError):
        integrate_service(LinkQueue(), [(2.0, 1.0)], 3.0)
    with pytest.raises(ConfigError):
        integrate_service(LinkQueue(), [(0.0, 2.0), (1.0, 3.0)], 3.0)


def test_report_constant_and_empty():
    r = report([4.0 * 10, 4.0 * 10], 0.0, 10.0, 0.2)
    assert r.mean == pytest.approx(4.0) and r.delay == pytest.approx(20.0)
    r0 = report([0.0], 1.0, 2.0, 0.0)
    assert r0.mean == 0.0 and not r0.delay_defined


def test_sawtooth_average():
    # Q(t) = t mod 1: add one unit each epoch, drain at rate 1 while active
    q = LinkQueue()
    for k in range(10):
        q.add(1.0)
        q.advance(k + 1.0, True)
    assert q.integral / 10 == pytest.approx(0.5)


def test_ceil_integral_closed_form():
    assert ceil_integral(0.0) == 0.0
    assert ceil_integral(1.0) == pytest.approx(1.0)
    assert ceil_integral(2.5) == pytest.approx(1 + 2 + 0.5 * 3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 20), st.floats(0, 3), st.sampled_from([0.0, 1.0]), st.floats(0, 10))
def test_fluid_step_matches_fine_integration(q0, inflow, service, dt):
    q, area, parea, served = fluid_step(q0, inflow, service, dt)
    n = 4000
    h = dt / n
    x, a, pa, s = q0, 0.0, 0.0, 0.0
    for _ in range(n):
        nxt = max(0.0, x + (inflow - service) * h)
        a += 0.5 * (x + nxt) * h
        pa += math.ceil(0.5 * (x + nxt)) * h
        s += x + inflow * h - nxt
        x = nxt
    assert q >= 0
    assert q == pytest.approx(x, abs=1e-6 + 1e-6 * q0)
    assert area == pytest.approx(a, rel=1e-3, abs=1e-3 * (1 + dt))
    assert served == pytest.approx(s, abs=1e-6 + 1e-6 * q0)
    # conservation
    assert q0 + inflow * dt - served == pytest.approx(q, abs=1e-9 * (1 + q0 + inflow * dt))
    assert parea >= area - 1e-9
    # midpoint rule on ceil: off by at most one level per crossing step
    crossings = abs(q0 - q) + 2
    assert parea == pytest.approx(pa, abs=crossings * h * 2 + 1e-9)


def test_engine_conservation():
    g = from_edge_list(4, [(0, 1), (1, 2), (2, 3)])
    sim = Simulator(g, 2.0, seed=3, arrivals=ArrivalProcess(rate=0.2))
    sim.advance(500.0)
    gap = sim.arrived - sim.served - sim.queue
    assert np.all(np.abs(gap) <= 1e-9 * np.maximum(1.0, sim.arrived))
    assert np.all(sim.queue >= 0)


def test_single_link_stability():
    # lambda = 0.3 < z/(1+z) = 0.5: the time-average queue settles
    g = from_edge_list(1, [])
    sim = Simulator(g, 1.0, seed=1, arrivals=ArrivalProcess(rate=0.3))
    avgs = []
    for H in (2_000.0, 4_000.0, 8_000.0, 16_000.0):
        sim.advance(H)
        avgs.append(sim.queue_integral[0] / H)
    assert max(avgs) < 3 * min(avgs)
    assert avgs[-1] < 10


def test_export(tmp_path):
    r = report([1.0, 2.0], 0.0, 1.0, 0.5)
    export_avg_queue(r, tmp_path / "q.csv")
    rows = (tmp_path / "q.csv").read_text().splitlines()
    assert rows[0] == "link,avg_queue" and len(rows) == 3
