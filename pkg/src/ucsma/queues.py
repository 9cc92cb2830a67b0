"""Per-link backlogs driven by the transmission indicator.

The default service model is fluid: while a link transmits, its backlog
drains at rate 1 (and only while positive).  Between events the inflow rate
and the service indicator are constant, so every piece is integrated in
closed form; there is no time discretisation anywhere.

Packet mode reuses the same trajectory.  A packet completes after one unit of
accumulated service and an interrupted packet keeps its residual work, so the
number of packets in the system is ``ceil(Q)`` at every instant and its time
integral follows from the fluid path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError


@njit(cache=True)
def ceil_integral(x):
    """``G(x) = int_0^x ceil(u) du`` for ``x >= 0``."""
    k = math.floor(x)
    return 0.5 * k * (k + 1) + (k + 1) * (x - k)


@njit(cache=True)
def _segment(q0, slope, dt):
    """(int Q, int ceil(Q)) over a linear piece starting at q0."""
    q1 = q0 + slope * dt
    if q1 < 0.0:
        q1 = 0.0
    area = 0.5 * (q0 + q1) * dt
    # ceil level just after the start, and how long the path stays on it
    if slope > 0.0:
        level = math.floor(q0) + 1.0
        stay = (level - q0) / slope
    elif slope < 0.0:
        level = math.ceil(q0)
        stay = (q0 - (level - 1.0)) / -slope
    else:
        return q1, area, math.ceil(q0) * dt
    if stay >= dt:
        # also avoids cancellation in the closed form when the slope is tiny
        pk = level * dt
    else:
        pk = (ceil_integral(q1) - ceil_integral(q0)) / slope
    return q1, area, pk


@njit(cache=True)
def fluid_step(q, inflow, service, dt):
    """Advance one link by ``dt`` with constant inflow rate and service in {0, 1}.

    Returns ``(q_new, int Q dt, int ceil(Q) dt, served)``.
    """
    if dt <= 0.0:
        return q, 0.0, 0.0, 0.0
    if service == 0.0:
        q1, a, p = _segment(q, inflow, dt)
        return q1, a, p, 0.0
    net = inflow - 1.0
    if net >= 0.0:
        # never drains: either Q > 0 stays positive or Q = 0 stays at 0 with a = 1
        q1, a, p = _segment(q, net, dt)
        return q1, a, p, dt
    if q <= 0.0:
        # empty and drained faster than filled: the link serves exactly the inflow
        return 0.0, 0.0, 0.0, inflow * dt
    t0 = q / -net
    if dt < t0:
        q1, a, p = _segment(q, net, dt)
        return q1, a, p, dt
    _, a, p = _segment(q, net, t0)
    return 0.0, a, p, t0 + inflow * (dt - t0)


# ---------------------------------------------------------------- Python-level


@dataclass
class LinkQueue:
    """Backlog of one link with cumulative accounting.

    ``packets`` exposes the packet-mode view: whole packets waiting, with the
    partially served head-of-line packet counted as one.
    """

    backlog: float = 0.0
    arrivals: float = 0.0
    served: float = 0.0
    integral: float = 0.0
    packet_integral: float = 0.0
    clock: float = 0.0

    @property
    def packets(self) -> int:
        return int(math.ceil(self.backlog - 1e-12))

    @property
    def residual_work(self) -> float:
        """Remaining work of the head-of-line packet (0 if the queue is empty)."""
        if self.backlog <= 0.0:
            return 0.0
        frac = self.backlog - math.floor(self.backlog)
        return frac if frac > 0 else 1.0

    def advance(self, until: float, service: bool, inflow: float = 0.0) -> None:
        dt = until - self.clock
        if dt < 0:
            raise ConfigError("cannot move a queue backwards in time")
        q, a, p, s = fluid_step(self.backlog, inflow, 1.0 if service else 0.0, dt)
        self.backlog, self.clock = q, until
        self.integral += a
        self.packet_integral += p
        self.served += s
        self.arrivals += inflow * dt

    def add(self, amount: float = 1.0) -> None:
        self.backlog += amount
        self.arrivals += amount


def integrate_service(queue: LinkQueue, active_intervals, until: float,
                      arrivals=()) -> LinkQueue:
    """Drive ``queue`` to ``until`` given disjoint active intervals and arrival times.

    Arrivals landing exactly on an interval edge are applied before the
    service change at that instant.
    """
    ivs = sorted((float(a), float(b)) for a, b in active_intervals)
    for a, b in ivs:
        if b < a:
            raise ConfigError(f"negative-length interval ({a}, {b})")
    for (a0, b0), (a1, _) in zip(ivs, ivs[1:]):
        if a1 < b0:
            raise ConfigError("active intervals overlap")
    # breakpoints where either the service indicator changes or a packet arrives
    marks = sorted({t for iv in ivs for t in iv} | {float(t) for t in arrivals} | {float(until)})
    arr = sorted(float(t) for t in arrivals)
    k = 0
    for t in marks:
        if t < queue.clock or t > until:
            continue
        mid = 0.5 * (queue.clock + t)
        on = any(a <= mid < b for a, b in ivs)
        queue.advance(t, on)
        while k < len(arr) and arr[k] <= t:
            if arr[k] >= queue.clock - 1e-15:
                queue.add(1.0)
            k += 1
    return queue


@dataclass(frozen=True)
class QueueReport:
    per_link: np.ndarray
    mean: float
    median: float
    max: float
    delay: float | None
    warmup: float
    horizon: float
    lam: float
    packet_mean: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def delay_defined(self) -> bool:
        return self.delay is not None

    def summary(self) -> dict:
        return {
            "mean_queue": self.mean,
            "median_queue": self.median,
            "max_queue": self.max,
            "delay": self.delay,
            "delay_defined": self.delay_defined,
            "packet_mean_queue": self.packet_mean,
            "lambda": self.lam,
            "warmup": self.warmup,
            "horizon": self.horizon,
            **self.extra,
        }


def report(integrals, warmup: float, horizon: float, lam: float,
           packet_integrals=None) -> QueueReport:
    """Time averages over ``[warmup, horizon]`` from per-link ``int Q dt`` over that window."""
    if horizon <= warmup:
        raise ConfigError("horizon must exceed warmup")
    span = horizon - warmup
    per = np.asarray(integrals, dtype=float) / span
    mean = float(per.mean()) if per.size else 0.0
    pmean = None
    if packet_integrals is not None:
        pmean = float(np.mean(np.asarray(packet_integrals, dtype=float) / span))
    delay = mean / lam if lam > 0 else None
    return QueueReport(per, mean, float(np.median(per)) if per.size else 0.0,
                       float(per.max()) if per.size else 0.0, delay, warmup, horizon,
                       float(lam), pmean)


def export_avg_queue(rep: QueueReport, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "avg_queue"])
        for l, q in enumerate(rep.per_link):
            w.writerow([l, repr(float(q))])
