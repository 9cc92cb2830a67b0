"""Per-link packet arrivals at integer epochs.

``bernoulli-unit-slot``: at every integer time one packet arrives with
probability lambda, independently across links and slots.
``deterministic``: the k-th epoch carries ``floor(k lambda) - floor((k-1) lambda)``
packets, the evenly spread sequence of rate lambda.
``custom-trace``: explicit ``(link, time)`` pairs.
``poisson``: extension only; converted to a trace and checked against the cap.

The simulation kernel draws slot arrivals through :func:`slot_count` with
the link's arrival stream, so :func:`generate` with the same seed reproduces
exactly what a run sees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .rng import STREAM_ARRIVAL, make_streams, uniform

KIND_NONE = 0
KIND_BERNOULLI = 1
KIND_DETERMINISTIC = 2
KIND_TRACE = 3

KINDS = {
    "none": KIND_NONE,
    "bernoulli-unit-slot": KIND_BERNOULLI,
    "deterministic": KIND_DETERMINISTIC,
    "custom-trace": KIND_TRACE,
    "poisson": KIND_TRACE,
}


@njit(cache=True)
def slot_count(kind, lam, k, rs, l):
    """Packets arriving to link ``l`` at integer epoch ``k >= 1``."""
    if kind == 1:
        if lam <= 0.0:
            return 0
        return 1 if uniform(rs, STREAM_ARRIVAL, l) <= lam else 0
    if kind == 2:
        return int(math.floor(k * lam + 1e-9) - math.floor((k - 1) * lam + 1e-9))
    return 0


@dataclass(frozen=True)
class ArrivalProcess:
    kind: str = "bernoulli-unit-slot"
    rate: float | np.ndarray = 0.0
    A_max: int = 1
    k_eps: int = 1
    trace: tuple | None = None  # (links, times) for custom traces

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown arrival kind {self.kind!r}")
        r = np.asarray(self.rate, dtype=float)
        if np.any(r < 0):
            raise ConfigError("arrival rate must be non-negative")
        if self.kind == "bernoulli-unit-slot":
            if np.any(r > 1):
                raise ConfigError("Bernoulli slot arrivals need rate in [0, 1]")
            if self.k_eps != 1:
                raise ConfigError("i.i.d. slot arrivals converge with k_eps = 1")
        if self.kind == "deterministic" and np.any(r > self.A_max):
            raise ConfigError("deterministic rate exceeds A_max")
        if self.A_max < 1 or self.k_eps < 1:
            raise ConfigError("A_max and k_eps must be >= 1")

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    def rate_of(self, link: int) -> float:
        r = np.asarray(self.rate, dtype=float)
        return float(r) if r.ndim == 0 else float(r[link])

    def rates(self, L: int) -> np.ndarray:
        r = np.asarray(self.rate, dtype=float)
        return np.full(L, float(r)) if r.ndim == 0 else r.astype(float).copy()


@njit(cache=True)
def _slot_times(kind, lam, k1, k2, rs, l):
    out = np.empty(max(k2 - k1, 0) * 4, dtype=np.float64)
    m = 0
    for k in range(k1, k2):
        c = slot_count(kind, lam, k, rs, l)
        if m + c > out.size:
            grown = np.empty(2 * out.size + c, dtype=np.float64)
            grown[:m] = out[:m]
            out = grown
        for _ in range(c):
            out[m] = k
            m += 1
    return out[:m]


def generate(process: ArrivalProcess, link: int, t1: float, t2: float, rng=0) -> np.ndarray:
    """Arrival timestamps of ``link`` in ``(t1, t2]``.

    ``rng`` is a master seed (an integer) or a stream array from
    :func:`make_streams`.  Slot kinds draw one value per epoch from epoch 1
    onward, so windows not starting at 0 still reproduce the run's draws.
    """
    if t2 <= t1:
        raise ConfigError("need t2 > t1")
    if process.kind in ("custom-trace", "poisson"):
        links, times = process.trace if process.trace is not None else ((), ())
        links, times = np.asarray(links), np.asarray(times, dtype=float)
        sel = (links == link) & (times > t1) & (times <= t2)
        return np.sort(times[sel])
    if isinstance(rng, np.ndarray):
        rs = rng.copy()
    else:
        rs = make_streams(int(rng), link + 1)
    lam = process.rate_of(link)
    k_hi = int(math.floor(t2)) + 1
    times = _slot_times(process.code, lam, 1, k_hi, rs, link)
    return times[times > t1]


def poisson_trace(rate, L: int, horizon: float, seed=0, A_max: int = 1) -> ArrivalProcess:
    """Poisson arrivals thinned so no half-open unit window holds more than ``A_max``.

    An arrival is dropped when ``A_max`` earlier kept arrivals lie within the
    preceding unit of time.
    """
    rng = np.random.default_rng(seed)
    rates = np.broadcast_to(np.asarray(rate, dtype=float), (L,))
    links, times = [], []
    for l in range(L):
        n = rng.poisson(rates[l] * horizon)
        kept = []
        for t in np.sort(rng.uniform(0.0, horizon, n)):
            if len(kept) < A_max or t - kept[-A_max] >= 1.0:
                kept.append(float(t))
        links.extend([l] * len(kept))
        times.extend(kept)
    return ArrivalProcess("poisson", rates.copy(), A_max=A_max,
                          trace=(np.array(links, dtype=np.int64), np.array(times)))


def max_per_unit_window(times) -> int:
    """Largest number of arrivals in any half-open unit window ``[t, t+1)`` (sliding)."""
    ts = np.sort(np.asarray(times, dtype=float))
    if ts.size == 0:
        return 0
    j = np.searchsorted(ts, ts + 1.0, side="left")
    return int(np.max(j - np.arange(ts.size)))


def rate_for_load(stats, rho: float) -> tuple[float, float]:
    """``(lambda, eps)`` with ``lambda = rho * mu_max`` and ``eps = 1 - rho``."""
    if not 0 < rho < 1:
        raise ConfigError(f"load must lie in (0, 1), got {rho}")
    mu = stats if isinstance(stats, float) else stats.mu_max
    return rho * mu, 1.0 - rho


def export_trace(links, times, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "time"])
        for l, t in zip(links, times):
            w.writerow([int(l), repr(float(t))])


def import_trace(path) -> ArrivalProcess:
    links, times = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            links.append(int(row["link"]))
            times.append(float(row["time"]))
    return ArrivalProcess("custom-trace", 0.0, trace=(np.array(links), np.array(times)))
