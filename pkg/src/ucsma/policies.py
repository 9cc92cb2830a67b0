"""Scheduling policies on top of the engine and a common run driver.

* ``classical``: plain CSMA with fixed attempt rates.
* ``ucsma-ideal``: global unlock at every multiple of T.
* ``ucsma-distributed``: busy-tone unlocking waves (per-link counters, relays
  suppressed for 0.5 T, tones delivered after ``delta_b``).
* ``ucsma-adaptive``: attempt rates ``exp(Q/(kT))`` refreshed every control
  tick, with ideal or distributed unlocking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import Simulator
from .errors import ConfigError

KINDS = ("classical", "ucsma-ideal", "ucsma-distributed", "ucsma-adaptive")
C1_DEFAULT = 0.0685
K_DEFAULT = 2
ZCAP_DEFAULT = 50.0


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "classical"
    z: float = 1.0
    T: float = math.inf
    C1: float = C1_DEFAULT
    k: int = K_DEFAULT
    delta_b: float | None = None
    delta: float | None = None
    unlocking: str = "ideal"  # for ucsma-adaptive: "ideal" | "distributed" | "none"
    zcap: float = ZCAP_DEFAULT
    tone_uniform: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}")
        if not self.z > 0:
            raise ConfigError("attempt rate must be positive")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.kind != "classical" and not self.T > 0:
            raise ConfigError("unlocking period must be positive")
        if self.uses_busy_tone:
            if self.delta_b is None:
                raise ConfigError("distributed unlocking needs delta_b")
            if self.delta_b > self.delta_value:
                raise ConfigError("delta_b must not exceed delta")

    @property
    def delta_value(self) -> float:
        return self.delta if self.delta is not None else (self.delta_b or 0.0)

    @property
    def uses_busy_tone(self) -> bool:
        return self.kind == "ucsma-distributed" or (
            self.kind == "ucsma-adaptive" and self.unlocking == "distributed")

    @property
    def uses_global_unlock(self) -> bool:
        return self.kind == "ucsma-ideal" or (
            self.kind == "ucsma-adaptive" and self.unlocking == "ideal")


def choose_period(eps: float, variant: str = "paper-sim", C1: float = C1_DEFAULT) -> float:
    """Unlocking period for distance-to-capacity ``eps``.

    ``proposition``: ``ceil((16 C1)^2 / eps^2)``; ``paper-sim``: ``1.2 / eps^2``.
    """
    if not 0 < eps < 1 + 1e-12:
        raise ConfigError(f"eps must lie in (0, 1], got {eps}")
    if C1 <= 0:
        raise ConfigError("C1 must be positive")
    if variant == "proposition":
        return float(math.ceil((16 * C1) ** 2 / eps ** 2 - 1e-9))
    if variant == "paper-sim":
        return float(f"{1.2 / eps ** 2:.12g}")
    raise ConfigError(f"unknown period variant {variant!r}")


def adaptive_rates(queues, k: int, T: float, zcap: float = ZCAP_DEFAULT) -> np.ndarray:
    if k < 1 or T <= 0:
        raise ConfigError("need k >= 1 and T > 0")
    q = np.asarray(queues, dtype=float)
    return np.exp(np.minimum(q / (k * T), zcap))


def make_simulator(graph, policy: PolicyConfig, *, seed=0, arrivals=None, congestion=None,
                   z=None, **engine_kw) -> Simulator:
    kw = dict(seed=seed, arrivals=arrivals, congestion=congestion, **engine_kw)
    if policy.uses_global_unlock and math.isfinite(policy.T):
        kw["unlock_period"] = policy.T
    if policy.uses_busy_tone:
        kw["busy_tone"] = (policy.T, policy.delta_b, policy.delta_value)
        kw["tone_uniform"] = policy.tone_uniform
    if policy.kind == "ucsma-adaptive":
        kw["adaptive"] = (policy.k, policy.T, policy.zcap)
    return Simulator(graph, policy.z if z is None else z, **kw)


@dataclass
class RunResult:
    """Window statistics of one run over ``[warmup, horizon]``."""

    policy: PolicyConfig
    seed: int
    warmup: float
    horizon: float
    queue_integral: np.ndarray
    packet_integral: np.ndarray
    arrived: np.ndarray
    served: np.ndarray
    active_time: np.ndarray
    final_queue: np.ndarray
    unlocks: int
    events: int
    samples: dict = field(default_factory=dict)
    sim: Simulator | None = None

    @property
    def span(self) -> float:
        return self.horizon - self.warmup

    @property
    def avg_queue(self) -> np.ndarray:
        return self.queue_integral / self.span

    @property
    def mean_queue(self) -> float:
        return float(self.avg_queue.mean())

    @property
    def throughput(self) -> np.ndarray:
        return self.active_time / self.span

    @property
    def admitted_rate(self) -> np.ndarray:
        return self.arrived / self.span

    @property
    def mean_theta(self) -> float:
        return float(self.throughput.mean())


def simulate(graph, policy: PolicyConfig, horizon: float, *, warmup: float = 0.0, seed=0,
             arrivals=None, congestion=None, sample_times=None, sampler=None,
             keep_sim=False, **engine_kw) -> RunResult:
    """Run one policy and collect window statistics.

    ``sampler(sim)`` is called at each of ``sample_times`` (after all events at
    that instant) and its return values are collected in ``samples``.
    """
    if not horizon > warmup >= 0:
        raise ConfigError("need horizon > warmup >= 0")
    sim = make_simulator(graph, policy, seed=seed, arrivals=arrivals, congestion=congestion,
                         **engine_kw)
    stops = sorted(set([float(warmup)] + [float(t) for t in (sample_times or ())
                                          if 0 <= t <= horizon]))
    collected = []
    base = None
    for t in stops:
        sim.advance(t)
        if t == warmup:
            base = (sim.queue_integral.copy(), sim.packet_integral.copy(), sim.arrived.copy(),
                    sim.served.copy(), sim.active_time())
        if sampler is not None and sample_times is not None and t in set(map(float, sample_times)):
            collected.append((t, sampler(sim)))
    sim.advance(horizon)
    q0, p0, a0, s0, act0 = base
    res = RunResult(policy, int(seed), float(warmup), float(horizon),
                    sim.queue_integral - q0, sim.packet_integral - p0, sim.arrived - a0,
                    sim.served - s0, sim.active_time() - act0, sim.queue.copy(),
                    sim.unlocks, sim.events, {"series": collected},
                    sim if keep_sim else None)
    return res


def run_classical(graph, z, horizon, **kw) -> RunResult:
    return simulate(graph, PolicyConfig("classical", z=z), horizon, **kw)


def run_ucsma_ideal(graph, z, T, horizon, **kw) -> RunResult:
    return simulate(graph, PolicyConfig("ucsma-ideal", z=z, T=T), horizon, **kw)


def run_ucsma_distributed(graph, z, T, delta_b, delta, horizon, **kw) -> RunResult:
    return simulate(graph, PolicyConfig("ucsma-distributed", z=z, T=T, delta_b=delta_b,
                                        delta=delta), horizon, **kw)


def with_period(policy: PolicyConfig, T: float) -> PolicyConfig:
    return replace(policy, T=T)
