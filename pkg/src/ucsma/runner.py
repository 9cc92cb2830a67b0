"""Experiment configuration, attempt-rate calibration, sweeps and figure recipes."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .arrivals import ArrivalProcess, rate_for_load
from .clusters import export_diagnostics, export_snapshot, snapshot
from .congestion import FlowController, nu_for_period, utility_ratio
from .errors import CalibrationError, ConfigError
from .graph import (build_lattice, build_random_geometric, build_torus, export_coords,
                    export_edges, max_uniform_throughput)
from .meanfield import compare_convergence
from .metrics import loglog_slope, write_json
from .policies import PolicyConfig, choose_period, simulate

HORIZON = 2e4
WARMUP = 4e3
FIG3_HORIZON = 200.0
DEFAULT_SEEDS = tuple(range(10))


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "torus"  # lattice | torus | rgg
    n: int | None = 9
    L: int | None = None
    width: float | None = None
    height: float | None = None
    degree: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("lattice", "torus", "rgg"):
            raise ConfigError(f"unknown topology {self.kind!r}")
        if self.kind == "rgg" and not self.L:
            raise ConfigError("random geometric topology needs L")
        if self.kind != "rgg" and self.n is None:
            raise ConfigError("grid topology needs n")

    def build(self):
        if self.kind == "lattice":
            return build_lattice(self.n)
        if self.kind == "torus":
            return build_torus(self.n)
        side = math.sqrt(self.L)  # unit density by default
        return build_random_geometric(self.L, self.width or side, self.height or side,
                                      self.degree, rng=self.seed)

    @property
    def size(self) -> int:
        return self.L if self.kind == "rgg" else (self.n + 1) ** 2


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    policy: str = "classical"
    z: float | None = 1.0
    z_rule: str = "fixed"  # fixed | calibrated
    load: float | None = 0.5
    period: float | None = None
    period_variant: str = "paper-sim"
    C1: float = 0.0685
    k: int = 2
    delta_b: float | None = None
    delta: float | None = None
    tone_uniform: bool = False
    unlocking: str = "ideal"
    congestion: bool = False
    nu: float | None = None
    xi_max: float = 1.0
    arrivals: str = "bernoulli-unit-slot"
    horizon: float = HORIZON
    warmup: float = WARMUP
    seeds: tuple = DEFAULT_SEEDS
    double_horizon: bool = False
    calibration_horizon: float = 2000.0

    def __post_init__(self):
        if not self.horizon > self.warmup > 0:
            raise ConfigError("need horizon > warmup > 0")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed")
        if self.z_rule not in ("fixed", "calibrated"):
            raise ConfigError(f"unknown z rule {self.z_rule!r}")
        if self.z_rule == "fixed" and (self.z is None or self.z <= 0):
            raise ConfigError("fixed z must be positive")
        if not self.congestion:
            if self.load is None or not 0 < self.load < 1:
                raise ConfigError("load must lie in (0, 1)")
        elif self.period is None:
            raise ConfigError("congestion control needs an explicit period")

    @property
    def eps(self) -> float | None:
        return None if self.load is None or self.congestion else 1.0 - self.load

    def resolved_period(self) -> float:
        if self.period is not None:
            return float(self.period)
        if self.policy == "classical":
            return math.inf
        return choose_period(self.eps, self.period_variant, self.C1)

    def policy_config(self, z: float) -> PolicyConfig:
        return PolicyConfig(self.policy, z=z, T=self.resolved_period(), C1=self.C1, k=self.k,
                            delta_b=self.delta_b, delta=self.delta, unlocking=self.unlocking,
                            tone_uniform=self.tone_uniform)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("seeds")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        topo = d.pop("topology", {}) or {}
        if isinstance(topo, str):
            topo = {"kind": topo}
        for key in ("n", "L", "width", "height", "degree"):
            if key in d:
                topo[key] = d.pop(key)
        if "topology_seed" in d:
            topo["seed"] = d.pop("topology_seed")
        if topo.get("kind") == "rgg":
            topo.setdefault("n", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seeds" in d:
            d["seeds"] = tuple(int(s) for s in d["seeds"])
        try:
            return cls(topology=TopologySpec(**topo), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- calibration


@dataclass(frozen=True)
class CalibrationResult:
    z: float
    mu: float
    target: float
    iterations: int


def measure_uniform_throughput(graph, z, seed=0, horizon=2000.0, warmup=None) -> float:
    """Mean per-link transmitting fraction of unloaded classical CSMA."""
    warmup = 0.2 * horizon if warmup is None else warmup
    res = simulate(graph, PolicyConfig("classical", z=z), horizon, warmup=warmup, seed=seed)
    return float(res.throughput.mean())


def calibrate_z_for_load(graph, rho, seed=0, horizon=2000.0, tol=0.01, stats=None,
                         z_lo=1e-2, z_hi=1e4, max_iter=60) -> CalibrationResult:
    """Attempt rate giving uniform throughput ``mu_max (1 - eps/2)``, ``eps = 1 - rho``.

    Bisection on ``log z``; every evaluation reuses ``seed`` so the measured
    curve is a smooth function of ``z`` (common random numbers).
    """
    if not 0 < rho < 1:
        raise ConfigError("load must lie in (0, 1)")
    stats = stats or max_uniform_throughput(graph)
    target = stats.mu_max * (1 - (1 - rho) / 2)

    def mu(z):
        return measure_uniform_throughput(graph, z, seed, horizon)

    lo, hi = math.log(z_lo), math.log(z_hi)
    m_lo, m_hi = mu(z_lo), mu(z_hi)
    if not m_lo <= target <= m_hi:
        raise CalibrationError(f"target throughput {target:.4f} outside [{m_lo:.4f}, {m_hi:.4f}]")
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        m = mu(math.exp(mid))
        if abs(m - target) <= tol * target:
            return CalibrationResult(math.exp(mid), m, target, it)
        if m < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("attempt-rate calibration did not converge")


# ---------------------------------------------------------------- single runs


def _row_base(cfg: ExperimentConfig, graph, seed, z, T):
    return {
        "topology": cfg.topology.kind,
        "L": graph.L,
        "policy": cfg.policy,
        "load": cfg.load if not cfg.congestion else None,
        "eps": cfg.eps,
        "z": z,
        "T": T,
        "unlocking": cfg.unlocking,
        "delta_b": cfg.delta_b,
        "seed": int(seed),
        "config_hash": cfg.config_hash(),
        "version": __version__,
    }


def run_one(cfg: ExperimentConfig, seed: int, graph=None, z=None) -> dict:
    """Run one seed of ``cfg`` and return a flat result row."""
    graph = graph if graph is not None else cfg.topology.build()
    stats = max_uniform_throughput(graph)
    if z is None:
        if cfg.z_rule == "calibrated":
            z = calibrate_z_for_load(graph, cfg.load, stats=stats,
                                     horizon=cfg.calibration_horizon).z
        else:
            z = cfg.z
    policy = cfg.policy_config(z)
    T = policy.T
    arrivals = None
    controller = None
    if cfg.congestion:
        nu = cfg.nu if cfg.nu is not None else nu_for_period(T)
        controller = FlowController(nu, T, cfg.xi_max)
        lam = 0.0
    else:
        lam, _ = rate_for_load(stats, cfg.load)
        arrivals = ArrivalProcess(cfg.arrivals, lam)
    horizon = 2 * cfg.horizon if cfg.double_horizon else cfg.horizon
    marks = [cfg.warmup, cfg.horizon, 2 * cfg.warmup, horizon]

    def grab(sim):
        return (sim.queue_integral.copy(), sim.arrived.copy())

    res = simulate(graph, policy, horizon, warmup=cfg.warmup, seed=seed, arrivals=arrivals,
                   congestion=controller, sample_times=marks, sampler=grab)
    snaps = dict(res.samples["series"])
    span = cfg.horizon - cfg.warmup
    q1 = (snaps[cfg.horizon][0] - snaps[cfg.warmup][0]) / span
    row = _row_base(cfg, graph, seed, z, T)
    row.update({
        "lambda": lam,
        "mean_queue": float(q1.mean()),
        "median_queue": float(np.median(q1)),
        "max_queue": float(q1.max()),
        "delay": float(q1.mean() / lam) if lam > 0 else None,
        "theta": float(res.throughput.mean()),
        "unlocks": res.unlocks,
        "events": res.events,
        "horizon": cfg.horizon,
        "warmup": cfg.warmup,
    })
    if cfg.double_horizon:
        span2 = horizon - 2 * cfg.warmup
        q2 = (snaps[horizon][0] - snaps[2 * cfg.warmup][0]) / span2
        row["mean_queue_2x"] = float(q2.mean())
    if cfg.congestion:
        rates = (snaps[cfg.horizon][1] - snaps[cfg.warmup][1]) / span
        rep = utility_ratio(rates, stats)
        row.update({"nu": controller.nu, "U_net": rep.U_net, "U_opt_bound": rep.U_opt_bound,
                    "rho_u": rep.rho_u, "eps_u": rep.eps_u, "r_L": rep.r_L,
                    "r_L_flag": rep.bound_flag, "mean_rate": float(rates.mean())})
    return row


def _run_task(args):
    cfg, seed, z = args
    return run_one(cfg, seed, z=z)


@dataclass
class SweepResult:
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self, path, columns=None) -> Path:
        path = Path(path)
        cols = columns or _columns(self.rows)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r.get(c)) for c in cols])
        return path

    def mean_by(self, key, value="mean_queue"):
        groups = {}
        for r in self.rows:
            groups.setdefault(r[key], []).append(r[value])
        return {k: float(np.mean(v)) for k, v in groups.items()}


def _columns(rows):
    cols = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    return cols


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def run_sweep(configs, jobs: int = 1, calibrate_once: bool = True) -> SweepResult:
    """All (config, seed) pairs; results in config order regardless of completion order.

    With ``calibrate_once`` the attempt rate of a calibrated config is found
    once (seed 0) and shared by all its seeds.
    """
    tasks = []
    for cfg in configs:
        z = None
        if cfg.z_rule == "calibrated" and calibrate_once:
            g = cfg.topology.build()
            z = calibrate_z_for_load(g, cfg.load, horizon=cfg.calibration_horizon).z
        elif cfg.z_rule == "fixed":
            z = cfg.z
        tasks.extend((cfg, s, z) for s in cfg.seeds)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_run_task, tasks))
    else:
        rows = [_run_task(t) for t in tasks]
    return SweepResult(rows, {"version": __version__})


# ---------------------------------------------------------------- figures

FIGURES = ("fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig6", "snapshots")


def _merge(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    if not overrides:
        return cfg
    topo_keys = {"n", "L", "width", "height", "degree"}
    t = {k: v for k, v in overrides.items() if k in topo_keys}
    rest = {k: v for k, v in overrides.items() if k not in topo_keys and k != "sizes"}
    if "seeds" in rest:
        rest["seeds"] = tuple(rest["seeds"])
    topo = replace(cfg.topology, **t) if t else cfg.topology
    return replace(cfg, topology=topo, **rest)


def fig2a_configs(overrides=None):
    ov = dict(overrides or {})
    sizes = ov.pop("sizes", (9, 19))
    loads = ov.pop("loads", (0.30, 0.44))
    base = ExperimentConfig(policy="classical", z=None, z_rule="calibrated")
    return [_merge(replace(base, topology=TopologySpec("torus", n), load=rho), ov)
            for n in sizes for rho in loads]


def fig2b_configs(overrides=None):
    ov = dict(overrides or {})
    sizes = ov.pop("sizes", (9, 19, 39))
    loads = ov.pop("loads", (0.6, 0.7, 0.8))
    base = ExperimentConfig(policy="ucsma-ideal", z=50.0)
    return [_merge(replace(base, topology=TopologySpec("torus", n), load=rho), ov)
            for n in sizes for rho in loads]


def fig4_configs(overrides=None):
    ov = dict(overrides or {})
    eps = ov.pop("eps", (0.30, 0.25, 0.20, 0.15))
    n = ov.pop("n", 19)
    base = ExperimentConfig(topology=TopologySpec("torus", n), policy="ucsma-ideal", z=50.0)
    return [_merge(replace(base, load=round(1 - e, 10)), ov) for e in eps]


def congestion_configs(overrides=None):
    ov = dict(overrides or {})
    sizes = ov.pop("sizes", (100, 400))
    periods = ov.pop("periods", (5.0, 10.0, 20.0, 40.0, 80.0))
    return [_merge(ExperimentConfig(topology=TopologySpec("rgg", None, L), policy="ucsma-adaptive",
                                    z=1.0, congestion=True, load=None, arrivals="none",
                                    period=T), ov)
            for L in sizes for T in periods]


def theta_trajectories(sizes=(20, 30, 50, 100), z=100.0, runs=20, horizon=FIG3_HORIZON,
                       dt=1.0, first_seed=0):
    """Average active-density trajectory per lattice side (``side = n + 1``)."""
    ts = np.round(np.arange(dt, horizon + dt / 2, dt), 10)
    out = {}
    for side in sizes:
        g = build_lattice(side - 1)
        acc = np.zeros(ts.size)
        for r in range(runs):
            res = simulate(g, PolicyConfig("classical", z=z), horizon, warmup=0.0,
                           seed=first_seed + r, sample_times=list(ts),
                           sampler=lambda s: s.active_density())
            acc += np.array([v for _, v in res.samples["series"]])
        out[side] = acc / runs
    return ts, out


def run_figure(name: str, overrides=None, out_dir=None, jobs: int = 1):
    """Run one figure recipe; writes CSV/JSON into ``out_dir`` when given."""
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; choose from {FIGURES}")
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    overrides = dict(overrides or {})

    if name == "fig3":
        sizes = tuple(overrides.pop("sizes", (20, 30, 50, 100)))
        runs = int(overrides.pop("runs", 20))
        z = float(overrides.pop("z", 100.0))
        horizon = float(overrides.pop("horizon", FIG3_HORIZON))
        ts, traj = theta_trajectories(sizes, z, runs, horizon)
        rows = [{"t": float(t), **{f"theta_{s}": float(traj[s][k]) for s in sizes}}
                for k, t in enumerate(ts)]
        sweep = SweepResult(rows, {"sizes": sizes, "runs": runs, "z": z})
        fit = compare_convergence(ts, traj[max(sizes)])
        sweep.meta["fit"] = fit.to_json()
        if out:
            sweep.to_csv(out / "fig3.csv")
            write_json(sweep.meta, out / "fig3_fit.json")
        return sweep

    if name == "snapshots":
        side = int(overrides.pop("side", 100))
        z = float(overrides.pop("z", 100.0))
        seed = int(overrides.pop("seed", 0))
        times = tuple(overrides.pop("times", (5.0, 50.0, 200.0)))
        g = build_lattice(side - 1)
        res = simulate(g, PolicyConfig("classical", z=z), max(times), warmup=0.0, seed=seed,
                       sample_times=list(times),
                       sampler=lambda s: (s.active_mask().copy(), s.idle_sensing_density()))
        rows = []
        for t, (mask, th) in res.samples["series"]:
            snap = snapshot(mask, g, t=t, theta_h=th)
            rows.append({"t": t, "theta": snap.theta, "delta": snap.delta, "R": snap.R_density,
                         "ratio1": snap.ratio1, "theta_h": th})
            if out:
                export_snapshot(g, mask, out / f"snapshot_t{t:g}.csv")
        sweep = SweepResult(rows, {"side": side, "z": z, "seed": seed})
        if out:
            export_diagnostics([(r["t"], r["theta"], r["delta"], r["R"], r["ratio1"], r["theta_h"])
                                for r in rows], out / "snapshots_diagnostics.csv")
        return sweep

    if name == "fig2a":
        configs = fig2a_configs(overrides)
    elif name in ("fig2b",):
        configs = fig2b_configs(overrides)
    elif name == "fig4":
        configs = fig4_configs(overrides)
    else:
        configs = congestion_configs(overrides)
    sweep = run_sweep(configs, jobs=jobs)
    if name == "fig4":
        means = sweep.mean_by("eps")
        eps = sorted(means)
        sweep.meta["fit"] = loglog_slope(eps, [means[e] for e in eps]).to_json()
    if name in ("fig2c", "fig6"):
        sweep.meta["fits"] = congestion_fits(sweep)
    if out:
        if name in ("fig2c", "fig6"):
            sweep.to_csv(out / f"{name}.csv",
                         ["eps_u", "mean_queue", "L", "seed", "T", "rho_u", "U_net",
                          "U_opt_bound", "config_hash", "version"])
        else:
            sweep.to_csv(out / f"{name}.csv")
        if sweep.meta.get("fit") or sweep.meta.get("fits"):
            write_json(sweep.meta, out / f"{name}_fit.json")
    return sweep


def congestion_fits(sweep: SweepResult) -> dict:
    """Per network size: slope of mean queue against 1/eps_u over periods.

    Periods whose mean ``eps_u`` is not in (0, 1) (a window still dominated by
    the initial admission transient) are left out and counted in ``excluded``.
    """
    fits = {}
    for L in sorted({r["L"] for r in sweep.rows}):
        rows = [r for r in sweep.rows if r["L"] == L]
        by_T = {}
        for r in rows:
            by_T.setdefault(r["T"], []).append((r["eps_u"], r["mean_queue"]))
        pts = sorted((np.mean([a for a, _ in v]), np.mean([b for _, b in v]))
                     for v in by_T.values())
        good = [p for p in pts if 0 < p[0] < 1 and p[1] > 0]
        if len(good) >= 4:
            fit = loglog_slope([p[0] for p in good], [p[1] for p in good]).to_json()
            fits[str(L)] = {**fit, "excluded": len(pts) - len(good)}
    return fits


def export_topology(graph, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_edges(graph, out / "edges.csv")
    export_coords(graph, out / "coords.csv")
