"""Command line entry point: ``sim run|sweep|figure|odecheck|snapshot``.

Config files are YAML mappings whose keys mirror the long flags (``delta-b`` or
``delta_b``).  Flags given on the command line override the file.  A ``sweep``
mapping of key -> list in the file expands into the cartesian product.

Exit codes: 0 success, 2 configuration error, 3 divergence or calibration failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import CalibrationError, ConfigError, DivergenceError
from .meanfield import (OdeParams, in_well_defined_region, integrate_x, integrate_y,
                        quasi_steady_state, y1_closed_form)
from .metrics import write_json
from .runner import FIGURES, ExperimentConfig, run_figure, run_sweep

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# flag name -> ExperimentConfig key
_FLAG_KEYS = {
    "topology": "topology", "n": "n", "L": "L", "z": "z", "load": "load",
    "policy": "policy", "period": "period", "delta_b": "delta_b", "nu": "nu",
    "horizon": "horizon", "warmup": "warmup", "seeds": "seeds",
}


def parse_seeds(text) -> tuple:
    """``"3"`` -> (3,), ``"0,2,5"`` -> (0, 2, 5), ``"0:10"`` -> 0..9."""
    if isinstance(text, (list, tuple)):
        return tuple(int(s) for s in text)
    if isinstance(text, int):
        return (text,)
    text = str(text).strip()
    try:
        if ":" in text:
            a, b = text.split(":")
            seeds = tuple(range(int(a), int(b)))
        else:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _gather(args) -> dict:
    d = load_config_file(args.config) if args.config else {}
    for flag, key in _FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    if getattr(args, "seed", None) is not None:
        d["seeds"] = (args.seed,)
    if "seeds" in d:
        d["seeds"] = parse_seeds(d["seeds"])
    if "seed" in d:
        d["seeds"] = parse_seeds(d.pop("seed"))
    return d


def build_config(d: dict) -> ExperimentConfig:
    d = dict(d)
    d.pop("sweep", None)
    d.pop("out", None)
    if d.get("nu") is not None:
        d.setdefault("congestion", True)
    if d.get("policy") == "ucsma-adaptive" or d.get("congestion"):
        d.setdefault("arrivals", "none")
    if d.get("congestion"):
        d.setdefault("load", None)
    return ExperimentConfig.from_dict(d)


def expand_sweep(d: dict) -> list:
    grid = d.get("sweep") or {}
    if not isinstance(grid, dict):
        raise ConfigError("'sweep' must map keys to lists")
    keys = sorted(grid)
    values = [v if isinstance(v, list) else [v] for v in (grid[k] for k in keys)]
    configs = []
    for combo in itertools.product(*values):
        dd = dict(d)
        dd.update({k.replace("-", "_"): v for k, v in zip(keys, combo)})
        configs.append(build_config(dd))
    return configs


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _summary(sweep, configs) -> dict:
    q = [r["mean_queue"] for r in sweep.rows]
    out = {"version": __version__, "rows": len(sweep.rows),
           "mean_queue": float(np.mean(q)) if q else None,
           "configs": [c.to_dict() for c in configs],
           "config_hashes": [c.config_hash() for c in configs]}
    for key in ("rho_u", "eps_u", "theta"):
        vals = [r[key] for r in sweep.rows if r.get(key) is not None]
        if vals:
            out[key] = float(np.mean(vals))
    if sweep.meta.get("fit") or sweep.meta.get("fits"):
        out["fit"] = sweep.meta.get("fit") or sweep.meta.get("fits")
    return out


def _emit(summary: dict, out: Path | None, name: str) -> None:
    if out:
        write_json(summary, out / f"{name}_summary.json")
    print(json.dumps(summary, indent=2, sort_keys=True, default=_plain))


def _plain(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    d = _gather(args)
    d["seeds"] = d.get("seeds", (0,))[:1]
    cfg = build_config(d)
    sweep = run_sweep([cfg], jobs=1)
    out = _out_dir(args)
    if out:
        sweep.to_csv(out / "run.csv")
    _emit(_summary(sweep, [cfg]), out, "run")
    return 0


def cmd_sweep(args) -> int:
    d = _gather(args)
    configs = expand_sweep(d)
    sweep = run_sweep(configs, jobs=args.jobs)
    out = _out_dir(args)
    if out:
        sweep.to_csv(out / "sweep.csv")
    _emit(_summary(sweep, configs), out, "sweep")
    return 0


def cmd_figure(args) -> int:
    overrides = load_config_file(args.config) if args.config else {}
    for flag in ("horizon", "warmup", "z", "nu", "delta_b"):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[flag] = v
    if args.seeds is not None:
        overrides["seeds"] = parse_seeds(args.seeds)
    if args.seed is not None:
        overrides["seed" if args.name == "snapshots" else "seeds"] = (
            args.seed if args.name == "snapshots" else (args.seed,))
    if "seeds" in overrides:
        overrides["seeds"] = parse_seeds(overrides["seeds"])
    if args.name in ("fig3", "snapshots"):
        for k in ("warmup", "nu", "delta_b"):
            overrides.pop(k, None)
        if args.name == "fig3" and "seeds" in overrides:
            overrides["runs"] = len(overrides.pop("seeds"))
        if args.name == "snapshots":
            overrides.pop("horizon", None)
            if "seeds" in overrides:
                overrides["seed"] = overrides.pop("seeds")[0]
    sweep = run_figure(args.name, overrides, out_dir=_out_dir(args), jobs=args.jobs)
    summary = {"figure": args.name, "version": __version__, "rows": len(sweep.rows),
               "meta": sweep.meta}
    _emit(summary, _out_dir(args), args.name)
    return 0


def cmd_odecheck(args) -> int:
    d = load_config_file(args.config) if args.config else {}
    z = float(args.z if args.z is not None else d.get("z", 100.0))
    c_R = float(d.get("c_R", args.c_R))
    x1 = float(d.get("x1", args.x1))
    tau = float(args.horizon if args.horizon is not None else d.get("tau", 100.0))
    params = OdeParams(z=z, c_R=c_R, tau=tau)
    y0 = quasi_steady_state(x1, z, c_R)
    n = max(10, int(round(tau)))
    ts = np.linspace(0.0, tau, n + 1)
    ty = integrate_y(y0, params, ts)
    tx = integrate_x(y0, params, ts)
    closed = y1_closed_form(x1, c_R, 0.0, ts)
    err = float(np.max(np.abs(ty.y[:, 0] - closed)))
    summary = {"z": z, "c_R": c_R, "x1": x1, "tau": tau, "h": params.step,
               "max_abs_error_y1": err,
               "x_well_defined": in_well_defined_region(tx),
               "y_well_defined": in_well_defined_region(ty),
               "x1_final": float(tx.y[-1, 0]), "y1_final": float(ty.y[-1, 0]),
               "version": __version__}
    out = _out_dir(args)
    if out:
        tx.to_csv(out / "ode_x.csv")
        ty.to_csv(out / "ode_y.csv")
    _emit(summary, out, "odecheck")
    return 0


def cmd_snapshot(args) -> int:
    d = load_config_file(args.config) if args.config else {}
    overrides = {"side": int(args.n + 1) if args.n is not None else int(d.get("side", 100)),
                 "z": float(args.z if args.z is not None else d.get("z", 100.0)),
                 "seed": int(args.seed if args.seed is not None else d.get("seed", 0))}
    times = args.times or d.get("times")
    if times:
        overrides["times"] = tuple(float(t) for t in
                                   (times.split(",") if isinstance(times, str) else times))
    out = _out_dir(args)
    sweep = run_figure("snapshots", overrides, out_dir=out)
    _emit({"version": __version__, "snapshots": sweep.rows, **overrides}, out, "snapshot")
    return 0


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file with keys mirroring the flags")
    p.add_argument("--topology", choices=("lattice", "torus", "rgg"))
    p.add_argument("--n", type=int, help="grid parameter; the grid has (n+1)^2 links")
    p.add_argument("--L", type=int, help="number of links (random geometric)")
    p.add_argument("--z", type=float, help="attempt rate")
    p.add_argument("--load", type=float, help="load rho in (0, 1)")
    p.add_argument("--policy", choices=("classical", "ucsma-ideal", "ucsma-distributed",
                                        "ucsma-adaptive"))
    p.add_argument("--period", type=float, help="unlocking period T")
    p.add_argument("--delta-b", dest="delta_b", type=float, help="busy-tone delay")
    p.add_argument("--nu", type=float, help="congestion-control step")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="e.g. 0,1,2 or 0:10")
    p.add_argument("--horizon", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--out", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="CSMA / U-CSMA simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one seed of one configuration")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="all seeds of a configuration grid")
    _common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="reproduce one figure recipe")
    p.add_argument("name", choices=FIGURES)
    _common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("odecheck", help="integrate the mean-field ODEs against the closed form")
    _common(p)
    p.add_argument("--x1", type=float, default=0.3, help="initial active density")
    p.add_argument("--c-R", dest="c_R", type=float, default=1.0)
    p.set_defaults(func=cmd_odecheck)

    p = sub.add_parser("snapshot", help="active-set snapshots and cluster diagnostics")
    _common(p)
    p.add_argument("--times", help="comma separated sample times")
    p.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
