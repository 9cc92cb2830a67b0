"""Small statistics helpers: log-log slopes, batch means, fit reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError

DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    n: int

    def to_json(self) -> dict:
        return asdict(self)


def loglog_slope(eps, queues) -> SlopeFit:
    """OLS of ``log(queue)`` on ``log(1/eps)``."""
    eps = np.asarray(eps, dtype=float)
    q = np.asarray(queues, dtype=float)
    if eps.size < 4 or eps.size != q.size:
        raise ConfigError("a slope fit needs at least 4 matching points")
    if np.any((eps <= 0) | (eps >= 1)) or np.any(q <= 0):
        raise ConfigError("need eps in (0, 1) and positive queues")
    res = stats.linregress(np.log(1.0 / eps), np.log(q))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr),
                    float(res.rvalue ** 2), int(eps.size))


def batch_means_ci(series, batches: int = DEFAULT_BATCHES, level: float = 0.95):
    """``(mean, halfwidth)`` from non-overlapping batch means with a Student-t quantile.

    Trailing samples that do not fill a batch are dropped.
    """
    x = np.asarray(series, dtype=float)
    if batches < 5:
        raise ConfigError("need at least 5 batches")
    if x.size < batches:
        raise ConfigError("series shorter than the number of batches")
    m = x.size // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return batch_stats(means, level)


def batch_stats(means, level: float = 0.95):
    """``(mean, halfwidth)`` given per-batch means (works along axis 0)."""
    means = np.asarray(means, dtype=float)
    b = means.shape[0]
    center = means.mean(axis=0)
    sd = means.std(axis=0, ddof=1)
    q = stats.t.ppf(0.5 + level / 2, b - 1)
    return center, q * sd / np.sqrt(b)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o)}")
