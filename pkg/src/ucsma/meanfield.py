"""Mean-field density ODEs and their comparison with simulated trajectories.

State ``x = (x1, x2, x3, x4)``.  With ``delta = 0.5 - x1`` the full system is
``dx/dt = A x + f(x)`` where

    A = [[-1, 3z, z, z], [0, -3z, 0, 0], [0, 2z, -z, 0], [1, 0, 0, -z]]
    f = (0, c_R delta^3, 0, -c_R delta^3)

The reduced system replaces the first row of ``A`` by zeros and uses
``f1 = (2/3) c_R delta^3``, so ``y1`` decouples and has the closed form
``0.5 - alpha (1 + beta (t - t1))^(-1/2)`` with ``alpha = 0.5 - y1(t1)`` and
``beta = (4 c_R / 3) alpha^2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, DivergenceError

C_R_DEFAULT = 1.0
BOX = (-1.0, 1.5)


@dataclass(frozen=True)
class OdeParams:
    z: float
    c_R: float = C_R_DEFAULT
    h: float | None = None
    t0: float = 0.0
    tau: float = 100.0

    def __post_init__(self):
        if not (self.z > 0 and self.c_R > 0):
            raise ConfigError("z and c_R must be positive")
        if self.h is not None and self.h <= 0:
            raise ConfigError("step must be positive")

    @property
    def step(self) -> float:
        return self.h if self.h is not None else stable_step(self.z)


def stable_step(z: float) -> float:
    return min(0.01, 0.1 / z)


def matrix_A(z: float) -> np.ndarray:
    return np.array([[-1.0, 3 * z, z, z],
                     [0.0, -3 * z, 0.0, 0.0],
                     [0.0, 2 * z, -z, 0.0],
                     [1.0, 0.0, 0.0, -z]])


def matrix_A_reduced(z: float) -> np.ndarray:
    A = matrix_A(z)
    A[0] = 0.0
    return A


def rhs_x(x, params: OdeParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    c = params.c_R * (0.5 - x[0]) ** 3
    return matrix_A(params.z) @ x + np.array([0.0, c, 0.0, -c])


def rhs_y(y, params: OdeParams) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    c = params.c_R * (0.5 - y[0]) ** 3
    return matrix_A_reduced(params.z) @ y + np.array([2.0 * c / 3.0, c, 0.0, -c])


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # (len(t), dim)
    info: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.y.shape[1])])
            for ti, yi in zip(self.t, self.y):
                w.writerow([repr(float(ti))] + [repr(float(v)) for v in yi])


def integrate(rhs, y0, t0: float, tau: float, h: float, sample_times=None,
              box=BOX) -> Trajectory:
    """Classical fixed-step RK4 from ``t0`` to ``t0 + tau``.

    ``rhs`` takes the state only.  Between consecutive sample times the step
    is shrunk uniformly so every sample lies on the grid.
    """
    if h <= 0 or tau < 0:
        raise ConfigError("need h > 0 and tau >= 0")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if sample_times is None:
        n = max(1, int(math.ceil(tau / h - 1e-9)))
        sample_times = t0 + tau * np.arange(n + 1) / n
    ts = np.asarray(sample_times, dtype=float)
    if ts.size and (ts[0] < t0 - 1e-12 or np.any(np.diff(ts) < 0)):
        raise ConfigError("sample times must be sorted and start at or after t0")
    out = np.empty((ts.size, y.size))
    t = t0
    for i, ts_i in enumerate(ts):
        span = ts_i - t
        if span > 0:
            n = int(math.ceil(span / h - 1e-9))
            hh = span / n
            for _ in range(n):
                y = _rk4(rhs, y, hh)
                if not np.all(np.isfinite(y)) or np.any(y < box[0]) or np.any(y > box[1]):
                    raise DivergenceError(f"state left the admissible box near t={t:.4g}")
            t = ts_i
        out[i] = y
    return Trajectory(ts, out, {"h": h})


def integrate_x(x0, params: OdeParams, sample_times=None) -> Trajectory:
    return integrate(lambda x: rhs_x(x, params), x0, params.t0, params.tau, params.step,
                     sample_times)


def integrate_y(y0, params: OdeParams, sample_times=None) -> Trajectory:
    return integrate(lambda y: rhs_y(y, params), y0, params.t0, params.tau, params.step,
                     sample_times)


def y1_closed_form(y1_t1: float, c_R: float, t1: float, t):
    if not 0 < y1_t1 < 0.5:
        raise ConfigError("y1(t1) must lie in (0, 0.5)")
    t = np.asarray(t, dtype=float)
    if np.any(t < t1):
        raise ConfigError("closed form only defined for t >= t1")
    alpha = 0.5 - y1_t1
    beta = 4.0 * c_R / 3.0 * alpha ** 2
    return 0.5 - alpha * (1.0 + beta * (t - t1)) ** -0.5


def quasi_steady_state(x1: float, z: float, c_R: float = C_R_DEFAULT) -> np.ndarray:
    """Initial condition with the fast components at their equilibrium given ``x1``.

    ``x2 = c delta^3/(3z)``, ``x3 = 2 c delta^3/(3z)``, ``x4 = (x1 - c delta^3)/z``.
    """
    c = c_R * (0.5 - x1) ** 3
    return np.array([x1, c / (3 * z), 2 * c / (3 * z), (x1 - c) / z])


def in_well_defined_region(traj: Trajectory, tol: float = 1e-6) -> bool:
    return bool(np.all(traj.y >= -tol) and np.all(traj.y <= 0.5 + tol))


# ---------------------------------------------------------------- fitting


def _law(t, a, b):
    return a * (1.0 + b * t) ** -0.5


@dataclass(frozen=True)
class ConvergenceFit:
    a: float
    b: float
    r2: float
    rmse: float
    C1: float
    residuals: np.ndarray
    n: int

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "r2": self.r2, "rmse": self.rmse, "C1": self.C1,
                "n": self.n, "residuals": [float(r) for r in self.residuals]}

    def delta(self, t):
        return _law(np.asarray(t, dtype=float), self.a, self.b)


def compare_convergence(t, theta=None, *, delta=None, p0=(0.1, 0.4)) -> ConvergenceFit:
    """Fit ``delta(t) = a (1 + b t)^(-1/2)`` and the smallest ``C1`` with ``delta <= C1/sqrt(t)``.

    Pass either the active density ``theta`` (then ``delta = 0.5 - theta``) or ``delta``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(delta if delta is not None else 0.5 - np.asarray(theta), dtype=float)
    if t.size < 10:
        raise ConfigError("need at least 10 samples")
    if np.any(t <= 0):
        raise ConfigError("sample times must be positive")
    C1 = float(max(0.0, np.max(d * np.sqrt(t))))
    if np.allclose(d, 0.0):
        return ConvergenceFit(0.0, 0.0, 1.0, 0.0, 0.0, np.zeros_like(d), t.size)
    (a, b), _ = curve_fit(_law, t, d, p0=p0, bounds=([0.0, 0.0], [np.inf, np.inf]),
                          xtol=1e-14, ftol=1e-14, gtol=1e-14, maxfev=20000)
    res = d - _law(t, a, b)
    ss_tot = float(np.sum((d - d.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceFit(float(a), float(b), r2, float(np.sqrt(np.mean(res ** 2))), C1, res,
                          t.size)
