"""Queue-priced admission control and utility accounting.

Each link admits fluid at the rate maximising ``U(xi)/nu - (Q / 2T) xi`` over
``[0, xi_max]``.  With ``U(r) = log(1 + r)`` the maximiser is
``clamp(2T / (nu Q) - 1, 0, xi_max)``; an empty queue admits ``xi_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError

XI_MAX_DEFAULT = 1.0


@njit(cache=True)
def admit_log(q, nu, T, xi_max):
    # interior optimum 1/(nu * price) - 1 with price Q/(2T); compare before dividing
    d = nu * q / (2.0 * T)
    if d * (1.0 + xi_max) <= 1.0:
        return xi_max
    if d >= 1.0:
        return 0.0
    return 1.0 / d - 1.0


def nu_for_period(T: float) -> float:
    if T <= 0:
        raise ConfigError("period must be positive")
    return 1.0 / math.sqrt(2.0 * T)


@dataclass(frozen=True)
class FlowController:
    nu: float
    T: float
    xi_max: float = XI_MAX_DEFAULT
    utility: str = "log1p"

    def __post_init__(self):
        if self.nu <= 0 or self.xi_max <= 0 or self.T <= 0:
            raise ConfigError("nu, T and xi_max must be positive")
        if self.utility != "log1p":
            raise ConfigError(f"unsupported utility {self.utility!r}")

    @classmethod
    def for_period(cls, T: float, xi_max: float = XI_MAX_DEFAULT) -> "FlowController":
        return cls(nu_for_period(T), T, xi_max)


def admit(controller: FlowController, Q: float) -> float:
    if Q < 0:
        raise ConfigError("backlog must be non-negative")
    return admit_log(float(Q), controller.nu, controller.T, controller.xi_max)


def admit_grid_search(controller: FlowController, Q: float, step: float = 1e-4) -> float:
    """Brute-force maximiser on a grid, used as an oracle for :func:`admit`."""
    xs = np.arange(0.0, controller.xi_max + step / 2, step)
    obj = np.log1p(xs) / controller.nu - Q / (2 * controller.T) * xs
    return float(xs[np.argmax(obj)])


@dataclass(frozen=True)
class UtilityReport:
    U_net: float
    U_opt_bound: float
    rho_u: float
    eps_u: float
    per_link_rates: np.ndarray
    r_L: float
    bound_flag: str = "exact"
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "U_net": self.U_net,
            "U_opt_bound": self.U_opt_bound,
            "rho_u": self.rho_u,
            "eps_u": self.eps_u,
            "per_link_rates": [float(r) for r in self.per_link_rates],
            "r_L": self.r_L,
            "r_L_flag": self.bound_flag,
            "bound_kind": "conservative estimate",
        }


def utility_ratio(admitted_rates, stats) -> UtilityReport:
    """``rho_u = sum log(1 + r_l) / (L log(1 + r_L))`` with ``r_L`` from topology stats."""
    rates = np.asarray(admitted_rates, dtype=float)
    if np.any(rates < 0):
        raise ConfigError("rates must be non-negative")
    L = rates.size
    r_L = stats if isinstance(stats, float) else stats.max_schedule_size / L
    flag = "exact" if isinstance(stats, float) else stats.flag
    U_net = float(np.sum(np.log1p(rates)))
    bound = L * math.log1p(r_L)
    rho = U_net / bound if bound > 0 else 0.0
    return UtilityReport(U_net, bound, rho, float(min(max(1.0 - rho, 0.0), 1.0)), rates,
                         float(r_L), flag)
