"""Exception types shared across the package.

The CLI maps ``ConfigError`` to exit code 2 and the two runtime failures
(``CalibrationError``, ``DivergenceError``) to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid parameters or configuration."""


class UnsupportedTopologyError(ConfigError):
    """Operation requested on a topology it is not defined for."""


class CalibrationError(RuntimeError):
    """A calibration loop (range, attempt rate) could not reach its target."""


class DivergenceError(RuntimeError):
    """A numerical integration left its admissible region."""
