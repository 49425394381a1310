"""Wave operators of a central potential, channel by channel.

The package builds W- in the spectral representation of the free Laplacian
in two ways (the exact factorisation through the T-operator and the formula
1 + theta(A+)(S - 1)), measures their difference, and checks both against
stationary and time-dependent oracles.

Top-level names are loaded lazily so the CLI can size BLAS thread pools
before numpy is imported.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "LogEnergyGrid": "grids",
    "RadialGrid": "grids",
    "make_log_energy_grid": "grids",
    "make_radial_grid": "grids",
    "Potential": "potentials",
    "REGISTRY": "potentials",
    "exponential": "potentials",
    "gaussian": "potentials",
    "square_well": "potentials",
    "zero": "potentials",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
