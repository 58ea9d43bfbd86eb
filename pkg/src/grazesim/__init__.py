"""Stochastic dynamics near grazing bifurcations.

The Nordmark map with additive Gaussian noise, its maximal periodic
solutions and their Gaussian covariance approximations, Monte Carlo
invariant densities, small-noise exit statistics, and a compliant impact
oscillator whose Poincare map reduces to the Nordmark normal form.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("grazesim")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import ConfigError, GrazesimError, NumericalError
from .noise import NoiseSpec, NoiseStream, split
from .nordmark import MapParams, iterate, left_fixed_point
from .oscillator import OscillatorParams, OscState, derive_normal_form, simulate_sde
from .periodic import PeriodicSolution, attracting_solutions, maximal_solutions
from .smallmat import SymMat2

__all__ = [
    "ConfigError", "GrazesimError", "NumericalError",
    "NoiseSpec", "NoiseStream", "split",
    "MapParams", "iterate", "left_fixed_point",
    "OscillatorParams", "OscState", "derive_normal_form", "simulate_sde",
    "PeriodicSolution", "attracting_solutions", "maximal_solutions",
    "SymMat2", "__version__",
]
