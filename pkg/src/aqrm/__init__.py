"""Thermal-equilibrium quantumness of the anisotropic quantum Rabi model.

Submodules: ``fockspace`` (operators), ``spectrum`` (Hamiltonian and
eigensystem), ``dissipator`` (dressed master equation), ``quantifiers``
(correlation and nonclassicality measures), ``sweep`` (grid runs) and
``cli`` (command-line entry point).
"""

from .errors import (
    AQRMError,
    DimensionError,
    EigensolverError,
    GridCoverageError,
    IntegrationError,
    SteadyStateError,
    UndefinedQuantityError,
)
from .fockspace import HilbertConfig
from .spectrum import ModelParams, SpectralData, build_hamiltonian, solve
from .dissipator import BathParams, build_generator, gibbs_state, steady_state

__version__ = "0.1.0"

__all__ = [
    "AQRMError",
    "BathParams",
    "DimensionError",
    "EigensolverError",
    "GridCoverageError",
    "HilbertConfig",
    "IntegrationError",
    "ModelParams",
    "SpectralData",
    "SteadyStateError",
    "UndefinedQuantityError",
    "build_generator",
    "build_hamiltonian",
    "gibbs_state",
    "solve",
    "steady_state",
]
