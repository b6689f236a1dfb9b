"""Gauge-invariant dissipative cavity-QED in the ultrastrong-coupling regime.

Builds quantum Rabi Hamiltonians in the dipole and Coulomb gauges, dressed
master equations with and without the gauge correction of the bath-coupling
quadrature, and the resulting emission spectra, excitation numbers and
second-order photon correlations.
"""

__version__ = "0.1.0"

from .hilbert import OperatorMatrix, SpaceDescriptor, annihilation, fock_space, pauli
from .models import GaugeChoice, ModelParams, PumpSpec
from .dressing import DressedBasis, JumpOperator, diagonalize, jump_operator
from .dynamics import BathModel, EvolutionSpec, Trajectory, evolve, steady_state
from .correlations import CorrelationResult, SpectrumResult, cavity_spectrum, n_cav

__all__ = [
    "__version__",
    "OperatorMatrix", "SpaceDescriptor", "annihilation", "fock_space", "pauli",
    "GaugeChoice", "ModelParams", "PumpSpec",
    "DressedBasis", "JumpOperator", "diagonalize", "jump_operator",
    "BathModel", "EvolutionSpec", "Trajectory", "evolve", "steady_state",
    "CorrelationResult", "SpectrumResult", "cavity_spectrum", "n_cav",
]
