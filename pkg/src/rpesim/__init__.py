"""Classical simulator for repeated phase estimation of Schroedinger ground energies."""

from .grid import GridSpec, HamiltonianTerms, PotentialSpec, assemble_hamiltonian, potential_bounds
from .spectral import Spectrum, eigendecompose, fundamental_gap, overlap
from .suzuki import SuzukiPlan, plan, suzuki_coefficients

__version__ = "0.1.0"
