"""
MRTS: optically driven spin dynamics of a radical / triplet-coupler / radical molecule.
Lindblad propagation, time-resolved EPR spectra with powder averaging, and exchange
couplings from total-energy tables.
"""

from .core.constants import ARTIFACT_VERSION

__version__ = ARTIFACT_VERSION
