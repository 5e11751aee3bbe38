"""Desk-scale simulation of quantum topological data analysis.

Vietoris-Rips filtrations over bitmask simplices, exact boundary / Dirac /
Laplacian operators, an exact classical homology oracle, and a statevector
emulation of simplex-state preparation and phase-estimation Betti estimation.
"""

__version__ = "0.1.0"
