"""Constrained Hamiltonian analysis, gauging and gauge-orbit numerics for finite-dimensional systems."""

from . import dirac_chain, gaugeprin, mechmodel, modelfile, numlab, symkernel
from .dirac_chain import classify, fix_gauge, stabilize
from .gaugeprin import LieGroupAction, gauge_lagrangian, local_structure_equiv, observable_check, verify_local_invariance
from .mechmodel import LocalTransformation, ModelSpec, euler_lagrange, legendre
from .modelfile import bundled, load, loads
from .numlab import compare_orbits, drift, integrate

__version__ = "0.1.0"
