"""Dirichlet-Laplacian spectra of rough planar domains seen only through membership oracles."""

__version__ = "0.1.0"

from .eigensolve import EigenApprox, gamma_mat, jacobi_pencil, oishi_bound, pencil_oishi_bound, rayleigh_descent
from .enclosure import SpectrumEnclosure, compute_qm, enclose, error_terms, gamma_n, gamma_pix
from .fem import Mesh, Pencil, assemble, triangulate
from .geometry import DomainOracle, PixelDomain, pixelate
