"""Free path lengths in periodic Lorentz gases and directional statistics of lattice points."""
from .lattice import (AffineLatticeSpec, Cone, ConvexPolygon, Cylinder, Irrational, Rational, Rect,
                      ShellSpec, UnimodularBasis, cone_aperture, enumerate_shell, is_visible, kappa,
                      points_in_region, reduce_basis_2d, square_lattice)

__version__ = "0.1.0"

__all__ = [
    "AffineLatticeSpec", "Cone", "ConvexPolygon", "Cylinder", "Irrational", "Rational", "Rect",
    "ShellSpec", "UnimodularBasis", "cone_aperture", "enumerate_shell", "is_visible", "kappa",
    "points_in_region", "reduce_basis_2d", "square_lattice", "__version__",
]
