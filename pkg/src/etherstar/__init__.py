"""etherstar: star-product kernels and intrinsic dynamics on flat
phase space and the unit sphere.

Modules
-------
geometry   manifold models, forms, reflections, generating 1-form
ether      exponential map, flows, groupoid translations, fibration
kernel     midpoint triangles, membrane phase, determinant amplitude
starprod   Moyal calculus, covariant series, oscillatory quadrature
evolution  semiclassical evolution symbol and its operator oracle
suites     invariant check suites behind the check subcommand
cli        command-line front end
"""

from . import errors, geometry, ether, kernel, starprod, evolution, suites

__version__ = "0.1.0"

__all__ = ["errors", "geometry", "ether", "kernel", "starprod",
           "evolution", "suites", "__version__"]
