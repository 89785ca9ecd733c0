"""Numerical laboratory for the radial defocusing semilinear wave equation.

Submodules: ``mathlib`` (constants and quadrature), ``solver`` (radial
finite-volume leapfrog), ``energy``, ``flux``, ``estimates``,
``scattering`` and the ``cli``.
"""

__version__ = "0.1.0"
