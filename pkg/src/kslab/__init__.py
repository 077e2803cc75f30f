"""kslab: a numerical laboratory for regularized 2D aggregation dynamics.

Two regularizations of the parabolic-elliptic chemotaxis system (saturated
advective flux, degenerate extra diffusion) integrated conservatively on
the unit disk (radial) and on rectangles, with the Neumann Green's
function machinery, boundary-adapted test functions, weak-form residual
decomposition, and critical-mass (8 pi) atom diagnostics built around
them.
"""

__version__ = "0.1.0"

from . import diagnostics, geometry, greens, solver, sweep, testfn, weakform  # noqa: F401
