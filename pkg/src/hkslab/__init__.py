"""Numerical laboratory for a hyperbolic consumption-chemotaxis system.

Modules:
  core         grids, fields, discrete calculus, norm diagnostics
  transform    gradient-of-log substitution, scalings, parabolic rescaling
  solver       finite-volume evolution with CFL stepping and blow-up guards
  riemann      Riemann-invariant coordinates via characteristic ODEs
  blowup       admissibility checks, characteristic tracing, Riccati bounds
  propagation  finite-speed-of-propagation verification
  scenarios    data builders, experiment orchestration, reports, config
"""

__version__ = "0.1.0"
