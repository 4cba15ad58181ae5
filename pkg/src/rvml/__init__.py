"""Numerical toolkit for the linearized relativistic Vlasov-Maxwell-Landau system.

Modules: kernel (collision kernel and quadrature), operators (linearized
collision operators and weighted norms), geometry (boundary charts and
momentum maps), maxwell (periodic field solver), compat (initial-data
compatibility sequence), driver (kinetic stepper and Picard iteration),
cli (command line).
"""

__version__ = "0.1.0"
