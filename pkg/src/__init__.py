"""
gramsos - exact sum-of-squares certificates

Low-rank Gram matrix completion (fixed-point continuation with
Barzilai-Borwein steps and Nesterov acceleration), Gauss-Newton
refinement and exact rational certification of polynomial SOS
decompositions.
"""

__version__ = "1.0.0"
__author__ = "gramsos developers"

# Make key components easily importable
try:
    from src.core.polynomial import Polynomial, parse_polynomial
    from src.core.gram_map import build_basis, build_constraints
    from src.core.solver import SolverConfig, solve
    from src.core.exact import certify, exact_certificate
    from src.core.pipeline import prove_sos
except ImportError:
    # numpy/scipy missing: metadata stays importable
    pass

__all__ = [
    'Polynomial',
    'parse_polynomial',
    'build_basis',
    'build_constraints',
    'SolverConfig',
    'solve',
    'certify',
    'exact_certificate',
    'prove_sos',
]
