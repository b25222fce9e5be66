"""
Security analysis: the yield linear program, the bound on Eve's information and the key rate.
"""

from .eve_bound import EveBound, build_lp, max_holevo
from .key_rate import RatePoint, binary_entropy, plob_bound, secret_key_rate
from .lp_core import LinearProgram, LpSolution, solve_lp

__all__ = [
    "EveBound",
    "build_lp",
    "max_holevo",
    "RatePoint",
    "binary_entropy",
    "plob_bound",
    "secret_key_rate",
    "LinearProgram",
    "LpSolution",
    "solve_lp",
]
