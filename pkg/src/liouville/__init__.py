"""Numerical Liouville-type tests for higher-order differential inequalities."""
from .nonlinearity import NonlinearityExpr, check_admissible, evaluate, parse, render
from .quadrature import IntegralVerdict, Status, big_G, classical_ko, improper_integral
from .conditions import ProblemSpec, Outcome, classify, g_inverse_of_G, mean_bound
from .simulator import Jet, RadialProfile, integrate_radial, verify_counterexample

__version__ = "0.1.0"

__all__ = [
    "NonlinearityExpr", "parse", "render", "evaluate", "check_admissible",
    "IntegralVerdict", "Status", "improper_integral", "big_G", "classical_ko",
    "ProblemSpec", "Outcome", "classify", "g_inverse_of_G", "mean_bound",
    "Jet", "RadialProfile", "integrate_radial", "verify_counterexample",
    "__version__",
]
