"""Numerical experiments on Bernstein-type inequalities for polynomials
restricted to graphs of entire maps."""

from .errors import *  # noqa: F401,F403
from .numerics import LogComplex, TaylorSeries, log_sum_exp_complex, series_eval, series_exp
from .functions import CurveSpec, EntireFunctionSpec, GrowthProfile, HSpec, growth_m, growth_phi, growth_profile
from .restriction import GraphPolynomial, kernel_vanishing_poly, restrict_to_graph
from .quotient import QuotientEstimate, extremal_quotient, random_search
from .zeros import count_zeros_argument, jensen_upper_bound, lower_bound_experiment
from .conditions import ConditionReport, check_condition_I, check_condition_II
from .expfit import ExponentFit, fit_exponent, theoretical_exponent

__version__ = "0.1.0"
