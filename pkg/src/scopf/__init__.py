"""Probabilistic security-constrained optimal power flow with corrective
post-contingency stages, fast single-outage screening, and a monolithic
cross-check formulation."""

__version__ = "0.1.0"

from .network import (Bus, Branch, Generator, Demand, Network, Violation,
                      load_case, save_case, validate, validation_errors)
from .linalg import SystemMatrices, build_matrices, base_flows, bus_injections, \
    ptdf_row, ptdf_matrix
from .contingency import (Contingency, ContingencyFlows, ScreenRecord,
                          contingency_list, detect_islanding, contingency_flows,
                          method1_theta, method2_theta, method3_ptdf_row,
                          method4_ptdf_row, screen_and_rank)
from .cases import ieee_rts24, synthetic_grid, get_case, merit_order_dispatch, \
    nominal_injections
from .lp import LinearProgram, LPSolution
from .scopf import (ScopfConfig, ScopfSolution, VerificationReport, VARIANTS,
                    solve_scopf, solve_monolithic, build_monolithic,
                    verify_solution, solution_to_dict, solution_from_dict,
                    to_canonical_json)
from . import errors
