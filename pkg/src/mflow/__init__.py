"""High-order energy-stable variational time stepping for gradient flows.

Subpackages by theme: ``schemes`` (exact-rational coefficient tables,
consistency order), ``certificates`` (graph-decomposition stability
certificates), ``flow`` (generic stepping engine), ``euclidean`` (quadratic
test space with exact flow), ``wasserstein`` (1-D optimal-transport space in
quantile coordinates), ``experiments`` (convergence tables and energy
traces), ``cli`` (the ``mflow`` command).
"""
__version__ = "0.1.0"

from .schemes import (SchemeCoefficients, builtin_scheme, builtin_scheme_names,
                      consistency_vars, shifted_weights, weights)
from .certificates import (SubgraphDecomposition, builtin_decomposition,
                           certify_bounded, certify_dissipative)
from .flow import FlowState, Trajectory, run, step
from .euclidean import EuclideanQuadratic, euclidean_exact_flow
from .wasserstein import (EnergyFunctional, QuantileFunction, Wasserstein1D,
                          w2_distance_squared)
