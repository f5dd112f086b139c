"""Gradients of function networks by belief propagation on a lifted factor graph.

A network of scalar primitives is lifted to a factor graph with one delta
factor per function, a delta prior per input and a Boltzmann factor on the
objective. Sum-product messages on that graph carry, in their log-slopes, the
same adjoints reverse-mode autodiff computes.

>>> from liftprop import BPConfig, example_network, extract_adjoints_delta, lift_network, run_bp
>>> cfg = BPConfig(kT=1.0)
>>> fg = lift_network(example_network(), cfg)
>>> extract_adjoints_delta(fg, run_bp(fg, cfg))["t"]
24.0
"""

from .adjoint import (
    AdjointReport,
    EdgeInvariantResidual,
    NotConvergedError,
    check_edge_invariants,
    cross_method_report,
    extract_adjoint_smoothed,
    extract_adjoints_delta,
    extract_adjoints_smoothed,
)
from .autodiff import EvaluationError, backprop, evaluate, finite_diff_gradient, gradient
from .bp import (
    AnchorMismatchError,
    BPError,
    ConvergenceError,
    MissingMessageError,
    compute_posterior,
    run_bp,
)
from .config import BPConfig, Flooding, Mode, TwoPass
from .corpus import example_network, random_corpus, random_network
from .estimators import BackpropGradient, BeliefPropagationGradient, FiniteDifferenceGradient
from .lift import BoltzmannPrior, DeltaPrior, FactorGraph, FunctionFactor, lift_network
from .messages import AnchorSlope, Direction, GaussianParam, GridLog, MessageStore, PointMass
from .netir import (
    CycleError,
    FuncNode,
    FunctionNetwork,
    NetworkError,
    ParseError,
    load_network,
    parse_network,
    to_dsl,
    topo_order,
    validate_network,
)
from .primitives import Primitive

__version__ = "0.1.0"
