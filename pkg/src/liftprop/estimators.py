"""scikit-learn style gradient transformers.

Each estimator wraps one way of computing the gradient of a network's
objective. ``fit`` checks the network and the input layout; ``transform``
maps input points ``X`` of shape ``(n_samples, n_inputs)`` to gradients of
the same shape (or to adjoints of every variable with ``wrt="variables"``);
``predict`` returns the objective values. Hyper-parameters live in
``__init__`` so ``get_params``/``set_params``/``clone`` and grid searches work.

Example
-------
>>> from liftprop.corpus import EXAMPLE_DSL
>>> est = BeliefPropagationGradient(EXAMPLE_DSL).fit()
>>> est.transform([[2.0, 1.0, 3.0]])
array([[ 3., 24.,  3.]])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .adjoint import extract_adjoints_delta, extract_adjoints_smoothed
from .autodiff import backprop, evaluate, finite_diff_gradient
from .bp import compute_posterior, run_bp
from .config import BPConfig, Flooding, Mode, TwoPass
from .lift import lift_network
from .validation import check_input_points, check_network

__all__ = ["BackpropGradient", "FiniteDifferenceGradient", "BeliefPropagationGradient"]


class _GradientTransformer(TransformerMixin, BaseEstimator):
    def _validate_params(self):
        if self.wrt not in ("inputs", "variables"):
            raise ValueError(f"wrt must be 'inputs' or 'variables', got {self.wrt!r}")

    def fit(self, X=None, y=None):
        """Validate the network and, if given, the layout of ``X``."""
        self._validate_params()
        self.network_ = check_network(self.network)
        self.input_names_ = self.network_.inputs
        self.n_features_in_ = len(self.input_names_)
        if X is not None:
            check_input_points(X, self.network_)
        self.adjoints_ = self._adjoints(self.network_)
        return self

    def _at(self, row):
        return self.network_.with_inputs(dict(zip(self.input_names_, row)))

    def _columns(self):
        return self.input_names_ if self.wrt == "inputs" else self.network_.variables

    def transform(self, X):
        check_is_fitted(self, "network_")
        X = check_input_points(X, self.network_)
        cols = self._columns()
        out = np.empty((X.shape[0], len(cols)))
        for i, row in enumerate(X):
            adj = self._adjoints(self._at(row))
            out[i] = [adj[c] for c in cols]
        return out

    def predict(self, X):
        """Objective value at each input point."""
        check_is_fitted(self, "network_")
        X = check_input_points(X, self.network_)
        obj = self.network_.objective
        return np.array([evaluate(self._at(row))[obj] for row in X])

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "network_")
        return np.array([f"d{self.network_.objective}/d{c}" for c in self._columns()], dtype=object)


class BackpropGradient(_GradientTransformer):
    """Reverse-mode chain rule."""

    def __init__(self, network=None, wrt="inputs"):
        self.network = network
        self.wrt = wrt

    def _adjoints(self, net):
        return backprop(net, evaluate(net))


class FiniteDifferenceGradient(_GradientTransformer):
    """Central differences with step ``h``; inputs only."""

    def __init__(self, network=None, h=1e-6):
        self.network = network
        self.h = h

    @property
    def wrt(self):
        return "inputs"

    def _validate_params(self):
        if not (isinstance(self.h, (int, float)) and self.h > 0):
            raise ValueError(f"h must be positive, got {self.h!r}")

    def _adjoints(self, net):
        return finite_diff_gradient(net, self.h)


class BeliefPropagationGradient(_GradientTransformer):
    """Gradients read off belief propagation on the lifted network.

    Parameters
    ----------
    network : FunctionNetwork, str or path
    mode : {"exact", "grid"}
        ``"exact"`` reads slopes of symbolic downward messages and reproduces
        backprop; ``"grid"`` uses Gaussian priors of width ``sigma`` and the
        smoothed integral estimator.
    kT, sigma, grid_points, grid_span, quad_nodes, seed
        See :class:`liftprop.config.BPConfig`.
    schedule : {"two-pass", "flooding"}
    max_iters, tol : flooding limits.
    wrt : {"inputs", "variables"}

    Attributes
    ----------
    network_ : FunctionNetwork
    factor_graph_ : FactorGraph
        Lifted graph at the network's own input values.
    messages_ : MessageStore
        Converged messages at those values.
    adjoints_ : dict
        Adjoint of every variable at those values.
    posteriors_ : dict
        Posterior of every variable (point masses in exact mode).
    """

    def __init__(
        self,
        network=None,
        mode="exact",
        kT=1.0,
        sigma=1e-3,
        grid_points=129,
        grid_span=8.0,
        quad_nodes=3,
        schedule="two-pass",
        max_iters=200,
        tol=1e-10,
        seed=0,
        wrt="inputs",
    ):
        self.network = network
        self.mode = mode
        self.kT = kT
        self.sigma = sigma
        self.grid_points = grid_points
        self.grid_span = grid_span
        self.quad_nodes = quad_nodes
        self.schedule = schedule
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed
        self.wrt = wrt

    def _config(self) -> BPConfig:
        if self.schedule == "two-pass":
            sched = TwoPass()
        elif self.schedule == "flooding":
            sched = Flooding(self.max_iters, self.tol)
        else:
            raise ValueError(f"schedule must be 'two-pass' or 'flooding', got {self.schedule!r}")
        return BPConfig(
            kT=self.kT, sigma=self.sigma, grid_points=self.grid_points,
            grid_span=self.grid_span, quad_nodes=self.quad_nodes, schedule=sched,
            mode=Mode(self.mode), seed=self.seed,
        )

    def _run(self, net, cfg):
        fg = lift_network(net, cfg)
        store = run_bp(fg, cfg)
        if cfg.mode is Mode.EXACT:
            adj = extract_adjoints_delta(fg, store, cfg)
        else:
            adj = extract_adjoints_smoothed(fg, store, cfg)
        return fg, store, adj

    def fit(self, X=None, y=None):
        self._validate_params()
        self.config_ = self._config()
        super().fit(X, y)
        self.factor_graph_, self.messages_, _ = self._run(self.network_, self.config_)
        self.posteriors_ = {
            v: compute_posterior(self.factor_graph_, self.messages_, v)
            for v in self.network_.variables
        }
        return self

    def _adjoints(self, net):
        return self._run(net, self.config_)[2]
