"""Reading adjoints out of converged messages, and reconciling methods.

In exact mode the log-slope of the downward message leaving a variable, times
kT, is that variable's adjoint. In grid mode the adjoint is recovered by
integrating the derivative of the variable's upward Gaussian against the log
of its downward message: a smoothed numerical derivative that tends to the
exact one as the Gaussian narrows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .autodiff import EvaluationError, backprop, evaluate, finite_diff_gradient
from .bp import BPError, run_bp
from .config import BPConfig, Mode
from .lift import FactorGraph, FunctionFactor, lift_network
from .messages import Direction, GaussianParam, GridLog, trapezoid
from .netir import FunctionNetwork

__all__ = [
    "EdgeInvariantResidual",
    "AdjointReport",
    "NotConvergedError",
    "extract_adjoints_delta",
    "extract_adjoint_smoothed",
    "extract_adjoints_smoothed",
    "check_edge_invariants",
    "cross_method_report",
]


class NotConvergedError(BPError):
    pass


@dataclass(frozen=True)
class EdgeInvariantResidual:
    """Disagreement between one downward message and its autodiff counterpart.

    ``kind`` is ``"A"`` for a variable-to-factor message (its slope times kT
    should equal the variable's adjoint) and ``"B"`` for a factor-to-input
    message (should equal the output's adjoint times the partial derivative).
    """

    var: str
    factor: int
    kind: str
    bp_slope: float
    autodiff_value: float
    residual: float

    def to_dict(self):
        return {
            "edge": [self.var, self.factor],
            "kind": "invariant_" + self.kind.lower(),
            "bp_slope": self.bp_slope,
            "autodiff_value": self.autodiff_value,
            "residual": self.residual,
        }


def _check_converged(store):
    if not store.converged:
        raise NotConvergedError("message store has not converged")


def extract_adjoints_delta(fg: FactorGraph, store, cfg: Optional[BPConfig] = None) -> dict:
    """Adjoint of every variable from exact-mode downward slopes."""
    cfg = cfg or store.cfg
    _check_converged(store)
    if store.cfg.mode is not Mode.EXACT:
        raise ValueError("slope extraction needs an exact-mode store")
    out = {}
    for v in fg.variables:
        msg = store[v, fg.below(v), Direction.TO_FACTOR]
        out[v] = msg.slope * cfg.kT
    return out


def _gaussian_dpdf(x, mean, std):
    z = (x - mean) / std
    return -z / (std * std * math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * z * z)


def extract_adjoint_smoothed(fg: FactorGraph, store, cfg: Optional[BPConfig], var: str) -> float:
    """Smoothed adjoint ``-kT * integral p'(x) log m(x) dx``.

    ``p`` is the upward Gaussian reaching ``var`` from below (for an input,
    its Gaussian prior) and ``m`` the downward message ``var`` sends to that
    factor. Trapezoid quadrature over +/-8 standard deviations of ``p``, with
    ``log m`` interpolated from its grid.
    """
    cfg = cfg or store.cfg
    _check_converged(store)
    below = fg.below(var)
    prior = store[var, below, Direction.TO_VARIABLE]
    msg = store[var, below, Direction.TO_FACTOR]
    if not isinstance(prior, GaussianParam) or not isinstance(msg, GridLog):
        raise ValueError(f"no grid-mode messages on the edge below {var!r}")
    c, s = prior.mean, prior.stddev
    if msg.lo > c - 6 * s or msg.hi < c + 6 * s:
        raise ValueError(f"grid [{msg.lo}, {msg.hi}] does not cover +/-6 sigma around {c}")
    if msg.is_constant:
        return 0.0
    dx = (msg.hi - msg.lo) / (msg.n - 1)
    if s < 1e-6 * dx:
        # effectively a point mass: average slope of the interpolant around c
        return float(cfg.kT * (msg.log_at(c + dx) - msg.log_at(c - dx)) / (2 * dx))
    # nodes follow the Gaussian, which may be much narrower than the message grid
    x = np.linspace(c - 8 * s, c + 8 * s, 2 * msg.n + 1)
    # the derivative integrates to zero, so any constant offset in log m drops out
    logm = msg.log_at(x) - msg.log_at(c)
    return float(-cfg.kT * trapezoid(_gaussian_dpdf(x, c, s) * logm, x))


def extract_adjoints_smoothed(fg: FactorGraph, store, cfg: Optional[BPConfig] = None) -> dict:
    return {v: extract_adjoint_smoothed(fg, store, cfg, v) for v in fg.variables}


def check_edge_invariants(net, fg, store, vals, adjoints) -> list:
    """Compare every downward exact-mode message with autodiff.

    Partial derivatives come from the primitive table at ``vals`` so the
    residuals isolate the message-passing engine.
    """
    kT = store.cfg.kT
    out = []
    for v in fg.variables:
        below = fg.below(v)
        m = store[v, below, Direction.TO_FACTOR]
        expect = adjoints[v]
        out.append(EdgeInvariantResidual(v, below, "A", m.slope, expect, abs(m.slope * kT - expect)))
    for fi, fac in enumerate(fg.factors):
        if not isinstance(fac, FunctionFactor):
            continue
        fn = fac.func
        parts = fn.op.partials(*(vals[a] for a in fn.inputs))
        for x in fac.neighbors[:-1]:
            terms = [adjoints[fn.output] * float(p) for a, p in zip(fn.inputs, parts) if a == x]
            expect = terms[0] if len(terms) == 1 else math.fsum(terms)
            m = store[x, fi, Direction.TO_VARIABLE]
            out.append(EdgeInvariantResidual(x, fi, "B", m.slope, expect, abs(m.slope * kT - expect)))
    return out


@dataclass
class AdjointReport:
    """Adjoints of every variable by every method, plus per-edge residuals.

    ``variables`` maps name -> ``{"backprop", "bp_delta", "bp_grid",
    "finite_diff"}``; entries are ``None`` where a method does not apply or
    failed (see ``failures``).
    """

    variables: dict
    residuals: list
    convergence: dict
    config: dict
    failures: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def method_residuals(self) -> list:
        rows = []
        for name, rec in self.variables.items():
            ref = rec["backprop"]
            if ref is None:
                continue
            for method in ("bp_delta", "bp_grid", "finite_diff"):
                val = rec[method]
                if val is None:
                    continue
                err = abs(val - ref)
                if method == "bp_delta":
                    limit = self.thresholds["exact"]
                elif method == "bp_grid":
                    # relative, floored at the objective's own adjoint of 1
                    limit = self.thresholds["grid"] * max(abs(ref), 1.0)
                else:
                    limit = max(self.thresholds["fd_rel"] * abs(ref), self.thresholds["fd_abs"])
                rows.append({"variable": name, "method": method, "residual": err,
                             "threshold": limit, "pass": err <= limit})
        return rows

    @property
    def passed(self) -> bool:
        if self.failures:
            return False
        edge_ok = all(r.residual <= self.thresholds["exact"] for r in self.residuals)
        return edge_ok and all(r["pass"] for r in self.method_residuals())

    def to_dict(self) -> dict:
        limit = self.thresholds.get("exact")
        return {
            "variables": [dict(name=k, **v) for k, v in self.variables.items()],
            "residuals": [dict(r.to_dict(), threshold=limit, **{"pass": r.residual <= limit})
                          for r in self.residuals],
            "method_residuals": self.method_residuals(),
            "convergence": self.convergence,
            "config": self.config,
            "failures": self.failures,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def cross_method_report(
    net: FunctionNetwork,
    cfg: Optional[BPConfig] = None,
    *,
    h: float = 1e-6,
    grid: bool = True,
    tol_exact: float = 1e-9,
    tol_grid: float = 2e-2,
    tol_fd: tuple = (1e-5, 1e-7),
) -> AdjointReport:
    """Run every gradient method on ``net`` and reconcile them.

    ``cfg`` supplies kT, the schedule and the grid settings; its ``mode`` is
    ignored because both modes are run. A failing method is recorded in
    ``failures`` and its column left empty.
    """
    cfg = cfg or BPConfig()
    failures = {}
    recs = {v: {"backprop": None, "bp_delta": None, "bp_grid": None, "finite_diff": None}
            for v in net.variables}
    convergence = {}
    residuals = []

    vals = evaluate(net)
    adj = backprop(net, vals)
    for v in net.variables:
        recs[v]["backprop"] = adj[v]

    try:
        fd = finite_diff_gradient(net, h)
        for v in net.inputs:
            recs[v]["finite_diff"] = fd[v]
    except (EvaluationError, ValueError) as exc:
        failures["finite_diff"] = str(exc)

    exact_cfg = cfg.replace(mode=Mode.EXACT)
    try:
        fg = lift_network(net, exact_cfg)
        store = run_bp(fg, exact_cfg)
        convergence["exact"] = dict(store.info)
        for v, a in extract_adjoints_delta(fg, store, exact_cfg).items():
            recs[v]["bp_delta"] = a
        residuals = check_edge_invariants(net, fg, store, vals, adj)
    except (BPError, EvaluationError, ValueError) as exc:
        failures["bp_delta"] = str(exc)

    if grid:
        grid_cfg = cfg.replace(mode=Mode.GRID)
        try:
            fg = lift_network(net, grid_cfg)
            store = run_bp(fg, grid_cfg)
            convergence["grid"] = dict(store.info)
            for v, a in extract_adjoints_smoothed(fg, store, grid_cfg).items():
                recs[v]["bp_grid"] = a
        except (BPError, ArithmeticError, ValueError) as exc:
            failures["bp_grid"] = str(exc)

    return AdjointReport(
        variables=recs,
        residuals=residuals,
        convergence=convergence,
        config=dict(cfg.to_dict(), fd_step=h),
        failures=failures,
        thresholds={"exact": tol_exact, "grid": tol_grid, "fd_rel": tol_fd[0], "fd_abs": tol_fd[1]},
    )
