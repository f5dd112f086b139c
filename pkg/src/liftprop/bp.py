"""Loopy belief propagation on lifted function networks.

Two numerical modes share one set of update rules:

* exact mode keeps delta functions symbolic. Upward messages are point
  masses carrying forward values; downward messages carry only their
  log-slope at the variable's value, which is all adjoint recovery needs.
* grid mode replaces each delta prior by a Gaussian of width ``sigma``.
  Upward messages are first-order Gaussian pushforwards; downward messages
  are log-densities tabulated on a grid around the variable's value, with
  Gauss-Hermite quadrature over the factor's other inputs.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .autodiff import apply_node
from .config import BPConfig, Flooding, Mode, TwoPass
from .lift import BoltzmannPrior, DeltaPrior, FactorGraph, FunctionFactor
from .messages import (
    AnchorSlope,
    Direction,
    GaussianParam,
    GridLog,
    GridUnderflowError,
    MessageStore,
    PointMass,
)
from .netir import topo_order

__all__ = [
    "BPError",
    "MissingMessageError",
    "AnchorMismatchError",
    "ConvergenceError",
    "initialize_messages",
    "update_variable_to_factor",
    "update_factor_to_variable",
    "update_message",
    "upward_sweep",
    "downward_sweep",
    "flooding_round",
    "run_bp",
    "compute_posterior",
    "variable_grid",
]

TO_FACTOR = Direction.TO_FACTOR
TO_VARIABLE = Direction.TO_VARIABLE


class BPError(RuntimeError):
    pass


class MissingMessageError(BPError):
    """An update needs a message that has not been computed yet."""


class AnchorMismatchError(BPError):
    pass


class ConvergenceError(BPError):
    def __init__(self, message, residual, store):
        self.residual = residual
        self.store = store
        super().__init__(f"{message} (residual {residual:.3e})")


def _constant(cfg):
    if cfg.mode is Mode.EXACT:
        return AnchorSlope(None, 0.0)
    # placeholder grid; a constant message is the same on any grid
    return GridLog.constant(-1.0, 1.0, cfg.grid_points)


def initialize_messages(fg: FactorGraph, cfg: BPConfig) -> MessageStore:
    """Starting store: constant downward messages, seeded priors.

    Single-variable factors send a message that does not depend on any
    incoming message, so delta priors (and, in exact mode, the Boltzmann
    factor) are seeded straight away. Other upward messages start as
    ``None`` (not yet received).
    """
    store = MessageStore(cfg)
    for var, fi in fg.edges:
        fac = fg.factors[fi]
        if fg.is_upward_to_variable(var, fi):
            store[var, fi, TO_FACTOR] = _constant(cfg)
            if isinstance(fac, DeltaPrior):
                store[var, fi, TO_VARIABLE] = update_factor_to_variable(fg, store, (var, fi))
            else:
                store[var, fi, TO_VARIABLE] = None
        else:
            store[var, fi, TO_FACTOR] = None
            if isinstance(fac, BoltzmannPrior) and cfg.mode is Mode.EXACT:
                store[var, fi, TO_VARIABLE] = AnchorSlope(None, 1.0 / fac.kT)
            else:
                store[var, fi, TO_VARIABLE] = _constant(cfg)
    return store


def _upward_into(fg, store, var):
    return store[var, fg.below(var), TO_VARIABLE]


def variable_grid(fg: FactorGraph, store: MessageStore, var: str):
    """``(lo, hi, n)`` of the grid on which messages to ``var`` are tabulated.

    Centred on the mean of the variable's upward message, with half-width
    ``grid_span * max(stddev, sigma)``.
    """
    cfg = store.cfg
    up = _upward_into(fg, store, var)
    if up is None:
        raise MissingMessageError(f"no upward message into {var!r} yet")
    half = cfg.grid_span * max(up.stddev, cfg.sigma)
    return up.mean - half, up.mean + half, cfg.grid_points


def update_variable_to_factor(fg: FactorGraph, store: MessageStore, edge):
    """Product of the messages into ``var`` from every factor except ``factor``."""
    var, fi = edge
    cfg = store.cfg
    below = fg.below(var)
    if fi != below:
        up = _upward_into(fg, store, var)
        if up is None:
            raise MissingMessageError(f"no upward message into {var!r} yet")
        if cfg.mode is Mode.EXACT:
            # a delta times anything smooth is the same delta
            return PointMass(up.anchor)
        downs = [store[var, g, TO_VARIABLE] for g in fg.above(var) if g != fi]
        downs = [d for d in downs if not d.is_constant]
        if not downs:
            return up
        lo, hi, n = variable_grid(fg, store, var)
        x = np.linspace(lo, hi, n)
        logp = up.logpdf(x) + sum(d.log_at(x) for d in downs)
        mean, std = GridLog.from_log(lo, hi, logp).moments()
        return GaussianParam(mean, std) if std > 0 else up

    incoming = [store[var, g, TO_VARIABLE] for g in fg.above(var)]
    up = _upward_into(fg, store, var)
    if cfg.mode is Mode.EXACT:
        anchor = None if up is None else up.anchor
        for m in incoming:
            if m.anchor is None:
                continue
            if anchor is None:
                anchor = m.anchor
            elif abs(m.anchor - anchor) > cfg.anchor_tol:
                raise AnchorMismatchError(
                    f"messages into {var!r} anchored at {m.anchor!r} and {anchor!r}"
                )
        slopes = [m.slope for m in incoming]
        slope = slopes[0] if len(slopes) == 1 else math.fsum(slopes)
        return AnchorSlope(anchor, float(slope))
    incoming = [m for m in incoming if not m.is_constant]
    if up is None or not incoming:
        return _constant(cfg) if up is None else GridLog.constant(*variable_grid(fg, store, var))
    lo, hi, n = variable_grid(fg, store, var)
    x = np.linspace(lo, hi, n)
    return GridLog.from_log(lo, hi, sum(m.log_at(x) for m in incoming))


def _gaussian_pushforward(fn, msgs, cfg, seed_key):
    distinct = list(msgs)
    means = [msgs[a].mean for a in fn.inputs]
    mean = float(fn.op(*means))
    if not math.isfinite(mean):
        raise GridUnderflowError(f"pushforward of `{fn}` is not finite")
    parts = fn.op.partials(*means)
    grad = {x: 0.0 for x in distinct}
    for a, p in zip(fn.inputs, parts):
        grad[a] += float(p)
    var = math.fsum((grad[x] * msgs[x].stddev) ** 2 for x in distinct)
    std = math.sqrt(var)
    if not (std > 0 and math.isfinite(std)):
        # flat Jacobian: estimate the width from samples instead
        rng = np.random.default_rng([cfg.seed, seed_key])
        draws = {x: rng.normal(msgs[x].mean, msgs[x].stddev, cfg.mc_samples) for x in distinct}
        with np.errstate(all="ignore"):
            out = np.asarray(fn.op(*(draws[a] for a in fn.inputs)), dtype=float)
        out = out[np.isfinite(out)]
        std = float(np.std(out)) if out.size > 1 else 0.0
        if not std > 0:
            std = np.finfo(float).tiny
    return GaussianParam(mean, std)


def _tabulate_downward(fn, var, down, others, xs, cfg):
    """log of integral m_out(f(x, y)) prod_y N(y) dy at each grid point x."""
    t, w = np.polynomial.hermite.hermgauss(cfg.quad_nodes)
    nodes = {y: others[y].mean + math.sqrt(2.0) * others[y].stddev * t for y in others}
    logw = np.log(w / math.sqrt(math.pi))
    names = list(others)
    terms = []
    for combo in itertools.product(range(cfg.quad_nodes), repeat=len(names)):
        point = {y: nodes[y][k] for y, k in zip(names, combo)}
        point[var] = xs
        with np.errstate(all="ignore"):
            out = np.asarray(fn.op(*(point[a] for a in fn.inputs)), dtype=float)
            vals = down.log_at(out)
        vals = np.where(np.isfinite(vals), vals, -np.inf)
        terms.append(sum(logw[k] for k in combo) + vals)
    return np.logaddexp.reduce(np.array(terms), axis=0)


def update_factor_to_variable(fg: FactorGraph, store: MessageStore, edge):
    """Integrate the factor against all other incoming messages."""
    var, fi = edge
    cfg = store.cfg
    fac = fg.factors[fi]
    exact = cfg.mode is Mode.EXACT

    if isinstance(fac, DeltaPrior):
        return PointMass(fac.center) if exact else GaussianParam(fac.center, cfg.sigma)
    if isinstance(fac, BoltzmannPrior):
        if exact:
            return AnchorSlope(None, 1.0 / fac.kT)
        if _upward_into(fg, store, var) is None:
            return _constant(cfg)
        lo, hi, n = variable_grid(fg, store, var)
        return GridLog.from_log(lo, hi, np.linspace(lo, hi, n) / fac.kT)

    fn = fac.func
    distinct = fac.neighbors[:-1]
    ups = {x: store[x, fi, TO_FACTOR] for x in distinct}

    if var == fn.output:
        missing = [x for x, m in ups.items() if m is None]
        if missing:
            raise MissingMessageError(f"`{fn}` still waits for {missing}")
        if exact:
            return PointMass(apply_node(fn, {x: m.anchor for x, m in ups.items()}))
        return _gaussian_pushforward(fn, ups, cfg, fi)

    down = store[fn.output, fi, TO_FACTOR]
    missing = [x for x, m in ups.items() if m is None]
    if missing:
        raise MissingMessageError(f"`{fn}` still waits for {missing}")

    if exact:
        anchors = {x: m.anchor for x, m in ups.items()}
        if down.anchor is not None:
            y = apply_node(fn, anchors)
            if abs(down.anchor - y) > cfg.anchor_tol:
                raise AnchorMismatchError(
                    f"downward message into `{fn}` anchored at {down.anchor!r}, forward value {y!r}"
                )
        parts = fn.op.partials(*(anchors[a] for a in fn.inputs))
        terms = [down.slope * float(p) for a, p in zip(fn.inputs, parts) if a == var]
        slope = terms[0] if len(terms) == 1 else math.fsum(terms)
        return AnchorSlope(anchors[var], slope)

    if _upward_into(fg, store, var) is None:
        raise MissingMessageError(f"no upward message into {var!r} yet")
    lo, hi, n = variable_grid(fg, store, var)
    if down.is_constant:
        return GridLog.constant(lo, hi, n)
    xs = np.linspace(lo, hi, n)
    others = {x: m for x, m in ups.items() if x != var}
    return GridLog.from_log(lo, hi, _tabulate_downward(fn, var, down, others, xs, cfg))


def update_message(fg: FactorGraph, store: MessageStore, key):
    var, fi, direction = key
    if direction is TO_FACTOR:
        return update_variable_to_factor(fg, store, (var, fi))
    return update_factor_to_variable(fg, store, (var, fi))


def upward_sweep(fg: FactorGraph, store: MessageStore) -> MessageStore:
    """Priors, then every function factor in topological order, then the Boltzmann edge."""
    for i, fac in enumerate(fg.factors):
        if isinstance(fac, DeltaPrior):
            store[fac.var, i, TO_VARIABLE] = update_factor_to_variable(fg, store, (fac.var, i))
    for fn in topo_order(fg.network):
        fi = fg.below(fn.output)
        for x in fg.factors[fi].neighbors[:-1]:
            store[x, fi, TO_FACTOR] = update_variable_to_factor(fg, store, (x, fi))
        store[fn.output, fi, TO_VARIABLE] = update_factor_to_variable(fg, store, (fn.output, fi))
    bi, bv = fg.boltzmann_index, fg.boltzmann_var
    store[bv, bi, TO_FACTOR] = update_variable_to_factor(fg, store, (bv, bi))
    return store


def downward_sweep(fg: FactorGraph, store: MessageStore) -> MessageStore:
    """Boltzmann edge, then function factors in reverse topological order, then priors."""
    bi, bv = fg.boltzmann_index, fg.boltzmann_var
    store[bv, bi, TO_VARIABLE] = update_factor_to_variable(fg, store, (bv, bi))
    for fn in reversed(topo_order(fg.network)):
        fi = fg.below(fn.output)
        store[fn.output, fi, TO_FACTOR] = update_variable_to_factor(fg, store, (fn.output, fi))
        for x in fg.factors[fi].neighbors[:-1]:
            store[x, fi, TO_VARIABLE] = update_factor_to_variable(fg, store, (x, fi))
    for v in fg.network.inputs:
        store[v, fg.below(v), TO_FACTOR] = update_variable_to_factor(fg, store, (v, fg.below(v)))
    return store


def flooding_round(fg: FactorGraph, store: MessageStore) -> tuple[MessageStore, float]:
    """One synchronous round: every message recomputed from the previous snapshot.

    Messages whose inputs are not available yet keep their previous value.
    Returns the new store and the largest component change.
    """
    new = store.copy()
    for key in store.keys():
        try:
            new[key] = update_message(fg, store, key)
        except MissingMessageError:
            pass
    return new, store.max_change(new)


def run_bp(fg: FactorGraph, cfg: BPConfig) -> MessageStore:
    """Run belief propagation to convergence under ``cfg.schedule``.

    ``store.info`` records the schedule and, for flooding, ``rounds`` (the
    number of rounds that still changed some message) and the final residual.
    """
    store = initialize_messages(fg, cfg)
    sched = cfg.schedule
    if isinstance(sched, TwoPass):
        try:
            upward_sweep(fg, store)
            downward_sweep(fg, store)
        except MissingMessageError as exc:
            raise BPError(f"two-pass schedule out of order: {exc}") from exc
        store.info.update(schedule=sched.name, sweeps=2, converged=True)
        return store

    assert isinstance(sched, Flooding)
    residual = math.inf
    for r in range(1, sched.max_iters + 1):
        store, residual = flooding_round(fg, store)
        if residual < sched.tol and store.complete:
            store.info.update(schedule=sched.name, rounds=r - 1, residual=residual, converged=True)
            return store
    store.info.update(schedule=sched.name, rounds=sched.max_iters, residual=residual, converged=False)
    raise ConvergenceError(f"flooding did not converge in {sched.max_iters} rounds", residual, store)


def compute_posterior(fg: FactorGraph, store: MessageStore, var: str):
    """Normalised product of all messages into ``var``.

    Exact mode returns the point mass of the upward message, which absorbs
    every smooth downward factor. Grid mode returns a :class:`GridLog`.
    """
    up = _upward_into(fg, store, var)
    if up is None:
        raise MissingMessageError(f"no upward message into {var!r}")
    if store.cfg.mode is Mode.EXACT:
        return PointMass(up.anchor)
    lo, hi, n = variable_grid(fg, store, var)
    x = np.linspace(lo, hi, n)
    logp = up.logpdf(x)
    for g in fg.above(var):
        m = store[var, g, TO_VARIABLE]
        if not m.is_constant:
            logp = logp + m.log_at(x)
    return GridLog.from_log(lo, hi, logp)
