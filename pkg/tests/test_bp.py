import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftprop.autodiff import backprop, evaluate
from liftprop.bp import (
    AnchorMismatchError,
    BPError,
    ConvergenceError,
    MissingMessageError,
    compute_posterior,
    downward_sweep,
    flooding_round,
    initialize_messages,
    run_bp,
    update_factor_to_variable,
    update_message,
    update_variable_to_factor,
    upward_sweep,
)
from liftprop.config import BPConfig, Flooding, Mode
from liftprop.corpus import random_network
from liftprop.lift import lift_network
from liftprop.messages import AnchorSlope, Direction, GaussianParam, GridLog, PointMass
from liftprop.netir import parse_network

UP, DOWN = Direction.TO_VARIABLE, Direction.TO_FACTOR
EXACT = BPConfig()
FLOOD = BPConfig(schedule=Flooding(max_iters=500, tol=1e-12))


def _converged(net, cfg=EXACT):
    fg = lift_network(net, cfg)
    return fg, run_bp(fg, cfg)


def _is_upward(fg, key):
    var, fi, direction = key
    return fg.is_upward_to_variable(var, fi) == (direction is UP)


# -- initialization ----------------------------------------------------------

def test_initial_store_reference(fig1):
    fg = lift_network(fig1)
    store = initialize_messages(fg, EXACT)
    seeds = {k: m for k, m in store.items() if isinstance(m, PointMass)}
    assert {(k[0], m.anchor) for k, m in seeds.items()} == {("w", 2.0), ("t", 1.0), ("y", 3.0)}
    for key, m in store.items():
        if key in seeds:
            continue
        if key == ("z", fg.boltzmann_index, UP):
            assert m == AnchorSlope(None, 1.0)
        elif _is_upward(fg, key):
            assert m is None  # not yet received
        else:
            assert m == AnchorSlope(None, 0.0)  # constant


def test_initial_store_identity():
    fg = lift_network(parse_network("input a = 4\nobjective a\n"))
    store = initialize_messages(fg, EXACT)
    assert store["a", 0, UP] == PointMass(4.0)
    assert store["a", 1, DOWN] is None


def test_initial_store_grid(fig1):
    cfg = BPConfig(mode=Mode.GRID, sigma=1e-3)
    store = initialize_messages(lift_network(fig1, cfg), cfg)
    priors = {k[0]: m for k, m in store.items() if isinstance(m, GaussianParam)}
    assert priors == {"w": GaussianParam(2.0, 1e-3), "t": GaussianParam(1.0, 1e-3),
                      "y": GaussianParam(3.0, 1e-3)}


# -- single updates on the converged reference store -------------------------

def test_objective_message_from_boltzmann(fig1):
    fg, store = _converged(fig1)
    m = update_variable_to_factor(fg, store, ("z", fg.below("z")))
    assert m == AnchorSlope(9.0, 1.0)


def test_slopes_sum_at_fan_out(fig1):
    fg, store = _converged(fig1)
    from_g = store["x", fg.below("u"), UP].slope
    from_h = store["x", fg.below("v"), UP].slope
    assert (from_g, from_h) == (3.0, 9.0)
    assert update_variable_to_factor(fg, store, ("x", fg.below("x"))).slope == 12.0


def test_single_neighbour_passthrough(fig1):
    fg, store = _converged(fig1)
    # w's only message from above comes from u's factor
    assert update_variable_to_factor(fg, store, ("w", fg.below("w"))) == store["w", fg.below("u"), UP]


def test_downward_through_product(fig1):
    fg, store = _converged(fig1)
    assert update_factor_to_variable(fg, store, ("u", fg.below("z"))) == AnchorSlope(3.0, 3.0)


def test_upward_through_square(fig1):
    fg, store = _converged(fig1)
    assert update_factor_to_variable(fg, store, ("x", fg.below("x"))) == PointMass(1.0)


def test_grid_pushforward_width_matches_monte_carlo():
    net = parse_network("input t = 1\nx = pow2(t)\nobjective x\n")
    cfg = BPConfig(mode=Mode.GRID, sigma=1e-3)
    fg, store = _converged(net, cfg)
    g = store["x", fg.below("x"), UP]
    assert g.mean == 1.0
    samples = np.random.default_rng(0).normal(1.0, 1e-3, 100_000) ** 2
    assert g.stddev == pytest.approx(np.std(samples), rel=0.1)
    assert g.stddev == pytest.approx(2e-3, rel=1e-12)


def test_missing_message_and_anchor_mismatch(fig1):
    fg = lift_network(fig1)
    store = initialize_messages(fg, EXACT)
    with pytest.raises(MissingMessageError):
        update_factor_to_variable(fg, store, ("z", fg.below("z")))
    fg, store = _converged(fig1)
    store["x", fg.below("u"), UP] = AnchorSlope(1.5, 3.0)
    with pytest.raises(AnchorMismatchError):
        update_variable_to_factor(fg, store, ("x", fg.below("x")))


# -- schedules -----------------------------------------------------------------

def test_two_pass_is_fixed_point(fig1):
    fg, store = _converged(fig1)
    again = store.copy()
    upward_sweep(fg, again)
    downward_sweep(fg, again)
    assert store.max_change(again) == 0.0
    _, change = flooding_round(fg, store)
    assert change == 0.0


def test_flooding_matches_two_pass_reference(fig1):
    fg, ref = _converged(fig1)
    flood = run_bp(fg, FLOOD)
    assert flood.info["converged"]
    assert ref.max_change(flood) == 0.0


def test_identity_converges_in_one_round():
    fg = lift_network(parse_network("input a = 5\nobjective a\n"))
    store = run_bp(fg, FLOOD)
    assert store.info["rounds"] == 1


def test_flooding_gives_up():
    fg = lift_network(random_network(8, 3))
    with pytest.raises(ConvergenceError) as err:
        run_bp(fg, BPConfig(schedule=Flooding(max_iters=2, tol=1e-12)))
    assert err.value.residual > 0
    assert not err.value.store.converged


def test_run_info(fig1):
    _, store = _converged(fig1)
    assert store.info == {"schedule": "two-pass", "sweeps": 2, "converged": True}


def _longest_dependency_path(fg):
    d = nx.DiGraph()
    for var, fi in fg.edges:
        if fg.below(var) == fi:
            d.add_edge(("f", fi), ("v", var))
        else:
            d.add_edge(("v", var), ("f", fi))
    return nx.dag_longest_path_length(d)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 20), seed=st.integers(0, 10_000))
def test_flooding_rounds_bounded_by_dependency_depth(n, seed):
    """Information moves one edge per round: up the longest path, then back down."""
    fg = lift_network(random_network(n, seed))
    store = run_bp(fg, FLOOD)
    assert store.info["rounds"] <= 2 * _longest_dependency_path(fg)


@pytest.mark.parametrize("k", [4, 8, 16])
def test_shortcut_needs_more_than_twice_the_diameter(k):
    """A direct edge next to a long chain keeps the diameter small while the
    slope at the bottom still depends on an anchor at the top of the chain."""
    lines = ["input a = 0.5", "c0 = sin(a)"] + [f"c{i} = sin(c{i - 1})" for i in range(1, k)]
    lines += [f"z = mul(a, c{k - 1})", "objective z"]
    fg = lift_network(parse_network("\n".join(lines)))
    g = nx.Graph([(("v", v), ("f", f)) for v, f in fg.edges])
    rounds = run_bp(fg, FLOOD).info["rounds"]
    assert rounds >= 4 * k - 2
    assert nx.diameter(g) <= k + 3


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 15), seed=st.integers(0, 10_000), order_seed=st.integers(0, 10_000))
def test_random_update_orders(n, seed, order_seed):
    """Any update order keeps upward messages point masses and downward ones
    anchor/slope pairs, and sweeps from any such state reach the same fixed point."""
    fg = lift_network(random_network(n, seed))
    ref = run_bp(fg, EXACT)
    store = initialize_messages(fg, EXACT)
    keys = list(store.keys())
    rng = random.Random(order_seed)
    for _ in range(3 * len(keys)):
        key = rng.choice(keys)
        try:
            store[key] = update_message(fg, store, key)
        except MissingMessageError:
            continue
        msg = store[key]
        if _is_upward(fg, key):
            assert isinstance(msg, PointMass) or (isinstance(msg, AnchorSlope) and msg.anchor is None)
        else:
            assert isinstance(msg, AnchorSlope)
    upward_sweep(fg, store)
    downward_sweep(fg, store)
    assert store.max_change(ref) == 0.0


# -- posteriors ------------------------------------------------------------------

def test_exact_posteriors(fig1):
    fg, store = _converged(fig1)
    assert compute_posterior(fg, store, "x") == PointMass(1.0)
    assert compute_posterior(fg, store, "z") == PointMass(9.0)


def test_grid_posterior_shift_linear():
    net = parse_network("input x = 0.7\nz = mul_const[3](x)\nobjective z\n")
    sigma = 1e-2
    fg, store = _converged(net, BPConfig(mode=Mode.GRID, sigma=sigma))
    post = compute_posterior(fg, store, "x")
    assert isinstance(post, GridLog)
    mean, std = post.moments()
    assert mean - 0.7 == pytest.approx(3 * sigma**2, rel=0.05)
    assert std == pytest.approx(sigma, rel=1e-3)


def test_grid_posterior_shift_reference(fig1):
    sigma = 1e-3
    fg, store = _converged(fig1, BPConfig(mode=Mode.GRID, sigma=sigma))
    adj = backprop(fig1, evaluate(fig1))
    for v in fig1.inputs:
        mean, _ = compute_posterior(fg, store, v).moments()
        assert mean - fig1.input_values[v] == pytest.approx(adj[v] * sigma**2, rel=0.05)


def test_two_pass_out_of_order_is_reported(fig1, monkeypatch):
    import liftprop.bp as bp

    fg = lift_network(fig1)
    monkeypatch.setattr(bp, "upward_sweep", lambda fg, store: store)
    with pytest.raises(BPError):
        bp.run_bp(fg, EXACT)

