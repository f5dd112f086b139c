import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftprop.corpus import random_network
from liftprop.netir import (
    ArityError,
    CycleError,
    DefinitionError,
    DuplicateDefinitionError,
    FuncNode,
    FunctionNetwork,
    MissingInputValueError,
    MissingObjectiveError,
    ParseError,
    SelfReferenceError,
    UndefinedVariableError,
    UnknownPrimitiveError,
    load_network,
    parse_network,
    to_dsl,
    topo_order,
    validate_network,
)
from liftprop.primitives import Primitive


def _outputs(order):
    return [fn.output for fn in order]


def test_parse_reference_network(fig1):
    assert len(fig1.variables) == 7
    assert len(fig1.functions) == 4
    assert fig1.objective == "z"
    assert fig1.inputs == ("w", "t", "y")
    assert fig1.input_values == {"w": 2.0, "t": 1.0, "y": 3.0}
    assert fig1.definition("x").op == Primitive("pow_const", 2.0)
    assert fig1.definition("w") is None


def test_identity_network():
    net = parse_network("input a = 1.0\nobjective a\n")
    assert net.variables == ("a",)
    assert net.functions == ()


@pytest.mark.parametrize("src", ["input b = 1\na = add(a, b)\nobjective a\n",
                                 "input a = 1\ninput b = 1\na = add(a, b)\nobjective a\n"])
def test_self_reference_or_duplicate_rejected(src):
    with pytest.raises(DefinitionError):
        parse_network(src)


def test_duplicate_is_reported_with_position():
    with pytest.raises(DuplicateDefinitionError) as err:
        parse_network("input a = 1\nb = exp(a)\nb = log(a)\nobjective b\n")
    assert err.value.line == 3
    assert err.value.column == 1


def test_self_reference_error_type():
    with pytest.raises(SelfReferenceError):
        parse_network("input b = 1\na = mul(b, a)\nobjective a\n")


@pytest.mark.parametrize(
    "src, exc, line",
    [
        ("input a = 1\nb = frob(a)\nobjective b\n", UnknownPrimitiveError, 2),
        ("input a = 1\nb = add(a)\nobjective b\n", ArityError, 2),
        ("input a = 1\nb = exp(a, a)\nobjective b\n", ArityError, 2),
        ("input a = 1\nb = exp(a)\n", MissingObjectiveError, None),
        ("input a\nobjective a\n", MissingInputValueError, 1),
        ("input a = 1\nb = exp(a\nobjective b\n", ParseError, 2),
        ("input a = 1\nb = = exp(a)\nobjective b\n", ParseError, 2),
        ("input a = 1\nobjective a\nobjective a\n", ParseError, 3),
    ],
)
def test_parse_errors(src, exc, line):
    with pytest.raises(exc) as err:
        parse_network(src)
    assert err.value.line == line


def test_parametric_primitives_parse():
    net = parse_network("input a = 4\nb = pow_const[0.5](a)\nc = mul_const[3](b)\nd = pow3(c)\nobjective d\n")
    ops = [fn.op for fn in net.functions]
    assert ops == [Primitive("pow_const", 0.5), Primitive("mul_const", 3.0), Primitive("pow_const", 3.0)]


def test_forward_references_allowed():
    net = parse_network("z = exp(x)\nx = neg(a)\ninput a = 1\nobjective z\n")
    assert _outputs(topo_order(net)) == ["x", "z"]


def test_cycle_reported():
    with pytest.raises(CycleError) as err:
        parse_network("input r = 1\np = mul(q, r)\nq = exp(p)\nobjective p\n")
    assert set(err.value.cycle) == {"p", "q"}


def test_undefined_variable():
    with pytest.raises(UndefinedVariableError) as err:
        parse_network("input a = 1\nb = add(a, c)\nobjective b\n")
    assert err.value.names == ["c"]


def test_undefined_objective():
    with pytest.raises(UndefinedVariableError):
        parse_network("input a = 1\nobjective q\n")


def test_validate_reference(fig1):
    rep = validate_network(fig1)
    assert rep.valid
    assert rep.unreachable == ()


def test_dangling_variable_flagged():
    net = parse_network("input a = 1\ninput d = 2\nb = exp(a)\ne = exp(d)\nobjective b\n")
    assert validate_network(net).unreachable == ("d", "e")


def test_topo_order_reference(fig1):
    assert _outputs(topo_order(fig1)) == ["x", "u", "v", "z"]


def test_topo_order_chain_and_diamond():
    chain = parse_network("input a = 1\nb = exp(a)\nc = sin(b)\nobjective c\n")
    assert _outputs(topo_order(chain)) == ["b", "c"]
    diamond = parse_network(
        "input a = 1\nr = cos(a)\nl = sin(a)\nz = add(l, r)\nobjective z\n"
    )
    assert _outputs(topo_order(diamond)) == ["r", "l", "z"]


def test_round_trip(fig1):
    again = parse_network(to_dsl(fig1))
    assert again == fig1
    assert str(fig1) == to_dsl(fig1)


def test_load_network(tmp_path, fig1_text):
    path = tmp_path / "net.fn"
    path.write_text(fig1_text)
    assert load_network(path) == parse_network(fig1_text)


def test_funcnode_checks_arity():
    with pytest.raises(ValueError):
        FuncNode("z", Primitive("add"), ("a",))


def test_with_inputs(fig1):
    moved = fig1.with_inputs({"t": 2.0})
    assert moved.input_values["t"] == 2.0
    assert fig1.input_values["t"] == 1.0
    with pytest.raises(UndefinedVariableError):
        fig1.with_inputs({"x": 1.0})


def _dependency_graph(net):
    g = nx.DiGraph()
    g.add_nodes_from(net.variables)
    for fn in net.functions:
        for a in fn.inputs:
            g.add_edge(a, fn.output)
    return g


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 20), seed=st.integers(0, 10_000))
def test_random_networks_validate_and_round_trip(n, seed):
    net = random_network(n, seed)
    assert validate_network(net).valid
    assert parse_network(to_dsl(net)) == net
    order = _outputs(topo_order(net))
    pos = {v: i for i, v in enumerate(order)}
    for fn in net.functions:
        for a in fn.inputs:
            if a in pos:
                assert pos[a] < pos[fn.output]
    assert nx.is_directed_acyclic_graph(_dependency_graph(net))
    unreachable = set(validate_network(net).unreachable)
    g = _dependency_graph(net)
    expected = {v for v in net.variables if v != net.objective and not nx.has_path(g, v, net.objective)}
    assert unreachable == expected


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 15), seed=st.integers(0, 10_000))
def test_corrupted_networks_rejected(n, seed):
    """Redirecting an early function's argument to a later variable closes a cycle."""
    net = random_network(n, seed)
    order = topo_order(net)
    first, last = order[0], order[-1]
    # make the first function consume the last output, which depends on it only if reachable
    g = _dependency_graph(net)
    if not nx.has_path(g, first.output, last.output):
        return
    rewired = FuncNode(first.output, first.op, (last.output,) + first.inputs[1:])
    funcs = tuple(rewired if fn is first else fn for fn in net.functions)
    bad = FunctionNetwork(net.variables, funcs, net.inputs, net.objective, net.input_values)
    with pytest.raises(CycleError) as err:
        validate_network(bad)
    cyc = err.value.cycle
    assert first.output in cyc and last.output in cyc


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_undefined_reference_rejected(seed):
    rng = random.Random(seed)
    net = random_network(rng.randint(1, 10), seed)
    fn = net.functions[rng.randrange(len(net.functions))]
    text = to_dsl(net).replace(f"{fn.output} = {fn.op.name}({fn.inputs[0]}",
                               f"{fn.output} = {fn.op.name}(ghost", 1)
    with pytest.raises(UndefinedVariableError):
        parse_network(text)
