"""Reference networks and a seeded generator of random test networks."""

from __future__ import annotations

import math
import random

from .autodiff import EvaluationError, backprop, evaluate
from .netir import FuncNode, FunctionNetwork, parse_network
from .primitives import Primitive

__all__ = ["EXAMPLE_DSL", "example_network", "random_network", "random_corpus"]

# z = f(u, v), u = g(w, x), v = h(x, y), x = j(t): one loop through the shared x
EXAMPLE_DSL = """\
# f, g, h, j instantiated as mul, add, mul, square
input w = 2.0
input t = 1.0
input y = 3.0
x = pow2(t)
u = add(w, x)
v = mul(x, y)
z = mul(u, v)
objective z
"""

_SMOOTH = [
    Primitive("add"), Primitive("sub"), Primitive("mul"), Primitive("neg"),
    Primitive("sin"), Primitive("cos"), Primitive("tanh"), Primitive("exp"),
    Primitive("pow_const", 2.0), Primitive("pow_const", 3.0),
    Primitive("mul_const", 0.5), Primitive("mul_const", -1.5),
]
_GUARDED = [Primitive("div"), Primitive("log"), Primitive("pow_const", -1.0),
            Primitive("pow_const", 0.5)]

# bounds that keep finite differences and exact comparisons well conditioned
_MAX_VALUE = 20.0
_MAX_PARTIAL = 20.0
_MAX_ADJOINT = 1e3
_MIN_GUARD = 0.2  # distance from each primitive's singularity
_MAX_EXP_ARG = 2.5


def example_network() -> FunctionNetwork:
    return parse_network(EXAMPLE_DSL)


def _admissible(op, args):
    kind = op.kind
    if kind == "log" or (kind == "pow_const" and not op.const.is_integer()):
        return args[0] >= _MIN_GUARD
    if kind == "pow_const" and op.const < 0:
        return abs(args[0]) >= _MIN_GUARD
    if kind == "div":
        return abs(args[1]) >= _MIN_GUARD
    if kind == "exp":
        return args[0] <= _MAX_EXP_ARG
    return True


def _try_build(rng, n_functions, smooth):
    n_inputs = rng.randint(1, 3) if n_functions else 1
    inputs = [f"a{i}" for i in range(n_inputs)]
    values = {a: round(rng.uniform(0.5, 2.0), 6) for a in inputs}
    names = list(inputs)
    current = dict(values)
    functions = []
    pool = _SMOOTH if smooth else _SMOOTH + _GUARDED
    for k in range(n_functions):
        for _ in range(100):
            op = rng.choice(pool)
            # favour recent variables so networks get deep as well as wide
            args = [names[max(rng.randrange(len(names)), rng.randrange(len(names)))]
                    for _ in range(op.arity)]
            argv = [current[a] for a in args]
            if not _admissible(op, argv):
                continue
            out = float(op(*argv))
            parts = [float(p) for p in op.partials(*argv)]
            if abs(out) > _MAX_VALUE or any(not abs(p) <= _MAX_PARTIAL for p in parts):
                continue
            name = f"v{k}"
            functions.append(FuncNode(name, op, tuple(args)))
            names.append(name)
            current[name] = out
            break
        else:
            return None
    objective = names[-1]
    return FunctionNetwork(tuple(names), tuple(functions), tuple(inputs), objective, values)


def random_network(n_functions: int, seed: int, smooth: bool = False) -> FunctionNetwork:
    """A valid, domain-safe network with ``n_functions`` function nodes.

    Inputs are drawn from [0.5, 2]. Primitives near a singularity (``log``,
    ``div``, negative or fractional powers) only receive arguments at least
    0.2 away from it; values, partials and adjoints are kept bounded by
    rejection. ``smooth`` restricts the draw to primitives that are entire
    functions. The same ``(n_functions, seed, smooth)`` always gives the same
    network.
    """
    if n_functions < 0:
        raise ValueError("n_functions must be non-negative")
    for attempt in range(1000):
        rng = random.Random(f"{seed}:{n_functions}:{int(smooth)}:{attempt}")
        net = _try_build(rng, n_functions, smooth)
        if net is None:
            continue
        try:
            adj = backprop(net, evaluate(net))
        except EvaluationError:
            continue
        if all(math.isfinite(a) and abs(a) <= _MAX_ADJOINT for a in adj.values()):
            return net
    raise RuntimeError(f"could not draw a network with {n_functions} functions")


def random_corpus(count: int, seed: int = 0, max_functions: int = 20, smooth: bool = False) -> list:
    """``count`` random networks with 1 to ``max_functions`` function nodes."""
    rng = random.Random(seed)
    return [random_network(rng.randint(1, max_functions), rng.randrange(2**31), smooth)
            for _ in range(count)]
