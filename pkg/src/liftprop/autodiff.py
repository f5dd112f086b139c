"""Forward evaluation and reverse-mode adjoints of a function network."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .netir import FuncNode, FunctionNetwork, topo_order, validate_network

__all__ = [
    "EvaluationError",
    "Valuation",
    "AdjointSet",
    "evaluate",
    "backprop",
    "finite_diff_gradient",
    "gradient",
]


class EvaluationError(ArithmeticError):
    """A primitive was applied outside its domain or produced a non-finite value."""

    def __init__(self, message, node: FuncNode | None = None):
        self.node = node
        super().__init__(f"{message} at `{node}`" if node is not None else message)


@dataclass(frozen=True)
class Valuation(Mapping):
    """Value of every variable after a forward pass."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class AdjointSet(Mapping):
    """Derivative of the objective with respect to each variable."""

    adjoints: dict

    def __getitem__(self, key):
        return self.adjoints[key]

    def __iter__(self):
        return iter(self.adjoints)

    def __len__(self):
        return len(self.adjoints)


def apply_node(fn: FuncNode, values: Mapping[str, float]) -> float:
    """Evaluate one function node, checking its domain and the result."""
    args = [values[a] for a in fn.inputs]
    if not fn.op.in_domain(*args):
        raise EvaluationError(f"{fn.op.name} undefined for arguments {args}", fn)
    out = float(fn.op(*args))
    if not math.isfinite(out):
        raise EvaluationError(f"non-finite result {out}", fn)
    return out


def evaluate(net: FunctionNetwork) -> Valuation:
    """Forward pass in topological order."""
    values = {}
    for v in net.inputs:
        x = net.input_values[v]
        if not math.isfinite(x):
            raise EvaluationError(f"input {v!r} is not finite ({x})")
        values[v] = x
    for fn in topo_order(net):
        values[fn.output] = apply_node(fn, values)
    return Valuation({v: values[v] for v in net.variables})


def backprop(net: FunctionNetwork, vals: Mapping[str, float]) -> AdjointSet:
    """Reverse-mode chain rule in one backward pass.

    Each adjoint is the correctly rounded sum (``math.fsum``) of
    ``adjoint[consumer] * partial`` over every input slot the variable
    occupies. Variables without a path to the objective get exactly 0.
    """
    order = topo_order(net)
    live = {net.objective}
    for fn in reversed(order):
        if fn.output in live:
            live.update(fn.inputs)

    terms = {v: [] for v in net.variables}
    adj = {v: 0.0 for v in net.variables}
    adj[net.objective] = 1.0
    terms[net.objective].append(1.0)
    for fn in reversed(order):
        if fn.output not in live:
            continue
        a = math.fsum(terms[fn.output])
        adj[fn.output] = a
        parts = fn.op.partials(*(vals[x] for x in fn.inputs))
        for x, p in zip(fn.inputs, parts):
            terms[x].append(a * float(p))
    for v in net.inputs:
        if v in live:
            adj[v] = math.fsum(terms[v])
    return AdjointSet(adj)


def gradient(net: FunctionNetwork) -> AdjointSet:
    """Shorthand for ``backprop(net, evaluate(net))``."""
    return backprop(net, evaluate(net))


def finite_diff_gradient(net: FunctionNetwork, h: float = 1e-6) -> AdjointSet:
    """Central differences ``(z(x+h) - z(x-h)) / 2h`` for every input."""
    if not (isinstance(h, (int, float)) and math.isfinite(h) and h > 0):
        raise ValueError(f"step h must be positive and finite, got {h!r}")
    validate_network(net)
    out = {}
    for v in net.inputs:
        x0 = net.input_values[v]
        try:
            hi = evaluate(net.with_inputs({v: x0 + h}))[net.objective]
            lo = evaluate(net.with_inputs({v: x0 - h}))[net.objective]
        except EvaluationError as exc:
            raise EvaluationError(f"perturbing {v!r} by +/-{h} failed: {exc}") from exc
        out[v] = (hi - lo) / (2.0 * h)
    return AdjointSet(out)
