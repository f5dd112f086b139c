"""Function-network IR and its line-oriented DSL.

A network is a DAG of scalar variables. Each non-input variable is the
output of exactly one function node; inputs carry a value; one variable is
the objective. The DSL has one statement per line::

    # comments run to the end of the line
    input w = 2.0
    input t = 1.0
    input y = 3.0
    x = pow2(t)
    u = add(w, x)
    v = mul(x, y)
    z = mul(u, v)
    objective z

Parametric primitives take their constant in brackets: ``pow_const[0.5](a)``,
``mul_const[3](a)``; ``pow<k>`` is shorthand for non-negative integer powers.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .primitives import Primitive, primitive_from_name

__all__ = [
    "NetworkError",
    "ParseError",
    "UnknownPrimitiveError",
    "ArityError",
    "DefinitionError",
    "DuplicateDefinitionError",
    "SelfReferenceError",
    "MissingObjectiveError",
    "MissingInputValueError",
    "CycleError",
    "UndefinedVariableError",
    "FuncNode",
    "FunctionNetwork",
    "ValidationReport",
    "parse_network",
    "load_network",
    "validate_network",
    "topo_order",
    "to_dsl",
]


class NetworkError(ValueError):
    """Base class for malformed networks."""


class ParseError(NetworkError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UnknownPrimitiveError(ParseError):
    pass


class ArityError(ParseError):
    pass


class DefinitionError(ParseError):
    pass


class DuplicateDefinitionError(DefinitionError):
    pass


class SelfReferenceError(DefinitionError):
    pass


class MissingObjectiveError(ParseError):
    pass


class MissingInputValueError(ParseError):
    pass


class CycleError(NetworkError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle + self.cycle[:1]))


class UndefinedVariableError(NetworkError):
    def __init__(self, names, message=None):
        self.names = list(names)
        super().__init__(message or "variables used but never defined: " + ", ".join(self.names))


@dataclass(frozen=True)
class FuncNode:
    output: str
    op: Primitive
    inputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) != self.op.arity:
            raise ArityError(
                f"{self.op.name} takes {self.op.arity} argument(s), got {len(self.inputs)}"
            )
        if self.output in self.inputs:
            raise SelfReferenceError(f"{self.output!r} is defined in terms of itself")

    def __str__(self):
        return f"{self.output} = {self.op.name}({', '.join(self.inputs)})"


@dataclass(frozen=True)
class FunctionNetwork:
    """Immutable computation graph.

    Attributes
    ----------
    variables : tuple of str
        Every defined variable, in declaration order.
    functions : tuple of FuncNode
        Function nodes in declaration order.
    inputs : tuple of str
        Variables not defined by any function.
    objective : str
        The variable whose adjoints are computed.
    input_values : mapping
        Value of each input.
    """

    variables: tuple
    functions: tuple
    inputs: tuple
    objective: str
    input_values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "input_values", {k: float(v) for k, v in self.input_values.items()})

    def definition(self, var: str) -> Optional[FuncNode]:
        for fn in self.functions:
            if fn.output == var:
                return fn
        return None

    def with_inputs(self, values: Mapping[str, float]) -> "FunctionNetwork":
        """Copy of the network with some input values replaced."""
        unknown = set(values) - set(self.inputs)
        if unknown:
            raise UndefinedVariableError(sorted(unknown), f"not network inputs: {sorted(unknown)}")
        merged = dict(self.input_values)
        merged.update({k: float(v) for k, v in values.items()})
        return FunctionNetwork(self.variables, self.functions, self.inputs, self.objective, merged)

    def __str__(self):
        return to_dsl(self)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    unreachable: tuple = ()


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[=(),\[\]])
    """,
    re.VERBOSE,
)
_RESERVED = {"input", "objective"}


def _tokenize(text, lineno):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), m.start() + 1))
        pos = m.end()
    return out


class _Line:
    """Cursor over the tokens of one statement."""

    def __init__(self, tokens, lineno, width):
        self.tokens = tokens
        self.i = 0
        self.lineno = lineno
        self.width = width

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def expect(self, kind, value=None, what=None):
        tok = self.peek()
        if tok is None or tok[0] != kind or (value is not None and tok[1] != value):
            col = tok[2] if tok else self.width + 1
            found = repr(tok[1]) if tok else "end of line"
            raise ParseError(f"expected {what or value or kind}, found {found}", self.lineno, col)
        self.i += 1
        return tok

    def done(self):
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok[1]!r}", self.lineno, tok[2])


def _check_name(tok, lineno):
    if tok[1] in _RESERVED:
        raise ParseError(f"{tok[1]!r} is a reserved word", lineno, tok[2])
    return tok[1]


def parse_network(text: str, validate: bool = True) -> FunctionNetwork:
    """Parse DSL source into a :class:`FunctionNetwork`.

    With ``validate`` (the default) the result is also checked for cycles and
    undefined variables, so every invariant of the IR holds on return.
    """
    declared = []
    functions = []
    inputs = []
    values = {}
    where = {}
    objective = None

    def define(name, lineno, col):
        if name in where:
            raise DuplicateDefinitionError(
                f"{name!r} already defined on line {where[name]}", lineno, col
            )
        where[name] = lineno
        declared.append(name)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        tokens = _tokenize(line, lineno)
        if not tokens:
            continue
        cur = _Line(tokens, lineno, len(line))
        first = tokens[0]
        if first[:2] == ("name", "input"):
            cur.i = 1
            tok = cur.expect("name", what="variable name")
            name = _check_name(tok, lineno)
            if cur.peek() is None:
                raise MissingInputValueError(f"input {name!r} has no value", lineno, tok[2])
            cur.expect("punct", "=")
            num = cur.expect("number", what="a number")
            cur.done()
            define(name, lineno, tok[2])
            inputs.append(name)
            values[name] = float(num[1])
        elif first[:2] == ("name", "objective"):
            cur.i = 1
            tok = cur.expect("name", what="variable name")
            cur.done()
            if objective is not None:
                raise ParseError("objective declared twice", lineno, first[2])
            objective = _check_name(tok, lineno)
        else:
            tok = cur.expect("name", what="a statement")
            name = _check_name(tok, lineno)
            cur.expect("punct", "=")
            ptok = cur.expect("name", what="a primitive")
            const = None
            if cur.peek() is not None and cur.peek()[1] == "[":
                cur.i += 1
                const = float(cur.expect("number", what="a constant")[1])
                cur.expect("punct", "]")
            try:
                op = primitive_from_name(ptok[1], const)
            except ValueError as exc:
                raise UnknownPrimitiveError(str(exc), lineno, ptok[2]) from None
            cur.expect("punct", "(")
            args = [_check_name(cur.expect("name", what="an argument"), lineno)]
            while cur.peek() is not None and cur.peek()[1] == ",":
                cur.i += 1
                args.append(_check_name(cur.expect("name", what="an argument"), lineno))
            cur.expect("punct", ")")
            cur.done()
            if len(args) != op.arity:
                raise ArityError(
                    f"{op.name} takes {op.arity} argument(s), got {len(args)}", lineno, ptok[2]
                )
            if name in args:
                raise SelfReferenceError(f"{name!r} is defined in terms of itself", lineno, tok[2])
            define(name, lineno, tok[2])
            functions.append(FuncNode(name, op, tuple(args)))

    if objective is None:
        raise MissingObjectiveError("no objective declared")
    net = FunctionNetwork(tuple(declared), tuple(functions), tuple(inputs), objective, values)
    if validate:
        validate_network(net)
    return net


def load_network(path) -> FunctionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def _find_cycle(net):
    defs = {fn.output: fn for fn in net.functions}
    state = {}

    def visit(v, stack):
        state[v] = 1
        stack.append(v)
        fn = defs.get(v)
        for w in fn.inputs if fn else ():
            if state.get(w) == 1:
                return stack[stack.index(w):]
            if w not in state:
                found = visit(w, stack)
                if found:
                    return found
        stack.pop()
        state[v] = 2
        return None

    for v in defs:
        if v not in state:
            found = visit(v, [])
            if found:
                return found
    return None


def validate_network(net: FunctionNetwork) -> ValidationReport:
    """Check the structural invariants of ``net``.

    Raises
    ------
    CycleError
        If function definitions form a directed cycle.
    UndefinedVariableError
        If a variable is used (or named objective) but never defined.
    DuplicateDefinitionError, MissingInputValueError
        On single-assignment or input-value violations.

    Returns
    -------
    ValidationReport
        ``unreachable`` lists variables with no directed path to the
        objective, in declaration order. These are legal; their adjoints are 0.
    """
    seen = set()
    for v in net.variables:
        if v in seen:
            raise DuplicateDefinitionError(f"{v!r} defined twice")
        seen.add(v)
    outputs = [fn.output for fn in net.functions]
    if len(set(outputs)) != len(outputs):
        raise DuplicateDefinitionError("a variable is the output of two functions")
    if set(outputs) & set(net.inputs):
        raise DuplicateDefinitionError("an input is also a function output")
    if set(outputs) | set(net.inputs) != seen:
        raise NetworkError("declared variables do not match inputs and function outputs")
    for v in net.inputs:
        if v not in net.input_values:
            raise MissingInputValueError(f"input {v!r} has no value")

    cycle = _find_cycle(net)
    if cycle:
        raise CycleError(cycle)

    used = [a for fn in net.functions for a in fn.inputs]
    undefined = [v for v in dict.fromkeys(used) if v not in seen]
    if undefined:
        raise UndefinedVariableError(undefined)
    if net.objective not in seen:
        raise UndefinedVariableError([net.objective], f"objective {net.objective!r} is not defined")

    defs = {fn.output: fn for fn in net.functions}
    reach = {net.objective}
    stack = [net.objective]
    while stack:
        fn = defs.get(stack.pop())
        for a in fn.inputs if fn else ():
            if a not in reach:
                reach.add(a)
                stack.append(a)
    return ValidationReport(True, tuple(v for v in net.variables if v not in reach))


def topo_order(net: FunctionNetwork) -> tuple:
    """Function nodes ordered so each follows the producers of its inputs.

    Among nodes that are ready at the same time, the earliest declared wins.
    """
    index = {fn.output: i for i, fn in enumerate(net.functions)}
    waiting = {}
    consumers = {}
    for i, fn in enumerate(net.functions):
        deps = {a for a in fn.inputs if a in index}
        waiting[i] = len(deps)
        for a in deps:
            consumers.setdefault(index[a], []).append(i)
    ready = [i for i, n in waiting.items() if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(net.functions[i])
        for j in consumers.get(i, ()):
            waiting[j] -= 1
            if waiting[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(net.functions):
        raise CycleError(_find_cycle(net) or [])
    return tuple(order)


def to_dsl(net: FunctionNetwork) -> str:
    """Serialise ``net`` back to DSL text, in declaration order."""
    defs = {fn.output: fn for fn in net.functions}
    lines = []
    for v in net.variables:
        if v in defs:
            lines.append(str(defs[v]))
        else:
            lines.append(f"input {v} = {net.input_values[v]!r}")
    lines.append(f"objective {net.objective}")
    return "\n".join(lines) + "\n"
