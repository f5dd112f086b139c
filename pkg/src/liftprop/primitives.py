"""Primitive operator table.

Every function node in a network applies exactly one primitive. A primitive
knows how to evaluate itself, how to differentiate itself with respect to each
input slot, and which arguments lie outside its domain.

The rules are written with numpy ufuncs and plain arithmetic so the same code
serves scalar evaluation (forward pass, backprop, exact message passing) and
vectorised evaluation over quadrature grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["Primitive", "PRIMITIVE_KINDS", "PARAMETRIC_KINDS", "primitive_from_name"]


def _pow_partial(c):
    if c == 0.0:
        return lambda a: 0.0 * a
    return lambda a: c * np.power(a, c - 1.0)


def _pow_domain(c):
    if float(c).is_integer():
        if c < 0:
            return lambda a: a != 0.0
        return None
    return lambda a: a > 0.0


# kind -> (arity, eval, partials, domain predicate or None)
_UNARY = {
    "neg": (lambda a: -a, lambda a: (-1.0 + 0.0 * a,), None),
    "exp": (np.exp, lambda a: (np.exp(a),), None),
    "log": (np.log, lambda a: (1.0 / a,), lambda a: a > 0.0),
    "sin": (np.sin, lambda a: (np.cos(a),), None),
    "cos": (np.cos, lambda a: (-np.sin(a),), None),
    "tanh": (np.tanh, lambda a: (1.0 - np.tanh(a) ** 2,), None),
}

_BINARY = {
    "add": (lambda a, b: a + b, lambda a, b: (1.0 + 0.0 * a, 1.0 + 0.0 * b), None),
    "sub": (lambda a, b: a - b, lambda a, b: (1.0 + 0.0 * a, -1.0 + 0.0 * b), None),
    "mul": (lambda a, b: a * b, lambda a, b: (b, a), None),
    "div": (lambda a, b: a / b, lambda a, b: (1.0 / b, -a / (b * b)), lambda a, b: b != 0.0),
}

PARAMETRIC_KINDS = ("pow_const", "mul_const")
PRIMITIVE_KINDS = tuple(_BINARY) + tuple(_UNARY) + PARAMETRIC_KINDS


@dataclass(frozen=True)
class Primitive:
    """A scalar operator, optionally carrying a real constant.

    ``pow_const`` raises its input to ``const``; ``mul_const`` scales its
    input by ``const``. All other kinds ignore ``const``.
    """

    kind: str
    const: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise ValueError(f"unknown primitive {self.kind!r}")
        if self.kind in PARAMETRIC_KINDS:
            if self.const is None or not math.isfinite(self.const):
                raise ValueError(f"{self.kind} needs a finite constant")
            object.__setattr__(self, "const", float(self.const))
        elif self.const is not None:
            raise ValueError(f"{self.kind} takes no constant")

    @property
    def arity(self) -> int:
        return 2 if self.kind in _BINARY else 1

    @property
    def name(self) -> str:
        """Canonical spelling used by the network DSL."""
        if self.kind == "pow_const" and self.const.is_integer() and self.const >= 0:
            return f"pow{int(self.const)}"
        if self.kind in PARAMETRIC_KINDS:
            return f"{self.kind}[{_fmt_const(self.const)}]"
        return self.kind

    def _rules(self) -> tuple[Callable, Callable, Optional[Callable]]:
        if self.kind in _BINARY:
            return _BINARY[self.kind]
        if self.kind in _UNARY:
            return _UNARY[self.kind]
        c = self.const
        if self.kind == "mul_const":
            return (lambda a: c * a, lambda a: (c + 0.0 * a,), None)
        return (lambda a: np.power(a, c), lambda a: (_pow_partial(c)(a),), _pow_domain(c))

    def __call__(self, *args):
        return self._rules()[0](*args)

    def partials(self, *args) -> tuple:
        """Partial derivative with respect to each input slot."""
        return self._rules()[1](*args)

    def in_domain(self, *args) -> bool:
        """Scalar domain check; True when the arguments are admissible."""
        pred = self._rules()[2]
        return True if pred is None else bool(pred(*args))

    def __str__(self):
        return self.name


def _fmt_const(c: float) -> str:
    return str(int(c)) if c.is_integer() else repr(c)


def primitive_from_name(name: str, const: Optional[float] = None) -> Primitive:
    """Resolve a DSL primitive spelling.

    Accepts plain kinds (``mul``), bracketed parametric kinds
    (``pow_const`` / ``pow`` / ``mul_const`` with ``const`` supplied) and the
    ``pow<k>`` shorthand for non-negative integer exponents (``pow2``).
    """
    if const is not None:
        if name in ("pow", "pow_const"):
            return Primitive("pow_const", const)
        if name == "mul_const":
            return Primitive("mul_const", const)
        raise ValueError(f"unknown primitive {name!r}")
    if name.startswith("pow") and name[3:].isdigit():
        return Primitive("pow_const", float(name[3:]))
    if name in PARAMETRIC_KINDS or name not in PRIMITIVE_KINDS:
        raise ValueError(f"unknown primitive {name!r}")
    return Primitive(name)
