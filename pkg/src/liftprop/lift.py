"""Lift a function network into a factor graph.

Each function node ``y = f(x1, x2)`` becomes the factor ``delta(f(x1, x2) - y)``,
each input gets a delta prior at its value, and the objective gets the
Boltzmann factor ``exp(z / kT)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .config import BPConfig
from .netir import FuncNode, FunctionNetwork, NetworkError, validate_network

__all__ = [
    "FunctionFactor",
    "DeltaPrior",
    "BoltzmannPrior",
    "FactorNode",
    "FactorGraph",
    "lift_network",
]


@dataclass(frozen=True)
class FunctionFactor:
    func: FuncNode

    @property
    def neighbors(self) -> tuple:
        """Distinct inputs in slot order, then the output."""
        return tuple(dict.fromkeys(self.func.inputs)) + (self.func.output,)

    def describe(self):
        return {"kind": "function", "function": str(self.func)}


@dataclass(frozen=True)
class DeltaPrior:
    var: str
    center: float

    @property
    def neighbors(self) -> tuple:
        return (self.var,)

    def describe(self):
        return {"kind": "delta_prior", "var": self.var, "center": self.center}


@dataclass(frozen=True)
class BoltzmannPrior:
    var: str
    kT: float

    def __post_init__(self):
        if not self.kT > 0:
            raise ValueError("kT must be positive")

    @property
    def neighbors(self) -> tuple:
        return (self.var,)

    def describe(self):
        return {"kind": "boltzmann", "var": self.var, "kT": self.kT}


FactorNode = Union[FunctionFactor, DeltaPrior, BoltzmannPrior]


@dataclass(frozen=True, eq=False)
class FactorGraph:
    """Bipartite graph of variables and factors.

    Besides the raw structure, the graph records the orientation inherited
    from the network: every variable has exactly one factor *below* it (its
    defining function factor, or its delta prior) and zero or more factors
    *above* it (functions consuming it, and possibly the Boltzmann factor).
    Messages along a below-edge travel upward from factor to variable and
    downward from variable to factor; along an above-edge it is the reverse.
    """

    network: FunctionNetwork
    variables: tuple
    factors: tuple
    objective: str
    boltzmann_var: str

    def __post_init__(self):
        below, above = {}, {v: [] for v in self.variables}
        for i, fac in enumerate(self.factors):
            if isinstance(fac, FunctionFactor):
                below[fac.func.output] = i
                for x in fac.neighbors[:-1]:
                    above[x].append(i)
            elif isinstance(fac, DeltaPrior):
                below[fac.var] = i
            else:
                above[fac.var].append(i)
        object.__setattr__(self, "_below", below)
        object.__setattr__(self, "_above", {v: tuple(a) for v, a in above.items()})

    @property
    def edges(self) -> tuple:
        """All (variable, factor index) pairs, ordered by factor."""
        return tuple((v, i) for i, fac in enumerate(self.factors) for v in fac.neighbors)

    def below(self, var: str) -> int:
        return self._below[var]

    def above(self, var: str) -> tuple:
        return self._above[var]

    def neighbors(self, var: str) -> tuple:
        """Factor indices adjacent to ``var``: the below factor first."""
        return (self._below[var],) + self._above[var]

    def is_upward_to_variable(self, var: str, factor: int) -> bool:
        """Whether the factor-to-variable message on this edge flows upward."""
        return self._below[var] == factor

    @property
    def boltzmann_index(self) -> int:
        return len(self.factors) - 1

    def degree(self, var: str) -> int:
        return 1 + len(self._above[var])

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "objective": self.objective,
            "factors": [fac.describe() for fac in self.factors],
            "edges": [[v, i] for v, i in self.edges],
        }


def lift_network(
    net: FunctionNetwork,
    cfg: Optional[BPConfig] = None,
    boltzmann_on: Optional[str] = None,
) -> FactorGraph:
    """Build the lifted factor graph of ``net``.

    Factors are ordered as: function factors in declaration order, delta
    priors in input order, then the single Boltzmann factor.

    ``boltzmann_on`` moves the Boltzmann factor from the objective to another
    variable. This is exploratory (network inversion); nothing downstream
    claims any invariant for such graphs.
    """
    cfg = cfg or BPConfig()
    validate_network(net)
    target = net.objective if boltzmann_on is None else boltzmann_on
    if target not in net.variables:
        raise NetworkError(f"cannot attach the Boltzmann factor to unknown variable {target!r}")
    factors = [FunctionFactor(fn) for fn in net.functions]
    factors += [DeltaPrior(v, net.input_values[v]) for v in net.inputs]
    factors.append(BoltzmannPrior(target, cfg.kT))
    return FactorGraph(net, net.variables, tuple(factors), net.objective, target)
