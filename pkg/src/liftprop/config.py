"""Configuration for lifting and belief propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

__all__ = ["Mode", "TwoPass", "Flooding", "Schedule", "BPConfig"]


class Mode(str, Enum):
    EXACT = "exact"  # symbolic deltas, anchor/slope downward messages
    GRID = "grid"  # narrow Gaussians upward, tabulated log-densities downward


@dataclass(frozen=True)
class TwoPass:
    """One upward sweep in topological order, then one downward sweep."""

    name = "two-pass"


@dataclass(frozen=True)
class Flooding:
    """Synchronous rounds until the largest message change drops below ``tol``."""

    max_iters: int = 200
    tol: float = 1e-10
    name = "flooding"

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


Schedule = Union[TwoPass, Flooding]


@dataclass(frozen=True)
class BPConfig:
    """Knobs for lifting and message passing.

    Parameters
    ----------
    kT : float
        Temperature of the Boltzmann factor ``exp(z / kT)`` on the objective.
    sigma : float
        Width of the Gaussians that stand in for delta priors in grid mode.
    grid_points : int
        Odd number of points per tabulated message, at least 33.
    grid_span : float
        Grid half-width in units of the variable's upward message width.
    quad_nodes : int
        Gauss-Hermite nodes per marginalised input (1 to 9).
    schedule : TwoPass or Flooding
    mode : Mode
    seed : int
        Seeds the Monte-Carlo fallback used when a pushforward has zero width.
    mc_samples : int
        Sample count of that fallback.
    anchor_tol : float
        Allowed disagreement between anchors of multiplied slope messages.
    """

    kT: float = 1.0
    sigma: float = 1e-3
    grid_points: int = 129
    grid_span: float = 8.0
    quad_nodes: int = 3
    schedule: Schedule = field(default_factory=TwoPass)
    mode: Mode = Mode.EXACT
    seed: int = 0
    mc_samples: int = 10_000
    anchor_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (math.isfinite(self.kT) and self.kT > 0):
            raise ValueError("kT must be positive and finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")
        if int(self.grid_points) != self.grid_points or self.grid_points < 33 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be an odd integer >= 33")
        if not (math.isfinite(self.grid_span) and self.grid_span > 0):
            raise ValueError("grid_span must be positive")
        if int(self.quad_nodes) != self.quad_nodes or not 1 <= self.quad_nodes <= 9:
            raise ValueError("quad_nodes must be an integer in [1, 9]")
        if not isinstance(self.schedule, (TwoPass, Flooding)):
            raise ValueError("schedule must be TwoPass() or Flooding(...)")
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be at least 2")
        if not self.anchor_tol >= 0:
            raise ValueError("anchor_tol must be non-negative")

    def replace(self, **changes) -> "BPConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        sched = {"kind": self.schedule.name}
        if isinstance(self.schedule, Flooding):
            sched.update(max_iters=self.schedule.max_iters, tol=self.schedule.tol)
        return {
            "kT": self.kT,
            "sigma": self.sigma,
            "grid_points": self.grid_points,
            "grid_span": self.grid_span,
            "quad_nodes": self.quad_nodes,
            "schedule": sched,
            "mode": self.mode.value,
            "seed": self.seed,
        }
