"""Message representations and the message store.

Upward messages are point masses (exact mode) or narrow Gaussians (grid
mode). Downward messages are known either through their log-slope at an
anchor point (exact mode) or as a max-normalised log-density tabulated on a
uniform grid (grid mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

__all__ = [
    "PointMass",
    "AnchorSlope",
    "GaussianParam",
    "GridLog",
    "MessageValue",
    "Direction",
    "MessageStore",
    "GridUnderflowError",
    "LOG_FLOOR",
    "trapezoid",
    "message_change",
]

# log of the smallest positive double; stands in for "zero density"
LOG_FLOOR = -745.0

trapezoid = getattr(np, "trapezoid", None) or np.trapz


class GridUnderflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PointMass:
    anchor: float

    def to_dict(self):
        return {"type": "point_mass", "anchor": self.anchor}


@dataclass(frozen=True)
class AnchorSlope:
    """A downward message known through ``d/dx log m(x)`` at ``anchor``.

    ``anchor=None`` marks a message whose log is linear everywhere (the
    constant message, or the Boltzmann factor), so its slope needs no anchor.
    """

    anchor: Optional[float]
    slope: float

    def to_dict(self):
        return {"type": "anchor_slope", "anchor": self.anchor, "slope": self.slope}


@dataclass(frozen=True)
class GaussianParam:
    mean: float
    stddev: float

    def __post_init__(self):
        if not (self.stddev > 0 and math.isfinite(self.stddev)):
            raise ValueError(f"stddev must be positive, got {self.stddev}")

    def logpdf(self, x):
        """Unnormalised log density."""
        return -0.5 * ((np.asarray(x, dtype=float) - self.mean) / self.stddev) ** 2

    def to_dict(self):
        return {"type": "gaussian", "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True, eq=False)
class GridLog:
    """Log-density on ``n`` uniformly spaced points of ``[lo, hi]``."""

    lo: float
    hi: float
    logvals: np.ndarray

    def __post_init__(self):
        vals = np.array(self.logvals, dtype=float)
        if vals.ndim != 1 or vals.size < 3:
            raise ValueError("a grid needs at least 3 points")
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if not np.all(np.isfinite(vals)):
            raise ValueError("log values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "logvals", vals)

    @classmethod
    def constant(cls, lo: float, hi: float, n: int) -> "GridLog":
        return cls(lo, hi, np.zeros(n))

    @classmethod
    def from_log(cls, lo: float, hi: float, raw) -> "GridLog":
        """Max-normalise raw log values; non-finite entries become ``LOG_FLOOR``."""
        raw = np.asarray(raw, dtype=float)
        ok = np.isfinite(raw)
        if not ok.any():
            raise GridUnderflowError("every grid value underflowed")
        vals = np.where(ok, raw - raw[ok].max(), LOG_FLOOR)
        return cls(lo, hi, np.maximum(vals, LOG_FLOOR))

    @property
    def n(self) -> int:
        return self.logvals.size

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def is_constant(self) -> bool:
        return not self.logvals.any()

    def log_at(self, x):
        """Log-linear interpolation, extended linearly past both ends."""
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.where(np.isnan(x), np.nan, 0.0)
        pts, lv = self.points, self.logvals
        out = np.interp(x, pts, lv)
        left = lv[0] + (x - pts[0]) * (lv[1] - lv[0]) / (pts[1] - pts[0])
        right = lv[-1] + (x - pts[-1]) * (lv[-1] - lv[-2]) / (pts[-1] - pts[-2])
        out = np.where(x < pts[0], left, np.where(x > pts[-1], right, out))
        return np.where(np.isnan(x), np.nan, out)

    def moments(self) -> tuple[float, float]:
        """Mean and standard deviation of the normalised density."""
        x = self.points
        w = np.exp(self.logvals)
        z = trapezoid(w, x)
        mean = trapezoid(w * x, x) / z
        var = trapezoid(w * (x - mean) ** 2, x) / z
        return float(mean), float(math.sqrt(max(var, 0.0)))

    def to_dict(self):
        return {
            "type": "grid_log",
            "lo": self.lo,
            "hi": self.hi,
            "n": self.n,
            "logvals": [float(v) for v in self.logvals],
        }


MessageValue = Union[PointMass, AnchorSlope, GaussianParam, GridLog]


class Direction(str, Enum):
    TO_FACTOR = "var->factor"
    TO_VARIABLE = "factor->var"


def message_change(old, new) -> float:
    """Largest absolute component change between two messages."""
    if old is None and new is None:
        return 0.0
    if old is None or new is None or type(old) is not type(new):
        return math.inf
    if isinstance(new, PointMass):
        return abs(new.anchor - old.anchor)
    if isinstance(new, AnchorSlope):
        if (old.anchor is None) != (new.anchor is None):
            return math.inf
        da = 0.0 if new.anchor is None else abs(new.anchor - old.anchor)
        return max(da, abs(new.slope - old.slope))
    if isinstance(new, GaussianParam):
        return max(abs(new.mean - old.mean), abs(new.stddev - old.stddev))
    if new.is_constant and old.is_constant:
        return 0.0
    if new.n != old.n:
        return math.inf
    return float(max(abs(new.lo - old.lo), abs(new.hi - old.hi),
                     np.max(np.abs(new.logvals - old.logvals))))


class MessageStore:
    """Messages keyed by ``(variable, factor index, Direction)``.

    ``None`` marks an upward message that has not been computed yet.
    ``info`` collects run metadata (schedule, sweeps or rounds, convergence).
    """

    def __init__(self, cfg, messages=None, info=None):
        self.cfg = cfg
        self.messages = dict(messages or {})
        self.info = dict(info or {})

    def __getitem__(self, key):
        return self.messages[key]

    def __setitem__(self, key, value):
        self.messages[key] = value

    def __contains__(self, key):
        return key in self.messages

    def __len__(self):
        return len(self.messages)

    def keys(self):
        return self.messages.keys()

    def items(self):
        return self.messages.items()

    def copy(self) -> "MessageStore":
        return MessageStore(self.cfg, self.messages, self.info)

    @property
    def complete(self) -> bool:
        return all(m is not None for m in self.messages.values())

    @property
    def converged(self) -> bool:
        return bool(self.info.get("converged")) and self.complete

    def max_change(self, other: "MessageStore") -> float:
        return max((message_change(m, other.messages.get(k)) for k, m in self.items()), default=0.0)

    def to_dict(self, fg) -> dict:
        rows = []
        for (var, fi, direction), msg in self.items():
            upward = fg.is_upward_to_variable(var, fi) == (direction is Direction.TO_VARIABLE)
            rows.append({
                "variable": var,
                "factor": fi,
                "direction": direction.value,
                "flow": "up" if upward else "down",
                "message": None if msg is None else msg.to_dict(),
            })
        return {"mode": self.cfg.mode.value, "info": dict(self.info), "messages": rows}
