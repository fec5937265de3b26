"""Constitutive closures of the tumour model: pressure law, its inverse,
saturation density, growth law and initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidArgumentError

ARCTAN_SCALE = 200.0 / math.pi
ARCTAN_SLOPE = 4.0


@dataclass(frozen=True)
class GrowthLaw:
    """Pressure-dependent growth rate.

    ``arctan``: ``scale * arctan(slope * (P_max - p)_+)``.
    ``table``: monotone linear interpolation through ``(table_p, table_g)``,
    forced to 0 for ``p >= P_max``.
    """

    kind: str = "arctan"
    scale: float = ARCTAN_SCALE
    slope: float = ARCTAN_SLOPE
    table_p: Optional[tuple] = None
    table_g: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("arctan", "table"):
            raise InvalidArgumentError(f"unknown growth law {self.kind!r}")
        if self.kind == "table":
            if self.table_p is None or self.table_g is None or len(self.table_p) != len(self.table_g):
                raise InvalidArgumentError("table growth law needs equal-length table_p/table_g")
            if len(self.table_p) < 2 or np.any(np.diff(self.table_p) <= 0):
                raise InvalidArgumentError("table_p must be strictly increasing")

    def __call__(self, p, P_max):
        return growth(p, self, P_max)

    def is_admissible(self, P_max: float, samples: int = 1024) -> bool:
        """G(0) > 0, G = 0 beyond P_max, strictly decreasing on (0, P_max)."""
        ps = np.linspace(0.0, P_max, samples + 2)[1:-1]
        g = growth(ps, self, P_max)
        beyond = growth(np.linspace(P_max, 2 * P_max + 1, 16), self, P_max)
        return bool(growth(0.0, self, P_max) > 0 and np.all(beyond == 0) and np.all(np.diff(g) < 0))


ZERO_GROWTH = GrowthLaw(scale=0.0)


@dataclass(frozen=True)
class ModelParams:
    k: int = 100
    nu: float = 0.5
    P_max: float = 1.0
    growth: GrowthLaw = field(default_factory=GrowthLaw)
    alpha: float = 1.0
    tau: float = 1e-5
    t_final: float = 0.1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise InvalidArgumentError(f"k must be an integer >= 2, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if not self.nu >= 0:
            raise InvalidArgumentError(f"nu must be >= 0, got {self.nu}")
        if not self.P_max > 0:
            raise InvalidArgumentError(f"P_max must be > 0, got {self.P_max}")
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be > 0, got {self.alpha}")
        if not self.tau > 0:
            raise InvalidArgumentError(f"tau must be > 0, got {self.tau}")
        if not self.t_final >= 0:
            raise InvalidArgumentError(f"t_final must be >= 0, got {self.t_final}")

    @property
    def n_max(self) -> float:
        return n_max(self.k, self.P_max)


def _check_k(k):
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"k must be an integer >= 2, got {k}")


def power(n, e):
    """``n**e`` for n >= 0 evaluated as exp(e log n), exactly 0 at n = 0."""
    n = np.asarray(n, dtype=float)
    if e == 0:
        out = np.ones_like(n)
        return out[()] if out.ndim == 0 else out
    with np.errstate(divide="ignore"):
        out = np.exp(e * np.log(n))
    if e > 0:
        out = np.where(n == 0.0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def pressure(n, k):
    """``k/(k-1) * n**(k-1)``."""
    _check_k(k)
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError(f"pressure undefined for negative density (min {n.min()})")
    return power(n, k - 1) * (k / (k - 1))


def density_of_pressure(p, k):
    """Inverse of :func:`pressure`."""
    _check_k(k)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError(f"density undefined for negative pressure (min {p.min()})")
    return power(p * ((k - 1) / k), 1.0 / (k - 1))


def n_max(k, P_max):
    if not P_max > 0:
        raise InvalidArgumentError(f"P_max must be > 0, got {P_max}")
    return float(density_of_pressure(P_max, k))


def growth(p, law: GrowthLaw, P_max):
    p = np.asarray(p, dtype=float)
    if law.kind == "arctan":
        g = law.scale * np.arctan(law.slope * np.maximum(P_max - p, 0.0))
    else:
        g = np.interp(p, law.table_p, law.table_g)
        g = np.where(p >= P_max, 0.0, g)
    return g[()] if g.ndim == 0 else g


def initial_gaussian(alpha):
    """``(x, y) -> alpha * exp(-(x^2 + y^2))``."""
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be > 0, got {alpha}")

    def n0(x, y):
        return alpha * np.exp(-(np.asarray(x) ** 2 + np.asarray(y) ** 2))

    return n0


def initial_constant(value):
    def n0(x, y):
        return np.full(np.shape(x), float(value))

    return n0
