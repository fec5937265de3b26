"""Runtime monitors for the discrete properties of the scheme and the
metrics used to watch the stiff-pressure (Hele-Shaw) limit."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .fespace import dirichlet, discrete_laplacian
from .model import growth, power, pressure

DMP_TOL = 1e-12
ENERGY_SLACK = 0.05
MONOTONE_RTOL = 1e-10

SERIES_COLUMNS = (
    "t", "min_n", "max_n", "min_dtn", "mass", "mass_balance_residual",
    "energy_lhs", "energy_rhs", "grad_p", "complementarity", "snaps",
)


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    min_n: float
    max_n: float
    min_dtn: float
    mass: float
    mass_balance_residual: float
    energy_lhs: float
    energy_rhs: float
    grad_p: float
    complementarity: float
    snaps: int
    h4_min: float = math.nan
    max_pressure: float = math.nan
    dmp_violations: int = 0

    def row(self) -> list:
        d = asdict(self)
        return [d[c] for c in SERIES_COLUMNS]


class DMPReport(NamedTuple):
    below: list  # (node, magnitude) with n < -tol
    above: list  # (node, magnitude) with n > N_max + tol

    @property
    def ok(self) -> bool:
        return not self.below and not self.above


def h4_residual(n0, params, mesh, M, K):
    """Nodal residual of the initial-positivity condition and its minimum.

    With lumped products the variational inequality over nonnegative test
    functions holds iff every entry of the returned vector is >= 0.
    """
    n0 = np.asarray(n0, dtype=float)
    src = M * growth(pressure(n0, params.k), params.growth, params.P_max) * n0
    R = -(K @ power(n0, params.k)) - params.nu * (K @ n0) + src
    return R, float(R.min())


def complementarity_residual(n, params, mesh, M, K) -> float:
    """Lumped L2 norm of ``p_h (lap_h p_h + G(p_h))`` with ``p_h = I_h(n^k)``."""
    ph = power(np.asarray(n, dtype=float), params.k)
    lap = discrete_laplacian(K, M, ph)
    val = ph * (lap + growth(ph, params.growth, params.P_max))
    return float(np.sqrt(np.sum(M * val * val)))


def gradient_bound_metrics(n, k, K):
    """``(||grad n||, ||grad I_h(n^k)||)`` in L2."""
    n = np.asarray(n, dtype=float)
    return (
        math.sqrt(max(dirichlet(K, n), 0.0)),
        math.sqrt(max(dirichlet(K, power(n, k)), 0.0)),
    )


def dmp_check(n, k, P_max, tol=DMP_TOL, n_max=None) -> DMPReport:
    from .model import n_max as _n_max

    n = np.asarray(n, dtype=float)
    top = _n_max(k, P_max) if n_max is None else n_max
    lo = np.flatnonzero(n < -tol)
    hi = np.flatnonzero(n > top + tol)
    return DMPReport(
        [(int(a), float(-n[a])) for a in lo],
        [(int(a), float(n[a] - top)) for a in hi],
    )


def monotonicity_check(prev, cur, tau) -> float:
    """Smallest nodal difference quotient ``(cur - prev) / tau``."""
    return float(np.min((np.asarray(cur) - np.asarray(prev)) / tau))


def energy_check(records, slack=ENERGY_SLACK) -> list:
    """Per-record flag: True where the energy inequality is violated beyond slack."""
    return [r.energy_lhs > r.energy_rhs * (1 + slack) for r in records]


@dataclass
class MonitorSummary:
    h4_min: float
    h4_holds: bool
    dmp_ok: bool
    dmp_worst_below: float
    dmp_worst_above: float
    dmp_steps_violated: int
    min_dtn: float
    monotone_slack: float
    monotone_ok: bool
    max_rel_mass_balance: float
    energy_flags: int
    max_pressure: float
    snaps: int
    solver_max_iterations: int
    first_violation_steps: dict = field(default_factory=dict)


class Monitor:
    """Builds one :class:`DiagnosticsRecord` per step and tracks violations."""

    def __init__(self, mesh, M, K, params, n0, complementarity_every=1, energy=True):
        self.mesh, self.M, self.K, self.params = mesh, M, K, params
        self.every = max(int(complementarity_every or 0), 0)
        self.energy = energy
        self.n_max = params.n_max
        self.g0 = float(growth(0.0, params.growth, params.P_max))
        self.half_norm0 = 0.5 * float(np.dot(M, n0 * n0))
        self.dissipation = 0.0
        self.h4_vec, self.h4_min = h4_residual(n0, params, mesh, M, K)
        self.monotone_slack = MONOTONE_RTOL * self.n_max / params.tau
        self._dmp_below = 0.0
        self._dmp_above = 0.0
        self._dmp_steps = 0
        self._min_dtn = math.inf
        self._mass_balance = 0.0
        self._energy_flags = 0
        self._max_p = 0.0
        self._snaps = 0
        self._max_it = 0
        self._first = {}

    def _common(self, state, min_dtn, mb):
        n = state.n
        M, K, params = self.M, self.K, self.params
        mass = float(np.dot(M, n))
        half = 0.5 * float(np.dot(M, n * n))
        e_lhs = half + self.dissipation if self.energy else math.nan
        e_rhs = math.exp(2 * self.g0 * state.t) * self.half_norm0 if self.energy else math.nan
        if self.energy and e_lhs > e_rhs * (1 + ENERGY_SLACK):
            self._energy_flags += 1
            self._first.setdefault("energy", state.step)
        nn = np.maximum(n, 0.0)
        _, grad_p = gradient_bound_metrics(nn, params.k, K)
        comp = math.nan
        if self.every and state.step % self.every == 0:
            comp = complementarity_residual(nn, params, self.mesh, M, K)
        dmp = dmp_check(n, params.k, params.P_max, n_max=self.n_max)
        if not dmp.ok:
            self._dmp_steps += 1
            self._first.setdefault("dmp", state.step)
            if dmp.below:
                self._dmp_below = max(self._dmp_below, max(m for _, m in dmp.below))
            if dmp.above:
                self._dmp_above = max(self._dmp_above, max(m for _, m in dmp.above))
        max_p = float(state.p.max()) if state.p is not None and len(state.p) else 0.0
        self._max_p = max(self._max_p, max_p)
        self._snaps += state.snaps
        if state.solve is not None:
            self._max_it = max(self._max_it, state.solve.iterations)
        return DiagnosticsRecord(
            t=state.t, step=state.step, min_n=float(n.min()), max_n=float(n.max()),
            min_dtn=min_dtn, mass=mass, mass_balance_residual=mb,
            energy_lhs=e_lhs, energy_rhs=e_rhs, grad_p=grad_p, complementarity=comp,
            snaps=state.snaps, max_pressure=max_p,
            dmp_violations=len(dmp.below) + len(dmp.above),
        )

    def first(self, state) -> DiagnosticsRecord:
        rec = self._common(state, math.nan, math.nan)
        rec.h4_min = self.h4_min
        return rec

    def observe(self, prev, cur) -> DiagnosticsRecord:
        params, M, K = self.params, self.M, self.K
        tau = params.tau
        dtn = (cur.n - prev.n) / tau
        min_dtn = float(dtn.min())
        self._min_dtn = min(self._min_dtn, min_dtn)
        src = growth(prev.p, params.growth, params.P_max) * prev.n
        mb = float(np.dot(M, dtn) - np.dot(M, src))
        mass_prev = float(np.dot(M, prev.n))
        if mass_prev > 0:
            self._mass_balance = max(self._mass_balance, abs(mb) / mass_prev)
        if self.energy:
            x = cur.n
            a_term = float(x @ (cur.A_diff @ x)) if cur.A_diff is not None else 0.0
            self.dissipation += tau * (a_term + params.nu * float(x @ (K @ x)))
        if min_dtn < -self.monotone_slack:
            self._first.setdefault("monotone", cur.step)
        return self._common(cur, min_dtn, mb)

    def summary(self) -> MonitorSummary:
        h4_holds = self.h4_min >= -DMP_TOL
        min_dtn = self._min_dtn if self._min_dtn != math.inf else math.nan
        return MonitorSummary(
            h4_min=self.h4_min,
            h4_holds=h4_holds,
            dmp_ok=self._dmp_steps == 0,
            dmp_worst_below=self._dmp_below,
            dmp_worst_above=self._dmp_above,
            dmp_steps_violated=self._dmp_steps,
            min_dtn=min_dtn,
            monotone_slack=self.monotone_slack,
            monotone_ok=not (min_dtn < -self.monotone_slack),
            max_rel_mass_balance=self._mass_balance,
            energy_flags=self._energy_flags,
            max_pressure=self._max_p,
            snaps=self._snaps,
            solver_max_iterations=self._max_it,
            first_violation_steps=dict(self._first),
        )
