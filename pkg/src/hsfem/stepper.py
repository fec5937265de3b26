"""Linear semi-implicit time stepping.

One step freezes the diffusion coefficient and the growth term at ``n^m`` and
solves the symmetric M-matrix system

    (diag(M)/tau + A(n^m) + nu K) n^{m+1} = diag(M) (n^m/tau + G(p(n^m)) n^m)

with Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from . import assembly
from .errors import DomainError, InvalidArgumentError, NonConvergenceError, SimulationAborted
from .fespace import lumped_mass, nodal_interpolate
from .mesh import Mesh, build_rect_mesh
from .model import ModelParams, growth, initial_constant, initial_gaussian, pressure

log = logging.getLogger(__name__)

SNAP_TOL = 1e-13


class SolveReport(NamedTuple):
    iterations: int
    final_relative_residual: float
    converged: bool


@dataclass
class SimState:
    t: float
    step: int
    n: np.ndarray
    p: np.ndarray
    diag: Any = None
    snaps: int = 0
    solve: Optional[SolveReport] = None
    # diffusion operator frozen at the previous state; used by the energy monitor
    A_diff: Any = field(default=None, repr=False)


def make_state(n, k, t=0.0, step=0) -> SimState:
    n = np.asarray(n, dtype=float)
    return SimState(t=t, step=step, n=n, p=pressure(n, k))


def solve_spd(S, b, tol=1e-12, max_iter=None, x0=None):
    """Jacobi-preconditioned CG. Returns ``(x, SolveReport)``.

    Convergence is declared on the true residual ``||b - S x|| / ||b||``;
    the recursive residual is replaced by the true one if they disagree.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if S.shape != (n, n):
        raise InvalidArgumentError(f"matrix {S.shape} incompatible with rhs of length {n}")
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    d = S.diagonal()
    if np.any(d <= 0):
        raise InvalidArgumentError("matrix has a non-positive diagonal entry")
    dinv = 1.0 / d

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - S @ x
    res = np.linalg.norm(r) / bnorm
    it = 0
    if res > tol:
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while it < max_iter:
            q = S @ p
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            it += 1
            if np.linalg.norm(r) / bnorm <= tol:
                r = b - S @ x
                res = np.linalg.norm(r) / bnorm
                if res <= tol:
                    break
            z = dinv * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        else:
            res = np.linalg.norm(b - S @ x) / bnorm
    report = SolveReport(it, float(res), bool(res <= tol))
    if not report.converged:
        raise NonConvergenceError(
            f"CG did not reach {tol:g} in {it} iterations (residual {res:.3e})", report
        )
    return x, report


def implicit_step(n, M, tau, A_diff, nu, K, source, tol=1e-12, max_iter=None):
    """Solve one linear step; ``source`` is the nodal rate ``G n`` (lumped).

    CG runs on the increment ``x - n``, whose right-hand side is the residual
    of the warm start, so ``tol`` is relative to that residual rather than to
    the much larger ``diag(M) n / tau``.
    """
    S = assembly.system_matrix(M, tau, A_diff, nu, K)
    r0 = M * source - A_diff @ n - nu * (K @ n)
    delta, report = solve_spd(S, r0, tol, max_iter)
    x = n + delta
    snap = (x < 0) & (x > -SNAP_TOL)
    x[snap] = 0.0
    return x, report, int(snap.sum())


def _step(state, params: ModelParams, mesh, M, K, A_diff, tol, max_iter):
    n = state.n
    p = state.p if state.p is not None else pressure(n, params.k)
    source = growth(p, params.growth, params.P_max) * n
    x, report, snaps = implicit_step(n, M, params.tau, A_diff, params.nu, K, source, tol, max_iter)
    step = state.step + 1
    # a solve can leave values below -SNAP_TOL; keep them visible to the DMP monitor
    p_new = pressure(np.maximum(x, 0.0), params.k)
    return SimState(t=step * params.tau, step=step, n=x, p=p_new, snaps=snaps, solve=report, A_diff=A_diff)


def _require_nonnegative(n):
    if np.any(n < 0):
        raise DomainError(f"negative nodal density {n.min():.3e} at node {int(n.argmin())}")


def step_fem2(state, params, mesh, M, K, tol=1e-12, max_iter=None, quadrature="exact"):
    """Semi-implicit step for the scalar-weighted (nonobtuse-mesh) scheme."""
    _require_nonnegative(state.n)
    A = assembly.diffusion_fem2(mesh, state.n, params.k, quadrature)
    return _step(state, params, mesh, M, K, A, tol, max_iter)


def step_fem(state, params, mesh, M, K, tol=1e-12, max_iter=None):
    """Same time discretisation for the divided-difference (right-angled) scheme."""
    _require_nonnegative(state.n)
    A = assembly.diffusion_fem(mesh, state.n, params.k)
    return _step(state, params, mesh, M, K, A, tol, max_iter)


STEPS = {"fem": step_fem, "fem2": step_fem2}


@dataclass
class RunResult:
    mesh: Mesh
    params: ModelParams
    initial: SimState
    final: SimState
    records: list
    outputs: dict  # step -> SimState at requested output steps
    clamped: int
    summary: Any = None


def initial_field(config, mesh) -> np.ndarray:
    if config.initial == "gaussian":
        f = initial_gaussian(config.params.alpha)
    elif config.initial == "constant":
        f = initial_constant(config.initial_value)
    else:
        raise InvalidArgumentError(f"unknown initial datum {config.initial!r}")
    return nodal_interpolate(mesh, f)


def output_steps(config) -> set:
    tau = config.params.tau
    total = config.n_steps
    steps = {int(round(t / tau)) for t in config.output_times if t <= config.params.t_final + 0.5 * tau}
    if config.output_every:
        steps.update(range(0, total + 1, config.output_every))
    return {s for s in steps if 0 <= s <= total}


def run(config, on_output: Optional[Callable] = None, on_record: Optional[Callable] = None) -> RunResult:
    """Drive a full simulation described by a :class:`hsfem.config.RunConfig`.

    The initial datum is nodally interpolated and clamped to ``[0, N_max(k)]``.
    On a step failure :class:`SimulationAborted` is raised carrying the last
    completed state.
    """
    from .diagnostics import Monitor

    params = config.params
    mesh = build_rect_mesh(config.x0, config.x1, config.y0, config.y1, config.nx, config.ny)
    M = lumped_mass(mesh)
    K = assembly.stiffness(mesh)
    step_fn = STEPS[config.scheme]
    kwargs = {"tol": config.solver_tol, "max_iter": config.solver_max_iter or None}
    if config.scheme == "fem2":
        kwargs["quadrature"] = config.quadrature

    raw = initial_field(config, mesh)
    nmax = params.n_max
    n0 = np.clip(raw, 0.0, nmax)
    clamped = int(np.count_nonzero(n0 != raw))
    if clamped:
        log.info("initial datum clamped to [0, N_max] at %d node(s)", clamped)

    state = make_state(n0, params.k)
    monitor = Monitor(mesh, M, K, params, n0, complementarity_every=config.complementarity_every,
                      energy=config.energy_check)
    state.diag = monitor.first(state)
    records = [state.diag]
    if on_record:
        on_record(state.diag)
    wanted = output_steps(config)
    outputs = {}
    if 0 in wanted:
        outputs[0] = state
        if on_output:
            on_output(state)
    initial = state

    for _ in range(config.n_steps):
        try:
            new = step_fn(state, params, mesh, M, K, **kwargs)
        except (NonConvergenceError, DomainError) as exc:
            raise SimulationAborted(f"step {state.step + 1} failed: {exc}", state, exc) from exc
        new.diag = monitor.observe(state, new)
        records.append(new.diag)
        if on_record:
            on_record(new.diag)
        state.A_diff = None
        state = new
        if state.step in wanted:
            outputs[state.step] = state
            if on_output:
                on_output(state)
    state.A_diff = None
    return RunResult(mesh, params, initial, state, records, outputs, clamped, monitor.summary())
