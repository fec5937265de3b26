"""Parameter studies and the stiff-pressure (large k) sweep."""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .. import assembly
from ..diagnostics import complementarity_residual, gradient_bound_metrics
from ..errors import SimulationAborted
from ..fespace import lumped_mass
from ..mesh import evaluate
from ..model import power
from ..stepper import run
from .io import write_field, write_meta, write_series, write_table

log = logging.getLogger(__name__)

FRONT_FRACTION = 0.5
DEFAULT_T_STAR = 0.1
K_SWEEP_COLUMNS = ("k", "h", "tau", "complementarity", "grad_p", "max_dn", "max_dp")
STUDY_COLUMNS = ("param", "value", "t", "front_radius", "max_n", "mass")


def front_radius(mesh, n, nmax, fraction=FRONT_FRACTION) -> float:
    """Largest x >= 0 on the y = 0 node line with ``n >= fraction * nmax``; 0 if none."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    row = np.abs(y) <= 1e-9 * max(1.0, np.abs(y).max())
    if not row.any():
        # no node line on y = 0: use the line closest to it
        row = np.isclose(np.abs(y), np.abs(y).min())
    sel = row & (x >= 0.0)
    hit = np.asarray(n)[sel] >= fraction * nmax
    return float(x[sel][hit].max()) if hit.any() else 0.0


def _value_tag(param, value) -> str:
    return f"{param}={value:g}" if isinstance(value, float) else f"{param}={value}"


def k_sweep(spec, out_dir=None, t_star: float = DEFAULT_T_STAR) -> list:
    """Run each k to ``t_star`` and tabulate the limit metrics.

    The reference is the largest-k member; all members are compared on the
    node set of the coarsest member by P1 evaluation. If a member fails the
    table gathered so far is written before the error propagates.
    """
    if spec.param != "k":
        raise ValueError("k_sweep needs a SweepSpec over 'k'")
    ks = [int(v) for v in spec.values]
    if ks != sorted(ks):
        raise ValueError("k values must be ascending")
    out = Path(out_dir) if out_dir is not None else None
    results = []

    def persist(rows):
        if out is not None:
            write_table(rows, K_SWEEP_COLUMNS, out / "k_sweep.csv")

    for k in ks:
        cfg = spec.member(k)
        cfg = cfg.with_params(t_final=t_star)
        cfg = replace(cfg, output_times=(t_star,), complementarity_every=0)
        try:
            res = run(cfg)
        except SimulationAborted:
            persist(_rows(results))
            raise
        if out is not None:
            member = out / f"k={k}"
            write_series(res.records, member / "series.csv")
            write_field(res.final, res.mesh, member / f"field_t{t_star:g}.{cfg.field_format}", cfg.field_format)
        results.append(res)

    rows = _rows(results)
    persist(rows)
    return rows


def _rows(results) -> list:
    if not results:
        return []
    coarse = min(results, key=lambda r: r.mesh.n_nodes).mesh
    probe = coarse.nodes
    ref = results[-1]
    n_ref = evaluate(ref.mesh, np.maximum(ref.final.n, 0.0), probe)
    p_ref = evaluate(ref.mesh, power(np.maximum(ref.final.n, 0.0), ref.params.k), probe)
    rows = []
    for r in results:
        k = r.params.k
        n = np.maximum(r.final.n, 0.0)
        M, K = lumped_mass(r.mesh), assembly.stiffness(r.mesh)
        _, grad_p = gradient_bound_metrics(n, k, K)
        rows.append({
            "k": k,
            "h": r.mesh.h,
            "tau": r.params.tau,
            "complementarity": complementarity_residual(n, r.params, r.mesh, M, K),
            "grad_p": grad_p,
            "max_dn": float(np.max(np.abs(evaluate(r.mesh, n, probe) - n_ref))),
            "max_dp": float(np.max(np.abs(evaluate(r.mesh, power(n, k), probe) - p_ref))),
        })
    return rows


def param_study(spec, out_dir=None, times: Optional[tuple] = None) -> dict:
    """One run per value with field dumps at the output times.

    Returns ``{value: {t: front_radius}}`` and, with ``out_dir``, writes fields,
    a series per run and ``summary.csv``.
    """
    out = Path(out_dir) if out_dir is not None else None
    summary, fronts = [], {}
    for value in spec.values:
        cfg = spec.member(value)
        if times is not None:
            cfg = replace(cfg, output_times=tuple(times))
        tag = _value_tag(spec.param, value)
        member = out / tag if out is not None else None
        nmax = cfg.params.n_max
        res = run(cfg)
        fronts[value] = {}
        for step in sorted(res.outputs):
            state = res.outputs[step]
            if step == 0:
                continue
            fr = front_radius(res.mesh, state.n, nmax)
            fronts[value][round(state.t, 12)] = fr
            summary.append({
                "param": spec.param, "value": value, "t": state.t, "front_radius": fr,
                "max_n": float(state.n.max()), "mass": float(np.dot(lumped_mass(res.mesh), state.n)),
            })
            if member is not None:
                write_field(state, res.mesh, member / f"field_t{state.t:.6g}.{cfg.field_format}",
                            cfg.field_format)
        if member is not None:
            write_series(res.records, member / "series.csv")
            write_meta(cfg, member / "meta.txt", front_fraction=FRONT_FRACTION)
        log.info("%s: fronts %s", tag, fronts[value])
    if out is not None:
        write_table(summary, STUDY_COLUMNS, out / "summary.csv")
    return fronts
