"""P1 primitives: nodal interpolation, lumped and consistent inner products,
the lumped discrete Laplacian and the product-interpolation error."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import EvaluationError, InvalidArgumentError
from .mesh import Mesh

# Dunavant degree-4 rule on the reference triangle: (barycentric point, weight)
_D4_A = (0.445948490915965, 0.108103018168070, 0.223381589678011)
_D4_B = (0.091576213509771, 0.816847572980459, 0.109951743655322)


def _dunavant4():
    pts, wts = [], []
    for a, b, w in (_D4_A, _D4_B):
        for bary in ((a, a, b), (a, b, a), (b, a, a)):
            pts.append(bary)
            wts.append(w)
    return np.array(pts), np.array(wts)


D4_POINTS, D4_WEIGHTS = _dunavant4()


def _composite(levels):
    """Degree-4 rule repeated on the ``4**levels`` congruent sub-triangles of
    the reference triangle (barycentric points, weights summing to 1)."""
    m = 2 ** levels
    subs = []
    for i in range(m):
        for j in range(m - i):
            a = np.array([i, j]) / m
            subs.append((a, a + [1 / m, 0], a + [0, 1 / m]))
            if i + j < m - 1:
                subs.append((a + [1 / m, 0], a + [1 / m, 1 / m], a + [0, 1 / m]))
    pts = []
    for tri in subs:
        xy = D4_POINTS @ np.array(tri)  # (6, 2) reference coordinates
        pts.append(np.column_stack([1 - xy.sum(axis=1), xy]))
    return np.vstack(pts), np.tile(D4_WEIGHTS, len(subs)) / len(subs)


MIXED_POINTS, MIXED_WEIGHTS = _composite(3)


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Diagonal of the lumped mass matrix, ``diag[a] = int phi_a``."""
    return np.bincount(
        mesh.elements.ravel(), weights=np.repeat(mesh.areas / 3.0, 3), minlength=mesh.n_nodes
    )


def nodal_interpolate(mesh: Mesh, f) -> np.ndarray:
    """Nodal values of ``f(x, y)``; ``f`` must accept coordinate arrays."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    vals = np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        a = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"non-finite value at node {a} {tuple(mesh.nodes[a])}")
    return vals


def _check_same(*fields, n):
    for f in fields:
        if np.shape(f) != (n,):
            raise InvalidArgumentError(f"field of shape {np.shape(f)} does not match {n} nodes")


def inner_h(u, v, M) -> float:
    _check_same(u, v, n=len(M))
    return float(np.dot(np.asarray(u) * np.asarray(v), M))


def norm_h(u, M) -> float:
    return float(np.sqrt(inner_h(u, u, M)))


@lru_cache(maxsize=8)
def consistent_mass(mesh: Mesh) -> sp.csr_matrix:
    """Exact P1 mass matrix (verification only; schemes use the lumped one)."""
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    data = mesh.areas[:, None, None] * local
    s = mesh.sparsity
    vals = np.bincount(s.scatter.ravel(), weights=data.ravel(), minlength=len(s.indices))
    n = mesh.n_nodes
    return sp.csr_matrix((vals, s.indices, s.indptr), shape=(n, n))


def inner_l2(u, v, mesh: Mesh) -> float:
    _check_same(u, v, n=mesh.n_nodes)
    return float(np.dot(u, consistent_mass(mesh) @ np.asarray(v, dtype=float)))


def norm_l2(u, mesh: Mesh) -> float:
    return float(np.sqrt(max(inner_l2(u, u, mesh), 0.0)))


def discrete_laplacian(K, M, v) -> np.ndarray:
    """Lumped discrete Laplacian: ``-(K v) / M`` nodewise."""
    if K.shape != (len(M), len(M)):
        raise InvalidArgumentError(f"operator shape {K.shape} does not match {len(M)} nodes")
    _check_same(v, n=len(M))
    return -(K @ np.asarray(v, dtype=float)) / M


_PAIRS = ((0, 1), (0, 2), (1, 2))


def interp_product_l1_error(u, v, mesh: Mesh) -> float:
    """Exact-where-possible ``|| u v - I_h(u v) ||_{L1}``.

    On each element ``u v - I_h(u v) = -sum_{i<j} c_ij phi_i phi_j`` with
    ``c_ij = (u_i - u_j)(v_i - v_j)``.  When all ``c_ij`` share a sign the
    integrand has a fixed sign and ``int phi_i phi_j = |K| / 12`` gives the
    exact value; otherwise the degree-4 Dunavant rule is applied to ``|.|`` on
    64 sub-triangles (the kink along the zero set limits its accuracy).
    """
    _check_same(u, v, n=mesh.n_nodes)
    ue = np.asarray(u, dtype=float)[mesh.elements]
    ve = np.asarray(v, dtype=float)[mesh.elements]
    c = np.column_stack([(ue[:, i] - ue[:, j]) * (ve[:, i] - ve[:, j]) for i, j in _PAIRS])
    area = mesh.areas
    uniform = np.all(c >= 0, axis=1) | np.all(c <= 0, axis=1)
    total = np.sum(np.abs(c[uniform].sum(axis=1)) * area[uniform] / 12.0)
    if not uniform.all():
        lam = MIXED_POINTS
        prod = np.column_stack([lam[:, i] * lam[:, j] for i, j in _PAIRS])  # (Q, 3)
        vals = np.abs(c[~uniform] @ prod.T)  # (E', Q)
        total += np.sum((vals @ MIXED_WEIGHTS) * area[~uniform])
    return float(total)


def dirichlet(K, v) -> float:
    """Squared H1 seminorm ``v . K v``."""
    v = np.asarray(v, dtype=float)
    return float(np.dot(v, K @ v))


def l2_error(mesh: Mesh, values, f) -> float:
    """``|| u_h - f ||_{L2}`` for the P1 field ``values`` and a callable ``f(x, y)``,
    integrated with the degree-4 rule on every element."""
    _check_same(values, n=mesh.n_nodes)
    p = mesh.nodes[mesh.elements]  # (E, 3, 2)
    pts = np.einsum("qi,eij->eqj", D4_POINTS, p)
    uh = np.asarray(values, dtype=float)[mesh.elements] @ D4_POINTS.T  # (E, 6)
    d = uh - f(pts[..., 0], pts[..., 1])
    return float(np.sqrt(np.sum((d * d) @ D4_WEIGHTS * mesh.areas)))
