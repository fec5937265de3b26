"""Assembly of the geometric stiffness, the two nonlinear diffusion operators
and the semi-implicit system matrix.

All operators are ``scipy.sparse.csr_matrix`` objects sharing the pattern of
``mesh.sparsity``.  Element contributions are accumulated with ``np.bincount``
in element order, so repeated assembly is bitwise reproducible.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidArgumentError, UnsupportedMeshError
from .mesh import Mesh, classify_angles
from .model import power

NEAR_EQUAL_RTOL = 1e-8
SIGN_TOL = 1e-14


class OffDiagReport(NamedTuple):
    max_offdiag: float
    violations: list  # (row, col, value) with value > tol

    @property
    def ok(self) -> bool:
        return not self.violations


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    s = mesh.sparsity
    data = np.bincount(s.scatter.ravel(), weights=local.ravel(), minlength=len(s.indices))
    n = mesh.n_nodes
    return sp.csr_matrix((data, s.indices, s.indptr), shape=(n, n))


@lru_cache(maxsize=8)
def _local_parts(mesh: Mesh):
    """Per-element ``|K| dphi_a/dx dphi_b/dx`` and the y counterpart, (E, 3, 3) each."""
    g = mesh.grads
    a = mesh.areas[:, None, None]
    xx = a * g[:, :, None, 0] * g[:, None, :, 0]
    yy = a * g[:, :, None, 1] * g[:, None, :, 1]
    return xx, yy


@lru_cache(maxsize=8)
def _legs(mesh: Mesh):
    """Local indices (right-angle vertex, x-leg end, y-leg end) per element."""
    rv = mesh.right_vertices
    if np.any(rv < 0):
        bad = int(np.flatnonzero(rv < 0)[0])
        raise UnsupportedMeshError(
            f"element {bad} has no right angle with axis-parallel legs"
        )
    idx = np.arange(mesh.n_elements)
    j1, j2 = (rv + 1) % 3, (rv + 2) % 3
    p = mesh.nodes[mesh.elements]
    leg1 = p[idx, j1] - p[idx, rv]
    along_x = np.abs(leg1[:, 1]) <= np.abs(leg1[:, 0])
    xv = np.where(along_x, j1, j2)
    yv = np.where(along_x, j2, j1)
    return rv, xv, yv


@lru_cache(maxsize=8)
def stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Geometric stiffness ``K[a, b] = sum_K |K| grad phi_a . grad phi_b``."""
    xx, yy = _local_parts(mesh)
    K = _assemble(mesh, xx + yy)
    K.data.setflags(write=False)
    return K


def _check_density(n, mesh):
    n = np.asarray(n, dtype=float)
    if n.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"density of shape {n.shape} does not match {mesh.n_nodes} nodes")
    if np.any(n < 0):
        raise DomainError(f"negative nodal density (min {n.min():.3e} at node {int(n.argmin())})")
    return n


def divided_power(a, b, k):
    """``(a**k - b**k) / (a - b)`` for a, b >= 0, with the mean-value limit
    ``k ((a + b)/2)**(k-1)`` when the two values are nearly equal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    near = (hi - lo) < NEAR_EQUAL_RTOL * np.maximum(1.0, hi)
    out = np.empty(np.broadcast(a, b).shape)
    out[near] = k * power(0.5 * (hi[near] + lo[near]), k - 1)
    far = ~near
    h, l_ = hi[far], lo[far]
    with np.errstate(divide="ignore"):
        log_ratio = np.log(l_ / h)
    # a^{k-1} (1 - r^k) / (1 - r), r = lo/hi in [0, 1): no overflow for any k
    out[far] = power(h, k - 1) * np.expm1(k * log_ratio) / np.expm1(log_ratio)
    return out


def diffusion_coefficients(mesh: Mesh, n, k) -> np.ndarray:
    """Per-element diagonal coefficient ``(d_x, d_y)``, shape (E, 2).

    ``d_x`` is the divided difference of ``n**k`` between the right-angle
    vertex and the end of its x-parallel leg; likewise for ``d_y``.
    """
    rv, xv, yv = _legs(mesh)
    n = _check_density(n, mesh)
    ne = n[mesh.elements]
    idx = np.arange(mesh.n_elements)
    n0 = ne[idx, rv]
    dx = divided_power(ne[idx, xv], n0, k)
    dy = divided_power(ne[idx, yv], n0, k)
    return np.column_stack([dx, dy])


def diffusion_fem(mesh: Mesh, n, k) -> sp.csr_matrix:
    """Operator of ``(D(n) grad u, grad v)`` with the divided-difference D."""
    d = diffusion_coefficients(mesh, n, k)
    xx, yy = _local_parts(mesh)
    return _assemble(mesh, d[:, 0, None, None] * xx + d[:, 1, None, None] * yy)


def complete_homogeneous(a, b, c, m):
    """``h_m(a, b, c) = sum_{i+j+l=m} a^i b^j c^l`` for a, b, c >= 0.

    Evaluated as the second divided difference of ``t**(m+2)`` taken across
    the widest pair, falling back to ``C(m+2, 2) mean**m`` for (nearly)
    coincident values.
    """
    v = np.sort(np.column_stack([a, b, c]).astype(float), axis=1)
    lo, mid, hi = v[:, 0], v[:, 1], v[:, 2]
    near = (hi - lo) < NEAR_EQUAL_RTOL * np.maximum(1.0, hi)
    out = np.empty(len(v))
    out[near] = 0.5 * (m + 1) * (m + 2) * power(v[near].mean(axis=1), m)
    f = ~near
    num = divided_power(hi[f], mid[f], m + 2) - divided_power(lo[f], mid[f], m + 2)
    out[f] = np.maximum(num / (hi[f] - lo[f]), 0.0)
    return out


def fem2_weights(mesh: Mesh, n, k, quadrature="exact") -> np.ndarray:
    """Per-element scalar weight approximating the element mean of ``k n**(k-1)``.

    ``exact`` integrates the polynomial ``k n**(k-1)`` of the linear field
    exactly; ``vertex`` averages nodal values; ``centroid`` evaluates at the
    centroid.
    """
    n = _check_density(n, mesh)
    ne = n[mesh.elements]
    if quadrature == "exact":
        h = complete_homogeneous(ne[:, 0], ne[:, 1], ne[:, 2], k - 1)
        return 2.0 * h / (k + 1)
    if quadrature == "vertex":
        return k * power(ne, k - 1).mean(axis=1)
    if quadrature == "centroid":
        return k * power(ne.mean(axis=1), k - 1)
    raise InvalidArgumentError(f"unknown quadrature {quadrature!r}")


def diffusion_fem2(mesh: Mesh, n, k, quadrature="exact") -> sp.csr_matrix:
    """Operator of ``k (n**(k-1) grad u, grad v)`` with one weight per element."""
    if not classify_angles(mesh).all_nonobtuse:
        raise UnsupportedMeshError("scheme needs a nonobtuse triangulation")
    w = fem2_weights(mesh, n, k, quadrature)
    xx, yy = _local_parts(mesh)
    return _assemble(mesh, w[:, None, None] * (xx + yy))


def _rows(A: sp.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))


def offdiag_sign_check(A, tol: float = SIGN_TOL) -> OffDiagReport:
    A = sp.csr_matrix(A)
    rows = _rows(A)
    off = rows != A.indices
    vals = A.data[off]
    if vals.size == 0:
        return OffDiagReport(-np.inf, [])
    bad = np.flatnonzero(vals > tol)
    r, c = rows[off][bad], A.indices[off][bad]
    return OffDiagReport(float(vals.max()), list(zip(r.tolist(), c.tolist(), vals[bad].tolist())))


def diagonal_dominance_margin(A) -> float:
    """``min_i (A_ii - sum_{j != i} |A_ij|)``."""
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    absrow = np.asarray(abs(A).sum(axis=1)).ravel()
    return float(np.min(2 * diag - absrow))


def system_matrix(M, tau, A_diff, nu, K) -> sp.csr_matrix:
    """``diag(M)/tau + A_diff + nu K``."""
    M = np.asarray(M, dtype=float)
    n = len(M)
    if A_diff.shape != (n, n) or K.shape != (n, n):
        raise InvalidArgumentError("operator dimensions do not match the lumped mass")
    if not tau > 0 or not nu >= 0:
        raise InvalidArgumentError(f"need tau > 0 and nu >= 0, got tau={tau}, nu={nu}")
    same = (
        sp.isspmatrix_csr(A_diff)
        and sp.isspmatrix_csr(K)
        and (A_diff.indptr is K.indptr or np.array_equal(A_diff.indptr, K.indptr))
        and (A_diff.indices is K.indices or np.array_equal(A_diff.indices, K.indices))
    )
    if same:
        S = sp.csr_matrix((A_diff.data + nu * K.data, K.indices.copy(), K.indptr.copy()), shape=(n, n))
    else:
        S = sp.csr_matrix(A_diff + nu * K)
        S.sort_indices()
    rows = _rows(S)
    pos = np.flatnonzero(rows == S.indices)
    if len(pos) == n:
        S.data[pos] += M / tau
        return S
    S = sp.csr_matrix(S + sp.diags(M / tau))
    S.sort_indices()
    return S


def write_matrix(A, path) -> None:
    """Coordinate text dump: one ``row col value`` line per stored entry."""
    A = sp.coo_matrix(A)
    with open(path, "w") as fh:
        for r, c, v in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {v:.17g}\n")
