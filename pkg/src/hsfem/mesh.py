"""Triangulations of rectangles and per-element P1 geometry.

Nodes of a structured mesh are numbered row by row (``j * (nx + 1) + i``),
elements cell by cell with the lower triangle of each cell first.  Every cell
is cut along its SW-NE diagonal, so each triangle has a right angle at an
axis-aligned corner (SE for the lower triangle, NW for the upper one).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .errors import GeometryError, InvalidArgumentError

ANGLE_TOL = 1e-12
_AXIS_TOL = 1e-12


class ElemGeom(NamedTuple):
    area: float
    grad: np.ndarray  # (3, 2): gradient of each local basis function
    right_vertex: Optional[int]


class AngleReport(NamedTuple):
    all_right_angled: bool
    all_nonobtuse: bool
    max_angle: float


class Sparsity(NamedTuple):
    """Symmetric CSR pattern of the P1 operators plus the element scatter map.

    ``scatter[e, a, b]`` is the position in ``indices``/``data`` receiving the
    local entry (a, b) of element e; ``diag[i]`` is the position of (i, i).
    """

    indptr: np.ndarray
    indices: np.ndarray
    scatter: np.ndarray
    diag: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    nx: Optional[int] = None
    ny: Optional[int] = None
    bbox: Optional[tuple] = None

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise InvalidArgumentError("nodes must have shape (N, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise InvalidArgumentError("elements must have shape (E, 3)")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise InvalidArgumentError("element refers to a non-existent node")
        e = elements
        if np.any((e[:, 0] == e[:, 1]) | (e[:, 1] == e[:, 2]) | (e[:, 0] == e[:, 2])):
            raise InvalidArgumentError("element with repeated vertex")
        nodes.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        if self.bbox is None:
            lo, hi = nodes.min(axis=0), nodes.max(axis=0)
            object.__setattr__(self, "bbox", (lo[0], hi[0], lo[1], hi[1]))
        # force geometry now so degenerate meshes fail at construction
        self.areas  # noqa: B018

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def structured(self) -> bool:
        return self.nx is not None and self.ny is not None

    @cached_property
    def _geometry(self):
        p = self.nodes[self.elements]  # (E, 3, 2)
        # edge opposite vertex i: a_{i+2} - a_{i+1}
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        twice_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        scale = np.maximum(np.hypot(*e1.T) * np.hypot(*e2.T), np.finfo(float).tiny)
        bad = twice_area <= 1e-14 * scale
        if np.any(bad):
            idx = np.flatnonzero(bad)
            raise GeometryError(
                f"{len(idx)} degenerate or clockwise element(s), first: {idx[0]}"
            )
        # grad phi_i = rot(opp_i) / (2|K|), rot(x, y) = (-y, x) for CCW elements
        grad = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / twice_area[:, None, None]
        areas = 0.5 * twice_area
        areas.setflags(write=False)
        grad.setflags(write=False)
        return areas, grad

    @property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def grads(self) -> np.ndarray:
        return self._geometry[1]

    @cached_property
    def angles(self) -> np.ndarray:
        """Interior angle at each local vertex, shape (E, 3)."""
        p = self.nodes[self.elements]
        u = np.roll(p, -1, axis=1) - p
        v = np.roll(p, -2, axis=1) - p
        cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
        dot = np.einsum("eij,eij->ei", u, v)
        return np.arctan2(np.abs(cross), dot)

    @cached_property
    def right_vertices(self) -> np.ndarray:
        """Local index of the right-angle vertex with axis-parallel legs, else -1."""
        p = self.nodes[self.elements]
        out = np.full(self.n_elements, -1, dtype=np.int64)
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            lu, lv = np.hypot(*u.T), np.hypot(*v.T)
            u_x = np.abs(u[:, 1]) <= _AXIS_TOL * lu
            u_y = np.abs(u[:, 0]) <= _AXIS_TOL * lu
            v_x = np.abs(v[:, 1]) <= _AXIS_TOL * lv
            v_y = np.abs(v[:, 0]) <= _AXIS_TOL * lv
            hit = (u_x & v_y) | (u_y & v_x)
            out[hit & (out < 0)] = i
        out.setflags(write=False)
        return out

    @cached_property
    def h(self) -> float:
        """Largest element diameter."""
        p = self.nodes[self.elements]
        edges = p - np.roll(p, 1, axis=1)
        return float(np.hypot(edges[..., 0], edges[..., 1]).max())

    @cached_property
    def h_leg(self) -> float:
        """Shortest element edge; equals the cell size on square-cell meshes."""
        p = self.nodes[self.elements]
        edges = p - np.roll(p, 1, axis=1)
        return float(np.hypot(edges[..., 0], edges[..., 1]).min())

    @cached_property
    def sparsity(self) -> Sparsity:
        n = self.n_nodes
        rows = np.repeat(self.elements, 3, axis=1).ravel()
        cols = np.tile(self.elements, (1, 3)).ravel()
        keys = rows * n + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        r, c = np.divmod(uniq, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
        diag = np.flatnonzero(r == c)
        if len(diag) != n:
            raise InvalidArgumentError("mesh has nodes not attached to any element")
        return Sparsity(indptr, c.astype(np.int64), inverse.reshape(-1, 3, 3), diag)


def build_rect_mesh(x0, x1, y0, y1, nx, ny, diagonal="SW-NE") -> Mesh:
    """Structured right-angled triangulation of ``[x0, x1] x [y0, y1]``."""
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"empty rectangle ({x0}, {x1}) x ({y0}, {y1})")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError(f"cell counts must be positive integers, got {nx}, {ny}")
    if diagonal != "SW-NE":
        raise InvalidArgumentError(f"unsupported diagonal {diagonal!r}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.divmod(np.arange(nx * ny), nx)
    sw = j * (nx + 1) + i
    se, nw = sw + 1, sw + nx + 1
    ne = nw + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(nodes, elements, nx=nx, ny=ny, bbox=(x0, x1, y0, y1))


def element_geometry(mesh: Mesh, e: int) -> ElemGeom:
    if not 0 <= e < mesh.n_elements:
        raise InvalidArgumentError(f"element index {e} out of range")
    rv = int(mesh.right_vertices[e])
    return ElemGeom(float(mesh.areas[e]), mesh.grads[e].copy(), None if rv < 0 else rv)


def classify_angles(mesh: Mesh, tol: float = ANGLE_TOL) -> AngleReport:
    ang = mesh.angles
    max_angle = float(ang.max())
    right = np.any(np.abs(ang - np.pi / 2) <= tol, axis=1)
    return AngleReport(
        all_right_angled=bool(right.all()),
        all_nonobtuse=max_angle <= np.pi / 2 + tol,
        max_angle=max_angle,
    )


def locate(mesh: Mesh, points) -> tuple:
    """Element index and barycentric weights for points of a structured mesh.

    Points outside the rectangle are clipped onto it.
    """
    if not mesh.structured:
        raise InvalidArgumentError("point location is implemented for structured meshes only")
    x0, x1, y0, y1 = mesh.bbox
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sx = np.clip((pts[:, 0] - x0) / (x1 - x0) * mesh.nx, 0.0, mesh.nx)
    sy = np.clip((pts[:, 1] - y0) / (y1 - y0) * mesh.ny, 0.0, mesh.ny)
    i = np.minimum(np.floor(sx).astype(np.int64), mesh.nx - 1)
    j = np.minimum(np.floor(sy).astype(np.int64), mesh.ny - 1)
    fx, fy = sx - i, sy - j
    upper = fy > fx
    elem = 2 * (j * mesh.nx + i) + upper
    # lower (sw, se, ne): weights (1-fx, fx-fy, fy); upper (sw, ne, nw): (1-fy, fx, fy-fx)
    w = np.where(
        upper[:, None],
        np.column_stack([1 - fy, fx, fy - fx]),
        np.column_stack([1 - fx, fx - fy, fy]),
    )
    return elem, w


def evaluate(mesh: Mesh, values, points) -> np.ndarray:
    """Evaluate the P1 function with nodal ``values`` at ``points``."""
    elem, w = locate(mesh, points)
    v = np.asarray(values, dtype=float)[mesh.elements[elem]]
    return np.einsum("ij,ij->i", v, w)
