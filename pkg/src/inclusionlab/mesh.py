"""Structured P1 triangulations of a rectangle and finite-element assembly.

Nodes are numbered row by row, ``index = i + j * (nx + 1)``.  Every cell is
split along its lower-left to upper-right diagonal, so all triangles are
right triangles.  That keeps every off-diagonal stiffness entry nonpositive,
which the forward solver relies on for its discrete maximum principle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from inclusionlab.exceptions import (
    InvalidCoefficientError,
    InvalidDomainError,
    InvalidInputError,
    InvalidWeightError,
)

__all__ = [
    "Grid",
    "build_rectangle_mesh",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "assemble_load",
    "boundary_functional",
    "boundary_data",
    "element_gradients",
    "interpolate",
    "patch_gradient_functional",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable triangulation of ``[x0, x1] x [y0, y1]``.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
    elements : ndarray, shape (n_elements, 3)
        Counterclockwise node triples.
    boundary_edges : ndarray, shape (n_edges, 2)
        Consecutive pairs of a single counterclockwise loop around the boundary.
    edge_normals : ndarray, shape (n_edges, 2)
        Outward unit normal of each boundary edge.
    resolution : tuple of int
        ``(nx, ny)`` cell counts.
    domain : tuple of float
        ``(x0, x1, y0, y1)``.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    edge_normals: np.ndarray
    resolution: tuple
    domain: tuple

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def spacing(self) -> tuple:
        x0, x1, y0, y1 = self.domain
        nx, ny = self.resolution
        return (x1 - x0) / nx, (y1 - y0) / ny

    @property
    def h(self) -> float:
        """Largest cell side."""
        return max(self.spacing)

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    @property
    def perimeter(self) -> float:
        x0, x1, y0, y1 = self.domain
        return 2.0 * ((x1 - x0) + (y1 - y0))

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def element_areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric basis functions, shape (E, 3, 2)."""
        p = self.nodes[self.elements]
        x, y = p[..., 0], p[..., 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        two_a = 2.0 * self.signed_areas[:, None]
        return np.stack([b / two_a, c / two_a], axis=2)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Boundary node indices in loop order, starting at the lower-left corner."""
        return self.boundary_edges[:, 0].copy()

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        """Trapezoid weights ``int_{dOmega} phi_i dS`` for every node (zero inside)."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.boundary_edges[:, 0], 0.5 * self.edge_lengths)
        np.add.at(w, self.boundary_edges[:, 1], 0.5 * self.edge_lengths)
        return w

    @cached_property
    def lumped_areas(self) -> np.ndarray:
        return assemble_weighted_mass(self, lumped=True).diagonal()

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        return assemble_stiffness(self)

    @cached_property
    def mass(self) -> sp.csr_matrix:
        return assemble_weighted_mass(self)

    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def nearest_node(self, point) -> int:
        x0, _, y0, _ = self.domain
        dx, dy = self.spacing
        nx, ny = self.resolution
        i = int(np.clip(np.rint((point[0] - x0) / dx), 0, nx))
        j = int(np.clip(np.rint((point[1] - y0) / dy), 0, ny))
        return i + j * (nx + 1)

    def locate(self, points):
        """Containing element and barycentric coordinates of each point.

        Returns
        -------
        elements : ndarray of int, shape (n,)
        bary : ndarray, shape (n, 3)
            Weights aligned with ``self.elements[elements]``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x0, x1, y0, y1 = self.domain
        tol = 1e-12 * max(x1 - x0, y1 - y0)
        if (
            np.any(pts[:, 0] < x0 - tol) or np.any(pts[:, 0] > x1 + tol)
            or np.any(pts[:, 1] < y0 - tol) or np.any(pts[:, 1] > y1 + tol)
        ):
            raise InvalidInputError("point outside the mesh domain")
        dx, dy = self.spacing
        nx, ny = self.resolution
        sx = (pts[:, 0] - x0) / dx
        sy = (pts[:, 1] - y0) / dy
        i = np.clip(np.floor(sx).astype(int), 0, nx - 1)
        j = np.clip(np.floor(sy).astype(int), 0, ny - 1)
        s = sx - i
        t = sy - j
        lower = s >= t
        cell = i + j * nx
        elem = 2 * cell + np.where(lower, 0, 1)
        # lower triangle (n00, n10, n11); upper triangle (n00, n11, n01)
        bary = np.where(
            lower[:, None],
            np.stack([1.0 - s, s - t, t], axis=1),
            np.stack([1.0 - t, s, t - s], axis=1),
        )
        return elem, bary

    def to_dict(self) -> dict:
        return {
            "domain": list(self.domain),
            "resolution": list(self.resolution),
            "nodes": self.nodes.tolist(),
            "elements": self.elements.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
            "edge_normals": self.edge_normals.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Grid":
        d = json.loads(text)
        return cls(
            nodes=np.asarray(d["nodes"], dtype=float),
            elements=np.asarray(d["elements"], dtype=np.int64),
            boundary_edges=np.asarray(d["boundary_edges"], dtype=np.int64),
            edge_normals=np.asarray(d["edge_normals"], dtype=float),
            resolution=tuple(int(v) for v in d["resolution"]),
            domain=tuple(float(v) for v in d["domain"]),
        )


def build_rectangle_mesh(domain=(0.0, 1.0, 0.0, 1.0), nx: int = 32, ny: int | None = None) -> Grid:
    """Structured right-triangle mesh with ``2 * nx * ny`` elements.

    Parameters
    ----------
    domain : sequence of 4 floats
        ``(x0, x1, y0, y1)``.
    nx, ny : int
        Cell counts; ``ny`` defaults to ``nx``.
    """
    if ny is None:
        ny = nx
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not (x1 - x0 > 0 and y1 - y0 > 0):
        raise InvalidDomainError(f"degenerate rectangle {domain!r}")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidDomainError(f"cell counts must be positive integers, got {(nx, ny)}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (i + j * (nx + 1)).ravel()
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    def idx(a, b):
        return a + b * (nx + 1)

    loop = (
        [idx(a, 0) for a in range(nx)]
        + [idx(nx, b) for b in range(ny)]
        + [idx(a, ny) for a in range(nx, 0, -1)]
        + [idx(0, b) for b in range(ny, 0, -1)]
    )
    loop = np.asarray(loop, dtype=np.int64)
    edges = np.column_stack([loop, np.roll(loop, -1)])
    normals = np.concatenate([
        np.tile([0.0, -1.0], (nx, 1)),
        np.tile([1.0, 0.0], (ny, 1)),
        np.tile([0.0, 1.0], (nx, 1)),
        np.tile([-1.0, 0.0], (ny, 1)),
    ])
    return Grid(
        nodes=nodes,
        elements=elements,
        boundary_edges=edges,
        edge_normals=normals,
        resolution=(nx, ny),
        domain=(x0, x1, y0, y1),
    )


def _element_values(grid: Grid, value, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (grid.n_elements,))
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def _nodal_values(grid: Grid, value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(grid.n_nodes, float(arr))
    if arr.shape != (grid.n_nodes,):
        raise InvalidInputError(f"{name} must have one value per node ({grid.n_nodes}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def _scatter(grid: Grid, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(grid.elements, 3, axis=1).ravel()
    cols = np.tile(grid.elements, (1, 3)).ravel()
    n = grid.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(grid: Grid, coeff=1.0) -> sp.csr_matrix:
    """P1 stiffness matrix ``K_ij = sum_e coeff_e int_e grad phi_i . grad phi_j``.

    ``coeff`` is a scalar or one value per element and must be strictly positive.
    """
    c = _element_values(grid, coeff, "coefficient")
    if np.any(c <= 0):
        raise InvalidCoefficientError("stiffness coefficient must be strictly positive on every element")
    G = grid.basis_gradients
    local = np.einsum("eid,ejd->eij", G, G) * (c * grid.element_areas)[:, None, None]
    K = _scatter(grid, local)
    # exact symmetry regardless of summation order
    return ((K + K.T) * 0.5).tocsr()


def assemble_weighted_mass(grid: Grid, weight=None, *, element_weight=None, lumped: bool = False) -> sp.csr_matrix:
    """Mass matrix ``int w phi_i phi_j``.

    Parameters
    ----------
    weight : array_like, optional
        Nodal (P1) weight.  The consistent matrix integrates affine weights
        times P1 x P1 exactly.
    element_weight : array_like or float, optional
        Piecewise-constant weight, one value per element.
    lumped : bool
        Return the row-sum diagonal (vertex quadrature) instead.

    With neither weight given the weight is 1.
    """
    if weight is not None and element_weight is not None:
        raise InvalidInputError("give either a nodal weight or an element weight, not both")
    A = grid.element_areas
    eye = np.eye(3)
    if weight is None:
        we = _element_values(grid, 1.0 if element_weight is None else element_weight, "weight")
        if np.any(we < 0):
            raise InvalidWeightError("mass weight must be nonnegative")
        if lumped:
            d = np.zeros(grid.n_nodes)
            np.add.at(d, grid.elements, np.repeat((we * A / 3.0)[:, None], 3, axis=1))
            return sp.diags(d).tocsr()
        local = (we * A / 12.0)[:, None, None] * (1.0 + eye)[None]
        return _scatter(grid, local)

    w = _nodal_values(grid, weight, "weight")
    if np.any(w < 0):
        raise InvalidWeightError("mass weight must be nonnegative")
    wl = w[grid.elements]
    if lumped:
        d = np.zeros(grid.n_nodes)
        np.add.at(d, grid.elements, wl * (A / 3.0)[:, None])
        return sp.diags(d).tocsr()
    total = wl.sum(axis=1)
    # int phi_i phi_j phi_k over a triangle: A/10 (all equal), A/30 (two equal), A/60 (distinct)
    off = (wl[:, :, None] + wl[:, None, :]) / 30.0 + (total[:, None, None] - wl[:, :, None] - wl[:, None, :]) / 60.0
    diag = wl / 10.0 + (total[:, None] - wl) / 30.0
    local = off * (1.0 - eye)[None] + diag[:, :, None] * eye[None]
    local *= A[:, None, None]
    M = _scatter(grid, local)
    return ((M + M.T) * 0.5).tocsr()


def assemble_load(grid: Grid, f) -> np.ndarray:
    """Load vector ``int f phi_i`` for a nodal (P1) field ``f``; exact for affine ``f``."""
    return grid.mass @ _nodal_values(grid, f, "source")


def boundary_data(grid: Grid, func) -> np.ndarray:
    """Sample Neumann data ``func(x, y, n1, n2)`` edge by edge.

    Returns a nodal array, zero in the interior, holding at each boundary node
    the length-weighted average of the one-sided edge values.  With that
    convention the trapezoid rule of :func:`boundary_functional` is identical
    to integrating each edge with its own normal, so data that jump at corners
    are handled exactly.
    """
    p = grid.nodes[grid.boundary_edges]
    n = grid.edge_normals
    half = 0.5 * grid.edge_lengths
    g = np.zeros(grid.n_nodes)
    for end in (0, 1):
        vals = np.asarray(func(p[:, end, 0], p[:, end, 1], n[:, 0], n[:, 1]), dtype=float)
        vals = np.broadcast_to(vals, half.shape)
        np.add.at(g, grid.boundary_edges[:, end], half * vals)
    bw = grid.boundary_weights
    on = bw > 0
    g[on] /= bw[on]
    return g


def boundary_functional(grid: Grid, trace_field, g) -> float:
    """Trapezoid approximation of ``int_{dOmega} trace * g dS``.

    ``trace_field`` and ``g`` are nodal arrays (interior values are ignored) or
    scalars.
    """
    t = _nodal_values(grid, trace_field, "trace")
    gv = _nodal_values(grid, g, "boundary data")
    return float(np.dot(grid.boundary_weights, t * gv))


def element_gradients(grid: Grid, u) -> np.ndarray:
    """Element-constant gradient of a P1 field, shape (n_elements, 2)."""
    u = _nodal_values(grid, u, "field")
    return np.einsum("eid,ei->ed", grid.basis_gradients, u[grid.elements])


def interpolate(grid: Grid, u, points) -> np.ndarray:
    """Evaluate the P1 interpolant of ``u`` at arbitrary points."""
    u = _nodal_values(grid, u, "field")
    elem, bary = grid.locate(points)
    return np.einsum("ni,ni->n", bary, u[grid.elements[elem]])


def patch_gradient_functional(grid: Grid, point) -> np.ndarray:
    """Linear functional giving the patch-averaged gradient at ``point``.

    Element gradients are averaged, weighted by area, over the elements that
    share the node nearest to ``point``.  Returns ``L`` of shape (2, n_nodes)
    such that ``L @ u`` is the averaged gradient of ``u``.
    """
    node = grid.nearest_node(point)
    patch = np.nonzero(np.any(grid.elements == node, axis=1))[0]
    A = grid.element_areas[patch]
    G = grid.basis_gradients[patch]
    L = np.zeros((2, grid.n_nodes))
    for d in range(2):
        np.add.at(L[d], grid.elements[patch].ravel(), (G[:, :, d] * (A / A.sum())[:, None]).ravel())
    return L
