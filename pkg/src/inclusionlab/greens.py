"""Discrete Neumann functions and corrector problems."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from inclusionlab.exceptions import InvalidInputError, SingularOperatorError
from inclusionlab.forward import Inclusion, nodal_field
from inclusionlab.mesh import Grid, assemble_stiffness

__all__ = [
    "NeumannOperator",
    "neumann_function",
    "corrector_V",
    "corrector_V_exact",
    "corrector_v_eps",
    "corrector_load",
    "solve_mean_zero_neumann",
]


class NeumannOperator:
    """Factorised linearised operator ``-Delta + 3 U^2`` with homogeneous Neumann data.

    The reaction term uses the same lumped weights as the forward Newton
    Jacobian, so the matrix here is exactly the Jacobian at ``U``.  Factor
    once, then solve for as many sources as needed; :meth:`column` gives the
    Neumann function for a unit nodal load at ``y``.
    """

    def __init__(self, grid: Grid, U):
        self.grid = grid
        self.U = nodal_field(grid, U)
        K = grid.stiffness
        d = grid.lumped_areas
        react = 3.0 * d * self.U**2
        if not np.any(react > 0):
            raise SingularOperatorError("U vanishes identically; the pure Neumann operator is singular")
        self.matrix = (K + sp.diags(react)).tocsc()
        self._lu = spla.splu(self.matrix, permc_spec="MMD_AT_PLUS_A")

    def solve(self, rhs) -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def column(self, y: int) -> np.ndarray:
        """``N_U(., y)`` for the node ``y``."""
        if not 0 <= int(y) < self.grid.n_nodes:
            raise InvalidInputError(f"source node {y} out of range")
        e = np.zeros(self.grid.n_nodes)
        e[int(y)] = 1.0
        return self.solve(e)

    def neumann_solve(self, g) -> np.ndarray:
        """Solve ``-Delta W + 3U^2 W = 0`` with ``dW/dn = g`` (nodal boundary data)."""
        g = nodal_field(self.grid, g)
        return self.solve(self.grid.boundary_weights * g)


def neumann_function(grid: Grid, U, y: int) -> np.ndarray:
    """Discrete Neumann function ``N_U(., y)``: unit nodal load at node ``y``."""
    return NeumannOperator(grid, U).column(y)


def corrector_load(grid: Grid, j: int) -> np.ndarray:
    """``int_{dOmega} n_j phi_i dS``, integrating edge by edge with its own normal."""
    if j not in (1, 2):
        raise InvalidInputError(f"axis must be 1 or 2, got {j}")
    b = np.zeros(grid.n_nodes)
    vals = 0.5 * grid.edge_lengths * grid.edge_normals[:, j - 1]
    np.add.at(b, grid.boundary_edges[:, 0], vals)
    np.add.at(b, grid.boundary_edges[:, 1], vals)
    return b


def solve_mean_zero_neumann(grid: Grid, coeff, rhs: np.ndarray) -> tuple:
    """Solve ``K(coeff) v = rhs`` subject to ``int_{dOmega} v = 0``.

    The constant kernel is removed with one Lagrange multiplier row, keeping
    the system symmetric.  Returns ``(v, multiplier)``; the multiplier is zero
    up to round-off when ``rhs`` is compatible.
    """
    K = assemble_stiffness(grid, coeff)
    c = grid.boundary_weights
    n = grid.n_nodes
    A = sp.bmat([[K, sp.csc_matrix(c[:, None])], [sp.csr_matrix(c[None, :]), None]]).tocsc()
    sol = spla.splu(A).solve(np.concatenate([rhs, [0.0]]))
    return sol[:n], float(sol[n])


def corrector_V_exact(grid: Grid, j: int) -> np.ndarray:
    """``x_j - |dOmega|^{-1} int_{dOmega} x_j`` sampled at the nodes."""
    if j not in (1, 2):
        raise InvalidInputError(f"axis must be 1 or 2, got {j}")
    xj = grid.nodes[:, j - 1]
    return xj - np.dot(grid.boundary_weights, xj) / grid.perimeter


def corrector_V(grid: Grid, j: int) -> np.ndarray:
    """Boundary-mean-zero solution of ``Delta V = 0``, ``dV/dn = n_j``."""
    v, _ = solve_mean_zero_neumann(grid, 1.0, corrector_load(grid, j))
    return v


def corrector_v_eps(grid: Grid, inclusion, j: int) -> np.ndarray:
    """Boundary-mean-zero solution of ``div(k_eps grad v) = 0``, ``dv/dn = n_j``.

    ``inclusion`` is one :class:`Inclusion` or a sequence of them.
    """
    inclusions = (inclusion,) if isinstance(inclusion, Inclusion) else tuple(inclusion)
    coeff = np.ones(grid.n_elements)
    for inc in inclusions:
        coeff[inc.contains(grid.centroids)] = inc.k
    v, _ = solve_mean_zero_neumann(grid, coeff, corrector_load(grid, j))
    return v
