"""Forward solves of the steady semilinear Neumann problem.

The perturbed problem is::

    -div(k_eps grad u) + chi_{Omega \\ omega} u^3 = f   in Omega,
    du/dn = 0                                         on dOmega,

with ``k_eps = k`` inside the inclusions and 1 elsewhere; the unperturbed
problem has no inclusions.  The discrete problem minimises the energy
``E(u) = 1/2 u.K u + 1/4 sum_i d_i u_i^4 - b.u``, where ``d_i`` are lumped
(vertex-quadrature) areas of the elements outside the inclusions and ``b`` is
the consistent P1 load.  Newton's method with a backtracking line search on
``E`` is used; the Jacobian ``K + diag(3 d u^2)`` is an M-matrix, so discrete
positivity and the comparison principle hold exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from inclusionlab.exceptions import (
    ConvergenceError,
    InvalidInputError,
    InvalidSpecError,
    NumericalError,
    SingularOperatorError,
)
from inclusionlab.mesh import Grid, assemble_load, assemble_stiffness, assemble_weighted_mass

logger = logging.getLogger(__name__)

__all__ = [
    "Inclusion",
    "SolverControls",
    "ProblemSpec",
    "SolveReport",
    "ComparisonResult",
    "nodal_field",
    "inclusion_mask",
    "check_inclusions",
    "solve_unperturbed",
    "solve_perturbed",
    "energy",
    "monotonicity_gap",
    "h1_norm",
    "l2_norm",
    "l2_error",
    "comparison_check",
    "poincare_constant",
]

SHAPES = ("disk", "ellipse", "square")


@dataclass(frozen=True)
class Inclusion:
    """A low-conductivity inclusion.

    ``epsilon`` is the disk radius, the square half-side, or the scale of the
    ellipse semi-axes ``epsilon * axes``.  ``k`` must lie in ``(0, 1]``; with
    ``k = 1`` the inclusion only switches off the reaction term.
    """

    center: tuple
    epsilon: float
    k: float = 0.5
    shape: str = "disk"
    axes: tuple = (1.0, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "axes", tuple(float(a) for a in self.axes))
        if len(self.center) != 2:
            raise InvalidSpecError("inclusion center must be a 2D point")
        if self.shape not in SHAPES:
            raise InvalidSpecError(f"unknown inclusion shape {self.shape!r}; expected one of {SHAPES}")
        if not self.epsilon > 0:
            raise InvalidSpecError(f"inclusion epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.k <= 1.0:
            raise InvalidSpecError(f"contrast k must lie in (0, 1], got {self.k}")
        if self.shape == "ellipse" and not (len(self.axes) == 2 and min(self.axes) > 0):
            raise InvalidSpecError("ellipse axes must be two positive multipliers")

    @property
    def area_factor(self) -> float:
        """Ratio of the analytic area to ``epsilon**2``."""
        if self.shape == "disk":
            return float(np.pi)
        if self.shape == "ellipse":
            return float(np.pi * self.axes[0] * self.axes[1])
        return 4.0

    @property
    def analytic_area(self) -> float:
        return self.area_factor * self.epsilon**2

    @property
    def half_extent(self) -> tuple:
        if self.shape == "ellipse":
            return self.epsilon * self.axes[0], self.epsilon * self.axes[1]
        return self.epsilon, self.epsilon

    @property
    def radius(self) -> float:
        """Radius of a circle enclosing the inclusion."""
        hx, hy = self.half_extent
        return float(np.hypot(hx, hy)) if self.shape == "square" else max(hx, hy)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points) - np.asarray(self.center)
        if self.shape == "disk":
            return np.hypot(p[:, 0], p[:, 1]) < self.epsilon
        if self.shape == "ellipse":
            a, b = self.half_extent
            return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 < 1.0
        return np.maximum(np.abs(p[:, 0]), np.abs(p[:, 1])) < self.epsilon

    def with_epsilon(self, epsilon: float) -> "Inclusion":
        return Inclusion(self.center, epsilon, self.k, self.shape, self.axes)

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "center": list(self.center), "epsilon": self.epsilon, "k": self.k}
        if self.shape == "ellipse":
            d["axes"] = list(self.axes)
        return d


@dataclass(frozen=True)
class SolverControls:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 30


@dataclass(frozen=True)
class ProblemSpec:
    """Source term plus inclusions.

    ``source`` may be a scalar, a callable ``f(x, y)`` or a nodal array.
    ``d0`` is the minimum inclusion-to-boundary distance; by default
    ``0.1 * min(side)``.
    """

    source: object
    inclusions: Sequence[Inclusion] = ()
    d0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual: float
    energy: float
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "min": float(self.solution.min()),
            "max": float(self.solution.max()),
        }


@dataclass
class ComparisonResult:
    holds: bool
    min_gap: float
    tolerance: float
    violations: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __bool__(self):
        return self.holds


def nodal_field(grid: Grid, value) -> np.ndarray:
    """Coerce a scalar, callable ``f(x, y)`` or array into a nodal array."""
    if callable(value):
        arr = np.asarray(value(grid.nodes[:, 0], grid.nodes[:, 1]), dtype=float)
        arr = np.broadcast_to(arr, (grid.n_nodes,)).copy()
    else:
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.n_nodes, float(arr))
    if arr.shape != (grid.n_nodes,):
        raise InvalidInputError(f"field must have {grid.n_nodes} nodal values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("field values must be finite")
    return arr


def inclusion_mask(grid: Grid, inclusions: Sequence[Inclusion]) -> np.ndarray:
    """Elements whose centroid lies in any inclusion."""
    mask = np.zeros(grid.n_elements, dtype=bool)
    for inc in inclusions:
        mask |= inc.contains(grid.centroids)
    return mask


def check_inclusions(grid: Grid, inclusions: Sequence[Inclusion], d0: float | None = None) -> None:
    """Raise :class:`InvalidSpecError` unless inclusions are disjoint and away from the boundary."""
    x0, x1, y0, y1 = grid.domain
    if d0 is None:
        d0 = 0.1 * min(x1 - x0, y1 - y0)
    for n, inc in enumerate(inclusions):
        cx, cy = inc.center
        hx, hy = inc.half_extent
        gap = min(cx - hx - x0, x1 - cx - hx, cy - hy - y0, y1 - cy - hy)
        if gap < d0:
            raise InvalidSpecError(
                f"inclusion {n} at {inc.center} lies within {d0:g} of the boundary (gap {gap:g})"
            )
    for a in range(len(inclusions)):
        for b in range(a + 1, len(inclusions)):
            ia, ib = inclusions[a], inclusions[b]
            dist = np.hypot(ia.center[0] - ib.center[0], ia.center[1] - ib.center[1])
            if dist <= ia.radius + ib.radius:
                raise InvalidSpecError(f"inclusions {a} and {b} overlap")


class _Discretization:
    """Matrices of one discrete problem: stiffness, lumped reaction weights, load."""

    def __init__(self, grid: Grid, inclusions: Sequence[Inclusion] = (), f=None):
        self.grid = grid
        self.inclusions = tuple(inclusions)
        self.mask = inclusion_mask(grid, self.inclusions)
        if self.inclusions:
            coeff = np.ones(grid.n_elements)
            for inc in self.inclusions:
                coeff[inc.contains(grid.centroids)] = inc.k
            self.K = assemble_stiffness(grid, coeff)
            self.d = assemble_weighted_mass(grid, element_weight=(~self.mask).astype(float), lumped=True).diagonal()
        else:
            self.K = grid.stiffness
            self.d = grid.lumped_areas
        self.b = None if f is None else assemble_load(grid, nodal_field(grid, f))

    def energy(self, u: np.ndarray) -> float:
        return float(0.5 * u @ (self.K @ u) + 0.25 * np.dot(self.d, u**4) - self.b @ u)

    def residual(self, u: np.ndarray) -> np.ndarray:
        return self.K @ u + self.d * u**3 - self.b

    def jacobian(self, u: np.ndarray) -> sp.csc_matrix:
        return (self.K + sp.diags(3.0 * self.d * u**2)).tocsc()


def _factorize(A: sp.spmatrix):
    try:
        return spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularOperatorError(str(exc)) from exc


def _newton(disc: _Discretization, u0: np.ndarray, controls: SolverControls) -> SolveReport:
    grid = disc.grid
    h1 = grid.stiffness + grid.mass
    u = u0.astype(float).copy()
    E = disc.energy(u)
    tol_r = controls.tol * (1.0 + np.linalg.norm(disc.b))
    step = np.inf
    history = []
    for it in range(controls.max_iter + 1):
        r = disc.residual(u)
        rn = float(np.linalg.norm(r))
        history.append((it, rn, step, E))
        logger.debug("newton it=%d residual=%.3e step=%.3e energy=%.12g", it, rn, step, E)
        if rn <= tol_r and step <= controls.tol:
            return SolveReport(u, it, rn, E, history)
        if it == controls.max_iter:
            break
        if not np.any(disc.d * u**2 > 0):
            if rn <= tol_r:
                return SolveReport(u, it, rn, E, history)
            raise SingularOperatorError("linearized operator is singular (reaction term vanishes)")
        s = -_factorize(disc.jacobian(u)).solve(r)
        slope = float(r @ s)
        slack = 1e-13 * (1.0 + abs(E))
        t = 1.0
        for _ in range(controls.max_halvings):
            E_new = disc.energy(u + t * s)
            if E_new <= E + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed to decrease the energy", history)
        ds = t * s
        u = u + ds
        E = E_new
        step = float(np.sqrt(max(ds @ (h1 @ ds), 0.0)))
    raise ConvergenceError(
        f"Newton did not converge in {controls.max_iter} iterations (residual {rn:.3e})", history
    )


def _initial_guess(grid: Grid, b: np.ndarray) -> np.ndarray:
    return np.full(grid.n_nodes, np.cbrt(b.sum() / grid.area))


def solve_unperturbed(grid: Grid, f, controls: SolverControls | None = None) -> SolveReport:
    """Solve ``-Delta U + U^3 = f`` with homogeneous Neumann data."""
    controls = controls or SolverControls()
    disc = _Discretization(grid, (), f)
    return _newton(disc, _initial_guess(grid, disc.b), controls)


def solve_perturbed(grid: Grid, spec: ProblemSpec, controls: SolverControls | None = None) -> SolveReport:
    """Solve the problem with the inclusions of ``spec``.

    With no inclusions this is exactly :func:`solve_unperturbed`.
    """
    if not spec.inclusions:
        return solve_unperturbed(grid, spec.source, controls)
    controls = controls or SolverControls()
    check_inclusions(grid, spec.inclusions, spec.d0)
    disc = _Discretization(grid, spec.inclusions, spec.source)
    return _newton(disc, _initial_guess(grid, disc.b), controls)


def energy(grid: Grid, spec: ProblemSpec, u) -> float:
    """Discrete value of ``1/2 int k|grad u|^2 + 1/4 int_{Omega\\omega} u^4 - int f u``."""
    disc = _Discretization(grid, spec.inclusions, spec.source)
    return disc.energy(nodal_field(grid, u))


def monotonicity_gap(grid: Grid, spec: ProblemSpec, u, v) -> float:
    """``<Tu - Tv, u - v>`` for the discrete operator ``T``; nonnegative."""
    disc = _Discretization(grid, spec.inclusions)
    u = nodal_field(grid, u)
    v = nodal_field(grid, v)
    e = u - v
    grad = float(e @ (disc.K @ e))
    react = float(np.dot(disc.d, e * e * (u * u + u * v + v * v)))
    return grad + react


def l2_norm(grid: Grid, u) -> float:
    u = nodal_field(grid, u)
    return float(np.sqrt(max(u @ (grid.mass @ u), 0.0)))


def h1_norm(grid: Grid, u) -> float:
    u = nodal_field(grid, u)
    return float(np.sqrt(max(u @ (grid.stiffness @ u) + u @ (grid.mass @ u), 0.0)))


def h1_seminorm(grid: Grid, u) -> float:
    u = nodal_field(grid, u)
    return float(np.sqrt(max(u @ (grid.stiffness @ u), 0.0)))


# Degree-4 six-point rule on triangles (Strang & Fix).
_QA, _QB = 0.445948490915965, 0.108103018168070
_QC, _QD = 0.091576213509771, 0.816847572980459
_Q_BARY = np.array([
    [_QA, _QA, _QB], [_QA, _QB, _QA], [_QB, _QA, _QA],
    [_QC, _QC, _QD], [_QC, _QD, _QC], [_QD, _QC, _QC],
])
_Q_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def l2_error(grid: Grid, u, exact: Callable) -> float:
    """``||u - exact||_{L^2}`` with a degree-4 quadrature on every element."""
    u = nodal_field(grid, u)
    p = grid.nodes[grid.elements]
    qp = np.einsum("qi,eid->eqd", _Q_BARY, p)
    uh = np.einsum("qi,ei->eq", _Q_BARY, u[grid.elements])
    ue = exact(qp[..., 0], qp[..., 1])
    err2 = np.einsum("eq,q,e->", (uh - ue) ** 2, _Q_W, grid.element_areas)
    return float(np.sqrt(err2))


def comparison_check(grid: Grid, f1, f2, controls: SolverControls | None = None, slack: float | None = None) -> ComparisonResult:
    """Solve with ``f1 <= f2`` and check ``U2 >= U1 - slack`` nodewise.

    The default slack is ``10 h^2``.
    """
    f1 = nodal_field(grid, f1)
    f2 = nodal_field(grid, f2)
    if np.any(f2 < f1):
        raise InvalidInputError("comparison check needs f2 >= f1 at every node")
    tol_h = 10.0 * grid.h**2 if slack is None else slack
    U1 = solve_unperturbed(grid, f1, controls).solution
    U2 = solve_unperturbed(grid, f2, controls).solution
    gap = U2 - U1
    bad = np.nonzero(gap < -tol_h)[0]
    return ComparisonResult(bad.size == 0, float(gap.min()), tol_h, bad, U1, U2)


def poincare_constant(grid: Grid, g=None, *, element_weight=None, tol: float = 1e-9) -> float:
    """Smallest ``S`` with ``||u - int u g|| <= S ||grad u||`` on the P1 space.

    ``g`` is a nodal weight or ``element_weight`` a piecewise-constant one,
    normalised so that ``int g = 1``; the default is the uniform weight.  The
    ratio depends on ``u`` only modulo constants, so ``S^-2`` is the smallest
    eigenvalue of ``K u = mu M u`` on the subspace ``int u g = 0``.
    """
    if g is not None and element_weight is not None:
        raise InvalidInputError("give either a nodal or an element weight")
    if element_weight is not None:
        we = np.broadcast_to(np.asarray(element_weight, dtype=float), (grid.n_elements,))
        m = np.zeros(grid.n_nodes)
        np.add.at(m, grid.elements, np.repeat((we * grid.element_areas / 3.0)[:, None], 3, axis=1))
    else:
        gv = np.full(grid.n_nodes, 1.0 / grid.area) if g is None else nodal_field(grid, g)
        m = grid.mass @ gv
    if abs(m.sum() - 1.0) > 1e-10:
        raise InvalidInputError(f"Poincare weight must integrate to 1, got {m.sum():.12g}")

    K = grid.stiffness.tocsc()
    M = grid.mass.tocsc()
    # Shift-invert about -1 on the constrained pencil: x = OP b solves
    # [K + M, m; m^T, 0] [x; l] = [b; 0], so OP M u = u / (mu + 1) on m.u = 0.
    aug = _factorize(sp.bmat([[K + M, sp.csc_matrix(m[:, None])], [sp.csc_matrix(m[None, :]), None]]))
    n = grid.n_nodes

    def op(b):
        return aug.solve(np.append(np.ravel(b), 0.0))[:n]

    opinv = spla.LinearOperator((n, n), matvec=op, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        vals = spla.eigsh(K, k=1, M=M, sigma=-1.0, OPinv=opinv, which="LM", v0=v0, tol=tol,
                          return_eigenvectors=False)
    except spla.ArpackError as exc:
        raise NumericalError(f"eigen-solver failure: {exc}") from exc
    mu = float(np.min(vals))
    if not np.isfinite(mu) or mu <= 0:
        raise NumericalError(f"eigen-solver returned nonpositive eigenvalue {mu}")
    return float(1.0 / np.sqrt(mu))
