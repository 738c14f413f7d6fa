"""Polarization tensors, the small-inclusion boundary formula and rate studies."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from inclusionlab.exceptions import InvalidInputError, InvalidSpecError, ResolutionError
from inclusionlab.forward import (
    Inclusion,
    ProblemSpec,
    SolverControls,
    check_inclusions,
    h1_norm,
    inclusion_mask,
    l2_norm,
    nodal_field,
    solve_perturbed,
    solve_unperturbed,
)
from inclusionlab.greens import NeumannOperator, corrector_v_eps
from inclusionlab.mesh import Grid, interpolate, patch_gradient_functional

logger = logging.getLogger(__name__)

__all__ = [
    "PolarizationTensor",
    "RateStudy",
    "discrete_area",
    "polarization",
    "asymptotic_perturbation",
    "measured_perturbation",
    "rate_study",
    "fit_slope",
    "relative_mismatch",
]


@dataclass(frozen=True)
class PolarizationTensor:
    """Symmetrised 2x2 polarization tensor.

    ``raw`` keeps the unsymmetrised average; ``asymmetry`` is
    ``|raw[0, 1] - raw[1, 0]|``.
    """

    m: np.ndarray
    k: float
    epsilon: float
    raw: np.ndarray
    extrapolated: bool = False

    @property
    def asymmetry(self) -> float:
        return float(abs(self.raw[0, 1] - self.raw[1, 0]))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.m)

    def within_bounds(self, tol: float = 0.05) -> bool:
        ev = self.eigenvalues
        return bool(ev.min() >= 1.0 - tol and ev.max() <= 1.0 / self.k + tol)

    def to_dict(self) -> dict:
        return {
            "m": self.m.tolist(),
            "raw": self.raw.tolist(),
            "k": self.k,
            "epsilon": self.epsilon,
            "eigenvalues": self.eigenvalues.tolist(),
            "asymmetry": self.asymmetry,
            "extrapolated": self.extrapolated,
        }


def discrete_area(grid: Grid, inclusion: Inclusion) -> float:
    """Total area of the elements assigned to the inclusion."""
    return float(grid.element_areas[inclusion_mask(grid, [inclusion])].sum())


def _polarization_raw(grid: Grid, inclusion: Inclusion) -> np.ndarray:
    mask = inclusion_mask(grid, [inclusion])
    A = grid.element_areas[mask]
    G = grid.basis_gradients[mask]
    raw = np.empty((2, 2))
    for j in (1, 2):
        v = corrector_v_eps(grid, inclusion, j)
        grad = np.einsum("eid,ei->ed", G, v[grid.elements[mask]])
        raw[:, j - 1] = (A[:, None] * grad).sum(axis=0) / A.sum()
    return raw


def polarization(grid: Grid, inclusion: Inclusion, extrapolate: bool = False) -> PolarizationTensor:
    """Polarization tensor ``M_ij = |omega|^{-1} int_omega d_i v^(j)``.

    With ``extrapolate`` a second solve at ``epsilon / 2`` is combined as
    ``2 M(eps/2) - M(eps)``.
    """
    if inclusion.epsilon < 4.0 * grid.h:
        raise ResolutionError(
            f"epsilon={inclusion.epsilon:g} is below 4h={4.0 * grid.h:g}; refine the mesh"
        )
    raw = _polarization_raw(grid, inclusion)
    if extrapolate:
        half = inclusion.with_epsilon(0.5 * inclusion.epsilon)
        if half.epsilon < 4.0 * grid.h:
            raise ResolutionError("extrapolation needs epsilon/2 >= 4h")
        raw = 2.0 * _polarization_raw(grid, half) - raw
    m = 0.5 * (raw + raw.T)
    return PolarizationTensor(m=m, k=inclusion.k, epsilon=inclusion.epsilon, raw=raw, extrapolated=extrapolate)


def _check_separation(grid: Grid, inclusions: Sequence[Inclusion], d0=None) -> None:
    x0, x1, y0, y1 = grid.domain
    for n, inc in enumerate(inclusions):
        cx, cy = inc.center
        if not (x0 < cx < x1 and y0 < cy < y1):
            raise InvalidSpecError(f"inclusion {n} center {inc.center} lies outside the domain")
    check_inclusions(grid, inclusions, d0)
    for a in range(len(inclusions)):
        for b in range(a + 1, len(inclusions)):
            ia, ib = inclusions[a], inclusions[b]
            dist = np.hypot(ia.center[0] - ib.center[0], ia.center[1] - ib.center[1])
            if dist < 10.0 * max(ia.epsilon, ib.epsilon):
                raise InvalidSpecError(f"inclusions {a} and {b} are not well separated (distance {dist:g})")


def asymptotic_perturbation(
    grid: Grid,
    U,
    inclusions: Sequence[Inclusion],
    tensors: Sequence,
    nodes=None,
    areas: Sequence[float] | None = None,
    d0: float | None = None,
) -> np.ndarray:
    """Leading-order boundary perturbation predicted at ``nodes``.

    For each inclusion ``l`` with center ``z``, area ``|omega_l|`` and
    tensor ``M``::

        |omega_l| * ((1 - k) grad U(z) . M grad_z N_U(z, y) + U(z)^3 N_U(z, y))

    summed over inclusions.  ``N_U(z, .)`` and ``grad_z N_U(z, .)`` are
    obtained for all ``y`` at once from reciprocity of the symmetric discrete
    operator.  Areas default to the discrete element areas.

    Returns an array aligned with ``nodes`` (default: boundary nodes in loop order).
    """
    inclusions = list(inclusions)
    if len(tensors) != len(inclusions):
        raise InvalidInputError("one tensor per inclusion is required")
    _check_separation(grid, inclusions, d0)
    U = nodal_field(grid, U)
    nodes = grid.boundary_nodes if nodes is None else np.asarray(nodes, dtype=int)
    if areas is None:
        areas = [discrete_area(grid, inc) for inc in inclusions]
    op = NeumannOperator(grid, U)
    pred = np.zeros(len(nodes))
    for inc, M, area in zip(inclusions, tensors, areas):
        M = np.asarray(getattr(M, "m", M), dtype=float)
        z = np.asarray(inc.center)
        elem, bary = grid.locate(z)
        point_load = np.zeros(grid.n_nodes)
        point_load[grid.elements[elem[0]]] = bary[0]
        n_z = op.solve(point_load)
        L = patch_gradient_functional(grid, z)
        grad_n = np.column_stack([op.solve(L[0]), op.solve(L[1])])
        grad_u = L @ U
        u_z = float(point_load @ U)
        term = (1.0 - inc.k) * grad_n[nodes] @ (M.T @ grad_u) + u_z**3 * n_z[nodes]
        pred += area * term
    return pred


def measured_perturbation(u_eps, U, nodes) -> np.ndarray:
    """``w = u_eps - U`` restricted to ``nodes``."""
    u_eps = np.asarray(u_eps, dtype=float)
    U = np.asarray(U, dtype=float)
    if u_eps.shape != U.shape:
        raise InvalidInputError("fields live on different grids")
    return (u_eps - U)[np.asarray(nodes, dtype=int)]


def relative_mismatch(predicted, measured, floor: float) -> float:
    """Mean of ``|pred - meas| / |meas|`` over entries with ``|meas| >= floor``."""
    predicted = np.asarray(predicted)
    measured = np.asarray(measured)
    keep = np.abs(measured) >= floor
    if not np.any(keep):
        raise InvalidInputError("no measurement exceeds the floor")
    return float(np.mean(np.abs(predicted[keep] - measured[keep]) / np.abs(measured[keep])))


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)[0])


@dataclass
class RateStudy:
    epsilons: list
    areas: list
    h1_errors: list
    l2_errors: list
    boundary_errors: list
    slopes: dict = field(default_factory=dict)

    COLUMNS = ("epsilon", "area", "h1", "l2", "boundary")

    def rows(self):
        return list(zip(self.epsilons, self.areas, self.h1_errors, self.l2_errors, self.boundary_errors))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows():
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def loglog(self, column: str) -> str:
        """Two-column (area, error) data for a log-log plot."""
        values = {"h1": self.h1_errors, "l2": self.l2_errors, "boundary": self.boundary_errors}[column]
        return "".join(f"{a:.17g} {e:.17g}\n" for a, e in zip(self.areas, values))

    def to_dict(self) -> dict:
        return {
            "rows": [dict(zip(self.COLUMNS, r)) for r in self.rows()],
            "slopes": dict(self.slopes),
        }


def rate_study(
    grid: Grid,
    source,
    inclusion: Inclusion,
    epsilons: Sequence[float],
    controls: SolverControls | None = None,
) -> RateStudy:
    """Perturbation norms for a shrinking inclusion and their log-log slopes vs ``|omega|``."""
    epsilons = [float(e) for e in epsilons]
    if len(epsilons) < 3:
        raise InvalidInputError("a rate study needs at least three epsilons")
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise InvalidInputError("epsilons must be strictly decreasing")
    if min(epsilons) < 4.0 * grid.h:
        raise ResolutionError(f"smallest epsilon {min(epsilons):g} is below 4h={4.0 * grid.h:g}")
    U = solve_unperturbed(grid, source, controls).solution
    bnodes = grid.boundary_nodes
    study = RateStudy([], [], [], [], [])
    for eps in epsilons:
        inc = inclusion.with_epsilon(eps)
        u = solve_perturbed(grid, ProblemSpec(source, [inc]), controls).solution
        w = u - U
        study.epsilons.append(eps)
        study.areas.append(discrete_area(grid, inc))
        study.h1_errors.append(h1_norm(grid, w))
        study.l2_errors.append(l2_norm(grid, w))
        study.boundary_errors.append(float(np.abs(w[bnodes]).max()))
        logger.info("rate study eps=%g h1=%.4e l2=%.4e", eps, study.h1_errors[-1], study.l2_errors[-1])
    study.slopes = {
        "h1": fit_slope(study.areas, study.h1_errors),
        "l2": fit_slope(study.areas, study.l2_errors),
        "boundary": fit_slope(study.areas, study.boundary_errors),
    }
    return study
