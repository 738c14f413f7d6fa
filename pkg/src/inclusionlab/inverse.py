"""Reconstruction of a single inclusion from averaged boundary measurements.

Two experiments are used.  With a constant source ``f = lam^3`` the background
is ``U = lam`` and the exponential test functions ``exp(lam sqrt(3) x_j)``
locate the center.  A one-dimensional background generated from
``psi(x) = (x^2 + x - 3) / 3`` through ``psi' + psi^2 = 3 U^2`` then makes the
``M_11`` entry of the polarization tensor observable.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from inclusionlab.exceptions import (
    IllConditionedError,
    ImplausibleResultWarning,
    InvalidInputError,
    OverflowGuardError,
    UnlocatableError,
)
from inclusionlab.forward import Inclusion, ProblemSpec, SolverControls, solve_perturbed, solve_unperturbed
from inclusionlab.mesh import Grid, boundary_data

logger = logging.getLogger(__name__)

SQRT3 = float(np.sqrt(3.0))

__all__ = [
    "MeasurementSet",
    "Localization",
    "RiccatiBackground",
    "average_measurement",
    "exponential_test",
    "localize_center",
    "riccati_background",
    "recover_m11",
    "simulate_measurements",
    "simulate_riccati_measurement",
]


@dataclass
class MeasurementSet:
    """Boundary traces of measured perturbations and the Neumann data they are tested against.

    One entry per experiment in ``traces``, ``g``, ``lambdas`` and ``axes``;
    arrays are aligned with ``nodes``.  ``weights`` are the trapezoid weights
    of those nodes.
    """

    nodes: np.ndarray
    coords: np.ndarray
    weights: np.ndarray
    traces: list = field(default_factory=list)
    g: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    axes: list = field(default_factory=list)
    noise_level: float = 0.0

    @classmethod
    def empty(cls, grid: Grid, noise_level: float = 0.0) -> "MeasurementSet":
        nodes = grid.boundary_nodes
        return cls(nodes, grid.nodes[nodes], grid.boundary_weights[nodes], noise_level=noise_level)

    def add(self, trace, g, lam=None, axis=None) -> int:
        trace = np.asarray(trace, dtype=float)
        g = np.asarray(g, dtype=float)
        if trace.shape != self.nodes.shape or g.shape != self.nodes.shape:
            raise InvalidInputError("trace and g must have one value per boundary node")
        if not (np.all(np.isfinite(trace)) and np.all(np.isfinite(g))):
            raise InvalidInputError("measurements must be finite")
        self.traces.append(trace)
        self.g.append(g)
        self.lambdas.append(lam)
        self.axes.append(axis)
        return len(self.traces) - 1

    def __len__(self):
        return len(self.traces)

    def find(self, lam, axis) -> int:
        for i, (l, a) in enumerate(zip(self.lambdas, self.axes)):
            if a == axis and l is not None and np.isclose(l, lam):
                return i
        raise InvalidInputError(f"no experiment with lambda={lam}, axis={axis}")

    def to_csv(self, experiment: int) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "x", "y", "w", "g"])
        for n, (x, y), t, gv in zip(self.nodes, self.coords, self.traces[experiment], self.g[experiment]):
            w.writerow([int(n), f"{x:.17g}", f"{y:.17g}", f"{t:.17g}", f"{gv:.17g}"])
        return buf.getvalue()


def average_measurement(ms: MeasurementSet, experiment: int) -> float:
    """``Gamma = int_{dOmega} w g dS`` by the trapezoid rule."""
    if not 0 <= experiment < len(ms):
        raise InvalidInputError(f"experiment {experiment} does not exist")
    return float(np.dot(ms.weights, ms.traces[experiment] * ms.g[experiment]))


def exponential_test(grid: Grid, lam: float, axis: int) -> tuple:
    """``W = exp(lam sqrt(3) x_j)`` at the nodes and its Neumann data ``g`` (nodal, boundary only)."""
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    if axis not in (1, 2):
        raise InvalidInputError(f"axis must be 1 or 2, got {axis}")
    x0, x1, y0, y1 = grid.domain
    reach = max(abs(x0), abs(x1)) if axis == 1 else max(abs(y0), abs(y1))
    a = lam * SQRT3
    if a * reach > 50.0:
        raise OverflowGuardError(f"lambda*sqrt(3)*extent = {a * reach:g} exceeds 50")
    W = np.exp(a * grid.nodes[:, axis - 1])

    def g(x, y, n1, n2):
        xj, nj = (x, n1) if axis == 1 else (y, n2)
        return a * nj * np.exp(a * xj)

    return W, boundary_data(grid, g)


@dataclass(frozen=True)
class Localization:
    center: tuple
    epsilon_hat: float | None
    mode: str
    area_hat: float | None = None

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "epsilon_hat": self.epsilon_hat,
            "area_hat": self.area_hat,
            "mode": self.mode,
        }


def localize_center(
    gamma1: float,
    gamma2: float,
    lam: float,
    epsilon: float | None = None,
    second: tuple | None = None,
    area_factor: float = 1.0,
) -> Localization:
    """Invert ``Gamma_j(lam) = a eps^2 lam^3 exp(lam sqrt(3) x_j)`` for the center.

    Parameters
    ----------
    gamma1, gamma2 : float
        Averaged measurements against ``exp(lam sqrt(3) x)`` and ``exp(lam sqrt(3) y)``.
    lam : float
    epsilon : float, optional
        Known size; selects known-epsilon mode when ``second`` is absent.
    second : tuple, optional
        ``(lam2, gamma1(lam2), gamma2(lam2))``.  The ratio of the two
        measurements eliminates the unknown size, which is then estimated.
    area_factor : float
        ``a`` above, the inclusion area divided by ``eps^2`` (``pi`` for a disk).
    """
    gammas = [gamma1, gamma2] + (list(second[1:]) if second is not None else [])
    if any(not g > 0 for g in gammas):
        raise UnlocatableError(
            f"averaged measurements must be positive to localize, got {gammas}; "
            "the data are dominated by noise or the remainder"
        )
    a = lam * SQRT3
    if second is not None:
        lam2, g1b, g2b = second
        if np.isclose(lam, lam2):
            raise InvalidInputError("two-lambda mode needs two distinct lambdas")
        center = tuple(
            float(np.log(ga * lam2**3 / (gb * lam**3)) / (SQRT3 * (lam - lam2)))
            for ga, gb in ((gamma1, g1b), (gamma2, g2b))
        )
        est = [ga / (lam**3 * np.exp(a * c)) for ga, c in zip((gamma1, gamma2), center)]
        area_hat = float(np.sqrt(est[0] * est[1]))
        return Localization(center, float(np.sqrt(area_hat / area_factor)), "two-lambda", area_hat)
    if epsilon is None:
        raise InvalidInputError("either epsilon or a second lambda is required")
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    scale = area_factor * epsilon**2 * lam**3
    center = tuple(float(np.log(g / scale) / a) for g in (gamma1, gamma2))
    return Localization(center, None, "known-epsilon", None)


def _phi(x):
    return (x**3 / 3.0 + x**2 / 2.0 - 3.0 * x) / 3.0


@dataclass(frozen=True)
class RiccatiBackground:
    """Background ``U(x)`` with ``3U^2 = psi' + psi^2`` for ``psi = (x^2 + x - 3)/3``.

    ``W(x) = scale * exp(int_{x_bar}^x psi)`` solves ``-W'' + 3U^2 W = 0``.
    ``U_nodes``, ``f_nodes`` and ``W_nodes`` are the samples on the grid.
    """

    x_bar: float
    scale: float = 1.0
    U_nodes: np.ndarray | None = None
    f_nodes: np.ndarray | None = None
    W_nodes: np.ndarray | None = None

    @staticmethod
    def psi(x):
        return (x**2 + x - 3.0) / 3.0

    @staticmethod
    def dpsi(x):
        return (2.0 * x + 1.0) / 3.0

    @classmethod
    def _q(cls, x):
        p, dp = cls.psi(x), cls.dpsi(x)
        q = (dp + p**2) / 3.0
        dq = (2.0 / 3.0 + 2.0 * p * dp) / 3.0
        d2q = (2.0 * dp**2 + 2.0 * p * (2.0 / 3.0)) / 3.0
        return q, dq, d2q

    @classmethod
    def U(cls, x):
        return np.sqrt(cls._q(np.asarray(x, dtype=float))[0])

    @classmethod
    def dU(cls, x):
        q, dq, _ = cls._q(np.asarray(x, dtype=float))
        return dq / (2.0 * np.sqrt(q))

    @classmethod
    def d2U(cls, x):
        q, dq, d2q = cls._q(np.asarray(x, dtype=float))
        return d2q / (2.0 * np.sqrt(q)) - dq**2 / (4.0 * q**1.5)

    @classmethod
    def f(cls, x):
        return -cls.d2U(x) + cls.U(x) ** 3

    def W(self, x):
        return self.scale * np.exp(_phi(np.asarray(x, dtype=float)) - _phi(self.x_bar))

    def dW(self, x):
        return self.psi(np.asarray(x, dtype=float)) * self.W(x)

    def riccati_residual(self, x):
        x = np.asarray(x, dtype=float)
        return 3.0 * self.U(x) ** 2 - self.dpsi(x) - self.psi(x) ** 2

    def neumann_data(self, grid: Grid) -> np.ndarray:
        """``dW/dn`` at the boundary nodes of ``grid``, as nodal data."""
        return boundary_data(grid, lambda x, y, n1, n2: n1 * self.dW(x))


def riccati_background(grid: Grid | None, x_bar: float, scale: float = 1.0) -> RiccatiBackground:
    """Build the Riccati-generated background on ``[0, 1]`` normalised at ``x_bar``."""
    if not 0.0 < x_bar < 1.0:
        raise InvalidInputError(f"normalisation point must lie in (0, 1), got {x_bar}")
    if grid is None:
        return RiccatiBackground(float(x_bar), float(scale))
    x0, x1, _, _ = grid.domain
    if (x0, x1) != (0.0, 1.0):
        raise InvalidInputError("the Riccati background is defined for x in [0, 1]")
    x = grid.nodes[:, 0]
    bg = RiccatiBackground(float(x_bar), float(scale))
    return RiccatiBackground(float(x_bar), float(scale), bg.U(x), bg.f(x), bg.W(x))


def recover_m11(
    gamma: float,
    epsilon: float,
    k: float,
    x_bar: float,
    bg: RiccatiBackground,
    area_factor: float = 1.0,
    area: float | None = None,
    floor: float = 1e-3,
) -> float:
    """Solve the leading-order identity for ``M_11``.

    ``Gamma = |omega| ((1 - k) M_11 U'(x) W'(x) + U(x)^3 W(x))`` at ``x = x_bar``,
    with ``|omega| = area_factor * epsilon^2`` unless ``area`` is given.
    """
    if np.isclose(k, 1.0):
        raise IllConditionedError("k = 1: the conductivity term vanishes and M_11 is unobservable")
    dU = float(bg.dU(x_bar))
    if abs(dU) < floor:
        raise IllConditionedError(f"|U'(x_bar)| = {abs(dU):.3e} is below the floor {floor:g}")
    omega = area_factor * epsilon**2 if area is None else area
    U, W, dW = float(bg.U(x_bar)), float(bg.W(x_bar)), float(bg.dW(x_bar))
    m11 = (gamma / omega - U**3 * W) / ((1.0 - k) * dU * dW)
    if not 0.5 <= m11 <= 2.0 / k:
        warnings.warn(f"recovered M_11 = {m11:.4g} lies outside [0.5, {2.0 / k:.4g}]", ImplausibleResultWarning)
    return float(m11)


def _noisy(trace, level, rng):
    if level <= 0:
        return trace
    return trace * (1.0 + level * rng.standard_normal(trace.shape))


def simulate_measurements(
    grid: Grid,
    inclusion: Inclusion,
    lambdas: Sequence[float] = (1.0, 2.0),
    controls: SolverControls | None = None,
    noise_level: float = 0.0,
    rng: np.random.Generator | None = None,
) -> MeasurementSet:
    """Forward-simulate the constant-background experiments for each ``lam`` and both axes."""
    if noise_level > 0 and rng is None:
        raise InvalidInputError("noisy synthesis needs a seeded generator")
    ms = MeasurementSet.empty(grid, noise_level)
    for lam in lambdas:
        f = lam**3
        U = solve_unperturbed(grid, f, controls).solution
        u = solve_perturbed(grid, ProblemSpec(f, [inclusion]), controls).solution
        trace = (u - U)[ms.nodes]
        for axis in (1, 2):
            _, g = exponential_test(grid, lam, axis)
            ms.add(_noisy(trace, noise_level, rng), g[ms.nodes], lam, axis)
    return ms


def simulate_riccati_measurement(
    grid: Grid,
    inclusion: Inclusion,
    bg: RiccatiBackground,
    controls: SolverControls | None = None,
    noise_level: float = 0.0,
    rng: np.random.Generator | None = None,
) -> MeasurementSet:
    """Forward-simulate the Riccati-background experiment (one measurement)."""
    if noise_level > 0 and rng is None:
        raise InvalidInputError("noisy synthesis needs a seeded generator")
    if bg.f_nodes is None:
        bg = riccati_background(grid, bg.x_bar, bg.scale)
    ms = MeasurementSet.empty(grid, noise_level)
    U = solve_unperturbed(grid, bg.f_nodes, controls).solution
    u = solve_perturbed(grid, ProblemSpec(bg.f_nodes, [inclusion]), controls).solution
    trace = (u - U)[ms.nodes]
    ms.add(_noisy(trace, noise_level, rng), bg.neumann_data(grid)[ms.nodes], None, 1)
    return ms
