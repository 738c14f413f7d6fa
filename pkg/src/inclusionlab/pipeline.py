"""End-to-end synthetic reconstruction: localization first, then ``M_11``."""

from __future__ import annotations

import logging
import warnings

import numpy as np

from inclusionlab.asymptotics import polarization
from inclusionlab.exceptions import ImplausibleResultWarning, InvalidInputError, ResolutionError
from inclusionlab.forward import Inclusion, SolverControls
from inclusionlab.inverse import (
    SQRT3,
    average_measurement,
    localize_center,
    recover_m11,
    riccati_background,
    simulate_measurements,
    simulate_riccati_measurement,
)
from inclusionlab.mesh import Grid

logger = logging.getLogger(__name__)

NOISE_WARNING_LEVEL = 1e-3


def _manufactured_gammas(truth: Inclusion, lam: float) -> tuple:
    return tuple(truth.analytic_area * lam**3 * np.exp(lam * SQRT3 * c) for c in truth.center)


def reconstruct(
    grid: Grid,
    truth: Inclusion,
    lambdas=(1.0, 2.0),
    mode: str = "two-lambda",
    synthesis: str = "forward",
    controls: SolverControls | None = None,
    noise_level: float = 0.0,
    seed: int = 0,
    m11_truth: float = 1.2,
) -> dict:
    """Synthesize data for ``truth``, localize it, then recover ``M_11``.

    Returns a JSON-ready dict with ``center``, ``epsilon_hat``, ``m11`` and
    ``diagnostics`` (truth-versus-estimate deltas, raw averaged measurements).

    In known-epsilon mode the true size is used; in two-lambda mode the size
    and area are estimated from the data and the area estimate feeds the
    ``M_11`` inversion.
    """
    if mode not in ("known-epsilon", "two-lambda"):
        raise InvalidInputError(f"unknown reconstruction mode {mode!r}")
    if synthesis not in ("forward", "manufactured"):
        raise InvalidInputError(f"unknown synthesis {synthesis!r}")
    lambdas = [float(v) for v in lambdas]
    if mode == "two-lambda" and len(lambdas) < 2:
        raise InvalidInputError("two-lambda mode needs two lambdas")
    used = lambdas[:2] if mode == "two-lambda" else lambdas[:1]
    rng = np.random.default_rng(seed)

    if synthesis == "manufactured":
        gammas = {lam: _manufactured_gammas(truth, lam) for lam in used}
    else:
        ms = simulate_measurements(grid, truth, used, controls, noise_level, rng)
        gammas = {
            lam: (average_measurement(ms, ms.find(lam, 1)), average_measurement(ms, ms.find(lam, 2)))
            for lam in used
        }

    lam = used[0]
    if mode == "two-lambda":
        lam2 = used[1]
        loc = localize_center(*gammas[lam], lam, second=(lam2, *gammas[lam2]), area_factor=truth.area_factor)
        area = loc.area_hat
        eps_used = loc.epsilon_hat
    else:
        loc = localize_center(*gammas[lam], lam, epsilon=truth.epsilon, area_factor=truth.area_factor)
        area = truth.analytic_area
        eps_used = truth.epsilon

    x_bar = loc.center[0]
    bg = riccati_background(grid, x_bar)
    if synthesis == "manufactured":
        xt = truth.center[0]
        riccati_gamma = truth.analytic_area * (
            (1.0 - truth.k) * m11_truth * float(bg.dU(xt)) * float(bg.dW(xt)) + float(bg.U(xt)) ** 3 * float(bg.W(xt))
        )
        m11_reference = m11_truth
    else:
        rms = simulate_riccati_measurement(grid, truth, bg, controls, noise_level, rng)
        riccati_gamma = average_measurement(rms, 0)
        try:
            m11_reference = float(polarization(grid, truth).m[0, 0])
        except ResolutionError:
            m11_reference = None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ImplausibleResultWarning)
        m11 = recover_m11(riccati_gamma, eps_used, truth.k, x_bar, bg, area=area)
    notes = [str(w.message) for w in caught if issubclass(w.category, ImplausibleResultWarning)]

    center_error = [loc.center[i] - truth.center[i] for i in range(2)]
    diagnostics = {
        "mode": mode,
        "synthesis": synthesis,
        "lambdas": used,
        "gammas": {f"{l:g}": list(g) for l, g in gammas.items()},
        "riccati_gamma": riccati_gamma,
        "area_used": area,
        "truth": truth.to_dict(),
        "center_error": center_error,
        "epsilon_relative_error": None if loc.epsilon_hat is None else loc.epsilon_hat / truth.epsilon - 1.0,
        "m11_reference": m11_reference,
        "m11_relative_error": None if m11_reference is None else m11 / m11_reference - 1.0,
        "noise_level": noise_level,
        "degraded_accuracy": bool(noise_level > NOISE_WARNING_LEVEL),
        "warnings": notes,
    }
    logger.info("reconstructed center=%s m11=%.4f", loc.center, m11)
    return {
        "center": list(loc.center),
        "epsilon_hat": loc.epsilon_hat,
        "m11": m11,
        "diagnostics": diagnostics,
    }
