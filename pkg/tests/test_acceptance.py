"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
collected in the "acceptance criteria" section of the terminal summary.
"""

import json

import numpy as np
import pytest

from inclusionlab import cli
from inclusionlab.asymptotics import (
    asymptotic_perturbation,
    measured_perturbation,
    polarization,
    rate_study,
    relative_mismatch,
)
from inclusionlab.forward import (
    Inclusion,
    ProblemSpec,
    SolverControls,
    comparison_check,
    inclusion_mask,
    l2_error,
    monotonicity_gap,
    poincare_constant,
    solve_perturbed,
    solve_unperturbed,
)
from inclusionlab.inverse import SQRT3, localize_center, recover_m11, riccati_background
from inclusionlab.mesh import build_rectangle_mesh
from inclusionlab.pipeline import reconstruct

CONTROLS = SolverControls()


@pytest.fixture(scope="module")
def disk_tensor(unit256):
    """Disk, k = 0.5, eps = 0.1 on the 256 mesh; reused by the M11 criterion."""
    return polarization(unit256, Inclusion((0.5, 0.5), 0.1, 0.5))


def test_constant_solutions_exact(unit64, criterion):
    e8 = np.abs(solve_unperturbed(unit64, 8.0).solution - 2.0).max()
    e1 = np.abs(solve_unperturbed(unit64, 1.0).solution - 1.0).max()
    criterion(1, e8 <= 1e-9 and e1 <= 1e-9, f"max|U-2|={e8:.1e}, max|U-1|={e1:.1e}")


def test_manufactured_convergence(criterion):
    exact = lambda x, y: np.cos(np.pi * x) + 2.0
    f = lambda x, y: np.pi**2 * np.cos(np.pi * x) + exact(x, y) ** 3
    hs, errs = [], []
    for n in (32, 64, 128):
        g = build_rectangle_mesh(nx=n)
        errs.append(l2_error(g, solve_unperturbed(g, f).solution, exact))
        hs.append(g.h)
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    criterion(2, abs(slope - 2.0) <= 0.2, f"L2 slope {slope:.3f}, errors {', '.join(f'{e:.2e}' for e in errs)}")


def test_lower_bound(unit128, criterion):
    U = solve_unperturbed(unit128, lambda x, y: 1.0 + x * y).solution
    bound = 1.0 - 10.0 * unit128.h**2
    criterion(3, U.min() >= bound, f"min U={U.min():.6f} >= {bound:.6f}")


def test_comparison_principle(unit128, criterion):
    rng = np.random.default_rng(4)
    x, y = unit128.nodes[:, 0], unit128.nodes[:, 1]
    worst, ok = np.inf, True
    for _ in range(5):
        a = rng.uniform(-0.3, 0.3, 4)
        p = rng.integers(1, 4, 4)
        base = 1.5 + a[0] * np.cos(p[0] * np.pi * x) + a[1] * np.sin(p[1] * np.pi * y)
        bump = rng.uniform(0.2, 3.0) * (1.0 + np.cos(p[2] * np.pi * x) * np.cos(p[3] * np.pi * y))
        res = comparison_check(unit128, base, base + bump, CONTROLS)
        ok &= res.holds
        worst = min(worst, res.min_gap)
    criterion(4, bool(ok), f"5 ordered pairs, min(U2-U1)={worst:.3e} (slack 10h^2={10 * unit128.h**2:.1e})")


def test_positivity(unit128, criterion):
    x, y = unit128.nodes[:, 0], unit128.nodes[:, 1]
    sources = [
        np.maximum(0.0, np.sin(3 * np.pi * x)) * (1 + y),
        8.0 * (x > 0.7),
        np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2,
        np.zeros_like(x),
    ]
    inclusions = [Inclusion((0.5, 0.5), 0.1, 0.5), Inclusion((0.3, 0.6), 0.08, 0.2, "square")]
    mins = [solve_perturbed(unit128, ProblemSpec(f, inclusions), CONTROLS).solution.min() for f in sources]
    bound = -10.0 * unit128.h**2
    criterion(5, min(mins) >= bound, f"min u_eps over {len(sources)} sources = {min(mins):.3e} >= {bound:.1e}")


def test_monotonicity(unit32, criterion):
    rng = np.random.default_rng(6)
    spec = ProblemSpec(1.0, [Inclusion((0.5, 0.5), 0.15, 0.5)])
    gaps, same = [], []
    for i in range(100):
        scale = 10.0 ** rng.uniform(-2, 1)
        u = scale * rng.normal(size=unit32.n_nodes)
        v = scale * rng.normal(size=unit32.n_nodes)
        gaps.append(monotonicity_gap(unit32, spec, u, v))
        same.append(monotonicity_gap(unit32, spec, u, u))
    ok = min(gaps) > 0.0 and max(map(abs, same)) == 0.0
    criterion(6, ok, f"min gap over 100 distinct pairs {min(gaps):.3e}; identical pairs give {max(same)}")


def test_h1_and_l2_rates(unit256, criterion):
    study = rate_study(unit256, 8.0, Inclusion((0.5, 0.5), 0.08, 0.5), [0.08, 0.04, 0.02], CONTROLS)
    s = study.slopes
    ok = s["h1"] >= 0.4 and s["l2"] > s["h1"]
    criterion(7, ok, f"slope H1 {s['h1']:.3f} >= 0.4, slope L2 {s['l2']:.3f} > H1 (boundary {s['boundary']:.3f})")


def test_polarization_tensor(unit128, disk_tensor, criterion):
    oracle = 4.0 / 3.0
    disk_err = np.abs(disk_tensor.m - oracle * np.eye(2)).max() / oracle
    ok = disk_err <= 0.05 and disk_tensor.asymmetry <= 0.02
    worst_asym, window = disk_tensor.asymmetry, []
    for shape in ("disk", "square", "ellipse"):
        for k in (0.25, 0.5, 0.75):
            t = polarization(unit128, Inclusion((0.5, 0.5), 0.1, k, shape, (1.0, 0.6)))
            ok &= bool(t.within_bounds(0.05) and np.array_equal(t.m, t.m.T) and t.asymmetry <= 0.02)
            worst_asym = max(worst_asym, t.asymmetry)
            window.append(f"{shape[0]}{k}:[{t.eigenvalues[0]:.3f},{t.eigenvalues[1]:.3f}]")
    criterion(8, bool(ok), f"disk k=0.5 M11={disk_tensor.m[0, 0]:.4f} ({100 * disk_err:.2f}% from 4/3); "
                           f"raw asymmetry <= {worst_asym:.1e}; eigenvalues {' '.join(window)}")


def test_asymptotic_formula(unit256, criterion):
    U = solve_unperturbed(unit256, 8.0, CONTROLS).solution
    bn = unit256.boundary_nodes
    floor = 10.0 * CONTROLS.tol
    mismatch = []
    for eps in (0.06, 0.04, 0.03):
        inc = Inclusion((0.5, 0.5), eps, 0.5)
        u = solve_perturbed(unit256, ProblemSpec(8.0, [inc]), CONTROLS).solution
        pred = asymptotic_perturbation(unit256, U, [inc], [polarization(unit256, inc)])
        mismatch.append(relative_mismatch(pred, measured_perturbation(u, U, bn), floor))
    decreasing = all(b <= 1.05 * a for a, b in zip(mismatch, mismatch[1:]))
    criterion(9, mismatch[-1] <= 0.2 and decreasing,
              "mismatch at eps 0.06/0.04/0.03: " + " / ".join(f"{100 * m:.2f}%" for m in mismatch))


def test_localization(unit256, criterion):
    eps, center = 0.03, (0.4, 0.6)
    area = np.pi * eps**2
    gam = lambda lam: tuple(area * lam**3 * np.exp(lam * SQRT3 * c) for c in center)
    known = localize_center(*gam(1.0), 1.0, epsilon=eps, area_factor=np.pi)
    two = localize_center(*gam(1.0), 1.0, second=(2.0, *gam(2.0)), area_factor=np.pi)
    exact_err = max(np.abs(np.subtract(known.center, center)).max(),
                    np.abs(np.subtract(two.center, center)).max(), abs(two.epsilon_hat - eps))
    out = reconstruct(unit256, Inclusion(center, eps, 0.5), lambdas=(1.0, 2.0), mode="two-lambda", controls=CONTROLS)
    dc = np.abs(np.subtract(out["center"], center)).max()
    de = abs(out["epsilon_hat"] / eps - 1.0)
    ok = exact_err <= 1e-12 and dc <= 0.05 and de <= 0.2
    criterion(10, ok, f"manufactured error {exact_err:.1e}; end-to-end center ({out['center'][0]:.4f}, "
                      f"{out['center'][1]:.4f}) |d|<={dc:.4f}, eps_hat={out['epsilon_hat']:.5f} ({100 * de:.1f}%)")


def test_m11_recovery(unit256, disk_tensor, criterion):
    x = np.linspace(0.0, 1.0, 4001)
    bg = riccati_background(None, 0.5)
    res = np.abs(bg.riccati_residual(x)).max()
    du = max(abs(bg.dU(0.0)), abs(bg.dU(1.0)))
    gamma = 0.03**2 * ((1 - 0.5) * 1.2 * bg.dU(0.5) * bg.dW(0.5) + bg.U(0.5) ** 3 * bg.W(0.5))
    manuf = abs(recover_m11(gamma, 0.03, 0.5, 0.5, bg) - 1.2)
    out = reconstruct(unit256, Inclusion((0.4, 0.6), 0.03, 0.5), lambdas=(1.0, 2.0), controls=CONTROLS)
    ref = float(disk_tensor.m[0, 0])
    rel = abs(out["m11"] / ref - 1.0)
    ok = res <= 1e-10 and du <= 1e-8 and manuf <= 1e-12 and rel <= 0.2
    criterion(11, ok, f"riccati residual {res:.1e}, U'(0),U'(1) <= {du:.1e}, manufactured error {manuf:.1e}; "
                      f"end-to-end M11={out['m11']:.4f} vs {ref:.4f} ({100 * rel:.1f}%)")


def test_poincare(unit128, criterion):
    S0 = poincare_constant(unit128)
    dev = abs(S0 * np.pi - 1.0)
    values = []
    for eps in (0.1, 0.05, 0.025):
        outside = (~inclusion_mask(unit128, [Inclusion((0.5, 0.5), eps, 0.5)])).astype(float)
        weight = outside / np.dot(outside, unit128.element_areas)
        values.append(poincare_constant(unit128, element_weight=weight))
    spread = max(values) / min(values) - 1.0
    criterion(12, dev <= 0.02 and spread < 0.05,
              f"S*pi={S0 * np.pi:.5f}; S over eps 0.1/0.05/0.025 = "
              + "/".join(f"{v:.5f}" for v in values) + f" (spread {100 * spread:.3f}%)")


def test_determinism(tmp_path, criterion):
    cfg = {
        "mesh": {"nx": 64},
        "inclusions": [{"center": [0.4, 0.6], "epsilon": 0.06, "k": 0.5}],
        "experiments": {"noise": {"level": 1e-3, "seed": 42}},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    blobs = []
    for _ in range(2):
        assert cli.main(["reconstruct", "--config", str(path), "--out", str(out)]) == 0
        blobs.append((out / "reconstruction.json").read_bytes())
    criterion(13, blobs[0] == blobs[1], f"two runs, {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
