"""Command-line front end.

Usage::

    inclusionlab forward|rates|polarization|reconstruct --config run.json [--out DIR]

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 reconstruction failure.
Set ``INCLUSIONLAB_LOG`` (e.g. ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from inclusionlab import config as cfgmod
from inclusionlab.asymptotics import discrete_area, polarization, rate_study
from inclusionlab.exceptions import (
    ConvergenceError,
    IllConditionedError,
    InvalidDomainError,
    InvalidInputError,
    InvalidSpecError,
    NumericalError,
    ResolutionError,
    SingularOperatorError,
    UnlocatableError,
)
from inclusionlab.forward import ProblemSpec, solve_perturbed, solve_unperturbed
from inclusionlab.io import field_csv, write_atomic, write_json
from inclusionlab.pipeline import reconstruct

logger = logging.getLogger("inclusionlab")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_RECONSTRUCT = 0, 2, 3, 4


def cmd_forward(cfg: dict, out: Path) -> int:
    grid = cfgmod.build_grid(cfg)
    f = cfgmod.build_source(cfg, grid)
    inclusions = cfgmod.build_inclusions(cfg)
    controls = cfgmod.build_controls(cfg)
    report = {"config": cfg}
    base = solve_unperturbed(grid, f, controls)
    report["unperturbed"] = base.summary()
    write_atomic(out / "U.csv", field_csv(grid.nodes, base.solution))
    if inclusions:
        pert = solve_perturbed(grid, ProblemSpec(f, inclusions), controls)
        report["perturbed"] = pert.summary()
        w = pert.solution - base.solution
        bn = grid.boundary_nodes
        report["perturbed"]["w_boundary_max"] = float(np.abs(w[bn]).max())
        write_atomic(out / "u_eps.csv", field_csv(grid.nodes, pert.solution))
        write_atomic(out / "w_trace.csv", field_csv(grid.nodes[bn], w[bn]))
    write_json(out / "forward.json", report)
    return EXIT_OK


def cmd_rates(cfg: dict, out: Path) -> int:
    epsilons = cfg["study"]["epsilons"]
    if len(epsilons) < 3:
        raise cfgmod.ConfigError("config field 'study/epsilons': at least three values are needed for a fit")
    inclusions = cfgmod.build_inclusions(cfg)
    if not inclusions:
        raise cfgmod.ConfigError("config field 'inclusions': a template inclusion is required")
    grid = cfgmod.build_grid(cfg)
    study = rate_study(grid, cfgmod.build_source(cfg, grid), inclusions[0], epsilons, cfgmod.build_controls(cfg))
    write_atomic(out / "rates.csv", study.to_csv())
    for col in ("h1", "l2", "boundary"):
        write_atomic(out / f"rates_{col}.dat", study.loglog(col))
    write_json(out / "rates.json", {"config": cfg, **study.to_dict()})
    return EXIT_OK


def cmd_polarization(cfg: dict, out: Path) -> int:
    inclusions = cfgmod.build_inclusions(cfg)
    if not inclusions:
        raise cfgmod.ConfigError("config field 'inclusions': at least one inclusion is required")
    grid = cfgmod.build_grid(cfg)
    tensors = []
    for inc in inclusions:
        t = polarization(grid, inc).to_dict()
        t["inclusion"] = inc.to_dict()
        t["area"] = discrete_area(grid, inc)
        tensors.append(t)
    write_json(out / "polarization.json", {"config": cfg, "tensors": tensors})
    return EXIT_OK


def cmd_reconstruct(cfg: dict, out: Path) -> int:
    inclusions = cfgmod.build_inclusions(cfg)
    if len(inclusions) != 1:
        raise cfgmod.ConfigError("config field 'inclusions': reconstruction needs exactly one true inclusion")
    exp = cfg["experiments"]
    grid = cfgmod.build_grid(cfg)
    if grid.domain != (0.0, 1.0, 0.0, 1.0):
        raise cfgmod.ConfigError("config field 'domain': reconstruction runs on the unit square")
    try:
        result = reconstruct(
            grid,
            inclusions[0],
            lambdas=exp["lambdas"],
            mode=exp["mode"],
            synthesis=exp["synthesis"],
            controls=cfgmod.build_controls(cfg),
            noise_level=exp["noise"]["level"],
            seed=exp["noise"]["seed"],
            m11_truth=exp["m11_truth"],
        )
    except InvalidInputError as exc:
        raise cfgmod.ConfigError(f"config field 'experiments': {exc}") from None
    write_json(out / "reconstruction.json", {"config": cfg, **result})
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "rates": cmd_rates,
    "polarization": cmd_polarization,
    "reconstruct": cmd_reconstruct,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inclusionlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("INCLUSIONLAB_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        if args.out:
            cfg["output"]["dir"] = args.out
        return COMMANDS[args.command](cfg, Path(cfg["output"]["dir"]))
    except (InvalidSpecError, InvalidDomainError, ResolutionError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, SingularOperatorError, NumericalError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UnlocatableError, IllConditionedError) as exc:
        print(f"reconstruction failure: {exc}", file=sys.stderr)
        return EXIT_RECONSTRUCT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
