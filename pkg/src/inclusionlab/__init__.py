"""Semilinear Neumann problems with small low-conductivity inclusions.

Forward solves, polarization tensors, the small-inclusion boundary formula
and reconstruction of an inclusion from averaged boundary measurements.
"""

from inclusionlab.asymptotics import (
    PolarizationTensor,
    RateStudy,
    asymptotic_perturbation,
    discrete_area,
    measured_perturbation,
    polarization,
    rate_study,
)
from inclusionlab.forward import (
    Inclusion,
    ProblemSpec,
    SolveReport,
    SolverControls,
    comparison_check,
    energy,
    h1_norm,
    l2_norm,
    monotonicity_gap,
    poincare_constant,
    solve_perturbed,
    solve_unperturbed,
)
from inclusionlab.greens import NeumannOperator, corrector_V, corrector_v_eps, neumann_function
from inclusionlab.inverse import (
    MeasurementSet,
    RiccatiBackground,
    average_measurement,
    exponential_test,
    localize_center,
    recover_m11,
    riccati_background,
)
from inclusionlab.mesh import (
    Grid,
    assemble_load,
    assemble_stiffness,
    assemble_weighted_mass,
    boundary_functional,
    build_rectangle_mesh,
)

__version__ = "0.1.0"
