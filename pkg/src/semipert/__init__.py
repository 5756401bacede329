"""Numerical toolkit for boundary perturbations of (analytic) semigroup generators.

Modules
-------
spaces, core
    Discrete Banach spaces, operator norms and dense generators.
scales
    Graph and extrapolation norms, fractional powers, Favard norms, rotations.
admissibility, young
    Input-output maps, admissibility estimates, feedback checks and the
    convolution harness.
perturb
    Analytic perturbation certificates and perturbed generators.
boundary
    Dirichlet operators and boundary-perturbed generators.
wentzell, rde, library
    The degenerate Wentzell diffusion, the delayed reaction-diffusion
    example and reference heat-equation triples.
runner, cli
    Configuration-driven experiments, reports and the ``semipert`` command.
"""
from .errors import (
    AssemblyError,
    ConfigError,
    DimensionError,
    DomainError,
    NumericError,
    PreconditionError,
    SemipertError,
    SpectralProximityError,
    SurjectivityError,
)
from .spaces import BochnerSpace, DiscreteSpace, NormBracket, norm, operator_norm
from .core import (
    GeneratorRep,
    OperatorBlock,
    SectorCertificate,
    certify_sector,
    growth_bound,
    resolvent,
    semigroup_apply,
)
from .kernels import BACKEND
from .boundary import BoundarySystem, assemble_G, block_encoding, dirichlet_solve
from .wentzell import WentzellProblem, canonical_problem, solve_de, wentzell_build
from .rde import DelayMeasure, RDEProblem, rde_build, solve_rde
from .runner import ExperimentConfig, compare_reports, run

__version__ = "0.1.0"
