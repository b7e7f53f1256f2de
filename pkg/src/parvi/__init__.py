"""parvi: particle-based variational inference via partial energy
quadratization, with the baselines it is measured against."""

from .core import EvalCounters, ParticleSet, flatten, gaussian_init, make_rng, unflatten
from .energy import EnergyDecomposition, QuadratizedEnergy
from .kernels import GaussianKernel, PolynomialKernel
from .metrics import ReferenceSamples, mmd2, steady_state, trace_summary
from .optim import InnerSolverConfig, Objective, adagrad_descent, bb_descent
from .samplers import RunTrace, SamplerConfig, SchemeState, run
from .targets import (
    DoubleBanana,
    GaussianMixture,
    LogisticRegressionTarget,
    TargetDensity,
    ZeroPotential,
    eight_mixture,
    gaussian_target,
    star_mixture,
)

__version__ = "0.1.0"

__all__ = [
    "DoubleBanana",
    "EnergyDecomposition",
    "EvalCounters",
    "GaussianKernel",
    "GaussianMixture",
    "InnerSolverConfig",
    "LogisticRegressionTarget",
    "Objective",
    "ParticleSet",
    "PolynomialKernel",
    "QuadratizedEnergy",
    "ReferenceSamples",
    "RunTrace",
    "SamplerConfig",
    "SchemeState",
    "TargetDensity",
    "ZeroPotential",
    "adagrad_descent",
    "bb_descent",
    "eight_mixture",
    "flatten",
    "gaussian_init",
    "gaussian_target",
    "make_rng",
    "mmd2",
    "run",
    "star_mixture",
    "steady_state",
    "trace_summary",
    "unflatten",
]
