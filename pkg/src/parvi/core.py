"""Particle state, flat-vector views, seeded randomness, and work counters.

Particle positions are stored as an (N, d) float64 matrix.  Samplers operate
on the row-major flattened view of length N*d; ``flatten``/``unflatten``
round-trip bit-exactly because they only reshape.
"""

from dataclasses import dataclass

import numpy as np


class DivergenceError(RuntimeError):
    """A sampler produced a non-finite coordinate; message names the iteration."""


@dataclass
class ParticleSet:
    """N particles in d dimensions."""

    positions: np.ndarray  # (N, d)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2:
            raise ValueError("positions must be an (N, d) matrix")
        if self.n_particles < 1 or self.dim < 1:
            raise ValueError("need at least one particle and one dimension")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def flatten(p: ParticleSet) -> np.ndarray:
    """Row-major flat view of the particle positions, shape (N*d,)."""
    return p.positions.reshape(-1).copy()


def unflatten(z: np.ndarray, n_particles: int, dim: int) -> ParticleSet:
    """Inverse of :func:`flatten`; bit-exact round trip."""
    z = np.asarray(z, dtype=np.float64)
    if z.size != n_particles * dim:
        raise ValueError(
            f"flat vector of length {z.size} does not match {n_particles}x{dim}"
        )
    return ParticleSet(z.reshape(n_particles, dim).copy())


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) so streams are reproducible and
    insensitive to evaluation order."""
    return np.random.Generator(np.random.Philox(seed))


def gaussian_init(
    n: int,
    d: int,
    mean=0.0,
    cov_scale: float = 1.0,
    rng: np.random.Generator | None = None,
) -> ParticleSet:
    """Draw n i.i.d. particles from N(mean, cov_scale * I).

    Args:
        n: number of particles (>= 1).
        d: dimension (>= 1).
        mean: scalar or length-d vector.
        cov_scale: isotropic variance, must be positive.
        rng: generator; required for reproducibility (defaults to seed 0).
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not cov_scale > 0:
        raise ValueError(f"cov_scale must be positive, got {cov_scale}")
    if rng is None:
        rng = make_rng(0)
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (d,))
    pos = mean + np.sqrt(cov_scale) * rng.standard_normal((n, d))
    return ParticleSet(pos)


@dataclass
class EvalCounters:
    """Monotone work counters; the interaction count is the quantity the
    implicit-EQ scheme is designed to minimize."""

    interaction_grad_evals: int = 0
    potential_grad_evals: int = 0
    energy_evals: int = 0

    def snapshot(self) -> dict:
        return {
            "interaction_grad_evals": self.interaction_grad_evals,
            "potential_grad_evals": self.potential_grad_evals,
            "energy_evals": self.energy_evals,
        }


def check_finite(z: np.ndarray, iteration: int, what: str = "particle positions"):
    """Abort with a diagnostic naming the iteration on any NaN/Inf."""
    if not np.all(np.isfinite(z)):
        bad = int(np.flatnonzero(~np.isfinite(np.asarray(z).reshape(-1)))[0])
        raise DivergenceError(
            f"non-finite value in {what} at iteration {iteration} (flat index {bad})"
        )
