"""Outer-loop particle evolution schemes.

All schemes discretize the same particle flow: the velocity of particle i is
minus the per-particle force, i.e. N times the gradient of the free energy
(whose own gradient carries a 1/N prefactor).  Concretely the flat state z
follows dz/dt = -grad(N * F(z)), and every scheme below is a plain Euclidean
discretization of that flow with step size tau:

* ``evi_step``  - implicit Euler, solved as a proximal problem
                  min |z - z_n|^2 / (2 tau) + N F(z) per step.
* ``imeq_step`` - semi-implicit scheme that quadratizes only the interaction
                  part: with q(z) = sqrt(N (interaction + C)) and auxiliary
                  scalar r tracking q, each step solves

                      min_z |z - z_n|^2_B / (2 tau) + N H(z)
                            + 2 r_n gq . (z - z_n),
                      |v|^2_B = |v|^2 + 2 tau (gq . v)^2,

                  with gq = grad q(z_n) evaluated once, then updates
                  r_{n+1} = r_n + gq . (z_{n+1} - z_n).  The rank-one matrix
                  B is never materialized.  The one gq evaluation is the only
                  O(N^2) interaction pass of the step.
* ``aegd_step`` - fully explicit quadratization of the entire energy:
                  r_{n+1} = r_n / (1 + 2 tau |gq|^2),
                  z_{n+1} = z_n - 2 tau r_{n+1} gq.
* ``blob_step`` - AdaGrad on the full free-energy gradient.
* ``svgd_step`` - kernelized Stein transport (RBF, median heuristic),
                  AdaGrad-smoothed.
* ``lmc_step``  - unadjusted Langevin: x -= eps grad V(x) - sqrt(2 eps) xi.

Keeping the auxiliary scalar in the N-scaled units makes the stability
relations exact with the configured tau:  AEGD satisfies, per step and
algebraically,

    r_{n+1}^2 - r_n^2 + (1/tau) |z_{n+1} - z_n|^2 = -(r_{n+1} - r_n)^2 <= 0,

and the partially-quadratized scheme is non-increasing in the modified
energy r^2 + N H(z) whenever H is convex and the inner problem is solved.
With H == 0 the semi-implicit step has the closed form of the explicit
scheme, which the implementation uses as a fast path.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DivergenceError,
    EvalCounters,
    ParticleSet,
    check_finite,
    make_rng,
)
from .energy import EnergyDecomposition, QuadratizedEnergy
from .kernels import GaussianKernel
from .optim import InnerSolverConfig, Objective, adagrad_descent, bb_descent
from .targets import TargetDensity

SCHEMES = ("imeq", "evi_im", "aegd", "blob", "svgd", "lmc")


@dataclass
class SamplerConfig:
    scheme: str
    tau_or_lr: float
    n_outer: int
    shift_c: float = 5.0
    bandwidth_h: float = 0.1
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    inner_solver: str = "bb"            # "bb" (toys) or "adagrad" (BLR)
    steady_state_tol: float | None = 1e-5
    seed: int = 0
    minibatch_size: int | None = None   # None = full batch

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.tau_or_lr > 0:
            raise ValueError("tau_or_lr must be positive")
        if self.n_outer < 0:
            raise ValueError("n_outer must be >= 0")
        if self.inner_solver not in ("bb", "adagrad"):
            raise ValueError("inner_solver must be 'bb' or 'adagrad'")


# ---------------------------------------------------------------------------
# generic flat-vector steps (used directly by the unit tests)
# ---------------------------------------------------------------------------

def imeq_step(
    z: np.ndarray,
    r: float,
    tau: float,
    q_value_grad,
    h_value=None,
    h_grad=None,
    inner_cfg: InnerSolverConfig | None = None,
    solver: str = "bb",
):
    """One semi-implicit partial-quadratization step on a flat state.

    q_value_grad(z) -> (q, grad q) is evaluated exactly once, at z.  When
    h_value/h_grad are None the potential part is identically zero and the
    closed-form rank-one solve is used; otherwise the inner problem is
    minimized iteratively, warm-started from z.
    """
    _, gq = q_value_grad(z)
    if h_value is None:
        denom = 1.0 + 2.0 * tau * float(np.dot(gq, gq))
        z_new = z - (2.0 * tau * r / denom) * gq
    else:
        if inner_cfg is None:
            inner_cfg = InnerSolverConfig()

        def value(w):
            d = w - z
            gd = float(np.dot(gq, d))
            return float(np.dot(d, d)) / (2.0 * tau) + gd * gd + h_value(w) \
                + 2.0 * r * gd

        def grad(w):
            d = w - z
            gd = float(np.dot(gq, d))
            return d / tau + 2.0 * gd * gq + h_grad(w) + 2.0 * r * gq

        solve = bb_descent if solver == "bb" else adagrad_descent
        z_new = solve(Objective(value, grad), z, inner_cfg)
    r_new = r + float(np.dot(gq, z_new - z))
    return z_new, r_new


def aegd_step(z: np.ndarray, r: float, tau: float, q_value_grad):
    """One explicit energy-quadratization step; q is over the full energy."""
    _, gq = q_value_grad(z)
    r_new = r / (1.0 + 2.0 * tau * float(np.dot(gq, gq)))
    z_new = z - 2.0 * tau * r_new * gq
    return z_new, r_new


def evi_step(
    z: np.ndarray,
    tau: float,
    f_value,
    f_grad,
    inner_cfg: InnerSolverConfig,
    solver: str = "bb",
) -> np.ndarray:
    """One implicit-Euler (proximal) step: argmin |w-z|^2/(2 tau) + F(w)."""

    def value(w):
        d = w - z
        return float(np.dot(d, d)) / (2.0 * tau) + f_value(w)

    def grad(w):
        return (w - z) / tau + f_grad(w)

    solve = bb_descent if solver == "bb" else adagrad_descent
    return solve(Objective(value, grad), z, inner_cfg)


def adagrad_update(z: np.ndarray, grad: np.ndarray, acc: np.ndarray, lr: float):
    """Shared AdaGrad rule for the blob and SVGD baselines."""
    acc = acc + grad * grad
    return z - lr * grad / (np.sqrt(acc) + 1e-8), acc


def svgd_direction(x: np.ndarray, score: np.ndarray) -> np.ndarray:
    """Stein transport direction with RBF kernel and median-heuristic
    bandwidth: phi_i = (1/N) sum_j [ k(x_j, x_i) score_j + grad_{x_j} k ]."""
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    if n > 1:
        med = float(np.median(sq))
        bw = med / math.log(n + 1.0) if med > 0 else 1.0
    else:
        bw = 1.0
    kmat = np.exp(-sq / bw)
    # sum_j grad_{x_j} k(x_j, x_i) = (2/bw) sum_j (x_i - x_j) k_ij
    repulsion = 2.0 * np.einsum("ij,ijd->id", kmat, diff) / bw
    return (kmat.T @ score + repulsion) / n


def lmc_step(
    x: np.ndarray, eps: float, target: TargetDensity, rng: np.random.Generator
) -> np.ndarray:
    """One unadjusted Langevin step on every row of x."""
    noise = rng.standard_normal(x.shape)
    if eps == 0.0:
        return x.copy()
    return x - eps * target.grad_potential(x) + math.sqrt(2.0 * eps) * noise


def lmc_reference(
    target: TargetDensity,
    m: int,
    eps: float = 1e-3,
    n_steps: int = 100_000,
    seed: int = 1234,
    init_mean=0.0,
    init_scale: float = 1.0,
) -> np.ndarray:
    """Reference sample set: m parallel Langevin chains, final states after
    n_steps of burn-in."""
    if m < 1:
        raise ValueError("need at least one reference sample")
    rng = make_rng(seed)
    mean = np.broadcast_to(np.asarray(init_mean, dtype=np.float64), (target.dim,))
    x = mean + math.sqrt(init_scale) * rng.standard_normal((m, target.dim))
    for it in range(n_steps):
        x = lmc_step(x, eps, target, rng)
        if it % 1000 == 0:
            check_finite(x, it, "reference chains")
    check_finite(x, n_steps, "reference chains")
    return x


# ---------------------------------------------------------------------------
# particle-level state and trace
# ---------------------------------------------------------------------------

@dataclass
class SchemeState:
    z: np.ndarray                       # flat positions, length N*d
    n_particles: int
    dim: int
    r: float | None = None              # EQ auxiliary scalar (N-scaled units)
    adagrad_acc: np.ndarray | None = None
    iteration: int = 0

    @property
    def positions(self) -> np.ndarray:
        return self.z.reshape(self.n_particles, self.dim)

    def particle_set(self) -> ParticleSet:
        return ParticleSet(self.positions.copy())


class RunTrace:
    """Per-iteration record of energies, auxiliary scalar, metric values and
    cumulative work counters."""

    FIELDS = (
        "iteration",
        "free_energy",
        "interaction_energy",
        "potential_energy",
        "aux_scalar",
        "modified_energy",
        "aux_drift",
        "mmd2",
        "interaction_grad_evals",
        "potential_grad_evals",
        "energy_evals",
        "wall_ms",
    )

    def __init__(self):
        self.records: list[dict] = []

    def append(self, **kwargs):
        rec = {k: kwargs.get(k) for k in self.FIELDS}
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        vals = [r[name] for r in self.records]
        return np.array(
            [np.nan if v is None else float(v) for v in vals], dtype=np.float64
        )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> dict:
        return self.records[-1]


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------

def _scaled_quadratized(qe: QuadratizedEnergy, n: int):
    """Closure returning the N-scaled (q, grad q) used by the schemes."""
    s = math.sqrt(n)

    def q_value_grad(z):
        q, gq = qe.value_and_grad(z.reshape(n, -1))
        return s * q, s * gq

    return q_value_grad


def run(
    cfg: SamplerConfig,
    target: TargetDensity,
    init: ParticleSet,
    counters: EvalCounters | None = None,
    mmd_fn=None,
    mmd_cadence: int = 10,
) -> tuple[RunTrace, ParticleSet]:
    """Run cfg.n_outer steps (or until steady state) of the chosen scheme.

    mmd_fn, when given, maps an (N, d) position matrix to a scalar and is
    evaluated at iteration 0, every mmd_cadence iterations, and at the final
    iteration.  Identical (cfg, target, init) produce identical traces.
    """
    counters = counters if counters is not None else EvalCounters()
    rng = make_rng(cfg.seed)
    n, d = init.n_particles, init.dim
    kernel = GaussianKernel(cfg.bandwidth_h, d)
    full_energy = EnergyDecomposition(kernel, target, counters)
    sqrt_n = math.sqrt(n)

    state = SchemeState(z=init.positions.reshape(-1).copy(), n_particles=n, dim=d)
    if cfg.scheme in ("blob", "svgd"):
        state.adagrad_acc = np.zeros_like(state.z)

    quad_interaction = QuadratizedEnergy(full_energy, cfg.shift_c, include_potential=False)
    quad_full = QuadratizedEnergy(full_energy, cfg.shift_c, include_potential=True)
    if cfg.scheme == "imeq":
        state.r = sqrt_n * quad_interaction.value(state.positions)
    elif cfg.scheme == "aegd":
        state.r = sqrt_n * quad_full.value(state.positions)

    def step_target() -> TargetDensity:
        if cfg.minibatch_size is None or not target.supports_minibatch:
            return target
        idx = rng.integers(0, target.n_data, size=cfg.minibatch_size)
        return target.minibatch_view(idx)

    trace = RunTrace()
    t0 = time.perf_counter()

    def record(it: int):
        g_val, h_val = full_energy.parts(state.positions)
        f_val = g_val + h_val
        aux = state.r
        modified = drift = None
        if cfg.scheme == "imeq" and aux is not None:
            modified = aux * aux + n * h_val
            shifted = n * (g_val + cfg.shift_c)
            drift = abs(aux - math.sqrt(shifted)) if shifted > 0 else None
        elif cfg.scheme == "aegd" and aux is not None:
            modified = aux * aux
            shifted = n * (f_val + cfg.shift_c)
            drift = abs(aux - math.sqrt(shifted)) if shifted > 0 else None
        mmd_val = None
        if mmd_fn is not None and (
            it % max(mmd_cadence, 1) == 0 or it == cfg.n_outer
        ):
            mmd_val = float(mmd_fn(state.positions))
        trace.append(
            iteration=it,
            free_energy=f_val,
            interaction_energy=g_val,
            potential_energy=h_val,
            aux_scalar=aux,
            modified_energy=modified,
            aux_drift=drift,
            mmd2=mmd_val,
            interaction_grad_evals=counters.interaction_grad_evals,
            potential_grad_evals=counters.potential_grad_evals,
            energy_evals=counters.energy_evals,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        )

    record(0)
    for it in range(1, cfg.n_outer + 1):
        try:
            _advance(state, cfg, full_energy, quad_interaction, quad_full,
                     target, step_target, rng, counters)
            check_finite(state.z, it)
            state.iteration = it
            record(it)
        except FloatingPointError as exc:
            raise DivergenceError(f"iteration {it}: {exc}") from exc
        if cfg.steady_state_tol is not None and cfg.steady_state_tol > 0:
            f_prev = trace.records[-2]["free_energy"]
            f_now = trace.records[-1]["free_energy"]
            if abs(f_now - f_prev) < cfg.steady_state_tol:
                break

    if mmd_fn is not None and trace.last["mmd2"] is None:
        trace.last["mmd2"] = float(mmd_fn(state.positions))
    return trace, state.particle_set()


def _advance(
    state: SchemeState,
    cfg: SamplerConfig,
    full_energy: EnergyDecomposition,
    quad_interaction: QuadratizedEnergy,
    quad_full: QuadratizedEnergy,
    target: TargetDensity,
    step_target,
    rng: np.random.Generator,
    counters: EvalCounters,
):
    n, d = state.n_particles, state.dim
    tau = cfg.tau_or_lr
    # the proximal term fixes the inner problem's curvature at 1/tau, so tau
    # is the right first BB step; the configured lr would hop basins on
    # non-convex potentials and stall the outer scheme at the warm start
    inner_cfg = cfg.inner
    if inner_cfg.bb_fallback_step is None:
        inner_cfg = replace(inner_cfg, bb_fallback_step=tau)
    tgt = step_target()
    # per-step decomposition shares the counters; for full-batch runs it is
    # equivalent to full_energy
    if tgt is target:
        energy = full_energy
        q_int, q_full = quad_interaction, quad_full
    else:
        energy = EnergyDecomposition(full_energy.kernel, tgt, counters)
        q_int = QuadratizedEnergy(energy, cfg.shift_c, include_potential=False)
        q_full = QuadratizedEnergy(energy, cfg.shift_c, include_potential=True)

    if cfg.scheme == "imeq":
        if tgt.is_zero_potential:
            state.z, state.r = imeq_step(
                state.z, state.r, tau, _scaled_quadratized(q_int, n)
            )
        else:
            def h_value(w):
                return n * energy.potential(w.reshape(n, d))

            def h_grad(w):
                return n * energy.potential_grad(w.reshape(n, d))

            state.z, state.r = imeq_step(
                state.z, state.r, tau, _scaled_quadratized(q_int, n),
                h_value, h_grad, inner_cfg, cfg.inner_solver,
            )
    elif cfg.scheme == "aegd":
        state.z, state.r = aegd_step(
            state.z, state.r, tau, _scaled_quadratized(q_full, n)
        )
    elif cfg.scheme == "evi_im":
        def f_value(w):
            return n * energy.total(w.reshape(n, d))

        def f_grad(w):
            x = w.reshape(n, d)
            return n * (energy.interaction_grad(x) + energy.potential_grad(x))

        state.z = evi_step(state.z, tau, f_value, f_grad, inner_cfg, cfg.inner_solver)
    elif cfg.scheme == "blob":
        x = state.positions
        g = n * (energy.interaction_grad(x) + energy.potential_grad(x))
        state.z, state.adagrad_acc = adagrad_update(
            state.z, g, state.adagrad_acc, tau
        )
    elif cfg.scheme == "svgd":
        x = state.positions
        counters.potential_grad_evals += 1
        score = -tgt.grad_potential(x)
        phi = svgd_direction(x, score)
        # ascent direction; AdaGrad on -phi
        state.z, state.adagrad_acc = adagrad_update(
            state.z, -phi.reshape(-1), state.adagrad_acc, tau
        )
    elif cfg.scheme == "lmc":
        counters.potential_grad_evals += 1
        x = lmc_step(state.positions, tau, tgt, rng)
        state.z = x.reshape(-1)
    else:  # pragma: no cover
        raise ValueError(cfg.scheme)
