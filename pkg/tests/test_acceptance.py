"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured values (visible via ``pytest -rA`` or ``-s``).

The two 5000-sample Langevin reference sets are expensive (a few minutes
total); they are generated once per session into the directory named by
PARVI_CACHE_DIR (or a session tmp dir) and reused from there afterwards.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from parvi.cli import main
from parvi.core import EvalCounters, gaussian_init, make_rng
from parvi.energy import EnergyDecomposition, QuadratizedEnergy
from parvi.kernels import GaussianKernel, PolynomialKernel
from parvi.metrics import get_reference, mmd2
from parvi.optim import InnerSolverConfig
from parvi.samplers import SamplerConfig, aegd_step, run
from parvi.targets import (
    DoubleBanana,
    LogisticRegressionTarget,
    ZeroPotential,
    eight_mixture,
    gaussian_target,
    star_mixture,
)
from parvi.datasets import synthetic_separable, train_test_split

from oracles import finite_diff_grad, mmd2_brute


@pytest.fixture(scope="session")
def reference_cache(tmp_path_factory):
    env = os.environ.get("PARVI_CACHE_DIR")
    return Path(env) if env else tmp_path_factory.mktemp("reference_cache")


@pytest.fixture(scope="session")
def banana_reference(reference_cache):
    return get_reference(DoubleBanana(), "double_banana", None, reference_cache)


@pytest.fixture(scope="session")
def star_reference(reference_cache):
    return get_reference(star_mixture(), "star_mixture", None, reference_cache)


def report(criterion: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# -- 1: gradient correctness -------------------------------------------------

def blr_toy(p, seed):
    rng = make_rng(seed)
    feats = rng.standard_normal((12, p))
    w = rng.standard_normal(p)
    labels = np.where(feats @ w > 0, 1.0, -1.0)
    return LogisticRegressionTarget(feats, labels)


def test_criterion_1_gradient_correctness():
    t0 = time.time()
    checked = 0
    worst = 0.0
    for seed in range(6):
        for n in (2, 5, 10):
            for d in (1, 2, 3):
                targets = [blr_toy(d, seed)]
                if d == 2:
                    targets += [DoubleBanana(), star_mixture(), eight_mixture()]
                for target in targets:
                    energy = EnergyDecomposition(GaussianKernel(0.1, d), target)
                    rng = make_rng(1000 * seed + 10 * n + d)
                    x = rng.standard_normal((n, d))
                    grad = (
                        energy.interaction_grad(x) + energy.potential_grad(x)
                    ).reshape(n, d)
                    probe = EnergyDecomposition(GaussianKernel(0.1, d), target)
                    fd = finite_diff_grad(lambda p_: probe.total(p_), x)
                    rel = np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8))
                    worst = max(worst, rel)
                    assert rel <= 1e-5, (type(target).__name__, n, d, seed, rel)
                    checked += 1
    elapsed = time.time() - t0
    report(
        1,
        checked >= 100 and worst <= 1e-5 and elapsed < 10.0,
        f"{checked} configurations, worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


# -- 2: AEGD per-step stability ----------------------------------------------

def test_criterion_2_aegd_stability():
    t0 = time.time()
    worst = -np.inf
    cases = (
        (DoubleBanana(), 0.001),
        (star_mixture(), 0.01),
        (eight_mixture(), 0.1),
    )
    for target, tau in cases:
        n = 100
        counters = EvalCounters()
        energy = EnergyDecomposition(GaussianKernel(0.1, 2), target, counters)
        quad = QuadratizedEnergy(energy, 5.0, include_potential=True)
        s = math.sqrt(n)

        def qvg(z):
            q, gq = quad.value_and_grad(z.reshape(n, 2))
            return s * q, s * gq

        z = gaussian_init(n, 2, rng=make_rng(0)).positions.reshape(-1)
        r = qvg(z)[0]
        for _ in range(500):
            z1, r1 = aegd_step(z, r, tau, qvg)
            gap = r1 * r1 - r * r + float(np.dot(z1 - z, z1 - z)) / tau
            worst = max(worst, gap)
            assert gap <= 1e-10
            z, r = z1, r1
    elapsed = time.time() - t0
    report(2, worst <= 1e-10 and elapsed < 30.0,
           f"3 targets x 500 steps, worst gap {worst:.2e}, {elapsed:.1f}s")


# -- 3: ImEQ modified-energy stability ---------------------------------------

def test_criterion_3_imeq_modified_energy():
    t0 = time.time()
    worst = -np.inf
    for tau in (0.1, 0.01):
        cfg = SamplerConfig(
            scheme="imeq", tau_or_lr=tau, n_outer=200, shift_c=5.0,
            bandwidth_h=0.1, steady_state_tol=None, seed=0,
            inner=InnerSolverConfig(max_iters=400, grad_tol=1e-10),
        )
        init = gaussian_init(50, 2, mean=(3.0, -2.0), rng=make_rng(3))
        trace, _ = run(cfg, gaussian_target(2), init)
        inc = np.diff(trace.column("modified_energy")).max()
        worst = max(worst, inc)
        assert inc <= 1e-9, (tau, inc)
    elapsed = time.time() - t0
    report(3, worst <= 1e-9 and elapsed < 60.0,
           f"tau in (0.1, 0.01), 200 steps, worst increase {worst:.2e}, {elapsed:.1f}s")


# -- 4: AEGD-reduction equivalence -------------------------------------------

def test_criterion_4_reduction_equivalence():
    t0 = time.time()
    target = ZeroPotential(2)
    init = gaussian_init(20, 2, rng=make_rng(7))
    common = dict(tau_or_lr=0.01, n_outer=50, shift_c=5.0,
                  bandwidth_h=0.1, steady_state_tol=None, seed=0)
    ti, fi = run(SamplerConfig(scheme="imeq", **common), target, init)
    ta, fa = run(SamplerConfig(scheme="aegd", **common), target, init)
    pos_gap = float(np.abs(fi.positions - fa.positions).max())
    aux_gap = float(
        np.abs(ti.column("aux_scalar") - ta.column("aux_scalar")).max()
    )
    elapsed = time.time() - t0
    report(4, pos_gap <= 1e-10 and aux_gap <= 1e-10 and elapsed < 5.0,
           f"50 steps, N=20: position gap {pos_gap:.2e}, aux gap {aux_gap:.2e}, "
           f"{elapsed:.1f}s")


# -- 5: interaction-count claim ----------------------------------------------

def test_criterion_5_interaction_counts():
    t0 = time.time()
    target = DoubleBanana()
    init = gaussian_init(100, 2, rng=make_rng(1))
    common = dict(tau_or_lr=0.01, n_outer=100, shift_c=5.0,
                  bandwidth_h=0.1, steady_state_tol=None, seed=0,
                  inner=InnerSolverConfig(max_iters=20, grad_tol=1e-8))
    c_imeq = EvalCounters()
    run(SamplerConfig(scheme="imeq", **common), target, init, counters=c_imeq)
    c_evi = EvalCounters()
    run(SamplerConfig(scheme="evi_im", **common), target, init, counters=c_evi)
    elapsed = time.time() - t0
    ok = c_imeq.interaction_grad_evals <= 101 and c_evi.interaction_grad_evals >= 300
    report(5, ok and elapsed < 60.0,
           f"100 outer steps, K=20: imeq {c_imeq.interaction_grad_evals} <= 101, "
           f"evi_im {c_evi.interaction_grad_evals} >= 300, {elapsed:.1f}s")


# -- 6: double-banana reproduction at desk scale -------------------------------

def criterion_6_config():
    return SamplerConfig(
        scheme="imeq", tau_or_lr=0.01, n_outer=500, shift_c=5.0,
        bandwidth_h=0.1, steady_state_tol=1e-5, seed=0,
        inner=InnerSolverConfig(max_iters=20, grad_tol=1e-8),
    )


def test_criterion_6_table1_desk_scale(banana_reference):
    t0 = time.time()
    target = DoubleBanana()
    init = gaussian_init(500, 2, rng=make_rng(0))
    trace, final = run(
        criterion_6_config(), target, init,
        mmd_fn=lambda x: mmd2(x, banana_reference.samples), mmd_cadence=50,
    )
    final_mmd = trace.last["mmd2"]
    f = trace.column("free_energy")
    max_inc = float(np.diff(f)[10:].max())
    elapsed = time.time() - t0
    ok = final_mmd <= 0.05 and max_inc <= 1e-6 and elapsed < 300.0
    report(6, ok,
           f"N=500, h=0.1, tau=0.01, C=5: {len(trace) - 1} iterations, "
           f"final mmd2 {final_mmd:.4f} <= 0.05, max energy increase after "
           f"iteration 10 {max_inc:.2e} <= 1e-6, {elapsed:.0f}s")


# -- 7: far-initialization robustness ----------------------------------------

def test_criterion_7_far_initialization(star_reference):
    t0 = time.time()
    target = star_mixture()

    def star_run(mean):
        cfg = SamplerConfig(
            scheme="imeq", tau_or_lr=0.01, n_outer=500, shift_c=5.0,
            bandwidth_h=0.02, steady_state_tol=1e-5, seed=0,
        )
        init = gaussian_init(500, 2, mean=mean, cov_scale=1.0, rng=make_rng(1))
        trace, final = run(cfg, target, init)
        return trace.column("free_energy")[-1], mmd2(
            final.positions, star_reference.samples
        )

    f_near, mmd_near = star_run((0.0, 0.0))
    f_far, mmd_far = star_run((5.0, 5.0))
    gap = abs(f_far - f_near)
    elapsed = time.time() - t0
    ok = gap <= 0.1 and mmd_far <= 0.1 and elapsed < 300.0
    report(7, ok,
           f"N=500, 500 iterations from N((5,5), I): energy gap {gap:.4f} <= 0.1, "
           f"far mmd2 {mmd_far:.4f} <= 0.1 (near {mmd_near:.4f}), {elapsed:.0f}s")


# -- 8: MMD oracle equivalence -------------------------------------------------

def test_criterion_8_mmd_oracle():
    t0 = time.time()
    kernel = PolynomialKernel()
    rng = make_rng(8)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 51))
        m = int(rng.integers(1, 51))
        d = int(rng.integers(1, 4))
        x = rng.standard_normal((n, d))
        y = rng.standard_normal((m, d))
        gap = abs(mmd2(x, y, kernel) - mmd2_brute(x, y, kernel))
        worst = max(worst, gap)
        assert gap <= 1e-12
    elapsed = time.time() - t0
    report(8, worst <= 1e-12 and elapsed < 5.0,
           f"50 random pairs (N,M <= 50): worst |difference| {worst:.2e}, "
           f"{elapsed:.1f}s")


# -- 9: BLR desk scale ---------------------------------------------------------

def test_criterion_9_blr_desk_scale():
    t0 = time.time()
    ds = synthetic_separable(n=1000, p=5, margin=1.0, seed=0)
    train, test = train_test_split(ds, 0.8, make_rng(5))
    target = LogisticRegressionTarget(train.features, train.labels, prior_alpha=1.0)

    def metrics(omegas, feats, labs):
        proba = np.clip(target.predict_proba(omegas, feats), 1e-12, 1 - 1e-12)
        ll = float(np.mean(np.where(labs > 0, np.log(proba), np.log1p(-proba))))
        acc = float(np.mean(np.where(proba > 0.5, 1.0, -1.0) == labs))
        return ll, acc

    results = {}
    for scheme in ("imeq", "evi_im"):
        cfg = SamplerConfig(
            scheme=scheme, tau_or_lr=0.1, n_outer=100, shift_c=5.0,
            bandwidth_h=0.1, inner_solver="adagrad",
            inner=InnerSolverConfig(max_iters=20, lr=0.1),
            steady_state_tol=None, seed=0,
        )
        init = gaussian_init(100, target.dim, cov_scale=1.0, rng=make_rng(11))
        _, final = run(cfg, target, init)
        train_ll, _ = metrics(final.positions, train.features, train.labels)
        _, test_acc = metrics(final.positions, test.features, test.labels)
        results[scheme] = (train_ll, test_acc)
    imeq_ll, imeq_acc = results["imeq"]
    evi_ll, _ = results["evi_im"]
    rel_gap = abs(imeq_ll - evi_ll) / abs(evi_ll)
    elapsed = time.time() - t0
    ok = imeq_acc >= 0.9 and rel_gap <= 0.02 and elapsed < 120.0
    report(9, ok,
           f"synthetic separable (1000 x 5), N=100 particles, 100 steps: "
           f"imeq test accuracy {imeq_acc:.4f} >= 0.9, train-ll gap "
           f"{rel_gap:.4%} <= 2%, {elapsed:.0f}s")


# -- 10: determinism -----------------------------------------------------------

def strip_wall_ms(text: str) -> str:
    return "\n".join(
        ",".join(line.split(",")[:-1]) for line in text.strip().split("\n")
    )


def test_criterion_10_determinism(tmp_path):
    cfg = {
        "target": {"name": "double_banana"},
        "sampler": {"scheme": "imeq", "tau_or_lr": 0.01, "n_outer": 500,
                    "shift_c": 5.0, "bandwidth_h": 0.1,
                    "steady_state_tol": 1e-5,
                    "inner": {"max_iters": 20, "grad_tol": 1e-8}},
        "init": {"n_particles": 500, "mean": [0.0, 0.0], "cov_scale": 1.0},
        "metrics": {},
        "seed": 0,
    }
    cfg_path = tmp_path / "criterion6.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        code = main(["sample", "--config", str(cfg_path), "--out", str(out),
                     "--no-figures"])
        assert code == 0
        outs.append(strip_wall_ms((out / "trace.csv").read_text()))
    identical = outs[0] == outs[1]
    report(10, identical,
           "two executions of the criterion-6 config produced byte-identical "
           "trace.csv (wall_ms column excluded)")
