import numpy as np
import pytest

from parvi.core import (
    DivergenceError,
    EvalCounters,
    ParticleSet,
    check_finite,
    flatten,
    gaussian_init,
    make_rng,
    unflatten,
)


def test_flatten_single_row():
    p = ParticleSet(np.array([[3.0, 4.0]]))
    assert flatten(p).tolist() == [3.0, 4.0]


def test_flatten_row_major():
    p = ParticleSet(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert flatten(p).tolist() == [1.0, 2.0, 3.0, 4.0]


def test_flatten_round_trip_bitexact():
    rng = make_rng(7)
    p = ParticleSet(rng.standard_normal((7, 3)))
    q = unflatten(flatten(p), 7, 3)
    assert np.array_equal(p.positions, q.positions)
    # and the reverse direction
    z = rng.standard_normal(12)
    assert np.array_equal(flatten(unflatten(z, 4, 3)), z)


def test_unflatten_size_mismatch():
    with pytest.raises(ValueError):
        unflatten(np.zeros(5), 2, 3)


def test_gaussian_init_clt_bound():
    # deterministic given Philox seeds; 3/sqrt(n) per-coordinate CLT bound
    n = 500
    for seed in (0, 1, 2, 3, 4):
        p = gaussian_init(n, 2, mean=(0.0, 0.0), cov_scale=1.0, rng=make_rng(seed))
        assert np.all(np.abs(p.positions.mean(axis=0)) < 3.0 / np.sqrt(n))


def test_gaussian_init_far_mean():
    p = gaussian_init(500, 2, mean=(5.0, 5.0), cov_scale=1.0, rng=make_rng(11))
    assert np.all(np.abs(p.positions.mean(axis=0) - 5.0) < 3.0 / np.sqrt(500))


def test_gaussian_init_rejects_degenerate_covariance():
    with pytest.raises(ValueError):
        gaussian_init(10, 2, cov_scale=0.0, rng=make_rng(0))
    with pytest.raises(ValueError):
        gaussian_init(10, 2, cov_scale=-1.0, rng=make_rng(0))


def test_rng_determinism():
    a = make_rng(42).standard_normal(100)
    b = make_rng(42).standard_normal(100)
    assert np.array_equal(a, b)


def test_counters_snapshot():
    c = EvalCounters()
    c.interaction_grad_evals += 3
    c.energy_evals += 1
    snap = c.snapshot()
    assert snap["interaction_grad_evals"] == 3
    assert snap["potential_grad_evals"] == 0
    assert snap["energy_evals"] == 1


def test_check_finite_names_iteration():
    z = np.array([1.0, np.nan, 2.0])
    with pytest.raises(DivergenceError, match="iteration 17"):
        check_finite(z, 17)
    check_finite(np.ones(3), 0)  # no raise
