import numpy as np
import pytest

from parvi.optim import InnerSolverConfig, Objective, adagrad_descent, bb_descent


def counting_objective(value_fn, grad_fn):
    calls = {"value": 0, "grad": 0}

    def value(z):
        calls["value"] += 1
        return value_fn(z)

    def grad(z):
        calls["grad"] += 1
        return grad_fn(z)

    return Objective(value, grad), calls


def test_bb_exact_on_isotropic_quadratic():
    a = np.array([1.0, -2.0, 3.0])
    obj = Objective(
        lambda z: 0.5 * float(np.dot(z - a, z - a)),
        lambda z: z - a,
    )
    z = bb_descent(obj, np.zeros(3), InnerSolverConfig(max_iters=3, grad_tol=1e-12))
    assert np.max(np.abs(z - a)) < 1e-10


def test_bb_zero_gradient_returns_start():
    obj, calls = counting_objective(
        lambda z: 0.0,
        lambda z: np.zeros_like(z),
    )
    z0 = np.array([4.0, 5.0])
    z = bb_descent(obj, z0, InnerSolverConfig())
    assert np.array_equal(z, z0)
    assert calls["grad"] == 1


def rosenbrock(z):
    return float((1 - z[0]) ** 2 + 100.0 * (z[1] - z[0] ** 2) ** 2)


def rosenbrock_grad(z):
    return np.array(
        [
            -2.0 * (1 - z[0]) - 400.0 * z[0] * (z[1] - z[0] ** 2),
            200.0 * (z[1] - z[0] ** 2),
        ]
    )


def test_bb_rosenbrock_descends():
    obj = Objective(rosenbrock, rosenbrock_grad)
    z0 = np.array([-1.2, 1.0])
    cfg = InnerSolverConfig(max_iters=500, grad_tol=1e-10, lr=1e-3)
    z = bb_descent(obj, z0, cfg)
    assert rosenbrock(z) < rosenbrock(z0)
    assert rosenbrock(z) < 1.0


def test_bb_best_seen_never_worse_than_start():
    # wildly non-convex objective with a large fallback step: the BB iterates
    # may wander, but the returned point cannot be worse than the start
    obj = Objective(
        lambda z: float(np.sum(np.cos(3 * z) + 0.1 * z**2)),
        lambda z: -3 * np.sin(3 * z) + 0.2 * z,
    )
    z0 = np.array([0.3, -0.2, 1.1])
    for iters in (1, 3, 7, 20):
        z = bb_descent(obj, z0, InnerSolverConfig(max_iters=iters, lr=2.0))
        assert obj.value(z) <= obj.value(z0) + 1e-15


def test_bb_negative_curvature_falls_back():
    # concave quadratic: s.y < 0 at every BB pair, so fallback steps are used
    obj = Objective(
        lambda z: -0.5 * float(np.dot(z, z)),
        lambda z: -z,
    )
    z0 = np.array([1.0])
    z = bb_descent(obj, z0, InnerSolverConfig(max_iters=5, lr=0.1))
    assert np.isfinite(z).all()


def test_bb_nan_objective_aborts():
    obj = Objective(
        lambda z: float("nan"),
        lambda z: np.ones_like(z),
    )
    with pytest.raises(FloatingPointError):
        bb_descent(obj, np.zeros(2), InnerSolverConfig())


def test_bb_determinism():
    obj = Objective(rosenbrock, rosenbrock_grad)
    cfg = InnerSolverConfig(max_iters=50)
    z1 = bb_descent(obj, np.array([-1.2, 1.0]), cfg)
    z2 = bb_descent(obj, np.array([-1.2, 1.0]), cfg)
    assert np.array_equal(z1, z2)


def test_adagrad_hand_iteration_constant_gradient():
    obj = Objective(lambda z: float(z[0]), lambda z: np.ones_like(z))
    z = adagrad_descent(obj, np.zeros(1), InnerSolverConfig(max_iters=1, lr=0.1))
    assert z[0] == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-12)
    z = adagrad_descent(obj, np.zeros(1), InnerSolverConfig(max_iters=2, lr=0.1))
    expected = -0.1 / (1.0 + 1e-8) - 0.1 / (np.sqrt(2.0) + 1e-8)
    assert z[0] == pytest.approx(expected, rel=1e-12)


def test_adagrad_zero_gradient_no_move():
    obj = Objective(lambda z: 1.0, lambda z: np.zeros_like(z))
    z0 = np.array([2.0, -3.0])
    z = adagrad_descent(obj, z0, InnerSolverConfig(max_iters=50))
    assert np.array_equal(z, z0)


def test_adagrad_descends_quadratic_bowl():
    value_fn = lambda z: 0.5 * float(np.dot(z, z))
    visited = []

    def grad(z):
        visited.append(value_fn(z))
        return z

    obj = Objective(value_fn, grad)
    z0 = np.array([3.0, -4.0])
    z = adagrad_descent(obj, z0, InnerSolverConfig(max_iters=100, lr=0.1))
    assert all(b <= a + 1e-12 for a, b in zip(visited, visited[1:]))
    assert value_fn(z) < value_fn(z0)


def test_adagrad_nan_aborts():
    obj = Objective(lambda z: 0.0, lambda z: np.full_like(z, np.nan))
    with pytest.raises(FloatingPointError):
        adagrad_descent(obj, np.zeros(2), InnerSolverConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        InnerSolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        InnerSolverConfig(bb_clamp=(1.0, 1.0))
    cfg = InnerSolverConfig(lr=0.25)
    assert cfg.fallback_step == 0.25
    cfg = InnerSolverConfig(lr=0.25, bb_fallback_step=0.5)
    assert cfg.fallback_step == 0.5
