import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrcopt.optimizer import (
    InfeasibleLambdas,
    OptimizerConfig,
    TaskContext,
    ZeroMaskEntry,
    cost,
    fd_gradient,
    feasible,
    harmonic_spread,
    optimize,
    perturb,
    reduced_cost_and_grad,
)
from lrcopt.signals import MultiSineSignal

U_TASK = MultiSineSignal.from_arrays([1.0, 3.0, 5.0], [1.1, 1.7, 2.1])
Y_TASK = MultiSineSignal.from_arrays([1.0, 3.0, 5.0], [2.2, 1.0, 1.6], [-0.5, 0.9, 1.1])
U_ONE = MultiSineSignal.from_arrays([2.0], [1.5], [0.3])
Y_ONE = MultiSineSignal.from_arrays([2.0], [2.0], [-1.0])


def _task(n=4, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n)
    c[np.abs(c) < 0.1] = 0.5
    return TaskContext(U_TASK, Y_TASK, c, **kwargs)


def test_harmonic_spread_reference_values():
    assert harmonic_spread([0.0, -1.0]) == pytest.approx(1.0)
    assert harmonic_spread([0.0, -1.0, -2.0]) == pytest.approx(0.6)
    # Coincident eigenvalues hit the gap floor instead of dividing by zero.
    assert 1.0 / harmonic_spread([0.0, 0.0]) == pytest.approx(1e12)
    with pytest.raises(ValueError):
        harmonic_spread([-1.0])


def test_feasible_low_pass_boundary():
    # gamma=6: the cutoff gamma(1-lambda) must exceed the fastest tone.
    assert feasible(np.array([0.0]), 6.0, 5.0)
    assert not feasible(np.array([0.0]), 6.0, 7.0)
    assert feasible(np.array([-0.2]), 6.0, 7.0)
    assert not feasible(np.array([-1.0 / 6.0]), 6.0, 7.0)  # inside the margin


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_modes": 0},
        {"n_modes": 2, "beta1": -1.0},
        {"n_modes": 2, "beta2": -0.1},
        {"n_modes": 2, "gamma": 0.0},
        {"n_modes": 2, "restarts": 0},
        {"n_modes": 2, "lambda_init_low": 0.0, "lambda_init_high": 0.0},
        {"n_modes": 2, "lambda_init_high": 0.5},
        {"n_modes": 2, "constraint_margin": 0.0},
        {"n_modes": 2, "max_inner_iters": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


def test_task_context_weights_and_frequencies():
    task = _task()
    np.testing.assert_array_equal(task.omegas, [1.0, 3.0, 5.0])
    assert task.omega_max == 5.0
    np.testing.assert_allclose(task.weights, [1.0, 1.0 / 3.0, 0.2])
    uniform = _task(uniform_weights=True)
    np.testing.assert_array_equal(uniform.weights, np.ones(3))
    assert task.design(np.array([-1.0] * 4 + [0.0] * 0)[:4]).shape == (6, 4)


def test_zero_mask_entry_warns():
    with pytest.warns(ZeroMaskEntry):
        TaskContext(U_TASK, Y_TASK, np.array([1.0, 0.0, 2.0]))


def test_cost_itemization_adds_up():
    task = _task()
    lam = np.array([-9.0, -4.0, -1.5, -0.4])
    kappa = np.array([0.3, -0.2, 1.0, 0.7])
    total, parts = cost(lam, kappa, task, beta1=1e-3, beta2=0.05)
    assert total == pytest.approx(sum(parts.values()))
    residual = task.design(lam) @ kappa - task.b
    w2 = np.repeat(task.weights, 2)
    assert parts["weighted_error_sq"] == pytest.approx(w2 @ residual**2)
    assert parts["kappa_penalty"] == pytest.approx(1e-3 * kappa @ kappa)
    assert parts["spread_penalty"] == pytest.approx(0.05 / harmonic_spread(lam))


def test_cost_rejects_infeasible_spectra():
    task = _task()
    with pytest.raises(InfeasibleLambdas):
        cost(np.array([0.5, -1.0, -2.0, -3.0]), np.zeros(4), task, 0.0, 0.0)


def test_reduced_cost_matches_itemized_cost_at_its_own_kappa():
    task = _task(seed=3)
    lam = np.array([-7.0, -3.0, -1.0, -0.3])
    total, grad, kappa, err_sq = reduced_cost_and_grad(lam, task, 1e-5, 0.01)
    direct, parts = cost(lam, kappa, task, beta1=1e-5, beta2=0.01)
    assert total == pytest.approx(direct, rel=1e-12)
    assert err_sq == pytest.approx(parts["weighted_error_sq"], rel=1e-12)
    assert grad.shape == lam.shape


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    task = _task(n=5, seed=12)
    upper = 1.0 - task.omega_max / task.gamma - 1e-6
    for _ in range(6):
        lam = rng.uniform(-15.0, upper, size=5)
        analytic = reduced_cost_and_grad(lam, task, 1e-7, 0.1)[1]
        numeric = fd_gradient(lam, task, 1e-7, 0.1)
        scale = max(np.max(np.abs(numeric)), 1e-12)
        assert np.max(np.abs(analytic - numeric)) / scale < 1e-5


def test_single_tone_task_is_solved_to_numerical_zero():
    config = OptimizerConfig(n_modes=2, restarts=6, seed=3, beta1=0.0, beta2=0.0)
    result = optimize(config, U_ONE, Y_ONE, np.array([1.0, -0.7]))
    assert result.lowest_error < 1e-9
    assert len(result.restart_history) == 6
    assert result.m.shape == (1, 2) and result.theta.shape == (1, 2)


def test_single_mode_search_reaches_the_grid_floor():
    config = OptimizerConfig(n_modes=1, restarts=8, seed=5)
    task = TaskContext(U_ONE, Y_ONE, np.array([1.3]))
    result = optimize(config, U_ONE, Y_ONE, np.array([1.3]))
    found = reduced_cost_and_grad(result.lambdas, task, config.beta1, config.beta2)[0]
    upper = min(0.0, 1.0 - task.omega_max / 6.0) - config.constraint_margin
    grid = np.linspace(-25.0, upper, 4001)
    floor = min(
        reduced_cost_and_grad(np.array([g]), task, config.beta1, config.beta2)[0]
        for g in grid
    )
    assert found <= floor + 1e-10


def test_optimize_is_deterministic_and_jobs_independent():
    config = OptimizerConfig(n_modes=3, restarts=4, seed=7)
    a = optimize(config, U_TASK, Y_TASK, np.array([1.0, -0.5, 0.8]))
    b = optimize(config, U_TASK, Y_TASK, np.array([1.0, -0.5, 0.8]))
    c = optimize(config, U_TASK, Y_TASK, np.array([1.0, -0.5, 0.8]), jobs=4)
    for other in (b, c):
        np.testing.assert_array_equal(a.lambdas, other.lambdas)
        np.testing.assert_array_equal(a.kappa, other.kappa)
        assert a.lowest_error == other.lowest_error


def test_optimize_validates_mask_length_and_box():
    config = OptimizerConfig(n_modes=3, restarts=2, seed=1)
    with pytest.raises(ValueError, match="n_modes"):
        optimize(config, U_TASK, Y_TASK, np.array([1.0, 2.0]))
    fast = MultiSineSignal.from_arrays([160.0], [1.0])
    with pytest.raises(InfeasibleLambdas, match="empty"):
        optimize(
            OptimizerConfig(n_modes=2, restarts=2, seed=1),
            fast, MultiSineSignal.from_arrays([160.0], [0.5]),
            np.array([1.0, 1.0]),
        )


def test_restart_endpoints_stay_inside_the_feasible_box():
    config = OptimizerConfig(n_modes=3, restarts=5, seed=9)
    result = optimize(config, U_TASK, Y_TASK, np.array([0.4, 1.1, -0.9]))
    for record in result.restart_history:
        assert feasible(record.final_lambdas, 6.0, 5.0, config.constraint_margin / 2)


@settings(deadline=None, max_examples=40)
@given(
    eps=st.floats(min_value=0.0, max_value=10.0),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_perturb_preserves_feasibility(eps, seed):
    lambdas = np.array([-8.0, -3.0, -1.0, -0.149])
    out = perturb(lambdas, eps, seed, gamma=6.0, omega_max=5.0)
    assert feasible(out, 6.0, 5.0, 1e-7)
    assert out.shape == lambdas.shape


def test_perturb_zero_scale_is_identity_and_seeded():
    lambdas = np.array([-3.0, -1.0])
    np.testing.assert_array_equal(
        perturb(lambdas, 0.0, 5, gamma=6.0, omega_max=5.0), lambdas
    )
    a = perturb(lambdas, 0.5, 5, gamma=6.0, omega_max=5.0)
    b = perturb(lambdas, 0.5, 5, gamma=6.0, omega_max=5.0)
    c = perturb(lambdas, 0.5, 6, gamma=6.0, omega_max=5.0)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, lambdas)
