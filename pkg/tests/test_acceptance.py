"""Acceptance suite: ten end-to-end checks, one verdict line each.

Every test prints a single "CRITERION nn: PASS/FAIL" line with the
measured numbers (writing past pytest's capture so the verdicts always
reach the terminal) and then asserts the same bounds.  The instances
are all seeded, so the measured values are reproducible.
"""

import filecmp

import numpy as np
import pytest

import lrcopt.cli as cli
from lrcopt.benchmarks import (
    DEFAULT_SETTINGS,
    BenchmarkSettings,
    ScenarioSpec,
    SignalGenerator,
    beta_weight_study,
    run_sweep,
    sensitivity_study,
)
from lrcopt.optimizer import (
    OptimizerConfig,
    TaskContext,
    fd_gradient,
    feasible,
    optimize,
    reduced_cost_and_grad,
)
from lrcopt.regression import (
    compare_readout_domains,
    nrmse,
    ridge_fit,
    verify_modal_equivalence,
)
from lrcopt.reservoir import (
    ModalReservoir,
    generate_random_topology,
    simulate,
    steady_state_series,
    transfer_response,
)
from lrcopt.seeding import stream
from lrcopt.signals import MultiSineSignal, SampledSeries, sample

U_TASK = MultiSineSignal.from_arrays([1.0, 3.0, 5.0], [1.1, 1.7, 2.1])
Y_TASK = MultiSineSignal.from_arrays(
    [1.0, 3.0, 5.0], [2.2, 1.0, 1.6], [-0.5, 0.9, 1.1]
)


def _report(capsys, number, verdict, detail):
    line = f"CRITERION {number:2d}: {'PASS' if verdict else 'FAIL'}  {detail}"
    with capsys.disabled():
        print(f"\n{line}", flush=True)


def _steady_refit(lambdas, c, beta=1e-8, n_steps=3000, tau=0.01):
    """Train/test NRMSE of a ridge readout on steady-state mode responses.

    Training rows cover (0, T]; the test window continues the same
    trajectory over (T, 2T] with the readout frozen.
    """
    modal = ModalReservoir(lambdas=np.asarray(lambdas, dtype=float), c=c, gamma=6.0)
    train = steady_state_series(modal, U_TASK, n_steps, tau, append_bias=True)
    test = steady_state_series(
        modal, U_TASK, n_steps, tau, t_start=n_steps * tau, append_bias=True
    )
    fit = ridge_fit(train.states, Y_TASK.evaluate(train.times), beta)
    err_train = nrmse(train.states @ fit.kappa, Y_TASK.evaluate(train.times))
    err_test = nrmse(test.states @ fit.kappa, Y_TASK.evaluate(test.times))
    return err_train, err_test


@pytest.fixture(scope="module")
def ten_mode():
    """Frozen 10-mode instance shared by the optimization and sensitivity checks."""
    c = stream(42, "experiment", "c", 10).standard_normal(10)
    result = optimize(
        OptimizerConfig(n_modes=10, restarts=50, seed=42), U_TASK, Y_TASK, c, jobs=4
    )
    return result, c


def test_criterion_01_readout_invariant_under_modal_basis(capsys):
    generator = SignalGenerator()
    worst_eps = worst_kappa = 0.0
    for index in range(50):
        top_rng = stream(7, "acceptance", "topology", index)
        sig_rng = stream(7, "acceptance", "signals", index)
        n = int(top_rng.integers(2, 21))
        top = generate_random_topology(n, 0.5, weighted=True, seed=top_rng)
        u_signal, y_signal = generator.draw(sig_rng, 3)
        u = sample(u_signal, 3000, 0.01)
        y = sample(y_signal, 3000, 0.01, t0=0.01)
        check = verify_modal_equivalence(top, u, y, beta=0.0)
        worst_eps = max(worst_eps, abs(check.eps_coupled - check.eps_decoupled))
        worst_kappa = max(worst_kappa, check.kappa_residual, check.bias_residual)
    ok = worst_eps < 1e-8 and worst_kappa < 1e-6
    _report(
        capsys,
        1,
        ok,
        f"50 coupled/decoupled instances: worst error gap {worst_eps:.1e} (<1e-8), "
        f"worst readout residual {worst_kappa:.1e} (<1e-6)",
    )
    assert worst_eps < 1e-8
    assert worst_kappa < 1e-6


def test_criterion_02_time_and_frequency_readouts_agree(capsys):
    worst = 0.0
    base = 2.0 * np.pi / 25.0
    for index in range(20):
        rng = stream(11, "acceptance", "modal", index)
        n = int(rng.integers(2, 21))
        k = int(rng.integers(1, 6))
        modal = ModalReservoir(
            lambdas=rng.uniform(-20.0, 0.0, size=n),
            c=rng.standard_normal(n),
            gamma=6.0,
        )
        bins = np.sort(rng.choice(np.arange(2, 21), size=k, replace=False))
        u_signal = MultiSineSignal.from_arrays(
            bins * base, rng.uniform(0.5, 2.5, size=k), rng.uniform(-np.pi, np.pi, k)
        )
        y_signal = MultiSineSignal.from_arrays(
            bins * base, rng.uniform(0.5, 2.5, size=k), rng.uniform(-np.pi, np.pi, k)
        )
        comp = compare_readout_domains(modal, u_signal, y_signal)
        gap = abs(comp.nrmse_time - comp.nrmse_frequency)
        worst = max(worst, gap / max(comp.nrmse_time, 1e-15))
    ok = worst < 1e-2
    _report(
        capsys,
        2,
        ok,
        f"20 modal reservoirs: worst relative NRMSE gap between domains "
        f"{worst:.1e} (<1e-2)",
    )
    assert worst < 1e-2


def test_criterion_03_transfer_closed_forms(capsys):
    rng = stream(3, "acceptance", "transfer")

    worst_formula = 0.0
    for _ in range(1000):
        gamma = rng.uniform(1.0, 10.0)
        lam = rng.uniform(-12.0, 0.0)
        c = rng.uniform(0.2, 3.0) * rng.choice([-1.0, 1.0])
        omega = rng.uniform(0.3, 10.0)
        modal = ModalReservoir(lambdas=np.array([lam]), c=np.array([c]), gamma=gamma)
        resp = transfer_response(modal, [omega])
        h_closed = resp.sign[0] * resp.m[0, 0] * np.exp(-1j * resp.theta[0, 0])
        h_direct = gamma * c / (1j * omega + gamma * (1.0 - lam))
        worst_formula = max(worst_formula, abs(h_closed - h_direct) / abs(h_direct))

    # Simulation cross-check on sample-and-hold integration (tau = 0.0025 s),
    # which shares no code with the closed forms.  12 s per run, first 6 s
    # discarded; the slowest pole decays at least at rate gamma >= 2 s^-1.
    worst_sim = 0.0
    tau, n_steps, washout = 0.0025, 4800, 2400
    for _ in range(40):
        gamma = rng.uniform(2.0, 8.0)
        lambdas = rng.uniform(-8.0, 0.0, 25)
        c = rng.uniform(0.2, 3.0, 25) * rng.choice([-1.0, 1.0], 25)
        omega = rng.uniform(1.0, 5.0)
        amp = rng.uniform(0.5, 2.0)
        psi = rng.uniform(-np.pi, np.pi)
        tone = sample(MultiSineSignal.from_arrays([omega], [amp], [psi]), n_steps, tau)
        raw = SampledSeries(values=tone.values, tau=tau, t0=0.0, source=None)
        modal = ModalReservoir(lambdas=lambdas, c=c, gamma=gamma)
        states = simulate(modal, raw, activation="identity")
        resp = transfer_response(modal, [omega])
        t = states.times[washout:]
        basis = np.column_stack([np.cos(omega * t + psi), np.sin(omega * t + psi)])
        coef, *_ = np.linalg.lstsq(basis, states.states[washout:], rcond=None)
        scale = amp * resp.m[0]
        pred_cos = resp.sign * scale * np.cos(resp.theta[0])
        pred_sin = resp.sign * scale * np.sin(resp.theta[0])
        err = np.hypot(coef[0] - pred_cos, coef[1] - pred_sin) / scale
        worst_sim = max(worst_sim, float(err.max()))

    ok = worst_formula < 1e-12 and worst_sim < 1e-3
    _report(
        capsys,
        3,
        ok,
        f"gain/lag closed forms: vs complex response {worst_formula:.1e} (<1e-12) "
        f"on 1000 tuples, vs simulation {worst_sim:.1e} (<1e-3) on 1000 modes",
    )
    assert worst_formula < 1e-12
    assert worst_sim < 1e-3


def test_criterion_04_ten_mode_optimization_beats_random(ten_mode, capsys):
    result, c = ten_mode
    err_train, _ = _steady_refit(result.lambdas, c)
    baselines = []
    for index in range(50):
        lambdas = stream(42, "baseline", index).uniform(-20.0, -1e-6, 10)
        baselines.append(_steady_refit(lambdas, c)[0])
    median_random = float(np.median(baselines))
    ratio = median_random / err_train
    ok = err_train < 0.02 and ratio >= 10.0
    _report(
        capsys,
        4,
        ok,
        f"10-mode optimization: train NRMSE {err_train:.4f} (<0.02), "
        f"{ratio:.0f}x below the random-spectrum median {median_random:.3f} (>=10x)",
    )
    assert err_train < 0.02
    assert ratio >= 10.0


def test_criterion_05_hundred_mode_train_and_test(capsys):
    c = stream(42, "experiment", "c", 100).standard_normal(100)
    result = optimize(
        OptimizerConfig(n_modes=100, restarts=10, seed=42), U_TASK, Y_TASK, c, jobs=4
    )
    err_train, err_test = _steady_refit(result.lambdas, c)
    ok = err_train < 0.02 and err_test < 0.05
    _report(
        capsys,
        5,
        ok,
        f"100-mode optimization: train NRMSE {err_train:.5f} (<0.02), "
        f"held-out continuation NRMSE {err_test:.5f} (<0.05)",
    )
    assert err_train < 0.02
    assert err_test < 0.05


def test_criterion_06_benchmark_ordering(capsys):
    spec = ScenarioSpec(
        mode="fix_freqs_vary_nodes",
        fixed_value=3,
        sweep_values=(5, 10),
        trials=10,
        seed=2026,
    )
    report = run_sweep(spec, DEFAULT_SETTINGS, jobs=4)
    means = {key: cell.mean_train for key, cell in report.cells.items()}

    opt_below_tanh = all(
        means[("optimized_lrc", n)] < means[("nlrc_tanh", n)] for n in (5, 10)
    )
    random_highest = all(
        means[("random_lrc", n)] > means[(method, n)]
        for n in (5, 10)
        for method in ("optimized_lrc", "nlrc_tanh", "nlrc_relu")
    )
    relu_above_tanh = all(
        means[("nlrc_relu", n)] > means[("nlrc_tanh", n)] for n in (5, 10)
    )
    ok = opt_below_tanh and random_highest and relu_above_tanh
    summary = ", ".join(
        f"n={n}: opt {means[('optimized_lrc', n)]:.3f} tanh "
        f"{means[('nlrc_tanh', n)]:.3f} relu {means[('nlrc_relu', n)]:.3f} "
        f"rand {means[('random_lrc', n)]:.3f}"
        for n in (5, 10)
    )
    _report(capsys, 6, ok, f"benchmark mean train NRMSE ({summary})")
    assert opt_below_tanh, "optimized reservoir should beat the tanh nonlinear one"
    assert random_highest, "random linear baseline should be worst at every point"
    assert relu_above_tanh, "relu variant should trail the tanh variant"


def test_criterion_07_sensitivity_flatness(ten_mode, capsys):
    result, c = ten_mode
    rows = sensitivity_study(
        result.lambdas,
        [0.0, 0.001, 0.01, 0.1, 1.0, 5.0],
        20,
        99,
        u_signal=U_TASK,
        y_signal=Y_TASK,
        c=c,
    )
    by_eps = {row.epsilon: row.mean_nrmse for row in rows}
    base = by_eps[0.0]
    small_flat = all(by_eps[eps] <= 1.1 * base for eps in (0.001, 0.01))
    large_degraded = all(by_eps[eps] > 2.0 * base for eps in (1.0, 5.0))
    ok = small_flat and large_degraded
    ratios = ", ".join(f"{eps:g}: {by_eps[eps] / base:.2f}x" for eps in sorted(by_eps))
    _report(capsys, 7, ok, f"perturbation-to-optimum NRMSE ratios ({ratios})")
    assert small_flat, "small spectrum perturbations should stay within 10%"
    assert large_degraded, "order-one perturbations should at least double the error"


def test_criterion_08_penalty_grid_monotone(capsys):
    beta1_values = [1e-2, 1e-4, 1e-7]
    beta2_values = [0.0, 1e-3, 1e-1]
    cells = beta_weight_study(
        beta1_values,
        beta2_values,
        U_TASK,
        Y_TASK,
        n_modes=100,
        trials=5,
        seed=2026,
        settings=BenchmarkSettings(restarts=10),
        jobs=4,
    )
    grid = {(cell.beta1, cell.beta2): cell.mean_train_nrmse for cell in cells}
    down_beta1 = all(
        grid[(beta1_values[i], b2)] >= grid[(beta1_values[i + 1], b2)]
        for b2 in beta2_values
        for i in range(2)
    )
    up_beta2 = all(
        grid[(b1, beta2_values[j])] >= grid[(b1, beta2_values[j + 1])]
        for b1 in beta1_values
        for j in range(2)
    )
    ok = down_beta1 and up_beta2
    corner = ", ".join(
        f"b1={b1:g},b2={b2:g}: {grid[(b1, b2)]:.4f}"
        for b1, b2 in [(1e-2, 0.0), (1e-7, 0.0), (1e-2, 1e-1), (1e-7, 1e-1)]
    )
    _report(
        capsys,
        8,
        ok,
        f"mean train NRMSE non-increasing along both penalty directions ({corner})",
    )
    assert down_beta1, "error should not grow as the readout penalty shrinks"
    assert up_beta2, "error should not grow as the spread penalty grows"


def test_criterion_09_gradient_consistency(capsys):
    c = stream(5, "acceptance", "gradc").standard_normal(8)
    task = TaskContext(U_TASK, Y_TASK, c)
    upper = min(0.0, 1.0 - task.omega_max / task.gamma) - 1e-6
    rng = np.random.default_rng(17)
    worst = 0.0
    count = 0
    while count < 20:
        lam = rng.uniform(-15.0, upper, 8)
        if not feasible(lam, task.gamma, task.omega_max):
            continue
        count += 1
        _, grad, _, _ = reduced_cost_and_grad(lam, task, 1e-7, 0.1)
        grad_fd = fd_gradient(lam, task, 1e-7, 0.1)
        worst = max(worst, np.linalg.norm(grad - grad_fd) / np.linalg.norm(grad))
    ok = worst < 1e-4
    _report(
        capsys,
        9,
        ok,
        f"analytic vs central-difference gradient at 20 feasible points: "
        f"worst relative gap {worst:.1e} (<1e-4)",
    )
    assert worst < 1e-4


DETERMINISM_CONFIG = """
[signals]
tau = 0.01
steps = 400
input = [
  {omega = 1.0, amplitude = 1.1},
  {omega = 3.0, amplitude = 1.7},
  {omega = 5.0, amplitude = 2.1},
]
output = [
  {omega = 1.0, amplitude = 2.2, phase = -0.5},
  {omega = 3.0, amplitude = 1.0, phase = 0.9},
  {omega = 5.0, amplitude = 1.6, phase = 1.1},
]

[optimizer]
n_modes = 3
restarts = 2
seed = 11

[benchmark]
mode = "fix_freqs_vary_nodes"
fixed_value = 2
sweep_values = [4]
trials = 2
seed = 5
n_steps = 400
restarts = 2
"""


def test_criterion_10_rerun_byte_determinism(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text(DETERMINISM_CONFIG)
    compared = 0
    identical = True
    for command in ("sweep", "optimize"):
        first = tmp_path / f"{command}_a"
        second = tmp_path / f"{command}_b"
        for out in (first, second):
            code = cli.main(
                [command, "--config", str(config), "--out", str(out), "--jobs", "2"]
            )
            assert code == 0
        names = sorted(
            p.name for p in first.iterdir() if p.suffix in (".csv", ".json", ".jsonl")
        )
        assert names, "expected delimited/JSON artifacts to compare"
        for name in names:
            compared += 1
            if not filecmp.cmp(first / name, second / name, shallow=False):
                identical = False
    _report(
        capsys,
        10,
        identical,
        f"sweep and optimize reruns byte-identical across "
        f"{compared} CSV/JSON artifacts",
    )
    assert identical
