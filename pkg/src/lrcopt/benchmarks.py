"""Comparative experiments for spectrum-optimized linear reservoirs.

Four methods share one readout pipeline (ridge at ``ridge_beta`` with a bias
column, identical train/test windows, per-trial signals drawn once and reused
by every method):

  optimized_lrc   spectrum search + analytic steady-state reconstruction
  random_lrc      unweighted random coupling, spectrum shifted for stability
  nlrc_tanh       random coupling rescaled to spectral radius 0.9, tanh nodes
  nlrc_relu       same, relu nodes

The module also houses the eigenvalue-sensitivity study (perturb the optimal
spectrum, refit, watch the error) and the penalty-weight study (a grid of
optimizations over the two cost weights).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .optimizer import (
    AllRestartsFailed,
    OptimizerConfig,
    optimize,
    perturb,
)
from .regression import build_frequency_system, frequency_fit, nrmse, ridge_fit
from .reservoir import (
    ModalReservoir,
    ReservoirTopology,
    UnstableSimulation,
    generate_random_topology,
    simulate,
    steady_state_series,
)
from .seeding import stream
from .signals import MultiSineSignal, sample

METHODS = ("optimized_lrc", "random_lrc", "nlrc_tanh", "nlrc_relu")
SWEEP_MODES = ("fix_nodes_vary_freqs", "fix_freqs_vary_nodes")


class UnknownMethod(ValueError):
    """Method name is not one of METHODS."""


@dataclass(frozen=True)
class SignalGenerator:
    """Per-trial random task signals.

    Frequencies are drawn log-uniformly over [freq_low, freq_high] rad/s,
    rejecting candidates closer than ``min_separation`` to an accepted one;
    amplitudes and phases are uniform over their ranges.  Input and target
    share the frequency set but draw amplitudes and phases independently.
    """

    freq_low: float = 0.5
    freq_high: float = 5.0
    min_separation: float = 0.2
    amp_low: float = 0.5
    amp_high: float = 2.5

    def __post_init__(self):
        if not 0.0 < self.freq_low < self.freq_high:
            raise ValueError("need 0 < freq_low < freq_high")
        if self.min_separation < 0.0:
            raise ValueError("min_separation must be nonnegative")
        if not 0.0 < self.amp_low <= self.amp_high:
            raise ValueError("need 0 < amp_low <= amp_high")

    def draw_frequencies(self, rng: np.random.Generator, k: int) -> np.ndarray:
        if k < 1:
            raise ValueError("k must be at least 1")
        span = self.freq_high - self.freq_low
        if (k - 1) * self.min_separation >= span:
            raise ValueError("frequency band cannot hold k tones at this separation")
        lo, hi = np.log(self.freq_low), np.log(self.freq_high)
        accepted: list[float] = []
        attempts = 0
        while len(accepted) < k:
            cand = float(np.exp(rng.uniform(lo, hi)))
            if all(abs(cand - f) >= self.min_separation for f in accepted):
                accepted.append(cand)
            attempts += 1
            if attempts > 10000 * k:
                raise RuntimeError("frequency rejection sampling did not terminate")
        return np.sort(np.asarray(accepted))

    def draw(self, rng: np.random.Generator, k: int) -> tuple[MultiSineSignal, MultiSineSignal]:
        omegas = self.draw_frequencies(rng, k)
        u = MultiSineSignal.from_arrays(
            omegas,
            rng.uniform(self.amp_low, self.amp_high, k),
            rng.uniform(-np.pi, np.pi, k),
        )
        y = MultiSineSignal.from_arrays(
            omegas,
            rng.uniform(self.amp_low, self.amp_high, k),
            rng.uniform(-np.pi, np.pi, k),
        )
        return u, y


@dataclass(frozen=True)
class BenchmarkSettings:
    """Shared pipeline knobs for every method in a sweep.

    ``washout`` rows are dropped from the regression targets (train side
    only).  The nonlinear baselines scale their input mask by
    ``nl_input_scale`` so tanh operates in its responsive regime (relu is
    scale-invariant); the random linear baseline uses an unweighted coupling
    shifted to ``linear_target_max_eig``.
    """

    n_steps: int = 3000
    tau: float = 0.01
    gamma: float = 6.0
    ridge_beta: float = 1e-8
    washout: int = 0
    edge_prob: float = 0.5
    nl_input_scale: float = 0.1
    nl_spectral_radius: float = 0.9
    linear_weighted: bool = False
    linear_target_max_eig: float = -2.0
    restarts: int = 12
    beta1: float = 1e-7
    beta2: float = 0.1

    def __post_init__(self):
        if self.n_steps < 1 or self.tau <= 0.0:
            raise ValueError("need n_steps >= 1 and tau > 0")
        if not 0 <= self.washout < self.n_steps:
            raise ValueError("washout must lie in [0, n_steps)")
        if self.ridge_beta < 0.0:
            raise ValueError("ridge_beta must be nonnegative")


DEFAULT_SETTINGS = BenchmarkSettings()


@dataclass(frozen=True)
class ScenarioSpec:
    """One benchmark sweep: what varies, what stays fixed, how many trials."""

    mode: str
    fixed_value: int
    sweep_values: tuple
    trials: int
    seed: int
    signal_gen: SignalGenerator = field(default_factory=SignalGenerator)

    def __post_init__(self):
        if self.mode not in SWEEP_MODES:
            raise ValueError(f"mode must be one of {SWEEP_MODES}")
        values = tuple(int(v) for v in self.sweep_values)
        if len(values) == 0:
            raise ValueError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep_values must be strictly ascending")
        if self.fixed_value < 1 or self.trials < 1:
            raise ValueError("fixed_value and trials must be positive")
        object.__setattr__(self, "sweep_values", values)

    def cell_shape(self, sweep_value: int) -> tuple[int, int]:
        """(n_nodes, n_freqs) for one sweep point."""
        if self.mode == "fix_nodes_vary_freqs":
            return self.fixed_value, sweep_value
        return sweep_value, self.fixed_value

    @property
    def sweep_var(self) -> str:
        return "num_freqs" if self.mode == "fix_nodes_vary_freqs" else "num_nodes"


@dataclass(frozen=True)
class TrialRecord:
    method: str
    sweep_value: int
    trial: int
    nrmse_train: float
    nrmse_test: float
    failed: bool = False
    message: str = ""


@dataclass(frozen=True)
class CellStats:
    mean_train: float
    std_train: float
    mean_test: float
    std_test: float
    n_trials: int
    failures: int


@dataclass(frozen=True)
class BenchmarkReport:
    """All trial records plus per-cell aggregates and reproduction metadata."""

    spec: ScenarioSpec
    trials: tuple
    cells: dict
    metadata: dict

    def cell(self, method: str, sweep_value: int) -> CellStats:
        return self.cells[(method, int(sweep_value))]


def _train_test_nrmse(states_train, y_train, states_test, y_test, settings):
    cut = settings.washout
    fit = ridge_fit(states_train[cut:], y_train[cut:], settings.ridge_beta)
    train = nrmse(states_train[cut:] @ fit.kappa, y_train[cut:])
    test = nrmse(states_test @ fit.kappa, y_test)
    return train, test


def run_method(
    method: str,
    n: int,
    u_signal: MultiSineSignal,
    y_signal: MultiSineSignal,
    seed: int,
    settings: BenchmarkSettings = DEFAULT_SETTINGS,
) -> tuple[float, float]:
    """Train one reservoir variant and report (train, test) NRMSE.

    Testing continues the trajectory for another ``n_steps`` with the readout
    frozen.  All randomness (masks, couplings, optimizer restarts) derives
    from ``seed``; identical calls return identical numbers.
    """
    if method not in METHODS:
        raise UnknownMethod(f"method must be one of {METHODS}")
    if n < 1:
        raise ValueError("n must be at least 1")
    t_len, tau = settings.n_steps, settings.tau
    rng = stream(seed, "method-draw")

    if method == "optimized_lrc":
        c = rng.standard_normal(n)
        cfg = OptimizerConfig(
            n_modes=n,
            beta1=settings.beta1,
            beta2=settings.beta2,
            gamma=settings.gamma,
            restarts=settings.restarts,
            seed=seed,
        )
        result = optimize(cfg, u_signal, y_signal, c)
        modal = ModalReservoir(lambdas=result.lambdas, c=c, gamma=settings.gamma)
        s1 = steady_state_series(modal, u_signal, t_len, tau, append_bias=True)
        s2 = steady_state_series(
            modal, u_signal, t_len, tau, t_start=t_len * tau, append_bias=True
        )
    else:
        if method == "random_lrc":
            top = generate_random_topology(
                n,
                settings.edge_prob,
                weighted=settings.linear_weighted,
                target_max_eig=settings.linear_target_max_eig,
                gamma=settings.gamma,
                seed=rng,
            )
            activation = "identity"
        else:
            top = generate_random_topology(
                n,
                settings.edge_prob,
                gamma=settings.gamma,
                seed=rng,
                spectral_radius=settings.nl_spectral_radius,
            )
            top = ReservoirTopology(
                a=top.a, d=top.d * settings.nl_input_scale, gamma=top.gamma
            )
            activation = "tanh" if method == "nlrc_tanh" else "relu"
        s1 = simulate(top, sample(u_signal, t_len, tau), activation=activation, append_bias=True)
        s2 = simulate(
            top,
            sample(u_signal, t_len, tau, t0=t_len * tau),
            r0=s1.final_state,
            activation=activation,
            append_bias=True,
        )

    y1 = y_signal.evaluate(s1.times)
    y2 = y_signal.evaluate(s2.times)
    return _train_test_nrmse(s1.states, y1, s2.states, y2, settings)


def _run_trial(spec, settings, method, sweep_value, trial):
    n, k = spec.cell_shape(sweep_value)
    sig_rng = stream(spec.seed, "cell", sweep_value, trial)
    u_signal, y_signal = spec.signal_gen.draw(sig_rng, k)
    cell_seed = int(stream(spec.seed, "cellseed", sweep_value, trial).integers(0, 2**31))
    try:
        train, test = run_method(method, n, u_signal, y_signal, cell_seed, settings)
        return TrialRecord(method, sweep_value, trial, train, test)
    except (UnstableSimulation, AllRestartsFailed) as exc:
        return TrialRecord(
            method, sweep_value, trial, float("nan"), float("nan"),
            failed=True, message=f"{type(exc).__name__}: {exc}",
        )


def _cell_stats(records) -> CellStats:
    ok = [r for r in records if not r.failed]
    failures = len(records) - len(ok)
    if not ok:
        return CellStats(float("nan"), float("nan"), float("nan"), float("nan"),
                         len(records), failures)
    tr = np.array([r.nrmse_train for r in ok])
    te = np.array([r.nrmse_test for r in ok])
    std_tr = float(np.std(tr, ddof=1)) if len(ok) > 1 else 0.0
    std_te = float(np.std(te, ddof=1)) if len(ok) > 1 else 0.0
    return CellStats(float(np.mean(tr)), std_tr, float(np.mean(te)), std_te,
                     len(records), failures)


def run_sweep(
    spec: ScenarioSpec,
    settings: BenchmarkSettings = DEFAULT_SETTINGS,
    jobs: int = 1,
) -> BenchmarkReport:
    """Run every method over the sweep grid.

    Signals are drawn once per (sweep value, trial) and shared by all
    methods; failed trials (unstable integration, no converged restart) are
    recorded with a flag rather than dropped.  Results are independent of
    ``jobs``.
    """
    tasks = [
        (method, sv, trial)
        for sv in spec.sweep_values
        for method in METHODS
        for trial in range(spec.trials)
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(lambda t: _run_trial(spec, settings, *t), tasks)
            )
    else:
        records = [_run_trial(spec, settings, *t) for t in tasks]

    cells = {}
    for sv in spec.sweep_values:
        for method in METHODS:
            group = [r for r in records if r.method == method and r.sweep_value == sv]
            cells[(method, sv)] = _cell_stats(group)
    metadata = {
        "mode": spec.mode,
        "fixed_value": spec.fixed_value,
        "sweep_values": list(spec.sweep_values),
        "trials": spec.trials,
        "seed": spec.seed,
        "methods": list(METHODS),
        "settings": asdict(settings),
    }
    return BenchmarkReport(spec=spec, trials=tuple(records), cells=cells, metadata=metadata)


@dataclass(frozen=True)
class SensitivityRow:
    epsilon: float
    mean_nrmse: float
    values: tuple


def sensitivity_study(
    lambdas_opt,
    epsilon_values,
    trials: int,
    seed: int,
    *,
    u_signal: MultiSineSignal,
    y_signal: MultiSineSignal,
    c,
    gamma: float = 6.0,
    settings: BenchmarkSettings = DEFAULT_SETTINGS,
) -> list:
    """Training error under random perturbations of the optimal spectrum.

    Each draw shifts the eigenvalues by epsilon_s * U(-1, 0) (clamped to the
    feasible box), refits the readout from the frequency-domain system, and
    reconstructs the training NRMSE.  The frequency-side ridge weight is the
    time-domain ``ridge_beta`` scaled by 2/rows so the unperturbed row
    reproduces the standard reporting pipeline.
    """
    lambdas_opt = np.asarray(lambdas_opt, dtype=float)
    c = np.asarray(c, dtype=float)
    omega_max = float(u_signal.omega_max)
    rows = settings.n_steps - settings.washout
    beta_f = 2.0 * settings.ridge_beta / rows

    def one(lam):
        modal = ModalReservoir(lambdas=lam, c=c, gamma=gamma)
        kappa = frequency_fit(build_frequency_system(modal, u_signal, y_signal), beta=beta_f).kappa
        series = steady_state_series(modal, u_signal, settings.n_steps, settings.tau)
        target = y_signal.evaluate(series.times)
        cut = settings.washout
        return nrmse(series.states[cut:] @ kappa, target[cut:])

    out = []
    for index, eps in enumerate(epsilon_values):
        eps = float(eps)
        rng = stream(seed, "sensitivity", index)
        vals = tuple(
            one(perturb(lambdas_opt, eps, rng, gamma=gamma, omega_max=omega_max))
            for _ in range(trials)
        )
        out.append(SensitivityRow(epsilon=eps, mean_nrmse=float(np.mean(vals)), values=vals))
    return out


@dataclass(frozen=True)
class BetaCell:
    beta1: float
    beta2: float
    mean_weighted_error: float
    mean_train_nrmse: float


def beta_weight_study(
    beta1_values,
    beta2_values,
    u_signal: MultiSineSignal,
    y_signal: MultiSineSignal,
    n_modes: int,
    trials: int,
    seed: int,
    settings: BenchmarkSettings = DEFAULT_SETTINGS,
    jobs: int = 1,
) -> list:
    """Full-factorial grid of optimizations over the two penalty weights.

    Every cell sees the same per-trial instances (input mask draw and restart
    seed depend on the trial only), so cell differences isolate the weights.
    Reports the reconstruction training NRMSE surface with the weighted
    frequency residual alongside.
    """
    if len(beta1_values) == 0 or len(beta2_values) == 0:
        raise ValueError("weight value lists must be non-empty")

    def one_cell(b1, b2):
        errors, fits = [], []
        for trial in range(trials):
            c = stream(seed, "beta-study", "c", trial).standard_normal(n_modes)
            cfg = OptimizerConfig(
                n_modes=n_modes,
                beta1=float(b1),
                beta2=float(b2),
                gamma=settings.gamma,
                restarts=settings.restarts,
                seed=int(stream(seed, "beta-study", "opt", trial).integers(0, 2**31)),
            )
            result = optimize(cfg, u_signal, y_signal, c, jobs=jobs)
            errors.append(result.lowest_error)
            modal = ModalReservoir(lambdas=result.lambdas, c=c, gamma=settings.gamma)
            series = steady_state_series(
                modal, u_signal, settings.n_steps, settings.tau, append_bias=True
            )
            target = y_signal.evaluate(series.times)
            cut = settings.washout
            fit = ridge_fit(series.states[cut:], target[cut:], settings.ridge_beta)
            fits.append(nrmse(series.states[cut:] @ fit.kappa, target[cut:]))
        return BetaCell(
            beta1=float(b1),
            beta2=float(b2),
            mean_weighted_error=float(np.mean(errors)),
            mean_train_nrmse=float(np.mean(fits)),
        )

    return [one_cell(b1, b2) for b1 in beta1_values for b2 in beta2_values]


def write_report_csv(path, report: BenchmarkReport) -> None:
    """Long-format trial table: one row per (method, sweep point, trial)."""
    sweep_var = report.spec.sweep_var
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "sweep_var", "sweep_value", "trial", "nrmse_train", "nrmse_test"]
        )
        for r in report.trials:
            writer.writerow(
                [r.method, sweep_var, r.sweep_value, r.trial,
                 format(r.nrmse_train, ".17g"), format(r.nrmse_test, ".17g")]
            )


def write_report_json(path, report: BenchmarkReport) -> None:
    """Aggregate summary: per-cell means/stds plus reproduction metadata."""
    cells = {
        f"{method}@{sv}": asdict(stats)
        for (method, sv), stats in sorted(report.cells.items())
    }
    payload = {"metadata": report.metadata, "cells": cells}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trials_jsonl(path, report: BenchmarkReport) -> None:
    """Raw per-trial records, one JSON object per line."""
    with open(path, "w") as fh:
        for r in report.trials:
            fh.write(json.dumps(asdict(r), sort_keys=True))
            fh.write("\n")
