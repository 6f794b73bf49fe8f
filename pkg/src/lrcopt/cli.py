"""Command line entry point: seeded experiments in, artifacts out.

Each subcommand reads one TOML config, runs a library workflow, and
writes its results (CSV/JSON plus rendered figures and a manifest) into
--out. Exit codes: 0 success, 1 runtime or tolerance failure (equivalence
violations, --strict with failed trials), 2 config or usage errors,
3 when every optimizer restart failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import (
    METHODS,
    BenchmarkSettings,
    SignalGenerator,
    beta_weight_study,
    run_sweep,
    sensitivity_study,
    write_report_csv,
    write_report_json,
    write_trials_jsonl,
)
from .config import (
    ConfigError,
    apply_overrides,
    beta_study_from,
    load_toml,
    optimizer_from,
    reservoir_from,
    scenario_from,
    sensitivity_from,
    signal_pair,
    equivalence_check_from,
)
from .figures import (
    save_beta_grid,
    save_fit_overlay,
    save_sensitivity_curve,
    save_state_traces,
    save_sweep_curves,
)
from .optimizer import AllRestartsFailed, optimize
from .regression import compare_readout_domains, nrmse, ridge_fit, verify_modal_equivalence
from .reservoir import (
    ModalReservoir,
    ReservoirTopology,
    UnstableSimulation,
    decouple,
    generate_random_topology,
    simulate,
    steady_state_series,
    write_states_csv,
)
from .seeding import stream
from .signals import MultiSineSignal, sample

EPS_MATCH_TOL = 1e-8
KAPPA_MATCH_TOL = 1e-6
DOMAIN_REL_TOL = 1e-2


class OutputExists(Exception):
    """An artifact already exists and --force was not given."""


def _fail(message):
    print(f"error: {message}", file=sys.stderr)


def _prepare_out(out_dir, names, force):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not force:
        clashes = [name for name in names if (out / name).exists()]
        if clashes:
            raise OutputExists(
                f"refusing to overwrite {', '.join(clashes)} in {out} "
                "(pass --force to allow)"
            )
    return out


def _config_digest(path, overrides):
    digest = hashlib.sha256()
    if path is not None:
        digest.update(Path(path).read_bytes())
    for text in overrides or ():
        digest.update(b"\x00override\x00")
        digest.update(text.encode("utf-8"))
    return digest.hexdigest()


def _write_manifest(out, command, config_path, overrides, master_seed, jobs):
    manifest = {
        "command": command,
        "config_sha256": _config_digest(config_path, overrides),
        "jobs": jobs,
        "master_seed": master_seed,
        "overrides": list(overrides or ()),
        "tool_version": __version__,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _load_config(args):
    config = {} if args.config is None else load_toml(args.config)
    return apply_overrides(config, args.set)


def _write_fit_csv(path, times, target, fit):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("time,target,fit\n")
        for t, y, f in zip(times, target, fit):
            handle.write(f"{t:.17g},{y:.17g},{f:.17g}\n")


def _json_ready(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    return value


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_json_ready(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")


def _draw_mask(seed, n_modes):
    return stream(seed, "experiment", "c", n_modes).standard_normal(n_modes)


def _refit_fits(result, c, opt_cfg, u_signal, y_signal, steps, tau, beta, washout):
    """Reconstruct train/test fits from the optimized spectrum.

    Training refits a ridge readout (with bias) on the steady-state mode
    responses; testing continues the trajectory for another ``steps``
    samples with the readout frozen.
    """
    modal = ModalReservoir(lambdas=result.lambdas, c=c, gamma=opt_cfg.gamma)
    s_train = steady_state_series(modal, u_signal, steps, tau, append_bias=True)
    s_test = steady_state_series(
        modal, u_signal, steps, tau, t_start=steps * tau, append_bias=True
    )
    y_train = y_signal.evaluate(s_train.times)
    y_test = y_signal.evaluate(s_test.times)
    rows = s_train.states[washout:]
    fit = ridge_fit(rows, y_train[washout:], beta)
    train_fit = s_train.states @ fit.kappa
    test_fit = s_test.states @ fit.kappa
    return {
        "kappa": fit.kappa,
        "train": (s_train.times, y_train, train_fit),
        "test": (s_test.times, y_test, test_fit),
        "nrmse_train": nrmse(train_fit[washout:], y_train[washout:]),
        "nrmse_test": nrmse(test_fit, y_test),
    }


def cmd_optimize(args):
    config = _load_config(args)
    u_signal, y_signal, steps, tau = _signals_and_grid(config)
    opt_cfg, readout_beta, washout = optimizer_from(config, seed=args.seed)
    out = _prepare_out(
        args.out,
        ("optimize.json", "train_fit.csv", "test_fit.csv",
         "train_fit.png", "test_fit.png", "manifest.json"),
        args.force,
    )
    c = _draw_mask(opt_cfg.seed, opt_cfg.n_modes)
    result = optimize(opt_cfg, u_signal, y_signal, c, jobs=args.jobs)
    report = _refit_fits(
        result, c, opt_cfg, u_signal, y_signal, steps, tau, readout_beta, washout
    )
    payload = {
        "lambdas": result.lambdas,
        "input_mask": c,
        "kappa": report["kappa"],
        "frequency_kappa": result.kappa,
        "lowest_error": result.lowest_error,
        "nrmse_train": report["nrmse_train"],
        "nrmse_test": report["nrmse_test"],
        "readout_beta": readout_beta,
        "washout": washout,
        "restarts": [
            {
                "init_lambdas": record.init_lambdas,
                "final_lambdas": record.final_lambdas,
                "final_error": record.final_error,
                "converged": record.converged,
                "iterations": record.iterations,
            }
            for record in result.restart_history
        ],
    }
    _write_json(out / "optimize.json", payload)
    for split in ("train", "test"):
        times, target, fit = report[split]
        _write_fit_csv(out / f"{split}_fit.csv", times, target, fit)
        save_fit_overlay(
            out / f"{split}_fit.png", times, target, fit,
            title=f"{split} fit ({opt_cfg.n_modes} modes)",
        )
    _write_manifest(out, "optimize", args.config, args.set, opt_cfg.seed, args.jobs)
    print(
        f"optimize: train NRMSE {report['nrmse_train']:.6g}, "
        f"test NRMSE {report['nrmse_test']:.6g}, "
        f"weighted frequency error {result.lowest_error:.6g}"
    )
    return 0


def _signals_and_grid(config):
    u_signal, y_signal, tau, steps = signal_pair(config)
    return u_signal, y_signal, steps, tau


def cmd_simulate(args):
    config = _load_config(args)
    u_signal, _, steps, tau = _signals_and_grid(config)
    params = reservoir_from(config, seed=args.seed)
    out = _prepare_out(
        args.out, ("states.csv", "states.png", "manifest.json"), args.force
    )
    top = generate_random_topology(
        params["n"],
        params["edge_prob"],
        weighted=params["weighted"],
        target_max_eig=params["target_max_eig"],
        gamma=params["gamma"],
        seed=stream(params["seed"], "topology"),
        spectral_radius=params["spectral_radius"],
    )
    if params["input_scale"] != 1.0:
        top = ReservoirTopology(
            a=top.a, d=top.d * params["input_scale"], gamma=top.gamma
        )
    u = sample(u_signal, steps, tau)
    states = simulate(top, u, activation=params["activation"])
    write_states_csv(out / "states.csv", states)
    save_state_traces(
        out / "states.png", states.times, states.states,
        title=f"{params['activation']} reservoir states",
    )
    _write_manifest(
        out, "simulate", args.config, args.set, params["seed"], args.jobs
    )
    print(
        f"simulate: {states.n_steps} steps x {states.n_nodes} nodes, "
        f"final state max |r| = {np.max(np.abs(states.final_state)):.6g}"
    )
    return 0


def _coupled_instance(params, index):
    """One random topology plus aligned input/target series."""
    top_rng = stream(params["seed"], "equivalence", "topology", index)
    sig_rng = stream(params["seed"], "equivalence", "signals", index)
    n = int(top_rng.integers(params["min_nodes"], params["max_nodes"] + 1))
    top = generate_random_topology(n, 0.5, weighted=True, seed=top_rng)
    generator = SignalGenerator()
    u_signal, y_signal = generator.draw(sig_rng, 3)
    u = sample(u_signal, 3000, 0.01)
    y = sample(y_signal, 3000, 0.01, t0=0.01)
    return n, top, u, y


def _modal_instance(params, index):
    """One random stable modal reservoir plus window-commensurate signals.

    Frequencies sit on multiples of 2 pi / 25 so the post-washout window
    (2500 samples of 0.01 s) spans an integer number of periods of every
    tone, which is the regime where the time and frequency readouts solve
    the same problem.
    """
    rng = stream(params["seed"], "equivalence", "modal", index)
    n = int(rng.integers(2, 21))
    k = int(rng.integers(1, 6))
    lambdas = rng.uniform(-20.0, 0.0, size=n)
    c = rng.standard_normal(n)
    modal = ModalReservoir(lambdas=lambdas, c=c, gamma=6.0)
    base = 2.0 * np.pi / 25.0
    bins = np.sort(rng.choice(np.arange(2, 21), size=k, replace=False))
    u_signal = MultiSineSignal.from_arrays(
        bins * base,
        rng.uniform(0.5, 2.5, size=k),
        rng.uniform(-np.pi, np.pi, size=k),
    )
    y_signal = MultiSineSignal.from_arrays(
        bins * base,
        rng.uniform(0.5, 2.5, size=k),
        rng.uniform(-np.pi, np.pi, size=k),
    )
    return n, k, modal, u_signal, y_signal


def _run_self_test(params):
    """Negative control: a non-orthogonal transform must trip the check."""
    n, top, u, y = _coupled_instance(params, 0)
    modal, v = decouple(top)
    v_bad = v.copy()
    v_bad[:, 0] *= 1.5
    states_r = simulate(top, u, activation="identity", append_bias=True)
    states_q = simulate(modal, u, activation="identity", append_bias=True)
    target = np.asarray(y.values, dtype=float)
    fit_r = ridge_fit(states_r, target, 1e-8)
    fit_q = ridge_fit(states_q, target, 1e-8)
    residual = float(np.max(np.abs(fit_r.kappa[:-1] - v_bad @ fit_q.kappa[:-1])))
    print(
        f"self-test n={n}: corrupted-transform kappa residual {residual:.3e} "
        f"(tolerance {KAPPA_MATCH_TOL:g})"
    )
    if residual >= KAPPA_MATCH_TOL:
        print("self-test: corruption detected as expected")
        return 1
    print("self-test FAILED: corrupted transform went unnoticed", file=sys.stderr)
    return 0


def cmd_equivalence_check(args):
    config = _load_config(args)
    params = equivalence_check_from(config, seed=args.seed)
    if args.self_test:
        return _run_self_test(params)
    if params["instances"] == 0:
        print("warning: 0 instances requested; nothing checked", file=sys.stderr)
        return 0
    violations = 0
    for index in range(params["instances"]):
        n, top, u, y = _coupled_instance(params, index)
        check = verify_modal_equivalence(top, u, y, beta=params["beta"])
        eps_gap = abs(check.eps_coupled - check.eps_decoupled)
        ok1 = eps_gap < EPS_MATCH_TOL and check.kappa_residual < KAPPA_MATCH_TOL

        n2, k2, modal, u2, y2 = _modal_instance(params, index)
        comparison = compare_readout_domains(modal, u2, y2)
        denominator = max(comparison.nrmse_time, 1e-300)
        rel = abs(comparison.nrmse_frequency - comparison.nrmse_time) / denominator
        ok2 = rel < DOMAIN_REL_TOL

        status = "ok" if (ok1 and ok2) else "FAIL"
        print(
            f"instance {index:02d}: coupled n={n} |eps_c-eps_d|={eps_gap:.3e} "
            f"kappa_resid={check.kappa_residual:.3e} | modal n={n2} k={k2} "
            f"nrmse_rel_gap={rel:.3e} [{status}]"
        )
        if not (ok1 and ok2):
            violations += 1
    if violations:
        print(f"equivalence-check: {violations} violation(s)", file=sys.stderr)
        return 1
    print(f"equivalence-check: all {params['instances']} instances within tolerance")
    return 0


def cmd_sweep(args):
    config = _load_config(args)
    spec, settings = scenario_from(config, seed=args.seed)
    out = _prepare_out(
        args.out,
        ("report.csv", "summary.json", "trials.jsonl",
         "sweep_train.png", "sweep_test.png", "manifest.json"),
        args.force,
    )
    report = run_sweep(spec, settings, jobs=args.jobs)
    write_report_csv(out / "report.csv", report)
    write_report_json(out / "summary.json", report)
    write_trials_jsonl(out / "trials.jsonl", report)
    save_sweep_curves(out / "sweep_train.png", report, which="train")
    save_sweep_curves(out / "sweep_test.png", report, which="test")
    _write_manifest(out, "sweep", args.config, args.set, spec.seed, args.jobs)
    failures = 0
    for sweep_value in spec.sweep_values:
        for method in METHODS:
            stats = report.cell(method, sweep_value)
            failures += stats.failures
            print(
                f"sweep {spec.sweep_var}={sweep_value} {method}: "
                f"train {stats.mean_train:.4g} +/- {stats.std_train:.2g}, "
                f"test {stats.mean_test:.4g} +/- {stats.std_test:.2g} "
                f"({stats.n_trials} trials, {stats.failures} failed)"
            )
    if failures:
        print(f"sweep: {failures} failed trial(s) flagged", file=sys.stderr)
        if args.strict:
            return 1
    return 0


def cmd_sensitivity(args):
    config = _load_config(args)
    u_signal, y_signal, steps, tau = _signals_and_grid(config)
    opt_cfg, readout_beta, washout = optimizer_from(config)
    eps_values, trials, run_seed = sensitivity_from(config, seed=args.seed)
    out = _prepare_out(
        args.out,
        ("sensitivity.csv", "sensitivity.json", "sensitivity.png", "manifest.json"),
        args.force,
    )
    c = _draw_mask(opt_cfg.seed, opt_cfg.n_modes)
    result = optimize(opt_cfg, u_signal, y_signal, c, jobs=args.jobs)
    settings = BenchmarkSettings(
        n_steps=steps, tau=tau, gamma=opt_cfg.gamma,
        ridge_beta=readout_beta, washout=washout,
    )
    rows = sensitivity_study(
        result.lambdas, eps_values, trials, run_seed,
        u_signal=u_signal, y_signal=y_signal, c=c,
        gamma=opt_cfg.gamma, settings=settings,
    )
    with open(out / "sensitivity.csv", "w", encoding="utf-8", newline="") as handle:
        handle.write("epsilon,trial,nrmse\n")
        for row in rows:
            for trial, value in enumerate(row.values):
                handle.write(f"{row.epsilon:.17g},{trial},{value:.17g}\n")
    _write_json(
        out / "sensitivity.json",
        {
            "optimized_lambdas": result.lambdas,
            "rows": [
                {"epsilon": row.epsilon, "mean_nrmse": row.mean_nrmse,
                 "values": row.values}
                for row in rows
            ],
        },
    )
    save_sensitivity_curve(out / "sensitivity.png", rows)
    _write_manifest(out, "sensitivity", args.config, args.set, run_seed, args.jobs)
    for row in rows:
        print(
            f"sensitivity eps={row.epsilon:g}: mean NRMSE {row.mean_nrmse:.6g} "
            f"over {len(row.values)} draws"
        )
    return 0


def cmd_beta_study(args):
    config = _load_config(args)
    u_signal, y_signal, steps, tau = _signals_and_grid(config)
    params = beta_study_from(config, seed=args.seed)
    out = _prepare_out(
        args.out,
        ("beta_study.csv", "beta_study.json",
         "beta_study_train.png", "beta_study_weighted.png", "manifest.json"),
        args.force,
    )
    settings = BenchmarkSettings(n_steps=steps, tau=tau, restarts=params["restarts"])
    cells = beta_weight_study(
        params["beta1_values"], params["beta2_values"], u_signal, y_signal,
        n_modes=params["n_modes"], trials=params["trials"],
        seed=params["seed"], settings=settings, jobs=args.jobs,
    )
    with open(out / "beta_study.csv", "w", encoding="utf-8", newline="") as handle:
        handle.write("beta1,beta2,mean_weighted_error,mean_train_nrmse\n")
        for cell in cells:
            handle.write(
                f"{cell.beta1:.17g},{cell.beta2:.17g},"
                f"{cell.mean_weighted_error:.17g},{cell.mean_train_nrmse:.17g}\n"
            )
    _write_json(out / "beta_study.json", {"cells": [asdict(cell) for cell in cells]})
    save_beta_grid(
        out / "beta_study_train.png", cells, which="mean_train_nrmse",
        title="reconstruction train NRMSE",
    )
    save_beta_grid(
        out / "beta_study_weighted.png", cells, which="mean_weighted_error",
        title="weighted frequency error",
    )
    _write_manifest(out, "beta-study", args.config, args.set, params["seed"], args.jobs)
    for cell in cells:
        print(
            f"beta-study beta1={cell.beta1:g} beta2={cell.beta2:g}: "
            f"train NRMSE {cell.mean_train_nrmse:.6g}, "
            f"weighted error {cell.mean_weighted_error:.6g}"
        )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrcopt",
        description=(
            "Linear reservoir computers with optimized eigenvalue spectra: "
            "run optimizations, simulations, consistency checks, and "
            "benchmark sweeps from TOML configs."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_command(name, func, helptext, config_required=True):
        sub = subparsers.add_parser(name, help=helptext)
        sub.add_argument(
            "--config", type=Path, required=config_required, default=None,
            help="TOML run configuration",
        )
        sub.add_argument(
            "--out", type=Path, default=Path(f"runs/{name}"),
            help="output directory (created if absent)",
        )
        sub.add_argument(
            "--seed", type=int, default=None,
            help="override the config's master seed",
        )
        sub.add_argument(
            "--jobs", type=int, default=1, help="parallel worker cap"
        )
        sub.add_argument(
            "--force", action="store_true",
            help="allow overwriting existing artifacts",
        )
        sub.add_argument(
            "--strict", action="store_true",
            help="exit nonzero when any trial fails",
        )
        sub.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key (dotted path, repeatable)",
        )
        sub.set_defaults(func=func)
        return sub

    add_command("optimize", cmd_optimize, "optimize a reservoir spectrum")
    add_command("simulate", cmd_simulate, "integrate one random reservoir")
    check = add_command(
        "equivalence-check", cmd_equivalence_check,
        "verify coupled/decoupled and time/frequency readout equivalence",
        config_required=False,
    )
    check.add_argument(
        "--self-test", action="store_true",
        help="corrupt the transform on purpose; exit 1 confirms detection",
    )
    add_command("sweep", cmd_sweep, "benchmark four reservoir variants")
    add_command("sensitivity", cmd_sensitivity, "perturb an optimized spectrum")
    add_command("beta-study", cmd_beta_study, "map both penalty weights")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        _fail("--jobs must be at least 1")
        return 2
    if args.seed is not None and args.seed < 0:
        _fail("--seed must be nonnegative")
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail(str(exc))
        return 2
    except OutputExists as exc:
        _fail(str(exc))
        return 2
    except AllRestartsFailed as exc:
        _fail(f"all optimizer restarts failed: {exc}")
        return 3
    except UnstableSimulation as exc:
        _fail(f"simulation blew up: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
