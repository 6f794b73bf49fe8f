"""TOML run configuration: loading, overrides, and typed section parsing.

A run file has up to six sections. [signals], [reservoir], [optimizer],
and [benchmark] drive the main workflows; [sensitivity], [beta_study],
and [equivalence_check] carry the extra knobs of those subcommands. Command
line overrides arrive as dotted ``key=value`` strings and are applied to
a deep copy, so the parsed file itself is never mutated.
"""

from __future__ import annotations

import copy

import tomli

from .benchmarks import BenchmarkSettings, ScenarioSpec, SignalGenerator
from .optimizer import OptimizerConfig
from .signals import MultiSineSignal


class ConfigError(Exception):
    """Raised for unreadable files, bad keys, or out-of-range values."""


def load_toml(path):
    """Parse a TOML file into a plain dict, mapping failures to ConfigError."""
    try:
        with open(path, "rb") as handle:
            return tomli.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!s}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path!s}: {exc}") from exc


def parse_override(text):
    """Split one ``dotted.key=value`` override into (path tuple, value).

    The value is parsed with TOML semantics so ``10``, ``1e-3``, ``true``
    and ``[5, 10]`` come back typed; anything that fails to parse is kept
    as a raw string, which covers unquoted names like ``tanh``.
    """
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    path = tuple(part.strip() for part in key.split("."))
    if any(not part for part in path):
        raise ConfigError(f"override {text!r} has an empty key segment")
    raw = raw.strip()
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return path, value


def apply_overrides(config, overrides):
    """Return a deep copy of config with each dotted override applied."""
    merged = copy.deepcopy(config)
    for text in overrides or ():
        path, value = parse_override(text)
        node = merged
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(
                    f"override {text!r} descends through non-table key {part!r}"
                )
        node[path[-1]] = value
    return merged


def _section(config, name):
    try:
        value = config[name]
    except KeyError:
        raise ConfigError(f"config is missing required section [{name}]") from None
    if not isinstance(value, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return value


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")


def _signal_from_rows(rows, where):
    if not isinstance(rows, list) or not rows:
        raise ConfigError(f"[signals].{where} must be a non-empty array of tables")
    omegas = []
    amplitudes = []
    phases = []
    for row in rows:
        if not isinstance(row, dict):
            raise ConfigError(f"entries of [signals].{where} must be tables")
        _check_keys(row, ("omega", "amplitude", "phase"), f"signals.{where}")
        try:
            omegas.append(float(row["omega"]))
            amplitudes.append(float(row["amplitude"]))
        except KeyError as exc:
            raise ConfigError(
                f"[signals].{where} entries need omega and amplitude"
            ) from exc
        phases.append(float(row.get("phase", 0.0)))
    try:
        return MultiSineSignal.from_arrays(omegas, amplitudes, phases)
    except ValueError as exc:
        raise ConfigError(f"[signals].{where}: {exc}") from exc


def signal_pair(config):
    """Build (input signal, target signal, tau, steps) from [signals]."""
    table = _section(config, "signals")
    _check_keys(table, ("tau", "steps", "input", "output"), "signals")
    u_signal = _signal_from_rows(table.get("input"), "input")
    y_signal = _signal_from_rows(table.get("output"), "output")
    tau = float(table.get("tau", 0.01))
    steps = int(table.get("steps", 3000))
    if tau <= 0.0:
        raise ConfigError("[signals].tau must be positive")
    if steps < 2:
        raise ConfigError("[signals].steps must be at least 2")
    return u_signal, y_signal, tau, steps


_OPTIMIZER_KEYS = (
    "n_modes",
    "beta1",
    "beta2",
    "gamma",
    "restarts",
    "lambda_init_low",
    "lambda_init_high",
    "constraint_margin",
    "max_inner_iters",
    "grad_tol",
    "seed",
    "uniform_weights",
    "readout_beta",
    "washout",
)


def optimizer_from(config, seed=None):
    """Build the optimizer configuration plus readout reporting knobs.

    Returns (OptimizerConfig, readout_beta, washout). ``seed``, when not
    None, overrides the file value (the --seed flag).
    """
    table = dict(_section(config, "optimizer"))
    _check_keys(table, _OPTIMIZER_KEYS, "optimizer")
    readout_beta = float(table.pop("readout_beta", 1e-8))
    washout = int(table.pop("washout", 0))
    if readout_beta < 0.0:
        raise ConfigError("[optimizer].readout_beta must be nonnegative")
    if washout < 0:
        raise ConfigError("[optimizer].washout must be nonnegative")
    if "n_modes" not in table:
        raise ConfigError("[optimizer].n_modes is required")
    if seed is not None:
        table["seed"] = seed
    table["n_modes"] = int(table["n_modes"])
    if "restarts" in table:
        table["restarts"] = int(table["restarts"])
    if "max_inner_iters" in table:
        table["max_inner_iters"] = int(table["max_inner_iters"])
    if "seed" in table:
        table["seed"] = int(table["seed"])
    try:
        opt = OptimizerConfig(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[optimizer]: {exc}") from exc
    return opt, readout_beta, washout


_RESERVOIR_KEYS = (
    "n",
    "edge_prob",
    "weighted",
    "target_max_eig",
    "spectral_radius",
    "gamma",
    "input_scale",
    "activation",
    "seed",
)


def reservoir_from(config, seed=None):
    """Parse [reservoir] into a plain dict of simulation parameters."""
    table = dict(_section(config, "reservoir"))
    _check_keys(table, _RESERVOIR_KEYS, "reservoir")
    if "n" not in table:
        raise ConfigError("[reservoir].n is required")
    out = {
        "n": int(table["n"]),
        "edge_prob": float(table.get("edge_prob", 0.5)),
        "weighted": bool(table.get("weighted", True)),
        "target_max_eig": float(table.get("target_max_eig", -0.1)),
        "spectral_radius": table.get("spectral_radius"),
        "gamma": float(table.get("gamma", 6.0)),
        "input_scale": float(table.get("input_scale", 1.0)),
        "activation": str(table.get("activation", "identity")),
        "seed": int(table.get("seed", 0)) if seed is None else int(seed),
    }
    if out["n"] < 1:
        raise ConfigError("[reservoir].n must be at least 1")
    if out["spectral_radius"] is not None:
        out["spectral_radius"] = float(out["spectral_radius"])
    if out["activation"] not in ("identity", "tanh", "relu"):
        raise ConfigError(
            "[reservoir].activation must be identity, tanh, or relu"
        )
    return out


_SETTINGS_KEYS = (
    "n_steps",
    "tau",
    "gamma",
    "ridge_beta",
    "washout",
    "edge_prob",
    "nl_input_scale",
    "nl_spectral_radius",
    "linear_weighted",
    "linear_target_max_eig",
    "restarts",
    "beta1",
    "beta2",
)

_GENERATOR_KEYS = (
    "freq_low",
    "freq_high",
    "min_separation",
    "amp_low",
    "amp_high",
)


def _settings_from(table, where):
    kwargs = {}
    for key in _SETTINGS_KEYS:
        if key in table:
            kwargs[key] = table[key]
    if "n_steps" in kwargs:
        kwargs["n_steps"] = int(kwargs["n_steps"])
    if "washout" in kwargs:
        kwargs["washout"] = int(kwargs["washout"])
    if "restarts" in kwargs:
        kwargs["restarts"] = int(kwargs["restarts"])
    try:
        return BenchmarkSettings(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def _generator_from(table, where):
    _check_keys(table, _GENERATOR_KEYS, where)
    try:
        return SignalGenerator(**{k: float(v) for k, v in table.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def scenario_from(config, seed=None):
    """Build (ScenarioSpec, BenchmarkSettings) from [benchmark]."""
    table = dict(_section(config, "benchmark"))
    scenario_keys = ("mode", "fixed_value", "sweep_values", "trials", "seed")
    _check_keys(
        table, scenario_keys + _SETTINGS_KEYS + ("signal_gen",), "benchmark"
    )
    for key in ("mode", "fixed_value", "sweep_values"):
        if key not in table:
            raise ConfigError(f"[benchmark].{key} is required")
    sweep_values = table["sweep_values"]
    if not isinstance(sweep_values, list) or not sweep_values:
        raise ConfigError("[benchmark].sweep_values must be a non-empty array")
    generator_table = table.pop("signal_gen", {})
    if not isinstance(generator_table, dict):
        raise ConfigError("[benchmark].signal_gen must be a table")
    generator = _generator_from(generator_table, "benchmark.signal_gen")
    settings = _settings_from(table, "benchmark")
    try:
        spec = ScenarioSpec(
            mode=str(table["mode"]),
            fixed_value=int(table["fixed_value"]),
            sweep_values=tuple(int(v) for v in sweep_values),
            trials=int(table.get("trials", 10)),
            seed=int(table.get("seed", 0)) if seed is None else int(seed),
            signal_gen=generator,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[benchmark]: {exc}") from exc
    return spec, settings


def sensitivity_from(config, seed=None):
    """Parse [sensitivity]: perturbation scales, trial count, seed."""
    table = _section(config, "sensitivity")
    _check_keys(table, ("epsilon_values", "trials", "seed"), "sensitivity")
    eps = table.get("epsilon_values", [0.0, 0.001, 0.01, 0.1, 1.0, 5.0])
    if not isinstance(eps, list) or not eps:
        raise ConfigError("[sensitivity].epsilon_values must be a non-empty array")
    eps = [float(v) for v in eps]
    if any(v < 0.0 for v in eps):
        raise ConfigError("[sensitivity].epsilon_values must be nonnegative")
    trials = int(table.get("trials", 20))
    if trials < 1:
        raise ConfigError("[sensitivity].trials must be at least 1")
    run_seed = int(table.get("seed", 0)) if seed is None else int(seed)
    return eps, trials, run_seed


def beta_study_from(config, seed=None):
    """Parse [beta_study]: penalty grids, mode count, trials, seed, restarts."""
    table = _section(config, "beta_study")
    keys = ("beta1_values", "beta2_values", "n_modes", "trials", "seed", "restarts")
    _check_keys(table, keys, "beta_study")
    for key in ("beta1_values", "beta2_values", "n_modes"):
        if key not in table:
            raise ConfigError(f"[beta_study].{key} is required")
    beta1_values = table["beta1_values"]
    beta2_values = table["beta2_values"]
    for name, values in (("beta1_values", beta1_values), ("beta2_values", beta2_values)):
        if not isinstance(values, list) or not values:
            raise ConfigError(f"[beta_study].{name} must be a non-empty array")
    out = {
        "beta1_values": [float(v) for v in beta1_values],
        "beta2_values": [float(v) for v in beta2_values],
        "n_modes": int(table["n_modes"]),
        "trials": int(table.get("trials", 5)),
        "seed": int(table.get("seed", 0)) if seed is None else int(seed),
        "restarts": int(table.get("restarts", 10)),
    }
    if out["n_modes"] < 1:
        raise ConfigError("[beta_study].n_modes must be at least 1")
    if out["trials"] < 1:
        raise ConfigError("[beta_study].trials must be at least 1")
    if out["restarts"] < 1:
        raise ConfigError("[beta_study].restarts must be at least 1")
    return out


def equivalence_check_from(config, seed=None):
    """Parse [equivalence_check]: instance count, node range, seed, ridge weight."""
    table = config.get("equivalence_check", {})
    if not isinstance(table, dict):
        raise ConfigError("config section [equivalence_check] must be a table")
    _check_keys(
        table, ("instances", "min_nodes", "max_nodes", "seed", "beta"), "equivalence_check"
    )
    out = {
        "instances": int(table.get("instances", 20)),
        "min_nodes": int(table.get("min_nodes", 2)),
        "max_nodes": int(table.get("max_nodes", 20)),
        "seed": int(table.get("seed", 0)) if seed is None else int(seed),
        "beta": float(table.get("beta", 0.0)),
    }
    if out["instances"] < 0:
        raise ConfigError("[equivalence_check].instances must be nonnegative")
    if not 1 <= out["min_nodes"] <= out["max_nodes"]:
        raise ConfigError("[equivalence_check] node range is invalid")
    if out["beta"] < 0.0:
        raise ConfigError("[equivalence_check].beta must be nonnegative")
    return out
