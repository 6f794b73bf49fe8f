"""Continuous-time reservoirs driven by a scalar signal.

The coupled system is

    r'(t) = gamma * (-r(t) + f(A r(t) + d u(t))),

with A symmetric and its largest eigenvalue below 1 so the identity-activation
dynamics are stable.  Diagonalizing A = V diag(lambda) V^T turns the identity
case into N independent first-order low-pass filters

    q_i'(t) = gamma (lambda_i - 1) q_i(t) + gamma c_i u(t),      q = V^T r,

each with cutoff gamma * (1 - lambda_i), steady-state gain

    M_i(omega) = gamma |c_i| / sqrt(omega^2 + gamma^2 (lambda_i - 1)^2),

and phase lag theta_i(omega) = atan(omega / (gamma (1 - lambda_i))).  For a
multi-sine input with a known generator the identity dynamics are integrated
exactly (homogeneous exponential plus the sinusoidal particular solution);
tanh/relu activations use classical fixed-step RK4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .signals import MultiSineSignal, SampledSeries

STATE_LIMIT = 1e12
DEFAULT_WASHOUT = 500

ACTIVATIONS = ("identity", "tanh", "relu")


class EigenFailure(RuntimeError):
    """Symmetric eigendecomposition failed or lost orthogonality."""


class UnstableSimulation(RuntimeError):
    """A state magnitude exceeded the blow-up guard; configuration is not stable."""


@dataclass(frozen=True)
class ReservoirTopology:
    """Coupled reservoir: symmetric coupling matrix ``a``, input mask ``d``."""

    a: np.ndarray
    d: np.ndarray
    gamma: float = 6.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("coupling matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("coupling matrix must be symmetric")
        if d.shape != (a.shape[0],):
            raise ValueError("input mask length must match the matrix size")
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        if np.linalg.eigvalsh(a)[-1] >= 1.0:
            raise ValueError("largest eigenvalue must be below 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "gamma": self.gamma,
                "a": [float(x) for x in self.a.ravel()],
                "d": [float(x) for x in self.d],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ReservoirTopology":
        obj = json.loads(text)
        n = int(obj["n"])
        a = np.array(obj["a"], dtype=float).reshape(n, n)
        return cls(a=a, d=np.array(obj["d"], dtype=float), gamma=float(obj["gamma"]))


@dataclass(frozen=True)
class ModalReservoir:
    """Decoupled modes: eigenvalues ``lambdas`` (all < 1) and modal mask ``c``."""

    lambdas: np.ndarray
    c: np.ndarray
    gamma: float = 6.0

    def __post_init__(self):
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if lambdas.shape != c.shape or lambdas.ndim != 1:
            raise ValueError("lambdas and c must be one-dimensional and equal length")
        if np.any(lambdas >= 1.0):
            raise ValueError("all eigenvalues must be below 1")
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class StateMatrix:
    """Stacked response samples; row k is the state at ``t_start + (k+1) tau``.

    When ``bias_column`` is set the last column is identically one, ready for
    an affine readout.
    """

    states: np.ndarray
    tau: float
    bias_column: bool = False
    t_start: float = 0.0

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2:
            raise ValueError("states must be a 2-d array")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.bias_column and not np.all(states[:, -1] == 1.0):
            raise ValueError("bias column must be all ones")
        object.__setattr__(self, "states", states)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.states.shape[1] - (1 if self.bias_column else 0)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.tau * (np.arange(self.n_steps) + 1)

    def node_states(self) -> np.ndarray:
        """State columns without the bias column."""
        return self.states[:, :-1] if self.bias_column else self.states

    @property
    def final_state(self) -> np.ndarray:
        return self.node_states()[-1].copy()

    def with_bias(self) -> "StateMatrix":
        if self.bias_column:
            return self
        ones = np.ones((self.n_steps, 1))
        return StateMatrix(
            states=np.hstack([self.states, ones]),
            tau=self.tau,
            bias_column=True,
            t_start=self.t_start,
        )


@dataclass(frozen=True)
class FrequencyResponse:
    """Per-mode steady-state gain and phase lag at a set of frequencies.

    ``m[k, i]`` is the response magnitude of mode i at omegas[k] (the sign of
    the modal mask is folded out via its absolute value), ``theta[k, i]`` the
    nonnegative phase lag, and ``sign[i]`` records the half-turn flip applied
    when c_i < 0.
    """

    omegas: np.ndarray
    m: np.ndarray
    theta: np.ndarray
    sign: np.ndarray

    def __post_init__(self):
        if np.any(self.m < 0.0):
            raise ValueError("magnitudes must be nonnegative")
        if np.any(np.abs(self.theta) >= np.pi / 2):
            raise ValueError("phase lags must lie in (-pi/2, pi/2)")


def write_states_csv(path, states: StateMatrix) -> None:
    """Write a state matrix as CSV with columns r_1..r_N (and bias if present)."""
    header = [f"r_{i + 1}" for i in range(states.n_nodes)]
    if states.bias_column:
        header.append("bias")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in states.states:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def generate_random_topology(
    n: int,
    edge_prob: float,
    weighted: bool = True,
    target_max_eig: float = -0.1,
    gamma: float = 6.0,
    seed=0,
    spectral_radius: float | None = None,
) -> ReservoirTopology:
    """Random Erdos-Renyi coupling with its spectrum shifted for stability.

    Edges appear independently with probability ``edge_prob``; weights are
    U(0, 1) when ``weighted`` else 1.  A multiple of the identity is added so
    the largest eigenvalue lands exactly on ``target_max_eig`` (< 1).  The
    input mask is i.i.d. standard normal.

    When ``spectral_radius`` is given the shift is skipped and the raw
    coupling is rescaled so max |eigenvalue| equals that radius instead (the
    echo-state convention used by the nonlinear comparison reservoirs; an
    all-zero draw is left unscaled).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    if target_max_eig >= 1.0:
        raise ValueError("target_max_eig must be below 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mask = rng.random((n, n)) < edge_prob
    w = rng.random((n, n)) if weighted else np.ones((n, n))
    upper = np.triu(mask * w, k=1)
    a = upper + upper.T
    a = (a + a.T) / 2.0
    if spectral_radius is not None:
        if spectral_radius <= 0.0:
            raise ValueError("spectral_radius must be positive")
        radius = np.max(np.abs(np.linalg.eigvalsh(a))) if n > 1 else abs(a[0, 0])
        if radius > 0.0:
            a *= spectral_radius / radius
    else:
        top = np.linalg.eigvalsh(a)[-1]
        a[np.diag_indices(n)] += target_max_eig - top
    d = rng.standard_normal(n)
    return ReservoirTopology(a=a, d=d, gamma=gamma)


def decouple(top: ReservoirTopology) -> tuple[ModalReservoir, np.ndarray]:
    """Diagonalize a topology into independent modes.

    Returns ``(modal, v)`` with eigenvalues ascending, ``v`` orthogonal,
    ``a = v diag(lambdas) v^T`` and ``c = v^T d``.
    """
    try:
        lambdas, v = np.linalg.eigh(top.a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    defect = np.max(np.abs(v.T @ v - np.eye(top.n)))
    if defect >= 1e-10:
        raise EigenFailure(f"eigenbasis lost orthogonality (defect {defect:.3e})")
    modal = ModalReservoir(lambdas=lambdas, c=v.T @ top.d, gamma=top.gamma)
    return modal, v


def recouple(modal: ModalReservoir, seed=0) -> ReservoirTopology:
    """Embed modes into a coupled topology through a random orthogonal basis.

    The basis is the QR factor of a standard normal matrix with the sign of
    diag(R) fixed, so equal seeds give equal topologies.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = modal.n
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    a = (q * modal.lambdas) @ q.T
    a = (a + a.T) / 2.0
    return ReservoirTopology(a=a, d=q @ modal.c, gamma=modal.gamma)


def transfer_response(modal: ModalReservoir, omegas) -> FrequencyResponse:
    """Closed-form gain and lag of every mode at the given frequencies."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas <= 0.0):
        raise ValueError("frequencies must be positive")
    gamma = modal.gamma
    decay = gamma * (1.0 - modal.lambdas)  # cutoff rate, > 0
    rho2 = omegas[:, None] ** 2 + decay[None, :] ** 2
    m = gamma * np.abs(modal.c)[None, :] / np.sqrt(rho2)
    theta = np.arctan(omegas[:, None] / decay[None, :])
    sign = np.where(modal.c < 0.0, -1.0, 1.0)
    return FrequencyResponse(omegas=omegas, m=m, theta=theta, sign=sign)


def steady_state_series(
    modal: ModalReservoir,
    u_signal: MultiSineSignal,
    n_steps: int,
    tau: float,
    t_start: float = 0.0,
    append_bias: bool = False,
) -> StateMatrix:
    """Analytic steady-state mode responses on the simulation grid.

    Mode i responds to the component a_k cos(omega_k t + psi_k) with
    sign(c_i) a_k M_ik cos(omega_k t + psi_k - theta_ik); rows line up with
    ``simulate`` (times t_start + tau .. t_start + n_steps tau).
    """
    times = t_start + tau * (np.arange(n_steps) + 1)
    q = np.zeros((n_steps, modal.n))
    if len(u_signal) > 0:
        resp = transfer_response(modal, u_signal.omegas)
        amps = u_signal.amplitudes
        psi = u_signal.phases
        for k in range(len(u_signal)):
            phase = u_signal.omegas[k] * times[:, None] + psi[k] - resp.theta[k][None, :]
            q += amps[k] * resp.sign[None, :] * resp.m[k][None, :] * np.cos(phase)
    out = StateMatrix(states=q, tau=tau, bias_column=False, t_start=t_start)
    return out.with_bias() if append_bias else out


def _check_bounded(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > STATE_LIMIT:
        raise UnstableSimulation(
            "state magnitude exceeded the blow-up guard; "
            "the configuration is not stable"
        )


def _exact_modal_trajectory(
    lambdas: np.ndarray,
    c: np.ndarray,
    gamma: float,
    signal: MultiSineSignal,
    q0: np.ndarray,
    times: np.ndarray,
    t_start: float,
) -> np.ndarray:
    """Exact identity-activation trajectory for a multi-sine input."""
    alpha = gamma * (lambdas - 1.0)
    decay = np.exp(np.outer(times - t_start, alpha))
    if len(signal) == 0:
        return decay * q0[None, :]
    omegas = signal.omegas
    phasor0 = signal.amplitudes * np.exp(1j * signal.phases)
    gains = gamma * c[:, None] / (1j * omegas[None, :] - alpha[:, None])  # (N, K)
    carriers = np.exp(1j * np.outer(times, omegas)) * phasor0[None, :]  # (T, K)
    particular = (carriers @ gains.T).real
    carrier0 = np.exp(1j * omegas * t_start) * phasor0
    particular0 = (gains @ carrier0).real
    return decay * (q0 - particular0)[None, :] + particular


def _foh_modal_trajectory(
    lambdas: np.ndarray,
    c: np.ndarray,
    gamma: float,
    u_values: np.ndarray,
    q0: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Identity trajectory from raw samples via first-order-hold convolution."""
    alpha = gamma * (lambdas - 1.0)
    e = np.exp(alpha * tau)
    g0 = np.where(alpha != 0.0, (e - 1.0) / alpha, tau)
    g1 = np.where(alpha != 0.0, (e - 1.0 - alpha * tau) / (alpha**2), tau**2 / 2.0)
    u_next = np.append(u_values[1:], u_values[-1])
    n_steps = len(u_values)
    q = np.empty((n_steps, len(lambdas)))
    state = q0.astype(float).copy()
    for k in range(n_steps):
        du = u_next[k] - u_values[k]
        state = e * state + gamma * c * (g0 * u_values[k] + (g1 / tau) * du)
        q[k] = state
    return q


def _rk4_trajectory(
    a: np.ndarray,
    d: np.ndarray,
    gamma: float,
    activation: str,
    u_start: np.ndarray,
    u_mid: np.ndarray,
    u_end: np.ndarray,
    r0: np.ndarray,
    tau: float,
) -> np.ndarray:
    act = {"tanh": np.tanh, "relu": lambda x: np.maximum(x, 0.0)}[activation]

    def f(r, u):
        return gamma * (-r + act(a @ r + d * u))

    n_steps = len(u_start)
    out = np.empty((n_steps, len(r0)))
    state = r0.astype(float).copy()
    for k in range(n_steps):
        k1 = f(state, u_start[k])
        k2 = f(state + 0.5 * tau * k1, u_mid[k])
        k3 = f(state + 0.5 * tau * k2, u_mid[k])
        k4 = f(state + tau * k3, u_end[k])
        state = state + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > STATE_LIMIT:
            raise UnstableSimulation(
                "state magnitude exceeded the blow-up guard during integration"
            )
        out[k] = state
    return out


def simulate(
    system,
    u: SampledSeries,
    r0: np.ndarray | None = None,
    activation: str = "identity",
    append_bias: bool = False,
) -> StateMatrix:
    """Integrate the reservoir over the span of ``u``.

    ``system`` may be a ReservoirTopology (coupled) or a ModalReservoir
    (independent modes).  Starting from ``r0`` at ``u.t0``, one row is
    produced per sample, at times ``u.t0 + tau .. u.t0 + len(u) * tau``.

    Identity activation with a known multi-sine source is integrated exactly;
    raw samples fall back to first-order-hold convolution.  tanh and relu use
    classical RK4 with step tau (midpoint inputs from the source when known,
    linear interpolation otherwise).
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    coupled = isinstance(system, ReservoirTopology)
    if not coupled and not isinstance(system, ModalReservoir):
        raise TypeError("system must be a ReservoirTopology or ModalReservoir")
    n = system.n
    gamma = system.gamma
    tau = u.tau
    n_steps = len(u)
    times = u.t0 + tau * (np.arange(n_steps) + 1)
    if r0 is None:
        r0 = np.zeros(n)
    r0 = np.asarray(r0, dtype=float)
    if r0.shape != (n,):
        raise ValueError("r0 length must match the system size")

    if activation == "identity":
        if coupled:
            modal, v = decouple(system)
            lambdas, c, q0 = modal.lambdas, modal.c, v.T @ r0
        else:
            lambdas, c, q0 = system.lambdas, system.c, r0
        if u.source is not None:
            q = _exact_modal_trajectory(lambdas, c, gamma, u.source, q0, times, u.t0)
        else:
            q = _foh_modal_trajectory(lambdas, c, gamma, u.values, q0, tau)
        states = q @ v.T if coupled else q
        _check_bounded(states)
    else:
        a = system.a if coupled else np.diag(system.lambdas)
        d = system.d if coupled else system.c
        if u.source is not None:
            u_start = u.source.evaluate(times - tau)
            u_mid = u.source.evaluate(times - tau / 2.0)
            u_end = u.source.evaluate(times)
        else:
            u_start = u.values
            u_end = np.append(u.values[1:], u.values[-1])
            u_mid = 0.5 * (u_start + u_end)
        states = _rk4_trajectory(a, d, gamma, activation, u_start, u_mid, u_end, r0, tau)

    out = StateMatrix(states=states, tau=tau, bias_column=False, t_start=u.t0)
    return out.with_bias() if append_bias else out
