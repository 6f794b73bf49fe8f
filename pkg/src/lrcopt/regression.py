"""Readout training in the time and frequency domains.

Time domain: stack T state rows (plus a trailing ones column for the bias)
into Omega and solve the ridge problem

    kappa* = (Omega^T Omega + beta I)^{-1} Omega^T y.

Frequency domain: for K shared tones the steady-state match reduces to a
2K x N linear system.  With input components a_k cos(omega_k t + psi_k),
target b_k cos(omega_k t + phi_k), and per-mode gain/lag (M, theta),

    row 2k:   sum_i kappa_i s_i a_k M_ik cos(psi_k - theta_ik)  =  b_k cos(phi_k)
    row 2k+1: sum_i kappa_i s_i a_k M_ik sin(psi_k - theta_ik)  =  b_k sin(phi_k)

where s_i is the sign of the modal mask entry.  Expanding both sides in the
basis {cos(omega_k t), -sin(omega_k t)} shows these are exactly the cosine and
sine matching conditions, so time-domain and frequency-domain fits agree up to
finite-window effects (the two equivalence helpers below check precisely that).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .reservoir import ModalReservoir, StateMatrix, decouple, simulate, transfer_response
from .signals import MultiSineSignal, sample

CONDITION_LIMIT = 1e12

# Relative singular-value cutoff for the rank-revealing solves used by the
# coupled/decoupled comparison.  State matrices of larger reservoirs driven by
# a few tones have a wide dynamic range (the steady response spans only 2K
# dimensions; everything else is decaying transient), so the minimum-norm
# solution on the dominant subspace is the meaningful object to compare.
EQUIVALENCE_RCOND = 1e-5


class SingularSystem(RuntimeError):
    """Unregularized normal matrix is numerically singular (condition > 1e12)."""


class FrequencyMismatch(ValueError):
    """Input and target signals do not share the same frequency set."""


class ZeroReference(ValueError):
    """NRMSE is undefined for an all-zero reference."""


@dataclass(frozen=True)
class ReadoutWeights:
    """Trained readout: weight vector plus the domain it was fit in."""

    kappa: np.ndarray
    domain: str  # "time" or "frequency"

    def __post_init__(self):
        if self.domain not in ("time", "frequency"):
            raise ValueError("domain must be 'time' or 'frequency'")
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))


@dataclass(frozen=True)
class FrequencyDesignMatrix:
    """The 2K x N steady-state matching system and its targets.

    ``weights`` holds the per-frequency error weights W_k (1/omega by default,
    ones when uniform weighting is requested); rows 2k and 2k+1 of
    ``omega_tilde`` both carry weight W_k.
    """

    omega_tilde: np.ndarray
    b: np.ndarray
    omegas: np.ndarray
    weights: np.ndarray


def _as_matrix(states) -> np.ndarray:
    if isinstance(states, StateMatrix):
        return states.states
    return np.asarray(states, dtype=float)


def _ridge_solve(design: np.ndarray, target: np.ndarray, beta: float) -> np.ndarray:
    """Core ridge solve shared by both domains.

    beta > 0 uses a Cholesky factorization of the normal matrix (or its dual
    when the system is wide).  beta = 0 solves the least-squares problem by
    orthogonal factorization and raises SingularSystem when the normal matrix
    condition number would exceed CONDITION_LIMIT.
    """
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    n_rows, n_cols = design.shape
    if beta > 0.0:
        if n_cols <= n_rows:
            gram = design.T @ design + beta * np.eye(n_cols)
            return cho_solve(cho_factor(gram), design.T @ target)
        dual = design @ design.T + beta * np.eye(n_rows)
        return design.T @ cho_solve(cho_factor(dual), target)
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] == 0.0 or (sv[0] / sv[-1]) ** 2 > CONDITION_LIMIT:
        raise SingularSystem(
            "normal matrix is numerically singular; use beta > 0"
        )
    solution, *_ = np.linalg.lstsq(design, target, rcond=None)
    return solution


def _truncated_lstsq(design: np.ndarray, target: np.ndarray, rcond: float) -> np.ndarray:
    """Minimum-norm least squares restricted to the dominant singular subspace.

    Directions with singular value below rcond * sigma_max are dropped, which
    keeps the retained problem well conditioned regardless of how degenerate
    the full matrix is.  Raises SingularSystem only for an all-zero design.
    """
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    if s[0] == 0.0:
        raise SingularSystem("design matrix is zero")
    keep = s > rcond * s[0]
    return vt[keep].T @ ((u[:, keep].T @ target) / s[keep])


def ridge_fit(states, target, beta: float = 0.0) -> ReadoutWeights:
    """Ridge-regress a time-domain readout onto the target samples."""
    design = _as_matrix(states)
    target = np.asarray(target, dtype=float)
    if len(target) != design.shape[0]:
        raise ValueError("target length must match the number of state rows")
    return ReadoutWeights(kappa=_ridge_solve(design, target, beta), domain="time")


def time_domain_error(states, target, weights) -> float:
    """Root-mean-square residual (1/sqrt(T)) ||Omega kappa - y||."""
    design = _as_matrix(states)
    kappa = weights.kappa if isinstance(weights, ReadoutWeights) else np.asarray(weights)
    residual = design @ kappa - np.asarray(target, dtype=float)
    return float(np.linalg.norm(residual) / np.sqrt(design.shape[0]))


def nrmse(fit, target) -> float:
    """Normalized error ||fit - target|| / ||target||."""
    fit = np.asarray(fit, dtype=float)
    target = np.asarray(target, dtype=float)
    denom = np.linalg.norm(target)
    if denom == 0.0:
        raise ZeroReference("target norm is zero")
    return float(np.linalg.norm(fit - target) / denom)


def frequency_design(
    omegas: np.ndarray,
    amplitudes: np.ndarray,
    phases: np.ndarray,
    modal: ModalReservoir,
) -> np.ndarray:
    """The 2K x N matrix of steady-state cosine/sine response coefficients.

    Row 2k holds the coefficients of cos(omega_k t), row 2k+1 those of
    -sin(omega_k t), for a unit readout of each mode driven by the component
    a_k cos(omega_k t + psi_k).
    """
    resp = transfer_response(modal, omegas)
    angle = phases[:, None] - resp.theta  # (K, N)
    scaled = amplitudes[:, None] * resp.sign[None, :] * resp.m
    k = len(omegas)
    out = np.empty((2 * k, modal.n))
    out[0::2] = scaled * np.cos(angle)
    out[1::2] = scaled * np.sin(angle)
    return out


def build_frequency_system(
    modal: ModalReservoir,
    u_signal: MultiSineSignal,
    y_signal: MultiSineSignal,
    inverse_frequency_weights: bool = True,
) -> FrequencyDesignMatrix:
    """Assemble the steady-state matching system for a shared tone set.

    Raises FrequencyMismatch unless the two signals carry identical
    frequencies.
    """
    if not np.array_equal(u_signal.omegas, y_signal.omegas):
        raise FrequencyMismatch("input and target frequency sets differ")
    omegas = u_signal.omegas
    design = frequency_design(omegas, u_signal.amplitudes, u_signal.phases, modal)
    b = np.empty(2 * len(omegas))
    b[0::2] = y_signal.amplitudes * np.cos(y_signal.phases)
    b[1::2] = y_signal.amplitudes * np.sin(y_signal.phases)
    weights = 1.0 / omegas if inverse_frequency_weights else np.ones_like(omegas)
    return FrequencyDesignMatrix(omega_tilde=design, b=b, omegas=omegas, weights=weights)


def frequency_fit(system, b=None, beta: float = 0.0) -> ReadoutWeights:
    """Least-squares readout from the frequency-domain system.

    ``system`` is a FrequencyDesignMatrix, or a raw 2K x N matrix together
    with the 2K target vector ``b``.
    """
    if isinstance(system, FrequencyDesignMatrix):
        design, target = system.omega_tilde, system.b
    else:
        design, target = np.asarray(system, dtype=float), np.asarray(b, dtype=float)
    return ReadoutWeights(kappa=_ridge_solve(design, target, beta), domain="frequency")


def frequency_domain_error(system: FrequencyDesignMatrix, weights) -> float:
    """Weighted residual sqrt(sum_k W_k (eps_cos_k^2 + eps_sin_k^2))."""
    kappa = weights.kappa if isinstance(weights, ReadoutWeights) else np.asarray(weights)
    residual = system.omega_tilde @ kappa - system.b
    return float(np.sqrt(np.repeat(system.weights, 2) @ residual**2))


def fit_report(beta: float, nrmse_train: float, nrmse_test: float, weights: ReadoutWeights) -> dict:
    """JSON-ready summary of a trained readout."""
    return {
        "beta": float(beta),
        "nrmse_train": float(nrmse_train),
        "nrmse_test": float(nrmse_test),
        "kappa": [float(x) for x in weights.kappa],
        "domain": weights.domain,
    }


@dataclass(frozen=True)
class ModalEquivalenceCheck:
    """Coupled vs decoupled training on identical data.

    With an orthogonal mode basis the two ridge problems are related by a
    rotation, so the fit errors coincide and kappa_coupled = V kappa_decoupled
    (bias weights equal).
    """

    eps_coupled: float
    eps_decoupled: float
    kappa_residual: float
    bias_residual: float


def verify_modal_equivalence(top, u, y, beta: float = 0.0) -> ModalEquivalenceCheck:
    """Train the same readout in node and mode coordinates and compare.

    ``u`` and ``y`` are sampled series; ``y`` must be aligned with the state
    rows (times u.t0 + tau .. u.t0 + T tau).

    When beta = 0 both sides are solved by the truncated orthogonal route
    (EQUIVALENCE_RCOND) rather than ridge_fit.  The two state matrices differ by
    an orthogonal column rotation, so they share singular values; truncating
    at the same relative threshold keeps both solves on a well-conditioned
    common subspace where the minimum-norm solutions map onto each other
    exactly through V.  A plain unregularized solve would either raise or
    amplify rounding noise through the near-null transient directions.
    """
    modal, v = decouple(top)
    states_r = simulate(top, u, activation="identity", append_bias=True)
    states_q = simulate(modal, u, activation="identity", append_bias=True)
    target = np.asarray(y.values if hasattr(y, "values") else y, dtype=float)
    if beta > 0.0:
        fit_r = ridge_fit(states_r, target, beta)
        fit_q = ridge_fit(states_q, target, beta)
    else:
        fit_r = ReadoutWeights(
            kappa=_truncated_lstsq(states_r.states, target, EQUIVALENCE_RCOND),
            domain="time",
        )
        fit_q = ReadoutWeights(
            kappa=_truncated_lstsq(states_q.states, target, EQUIVALENCE_RCOND),
            domain="time",
        )
    eps_r = time_domain_error(states_r, target, fit_r)
    eps_q = time_domain_error(states_q, target, fit_q)
    kappa_residual = np.max(np.abs(fit_r.kappa[:-1] - v @ fit_q.kappa[:-1]))
    bias_residual = abs(fit_r.kappa[-1] - fit_q.kappa[-1])
    return ModalEquivalenceCheck(
        eps_coupled=eps_r,
        eps_decoupled=eps_q,
        kappa_residual=float(kappa_residual),
        bias_residual=float(bias_residual),
    )


@dataclass(frozen=True)
class DomainComparison:
    """Time-domain vs frequency-domain readout on one modal reservoir."""

    nrmse_time: float
    nrmse_frequency: float
    kappa_time: np.ndarray
    kappa_frequency: np.ndarray
    bias_weight: float

    @property
    def kappa_deviation(self) -> float:
        return float(np.max(np.abs(self.kappa_time[:-1] - self.kappa_frequency)))


def compare_readout_domains(
    modal: ModalReservoir,
    u_signal: MultiSineSignal,
    y_signal: MultiSineSignal,
    n_steps: int = 3000,
    tau: float = 0.01,
    washout: int = 500,
    beta: float = 1e-8,
) -> DomainComparison:
    """Fit the readout both ways on one simulation and compare the results.

    The time-domain fit uses post-washout simulated states with a bias
    column; the frequency-domain fit solves the 2K x N matching system.  Both
    NRMSEs are evaluated on the same post-washout window.

    When the window spans an integer number of periods of every tone, the
    time-domain normal matrix equals T/2 times the frequency-domain Gram
    (discrete orthogonality), so the two ridge problems coincide only if the
    frequency side shrinks with 2 beta / T.  That scaling is applied here;
    without it the comparison confounds domain agreement with unequal
    regularization.
    """
    u = sample(u_signal, n_steps, tau, 0.0)
    states = simulate(modal, u, activation="identity", append_bias=True)
    rows = states.states[washout:]
    times = states.times[washout:]
    target = y_signal.evaluate(times)
    fit_t = ridge_fit(rows, target, beta)
    nrmse_t = nrmse(rows @ fit_t.kappa, target)

    system = build_frequency_system(modal, u_signal, y_signal)
    fit_f = frequency_fit(system, beta=2.0 * beta / rows.shape[0])
    recon = rows[:, :-1] @ fit_f.kappa
    nrmse_f = nrmse(recon, target)
    return DomainComparison(
        nrmse_time=nrmse_t,
        nrmse_frequency=nrmse_f,
        kappa_time=fit_t.kappa,
        kappa_frequency=fit_f.kappa,
        bias_weight=float(fit_t.kappa[-1]),
    )
