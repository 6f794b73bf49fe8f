"""Eigenvalue-spectrum design for linear reservoirs on multi-sine tasks.

The full design problem has variables (lambda, kappa, M, theta), but M and
theta are closed-form functions of lambda, and for fixed lambda the best
kappa is a weighted ridge solve.  Eliminating kappa leaves a reduced cost

    F(lambda) = sum_k W_k (eps_cos_k^2 + eps_sin_k^2)
                + beta1 ||kappa*(lambda)||^2
                + beta2 / H(lambda)

over lambda alone, minimized by a projected quasi-Newton iteration inside the
stability box lambda_i <= min(0, 1 - omega_max/gamma) - margin.  Because
kappa*(lambda) minimizes the first two terms, the envelope theorem collapses
the gradient to the explicit lambda-derivative at fixed kappa, which is
available in closed form (each design-matrix column depends only on its own
lambda_i).  Multi-start over random initial spectra handles the nonconvexity.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .regression import frequency_design
from .reservoir import ModalReservoir, transfer_response
from .signals import MultiSineSignal
from .seeding import stream

GAP_FLOOR = 1e-12
ZERO_MASK_TOL = 1e-12


class InfeasibleLambdas(ValueError):
    """Eigenvalues violate the stability/low-pass constraints."""


class AllRestartsFailed(RuntimeError):
    """No restart converged; no result to report."""


class ZeroMaskEntry(UserWarning):
    """An input-mask entry is (numerically) zero, so that mode is untrainable."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the multi-start spectrum search.

    ``uniform_weights`` switches the error weighting from the default
    W_k = 1/omega_k to W_k = 1.
    """

    n_modes: int
    beta1: float = 1e-7
    beta2: float = 0.1
    gamma: float = 6.0
    restarts: int = 50
    lambda_init_low: float = -20.0
    lambda_init_high: float = 0.0
    constraint_margin: float = 1e-6
    max_inner_iters: int = 500
    grad_tol: float = 1e-8
    seed: int = 0
    uniform_weights: bool = False

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        if self.beta1 < 0.0 or self.beta2 < 0.0:
            raise ValueError("penalty weights must be nonnegative")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not self.lambda_init_low < self.lambda_init_high <= 0.0:
            raise ValueError("need lambda_init_low < lambda_init_high <= 0")
        if self.constraint_margin <= 0.0:
            raise ValueError("constraint_margin must be positive")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be at least 1")


@dataclass(frozen=True)
class RestartRecord:
    """One local solve: where it started, where it ended, how it did."""

    init_lambdas: np.ndarray
    final_error: float
    converged: bool
    final_lambdas: np.ndarray
    iterations: int


@dataclass(frozen=True)
class OptimizationResult:
    """Best spectrum found plus its readout and per-tone response tables."""

    lambdas: np.ndarray
    kappa: np.ndarray
    m: np.ndarray
    theta: np.ndarray
    lowest_error: float
    restart_history: tuple[RestartRecord, ...] = field(repr=False)


def harmonic_spread(lambdas) -> float:
    """Harmonic mean H of all pairwise eigenvalue gaps (both orders counted).

    Gaps are floored at GAP_FLOOR before inversion, so coincident eigenvalues
    yield H ~ 1e-12 and a huge 1/H penalty instead of a division by zero.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size < 2:
        raise ValueError("harmonic_spread needs at least two eigenvalues")
    gaps = np.abs(lam[:, None] - lam[None, :])
    off = gaps[~np.eye(lam.size, dtype=bool)]
    return float(lam.size / np.sum(1.0 / np.maximum(off, GAP_FLOOR)))


def feasible(lambdas, gamma: float, omega_max: float, constraint_margin: float = 1e-6) -> bool:
    """True iff every lambda_i <= 0 and omega_max + gamma (lambda_i - 1) <= -margin.

    The second condition keeps every mode's cutoff above the fastest task
    tone; the margin turns the strict inequality into a closed set.
    """
    lam = np.asarray(lambdas, dtype=float)
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    return bool(
        np.all(lam <= 0.0)
        and np.all(omega_max + gamma * (lam - 1.0) <= -constraint_margin)
    )


@dataclass(frozen=True)
class TaskContext:
    """Fixed problem data for the spectrum search: signals, mask, weighting."""

    u_signal: MultiSineSignal
    y_signal: MultiSineSignal
    c: np.ndarray
    gamma: float = 6.0
    uniform_weights: bool = False

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        if not np.array_equal(self.u_signal.omegas, self.y_signal.omegas):
            raise ValueError("input and target must share the same frequencies")
        if np.any(np.abs(self.c) < ZERO_MASK_TOL):
            warnings.warn(
                "input mask has a (numerically) zero entry; that mode cannot "
                "be driven and its kappa entry is meaningless",
                ZeroMaskEntry,
                stacklevel=3,
            )

    @property
    def omegas(self) -> np.ndarray:
        return self.u_signal.omegas

    @property
    def omega_max(self) -> float:
        return float(self.u_signal.omega_max)

    @property
    def weights(self) -> np.ndarray:
        if self.uniform_weights:
            return np.ones_like(self.omegas)
        return 1.0 / self.omegas

    @property
    def b(self) -> np.ndarray:
        """Target vector: rows (b_k cos phi_k, b_k sin phi_k) per tone."""
        out = np.empty(2 * len(self.omegas))
        out[0::2] = self.y_signal.amplitudes * np.cos(self.y_signal.phases)
        out[1::2] = self.y_signal.amplitudes * np.sin(self.y_signal.phases)
        return out

    def design(self, lambdas) -> np.ndarray:
        modal = ModalReservoir(lambdas=np.asarray(lambdas, dtype=float), c=self.c, gamma=self.gamma)
        return frequency_design(
            self.omegas, self.u_signal.amplitudes, self.u_signal.phases, modal
        )


def cost(lambdas, kappa, task: TaskContext, beta1: float = 0.0, beta2: float = 0.0,
         constraint_margin: float = 1e-6):
    """Weighted squared tone error + readout penalty + spread penalty.

    Returns (total, parts) where parts itemizes weighted_error_sq,
    kappa_penalty and spread_penalty.  The spread term is zero for a single
    mode (no pairs to spread).
    """
    lam = np.asarray(lambdas, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if not feasible(lam, task.gamma, task.omega_max, constraint_margin):
        raise InfeasibleLambdas(
            "lambdas violate the stability/low-pass constraints"
        )
    residual = task.design(lam) @ kappa - task.b
    w2 = np.repeat(task.weights, 2)
    parts = {
        "weighted_error_sq": float(w2 @ residual**2),
        "kappa_penalty": float(beta1 * kappa @ kappa),
        "spread_penalty": float(beta2 / harmonic_spread(lam)) if lam.size > 1 else 0.0,
    }
    return sum(parts.values()), parts


def _ridge_kappa(design: np.ndarray, b: np.ndarray, w2: np.ndarray, beta1: float) -> np.ndarray:
    """argmin_k sum_j w2_j (design k - b)_j^2 + beta1 ||k||^2."""
    sw = np.sqrt(w2)
    a = design * sw[:, None]
    bt = b * sw
    n_rows, n_cols = a.shape
    if beta1 > 0.0:
        if n_cols <= n_rows:
            return cho_solve(cho_factor(a.T @ a + beta1 * np.eye(n_cols)), a.T @ bt)
        return a.T @ cho_solve(cho_factor(a @ a.T + beta1 * np.eye(n_rows)), bt)
    solution, *_ = np.linalg.lstsq(a, bt, rcond=None)
    return solution


def _spread_inverse_grad(lam: np.ndarray) -> np.ndarray:
    """Gradient of 1/H = (2/N) sum_{j<z} 1/|gap| with the GAP_FLOOR flat spots."""
    diff = lam[:, None] - lam[None, :]
    agap = np.abs(diff)
    live = (agap > GAP_FLOOR) & ~np.eye(lam.size, dtype=bool)
    term = np.where(live, -np.sign(diff) / np.where(live, diff**2, 1.0), 0.0)
    return (2.0 / lam.size) * term.sum(axis=1)


def reduced_cost_and_grad(lambdas, task: TaskContext, beta1: float, beta2: float):
    """F(lambda) with kappa eliminated, and its closed-form gradient.

    The gradient of the error+penalty block is the envelope-theorem partial:
    2 kappa_i (w2 r)^T dX[:, i], with column derivatives

        dXcos = (gamma^2 (1 - lambda_i) Xcos + gamma omega Xsin) / rho^2
        dXsin = (gamma^2 (1 - lambda_i) Xsin - gamma omega Xcos) / rho^2

    where rho^2 = omega^2 + gamma^2 (lambda_i - 1)^2.  The spread term adds
    beta2 * d(1/H)/dlambda.
    """
    lam = np.asarray(lambdas, dtype=float)
    x = task.design(lam)
    w2 = np.repeat(task.weights, 2)
    kappa = _ridge_kappa(x, task.b, w2, beta1)
    residual = x @ kappa - task.b
    err_sq = float(w2 @ residual**2)
    total = err_sq + beta1 * float(kappa @ kappa)

    gamma = task.gamma
    om = task.omegas
    rho2 = om[:, None] ** 2 + gamma**2 * (lam[None, :] - 1.0) ** 2
    xc, xs = x[0::2], x[1::2]
    dxc = (gamma**2 * (1.0 - lam[None, :]) * xc + gamma * om[:, None] * xs) / rho2
    dxs = (gamma**2 * (1.0 - lam[None, :]) * xs - gamma * om[:, None] * xc) / rho2
    dx = np.empty_like(x)
    dx[0::2], dx[1::2] = dxc, dxs
    grad = 2.0 * kappa * (dx.T @ (w2 * residual))

    if lam.size > 1:
        total += beta2 / harmonic_spread(lam)
        grad = grad + beta2 * _spread_inverse_grad(lam)
    return total, grad, kappa, err_sq


def fd_gradient(lambdas, task: TaskContext, beta1: float, beta2: float,
                step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the reduced cost (validation reference)."""
    lam = np.asarray(lambdas, dtype=float)
    grad = np.empty_like(lam)
    for i in range(lam.size):
        up, dn = lam.copy(), lam.copy()
        up[i] += step
        dn[i] -= step
        fu = reduced_cost_and_grad(up, task, beta1, beta2)[0]
        fd = reduced_cost_and_grad(dn, task, beta1, beta2)[0]
        grad[i] = (fu - fd) / (2.0 * step)
    return grad


def _weighted_error(task: TaskContext, lam: np.ndarray, kappa: np.ndarray) -> float:
    residual = task.design(lam) @ kappa - task.b
    return float(np.sqrt(np.repeat(task.weights, 2) @ residual**2))


def _run_restart(index: int, task: TaskContext, config: OptimizerConfig,
                 lower: float, upper: float):
    rng = stream(config.seed, "optimizer", "restart", index)
    init = rng.uniform(config.lambda_init_low, config.lambda_init_high, config.n_modes)
    init = np.minimum(init, upper)

    def objective(lam):
        total, grad, _, _ = reduced_cost_and_grad(lam, task, config.beta1, config.beta2)
        return total, grad

    f0 = objective(init)[0]
    res = minimize(
        objective,
        init,
        jac=True,
        method="L-BFGS-B",
        bounds=[(lower, upper)] * config.n_modes,
        options={
            "maxiter": config.max_inner_iters,
            "gtol": config.grad_tol,
            "ftol": 1e-16,
        },
    )
    final_lam = np.asarray(res.x, dtype=float)
    _, _, kappa, _ = reduced_cost_and_grad(final_lam, task, config.beta1, config.beta2)
    final_error = _weighted_error(task, final_lam, kappa)
    converged = bool(res.success or res.fun < f0)
    record = RestartRecord(
        init_lambdas=init,
        final_error=final_error,
        converged=converged,
        final_lambdas=final_lam,
        iterations=int(res.nit),
    )
    return record, kappa


def optimize(config: OptimizerConfig, u_signal: MultiSineSignal,
             y_signal: MultiSineSignal, c, jobs: int = 1) -> OptimizationResult:
    """Multi-start search for the reservoir spectrum that best fits the task.

    Each restart draws a fresh initial spectrum from
    Uniform[lambda_init_low, lambda_init_high] (clamped into the feasible
    box), runs the projected quasi-Newton solve, and reports the weighted
    tone error of its endpoint.  The best converged restart wins; ties go to
    the earliest index.  Restarts use index-named seed streams, so results
    are identical for any ``jobs`` value.
    """
    task = TaskContext(
        u_signal=u_signal,
        y_signal=y_signal,
        c=c,
        gamma=config.gamma,
        uniform_weights=config.uniform_weights,
    )
    if len(task.c) != config.n_modes:
        raise ValueError("c must have n_modes entries")
    upper = min(0.0, 1.0 - task.omega_max / config.gamma) - config.constraint_margin
    lower = config.lambda_init_low - 5.0
    if upper <= lower:
        raise InfeasibleLambdas("feasible box is empty for these frequencies")

    run = lambda i: _run_restart(i, task, config, lower, upper)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, range(config.restarts)))
    else:
        outcomes = [run(i) for i in range(config.restarts)]

    records = tuple(rec for rec, _ in outcomes)
    best = None
    for i, (rec, kappa) in enumerate(outcomes):
        if rec.converged and (best is None or rec.final_error < records[best[0]].final_error):
            best = (i, kappa)
    if best is None:
        raise AllRestartsFailed("no restart converged")

    best_index, best_kappa = best
    best_rec = records[best_index]
    modal = ModalReservoir(lambdas=best_rec.final_lambdas, c=task.c, gamma=config.gamma)
    response = transfer_response(modal, task.omegas)
    return OptimizationResult(
        lambdas=best_rec.final_lambdas,
        kappa=np.asarray(best_kappa, dtype=float),
        m=response.m,
        theta=response.theta,
        lowest_error=best_rec.final_error,
        restart_history=records,
    )


def perturb(lambdas, epsilon_s: float, seed, *, gamma: float, omega_max: float,
            constraint_margin: float = 1e-6) -> np.ndarray:
    """Shift every eigenvalue by epsilon_s * delta_i, delta_i ~ Uniform(-1, 0).

    Perturbations are nonpositive, so a feasible spectrum stays feasible; the
    result is clamped to the feasibility box regardless as a guard.
    """
    if epsilon_s < 0.0:
        raise ValueError("epsilon_s must be nonnegative")
    lam = np.asarray(lambdas, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    delta = rng.uniform(-1.0, 0.0, lam.size)
    upper = min(0.0, 1.0 - omega_max / gamma) - constraint_margin
    return np.minimum(lam + epsilon_s * delta, upper)
