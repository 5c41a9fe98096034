"""Augmented-Lagrangian solve of a transcribed problem.

The merit function is

    Phi(y) = cost(y) + sum_i h_i lambda_i . r_i + rho / 2 * sum_i h_i |r_i|^2

so that the multipliers approximate the adjoint psi directly. The outer loop
follows the usual bound-constrained Lagrangian schedule: with omega = 1/rho
and eta = rho^-0.1 the multipliers are updated when |r| <= eta and rho grows
otherwise. The inner loop is a backtracking line search along L-BFGS
directions preconditioned by the Gauss-Newton diagonal of the penalty.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import torch

from config.solver_config import SolverOptions, get_solver_options
from src.errors import EvaluationError, InvariantError
from src.problem.grid import DTYPE
from src.problem.model import AdmissiblePair
from src.solver.transcription import Transcription


logger = logging.getLogger(__name__)


EventHook = Callable[[Dict], None]

# Relative merit change treated as round-off by the line search.
ROUNDOFF = 1e-14


@dataclass(frozen=True, eq=False)
class SolveResult:
    pair: AdmissiblePair
    cost: float
    max_residual: float
    optimality: float
    iterations: int
    outer_iterations: int
    converged: bool
    control_sup_norm: float
    penalty: float
    multipliers: torch.Tensor = field(repr=False)  # [N, n]
    decision: torch.Tensor = field(repr=False)
    merit_trace: List[Tuple[float, float]] = field(repr=False, default_factory=list)
    message: str = ""

    def to_dict(self) -> Dict:
        return {
            "nodes": self.pair.num_intervals,
            "cost": self.cost,
            "max_residual": self.max_residual,
            "optimality": self.optimality,
            "iterations": self.iterations,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "control_sup_norm": self.control_sup_norm,
            "penalty": self.penalty,
            "message": self.message,
        }


class _Merit:
    """Merit value and gradient for frozen (lambda, rho)."""

    def __init__(self, tr: Transcription, multipliers: torch.Tensor, penalty: float):
        self.tr = tr
        self.multipliers = multipliers
        self.penalty = penalty
        self.row_weights = tr.steps.unsqueeze(1)

    def value(self, y: torch.Tensor) -> float:
        r = self.tr.residuals(y)
        linear = float(torch.sum(self.row_weights * self.multipliers * r))
        quadratic = 0.5 * self.penalty * float(torch.sum(self.row_weights * r * r))
        return self.tr.cost(y) + linear + quadratic

    def gradient(self, y: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Merit gradient, residuals and the preconditioner diagonal at ``y``."""
        r, phi_x, phi_u = self.tr.residual_blocks(y)
        weights = self.row_weights * (self.multipliers + self.penalty * r)
        grad = self.tr.cost_gradient(y) + self.tr.transpose_product(phi_x, phi_u, weights)
        diagonal = self.penalty * self.tr.column_squares(phi_x, phi_u, self.tr.steps) + self.tr.mean_step
        return grad, r, diagonal


def _two_loop(grad: torch.Tensor, diagonal: torch.Tensor, memory: List[Tuple[torch.Tensor, torch.Tensor]]) -> torch.Tensor:
    q = grad.clone()
    alphas = []
    for s, yk in reversed(memory):
        rho = 1.0 / float(torch.dot(yk, s))
        alpha = rho * float(torch.dot(s, q))
        q -= alpha * yk
        alphas.append((rho, alpha))
    r = q / diagonal
    for (s, yk), (rho, alpha) in zip(memory, reversed(alphas)):
        beta = rho * float(torch.dot(yk, r))
        r += s * (alpha - beta)
    return -r


def _evaluate(merit: _Merit, y: torch.Tensor):
    """(value, gradient, diagonal) at ``y`` or None when the merit is undefined there."""
    try:
        value = merit.value(y)
        if not math.isfinite(value):
            return None
        grad, _, diagonal = merit.gradient(y)
    except EvaluationError as exc:
        logger.debug(f"Rejected trial step: {exc}")
        return None
    return value, grad, diagonal


def _line_search(merit: _Merit, y, value: float, grad, direction, opts: SolverOptions):
    """Backtracking Armijo search; steps whose merit change is below round-off count when the gradient shrinks."""
    slope = float(torch.dot(grad, direction))
    noise = ROUNDOFF * max(1.0, abs(value))
    grad_norm = float(grad.abs().max())
    step = 1.0
    for _ in range(opts.max_backtracks):
        trial = y + step * direction
        evaluated = _evaluate(merit, trial)
        if evaluated is not None:
            trial_value, trial_grad, _ = evaluated
            if trial_value <= value + opts.armijo * step * slope:
                return trial, evaluated
            if trial_value <= value + noise and float(trial_grad.abs().max()) < grad_norm:
                return trial, evaluated
        step *= 0.5
    return None


def _minimize(
    merit: _Merit,
    y: torch.Tensor,
    tolerance: float,
    budget: int,
    opts: SolverOptions,
) -> Tuple[torch.Tensor, int, float, float, float]:
    """Inner loop. Returns (y, iterations, merit at start, merit at end, scaled gradient norm)."""
    scale = merit.tr.mean_step
    value = merit.value(y)
    start = value
    grad, _, diagonal = merit.gradient(y)
    memory: List[Tuple[torch.Tensor, torch.Tensor]] = []
    iterations = 0
    norm = float(grad.abs().max()) / scale
    while iterations < budget and norm > tolerance:
        if opts.direction == "lbfgs":
            direction = _two_loop(grad, diagonal, memory)
        else:
            direction = -grad / diagonal
        if float(torch.dot(grad, direction)) >= 0.0:
            memory.clear()
            direction = -grad / diagonal

        found = _line_search(merit, y, value, grad, direction, opts)
        iterations += 1
        if found is None:
            if memory:
                memory.clear()
                continue
            logger.debug(f"Line search stalled at |grad|/h {norm:.3e}")
            break

        trial, (trial_value, trial_grad, diagonal) = found
        s, yk = trial - y, trial_grad - grad
        if float(torch.dot(s, yk)) > 1e-12 * float(torch.dot(s, s)):
            memory.append((s, yk))
            if len(memory) > opts.lbfgs_memory:
                memory.pop(0)
        y, value, grad = trial, trial_value, trial_grad
        norm = float(grad.abs().max()) / scale
    return y, iterations, start, value, norm


def solve(
    tr: Transcription,
    init: Optional[torch.Tensor] = None,
    opts: Optional[SolverOptions] = None,
    on_outer: Optional[EventHook] = None,
) -> SolveResult:
    """Minimize the transcribed cost subject to the collocation residuals.

    Non-convergence is reported through ``converged`` and ``message``;
    evaluation errors at the initial iterate propagate.
    """
    opts = opts or get_solver_options()
    y = tr.initial_guess() if init is None else torch.as_tensor(init, dtype=DTYPE).clone()
    if y.shape != (tr.size,):
        raise InvariantError(f"Initial decision vector has length {y.numel()}, expected {tr.size}")

    p = tr.problem
    multipliers = torch.zeros((tr.num_intervals, p.n), dtype=DTYPE)
    penalty = float(opts.penalty_init)
    omega, eta = 1.0 / penalty, penalty**-0.1
    total, converged, message = 0, False, "outer iteration limit reached"
    trace: List[Tuple[float, float]] = []
    feasibility, optimality = float("inf"), float("inf")
    outer = 0

    for outer in range(1, opts.max_outer + 1):
        merit = _Merit(tr, multipliers, penalty)
        y, used, start, end, optimality = _minimize(merit, y, max(omega, opts.opt_tol), opts.max_iter - total, opts)
        total += used
        trace.append((start, end))
        r = tr.residuals(y)
        feasibility = float(r.abs().max())
        logger.info(
            f"Outer {outer}: merit {end:.10g}, |r| {feasibility:.3e}, |grad|/h {optimality:.3e}, rho {penalty:.1e}, inner {used}"
        )
        if on_outer is not None:
            on_outer(
                {
                    "event": "outer_iteration",
                    "outer": outer,
                    "merit": end,
                    "feasibility": feasibility,
                    "optimality": optimality,
                    "penalty": penalty,
                    "inner_iterations": used,
                }
            )

        if feasibility <= max(eta, opts.feas_tol):
            if feasibility <= opts.feas_tol and optimality <= opts.opt_tol:
                multipliers = multipliers + penalty * r
                converged, message = True, "converged"
                break
            multipliers = multipliers + penalty * r
            eta = eta / penalty**0.9
            omega = omega / penalty
        else:
            if penalty >= opts.penalty_max:
                message = "penalty limit reached"
                break
            penalty = min(penalty * opts.penalty_factor, opts.penalty_max)
            eta, omega = penalty**-0.1, 1.0 / penalty
        if total >= opts.max_iter:
            message = "iteration limit reached"
            break

    pair = tr.pair(y)
    result = SolveResult(
        pair=pair,
        cost=tr.cost(y),
        max_residual=feasibility,
        optimality=optimality,
        iterations=total,
        outer_iterations=outer,
        converged=converged,
        control_sup_norm=pair.control_sup_norm(),
        penalty=penalty,
        multipliers=multipliers,
        decision=y,
        merit_trace=trace,
        message=message,
    )
    if converged:
        logger.info(f"Solved '{p.name}' at N={tr.num_intervals}: cost {result.cost:.10g} in {total} iterations")
    else:
        logger.warning(f"Solve of '{p.name}' at N={tr.num_intervals} did not converge: {message}")
    return result
