"""Direct transcription of the Lagrange problem on a fixed grid.

The decision vector is ``y = [x_1 .. x_{N-1}, u_0 .. u_{N-1}]`` (row-major
blocks); x_0 = A and x_N = B are constants. The cost is the trapezoid rule
with u_i held on [t_i, t_{i+1}], and interval i carries the midpoint residual

    r_i = (x_{i+1} - x_i) / h_i - phi(t_i + h_i / 2, (x_i + x_{i+1}) / 2, u_i).
"""

from dataclasses import dataclass
from typing import Tuple

import torch

from src.errors import InvariantError
from src.expr import PointBatch
from src.problem.costing import default_pair, dynamics_residuals, pair_on_grid, trapezoid
from src.problem.grid import DTYPE, uniform_nodes
from src.problem.model import AdmissiblePair, OCProblem


@dataclass(frozen=True, eq=False)
class Transcription:
    problem: OCProblem
    nodes: torch.Tensor  # [N+1]

    def __post_init__(self) -> None:
        if self.nodes.dim() != 1 or self.nodes.shape[0] < 3:
            raise InvariantError(f"Transcription needs N >= 2 intervals, got {self.nodes.shape[0] - 1}")

    @property
    def num_intervals(self) -> int:
        return int(self.nodes.shape[0]) - 1

    @property
    def steps(self) -> torch.Tensor:
        return self.nodes[1:] - self.nodes[:-1]

    @property
    def size(self) -> int:
        p, N = self.problem, self.num_intervals
        return (N - 1) * p.n + N * p.r

    @property
    def mean_step(self) -> float:
        return float(self.steps.mean())

    def split(self, y: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """States at all N+1 nodes and the N interval controls."""
        p, N = self.problem, self.num_intervals
        if y.shape != (self.size,):
            raise InvariantError(f"Decision vector has shape {tuple(y.shape)}, expected ({self.size},)")
        inner = y[: (N - 1) * p.n].reshape(N - 1, p.n)
        states = torch.cat([p.A_tensor.reshape(1, -1), inner, p.B_tensor.reshape(1, -1)])
        controls = y[(N - 1) * p.n :].reshape(N, p.r)
        return states, controls

    def pack(self, states: torch.Tensor, controls: torch.Tensor) -> torch.Tensor:
        return torch.cat([states[1:-1].reshape(-1), controls[: self.num_intervals].reshape(-1)]).to(DTYPE)

    def initial_guess(self) -> torch.Tensor:
        pair = default_pair(self.problem, self.num_intervals, nodes=self.nodes)
        return self.pack(pair.x.values, pair.u.values)

    def pair(self, y: torch.Tensor) -> AdmissiblePair:
        states, controls = self.split(y)
        return pair_on_grid(self.nodes, states, controls)

    def _ends(self, states: torch.Tensor, controls: torch.Tensor) -> Tuple[PointBatch, PointBatch]:
        left = PointBatch(self.nodes[:-1], states[:-1], controls)
        right = PointBatch(self.nodes[1:], states[1:], controls)
        return left, right

    def _mid(self, states: torch.Tensor, controls: torch.Tensor) -> PointBatch:
        return PointBatch(0.5 * (self.nodes[:-1] + self.nodes[1:]), 0.5 * (states[:-1] + states[1:]), controls)

    def cost(self, y: torch.Tensor) -> float:
        states, controls = self.split(y)
        left, right = self._ends(states, controls)
        return trapezoid(self.steps, self.problem.lagrangian(left), self.problem.lagrangian(right))

    def residuals(self, y: torch.Tensor) -> torch.Tensor:
        """Collocation residuals, shape [N, n]."""
        states, controls = self.split(y)
        extended = torch.cat([controls, controls[-1:]])
        return dynamics_residuals(self.problem, self.nodes, states, extended)

    def cost_gradient(self, y: torch.Tensor) -> torch.Tensor:
        states, controls = self.split(y)
        left, right = self._ends(states, controls)
        g_left = self.problem.lagrangian_grad(left)
        g_right = self.problem.lagrangian_grad(right)
        half = (0.5 * self.steps).unsqueeze(1)
        d_states = torch.zeros_like(states)
        d_states[:-1] += half * g_left.d_dx
        d_states[1:] += half * g_right.d_dx
        d_controls = half * (g_left.d_du + g_right.d_du)
        return self.pack(d_states, d_controls)

    def residual_blocks(self, y: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Residuals [N, n], d phi/dx [N, n, n] and d phi/du [N, n, r] at the midpoints."""
        states, controls = self.split(y)
        mid = self._mid(states, controls)
        gradients = self.problem.dynamics_grad(mid)
        phi = torch.stack([g.value for g in gradients], dim=1)
        phi_x = torch.stack([g.d_dx for g in gradients], dim=1)
        phi_u = torch.stack([g.d_du for g in gradients], dim=1)
        slopes = (states[1:] - states[:-1]) / self.steps.unsqueeze(1)
        return slopes - phi, phi_x, phi_u

    def transpose_product(self, phi_x: torch.Tensor, phi_u: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        """J^T w for residual weights w of shape [N, n]."""
        inv_h = (1.0 / self.steps).unsqueeze(1)
        through_phi = 0.5 * torch.einsum("bkj,bk->bj", phi_x, weights)
        d_states = torch.zeros((self.num_intervals + 1, self.problem.n), dtype=DTYPE)
        d_states[:-1] += -weights * inv_h - through_phi
        d_states[1:] += weights * inv_h - through_phi
        d_controls = -torch.einsum("bkj,bk->bj", phi_u, weights)
        return self.pack(d_states, d_controls)

    def column_squares(self, phi_x: torch.Tensor, phi_u: torch.Tensor, row_weights: torch.Tensor) -> torch.Tensor:
        """Diagonal of J^T diag(row_weights) J, with one weight per interval."""
        n = self.problem.n
        eye = torch.eye(n, dtype=DTYPE).unsqueeze(0)
        inv_h = (1.0 / self.steps).reshape(-1, 1, 1)
        weight = row_weights.reshape(-1, 1)
        left = (-eye * inv_h - 0.5 * phi_x).pow(2).sum(dim=1) * weight
        right = (eye * inv_h - 0.5 * phi_x).pow(2).sum(dim=1) * weight
        d_states = torch.zeros((self.num_intervals + 1, n), dtype=DTYPE)
        d_states[:-1] += left
        d_states[1:] += right
        d_controls = phi_u.pow(2).sum(dim=1) * weight
        return self.pack(d_states, d_controls)


def transcribe(p: OCProblem, num_intervals: int) -> Transcription:
    if num_intervals < 2:
        raise InvariantError(f"Transcription needs N >= 2 intervals, got {num_intervals}")
    return Transcription(problem=p, nodes=uniform_nodes(p.a, p.b, num_intervals))
