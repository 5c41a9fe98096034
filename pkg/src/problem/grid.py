from dataclasses import dataclass
from typing import Sequence, Union

import torch

from src.errors import InvariantError


DTYPE = torch.float64
# Queries within this many ulps (relative) of a node are treated as sitting on it.
SNAP_ULPS = 64.0


def as_tensor(values, dim: int = 1) -> torch.Tensor:
    tensor = torch.as_tensor(values, dtype=DTYPE)
    if dim == 1 and tensor.dim() == 0:
        tensor = tensor.reshape(1)
    return tensor


@dataclass(frozen=True, eq=False)
class GridFn:
    """Values attached to a strictly increasing node vector.

    ``values`` has one row per node. States read it piecewise-linearly;
    controls and speed profiles read it piecewise-constantly from the left
    node, in which case the last row only mirrors row ``N-1``.
    """

    nodes: torch.Tensor  # [N+1]
    values: torch.Tensor  # [N+1, d]

    def __post_init__(self) -> None:
        nodes = as_tensor(self.nodes)
        values = as_tensor(self.values, dim=2)
        if values.dim() == 1:
            values = values.reshape(-1, 1)
        if nodes.dim() != 1 or nodes.shape[0] < 2:
            raise InvariantError("GridFn needs at least two nodes")
        if values.dim() != 2 or values.shape[0] != nodes.shape[0]:
            raise InvariantError(
                f"GridFn values must have one row per node: {tuple(values.shape)} vs {nodes.shape[0]} nodes"
            )
        if not bool(torch.all(nodes[1:] > nodes[:-1])):
            raise InvariantError("GridFn nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, a: float, b: float, num_intervals: int, values=None, dim: int = 1) -> "GridFn":
        if num_intervals < 1:
            raise InvariantError(f"Grid needs at least one interval, got {num_intervals}")
        nodes = uniform_nodes(a, b, num_intervals)
        if values is None:
            values = torch.zeros((num_intervals + 1, dim), dtype=DTYPE)
        return cls(nodes, values)

    @classmethod
    def constant(cls, nodes: torch.Tensor, value: Union[float, Sequence[float]]) -> "GridFn":
        row = as_tensor(value)
        nodes = as_tensor(nodes)
        return cls(nodes, row.reshape(1, -1).repeat(nodes.shape[0], 1))

    @property
    def num_intervals(self) -> int:
        return int(self.nodes.shape[0]) - 1

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def steps(self) -> torch.Tensor:
        return self.nodes[1:] - self.nodes[:-1]

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    def cell_values(self) -> torch.Tensor:
        """Left-node values of the N intervals."""
        return self.values[:-1]

    def snap(self, query: torch.Tensor) -> torch.Tensor:
        """Move queries lying within round-off of a node onto that node."""
        query = as_tensor(query)
        scale = torch.clamp(torch.maximum(self.nodes.abs().max(), query.abs().max()), min=1.0)
        tol = SNAP_ULPS * torch.finfo(DTYPE).eps * scale
        right = torch.clamp(torch.searchsorted(self.nodes, query), max=self.num_intervals)
        left = torch.clamp(right - 1, min=0)
        near_right = (self.nodes[right] - query).abs() <= tol
        near_left = (self.nodes[left] - query).abs() <= tol
        snapped = torch.where(near_left, self.nodes[left], query)
        return torch.where(near_right, self.nodes[right], snapped)

    def locate(self, query: torch.Tensor) -> torch.Tensor:
        """Interval index i with nodes[i] <= query < nodes[i+1], clamped to [0, N-1]."""
        query = self.snap(query)
        idx = torch.searchsorted(self.nodes, query, right=True) - 1
        return torch.clamp(idx, 0, self.num_intervals - 1)

    def interp_linear(self, query: torch.Tensor) -> torch.Tensor:
        query = self.snap(query)
        idx = torch.clamp(torch.searchsorted(self.nodes, query, right=True) - 1, 0, self.num_intervals - 1)
        left_t = self.nodes[idx]
        right_t = self.nodes[idx + 1]
        theta = ((query - left_t) / (right_t - left_t)).unsqueeze(1)
        left_v = self.values[idx]
        right_v = self.values[idx + 1]
        result = left_v + theta * (right_v - left_v)
        on_right = (query == right_t).unsqueeze(1)
        return torch.where(on_right, right_v, result)

    def lookup_left(self, query: torch.Tensor) -> torch.Tensor:
        return self.values[self.locate(query)]

    def sup_norm(self) -> float:
        return float(self.values.abs().max())


def uniform_nodes(a: float, b: float, num_intervals: int) -> torch.Tensor:
    nodes = torch.linspace(float(a), float(b), num_intervals + 1, dtype=DTYPE)
    nodes[0] = float(a)
    nodes[-1] = float(b)
    return nodes


def control_rows(cells: torch.Tensor) -> torch.Tensor:
    """Append the mirrored last row to N interval values."""
    cells = as_tensor(cells, dim=2)
    if cells.dim() == 1:
        cells = cells.reshape(-1, 1)
    return torch.cat([cells, cells[-1:]], dim=0)
