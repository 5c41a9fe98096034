from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import torch
from torch.quasirandom import SobolEngine

from config.check_config import DEFAULT_BOX_U, DEFAULT_BOX_X, SAMPLE_COUNT
from src.errors import InvariantError
from src.expr import PointBatch
from src.problem.grid import DTYPE
from src.problem.model import OCProblem


Interval = Tuple[float, float]


def _interval(value: Sequence[float], name: str) -> Interval:
    lo, hi = float(value[0]), float(value[1])
    if not lo < hi:
        raise InvariantError(f"{name} interval must be nonempty, got [{lo}, {hi}]")
    return lo, hi


def expand_box(box, size: int, name: str) -> Tuple[Interval, ...]:
    items = list(box)
    if len(items) == 2 and all(isinstance(v, (int, float)) for v in items):
        items = [tuple(items)] * size
    if len(items) != size:
        raise InvariantError(f"{name} box has {len(items)} intervals, expected {size}")
    return tuple(_interval(item, name) for item in items)


@dataclass(frozen=True)
class SampleBox:
    """Domain over which a "for all (t, x, u)" hypothesis is sampled."""

    t_range: Interval
    x_box: Tuple[Interval, ...]
    u_box: Tuple[Interval, ...]
    count: int = SAMPLE_COUNT
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_range", _interval(self.t_range, "t"))
        object.__setattr__(self, "x_box", tuple(_interval(i, "x") for i in self.x_box))
        object.__setattr__(self, "u_box", tuple(_interval(i, "u") for i in self.u_box))
        if int(self.count) < 1:
            raise InvariantError(f"Sample count must be >= 1, got {self.count}")
        if not self.x_box or not self.u_box:
            raise InvariantError("Sample box needs at least one state and one control interval")

    @classmethod
    def for_problem(
        cls,
        p: OCProblem,
        box_u=DEFAULT_BOX_U,
        box_x=DEFAULT_BOX_X,
        count: int = SAMPLE_COUNT,
        seed: int = 0,
    ) -> "SampleBox":
        return cls(
            t_range=(p.a, p.b),
            x_box=expand_box(box_x, p.n, "x"),
            u_box=expand_box(box_u, p.r, "u"),
            count=count,
            seed=seed,
        )

    @property
    def n(self) -> int:
        return len(self.x_box)

    @property
    def r(self) -> int:
        return len(self.u_box)

    def bounds(self) -> Tuple[torch.Tensor, torch.Tensor]:
        intervals = [self.t_range, *self.x_box, *self.u_box]
        lo = torch.tensor([i[0] for i in intervals], dtype=DTYPE)
        hi = torch.tensor([i[1] for i in intervals], dtype=DTYPE)
        return lo, hi

    def u_bounds(self) -> Tuple[torch.Tensor, torch.Tensor]:
        lo = torch.tensor([i[0] for i in self.u_box], dtype=DTYPE)
        hi = torch.tensor([i[1] for i in self.u_box], dtype=DTYPE)
        return lo, hi

    def scaled(self, factor: float) -> "SampleBox":
        """u-box scaled about its center and sample count multiplied by ``factor``."""
        u_box = tuple(
            (0.5 * (lo + hi) - 0.5 * factor * (hi - lo), 0.5 * (lo + hi) + 0.5 * factor * (hi - lo)) for lo, hi in self.u_box
        )
        return replace(self, u_box=u_box, count=int(round(self.count * factor)))

    def with_seed(self, seed: int) -> "SampleBox":
        return replace(self, seed=int(seed))

    def sample(self) -> PointBatch:
        lo, hi = self.bounds()
        engine = SobolEngine(dimension=lo.shape[0], scramble=True, seed=self.seed)
        unit = engine.draw(self.count, dtype=DTYPE)
        points = lo + unit * (hi - lo)
        n = self.n
        return PointBatch(points[:, 0].contiguous(), points[:, 1 : 1 + n].contiguous(), points[:, 1 + n :].contiguous())

    def center(self) -> PointBatch:
        lo, hi = self.bounds()
        mid = 0.5 * (lo + hi)
        n = self.n
        return PointBatch(mid[:1], mid[1 : 1 + n].reshape(1, -1), mid[1 + n :].reshape(1, -1))

    def describe(self) -> dict:
        return {
            "t_range": list(self.t_range),
            "x_box": [list(i) for i in self.x_box],
            "u_box": [list(i) for i in self.u_box],
            "count": self.count,
            "seed": self.seed,
        }


def concat_batches(batches: Sequence[PointBatch]) -> PointBatch:
    return PointBatch(
        torch.cat([b.t for b in batches]),
        torch.cat([b.x for b in batches]),
        torch.cat([b.u for b in batches]),
    )
