"""Road network geometry: polyline edges with speed limits and density weights.

Coordinates are planar metres.  Every edge carries the cyclist-density
weight used by the optimizer (1.0 by default, meaning no recorded cyclist
traffic); routes are sequences of edge ids whose geometry must chain
end-to-start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

Point = tuple[float, float]

_CHAIN_TOL = 1e-6


@dataclass(frozen=True)
class Edge:
    edge_id: str
    points: tuple[Point, ...]
    speed_limit: float
    density_weight: float = 1.0

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError(f"edge {self.edge_id!r}: needs at least 2 points")
        if self.speed_limit <= 0:
            raise ValueError(f"edge {self.edge_id!r}: speed_limit must be positive")
        if self.density_weight < 1.0:
            raise ValueError(f"edge {self.edge_id!r}: density_weight must be >= 1.0")
        if self.length <= 0:
            raise ValueError(f"edge {self.edge_id!r}: degenerate geometry (zero length)")

    @cached_property
    def _cumulative(self) -> tuple[float, ...]:
        acc = [0.0]
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            acc.append(acc[-1] + math.hypot(x1 - x0, y1 - y0))
        return tuple(acc)

    @property
    def length(self) -> float:
        return self._cumulative[-1]

    @property
    def start(self) -> Point:
        return self.points[0]

    @property
    def end(self) -> Point:
        return self.points[-1]

    def position_at(self, offset: float) -> Point:
        """Interpolated point at ``offset`` metres along the polyline."""
        if offset <= 0:
            return self.points[0]
        if offset >= self.length:
            return self.points[-1]
        cum = self._cumulative
        # linear scan; desk-scale edges have a handful of segments
        for i in range(len(cum) - 1):
            if offset <= cum[i + 1]:
                seg_len = cum[i + 1] - cum[i]
                t = (offset - cum[i]) / seg_len
                (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
                return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
        return self.points[-1]


@dataclass(frozen=True)
class RoadNetwork:
    edges: Mapping[str, Edge]

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise KeyError(f"unknown edge {edge_id!r}") from None

    def route_length(self, route: tuple[str, ...]) -> float:
        return sum(self.edge(eid).length for eid in route)

    def route_problems(self, route: tuple[str, ...], where: str) -> list[str]:
        """Validation diagnostics for a route: unknown edges, broken chaining."""
        problems = []
        for i, eid in enumerate(route):
            if eid not in self.edges:
                problems.append(f"{where}.route[{i}]: unknown edge {eid!r}")
        if problems:
            return problems
        if not route:
            return [f"{where}.route: must not be empty"]
        for i in range(len(route) - 1):
            tail = self.edges[route[i]].end
            head = self.edges[route[i + 1]].start
            if math.hypot(tail[0] - head[0], tail[1] - head[1]) > _CHAIN_TOL:
                problems.append(
                    f"{where}.route[{i}..{i + 1}]: edges {route[i]!r} and "
                    f"{route[i + 1]!r} do not connect"
                )
        return problems

    def with_density_weights(self, weights: Mapping[str, float]) -> "RoadNetwork":
        """Copy of the network with the given per-edge weights applied."""
        unknown = sorted(set(weights) - set(self.edges))
        if unknown:
            raise KeyError(f"density weights reference unknown edges: {unknown}")
        updated = {}
        for eid, edge in self.edges.items():
            if eid in weights:
                updated[eid] = Edge(
                    edge_id=edge.edge_id,
                    points=edge.points,
                    speed_limit=edge.speed_limit,
                    density_weight=weights[eid],
                )
            else:
                updated[eid] = edge
        return RoadNetwork(edges=updated)
