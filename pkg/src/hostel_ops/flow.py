"""Capacitated directed graphs and Edmonds-Karp maximum flow.

Residual capacities live in paired slots: edge ``i`` of the network owns
slot ``2*i`` (forward) and slot ``2*i + 1`` (backward), so the reverse of a
slot ``k`` is always ``k ^ 1``.

BFS explores nodes in discovery order and scans each node's incident slots in
insertion order, which makes every solve deterministic for a given edge order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import StructuralError

Edge = tuple[int, int, int]


@dataclass(frozen=True)
class FlowNetwork:
    """Immutable directed network with integer capacities."""

    node_count: int
    edges: tuple[Edge, ...]
    source: int
    sink: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if self.node_count < 1:
            raise StructuralError("node_count must be positive")
        if self.source == self.sink:
            raise StructuralError("source and sink must differ")
        for node in (self.source, self.sink):
            if not 0 <= node < self.node_count:
                raise StructuralError(f"node id {node} out of range")
        for u, v, cap in self.edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise StructuralError(f"edge ({u}, {v}) has node id out of range")
            if u == v:
                raise StructuralError(f"self-loop on node {u}")
            if int(cap) != cap or cap < 0:
                raise StructuralError(f"capacity {cap!r} on ({u}, {v}) is not a non-negative integer")

    def cut_capacity(self, source_side: Iterable[int]) -> int:
        side = set(source_side)
        return sum(c for u, v, c in self.edges if u in side and v not in side)


@dataclass(frozen=True)
class FlowResult:
    max_flow_value: int
    edge_flows: tuple[int, ...]
    augmentation_count: int


class ResidualGraph:
    """Mutable residual graph that supports warm-started augmentation.

    Edges may be appended between calls to :meth:`augment`; the existing
    flow stays feasible, so each call continues from the previous maximum.
    """

    def __init__(self, node_count: int, source: int, sink: int):
        if source == sink:
            raise StructuralError("source and sink must differ")
        self.node_count = node_count
        self.source = source
        self.sink = sink
        self.head: list[int] = []
        self.cap: list[int] = []
        self.original: list[int] = []
        self.adj: list[list[int]] = [[] for _ in range(node_count)]
        self.flow_value = 0
        self.augmentations = 0

    @classmethod
    def from_network(cls, net: FlowNetwork) -> "ResidualGraph":
        g = cls(net.node_count, net.source, net.sink)
        for u, v, c in net.edges:
            g.add_edge(u, v, c)
        return g

    def add_node(self) -> int:
        self.adj.append([])
        self.node_count += 1
        return self.node_count - 1

    def add_edge(self, u: int, v: int, cap: int) -> int:
        """Append edge ``u -> v`` and return its edge index."""
        idx = len(self.original)
        self.head += [v, u]
        self.cap += [cap, 0]
        self.original.append(cap)
        self.adj[u].append(2 * idx)
        self.adj[v].append(2 * idx + 1)
        return idx

    def set_capacity(self, idx: int, cap: int) -> None:
        """Change an edge's capacity; only legal while it carries no more than ``cap`` flow."""
        flow = self.flow_on(idx)
        if flow > cap:
            raise StructuralError(f"edge {idx} carries {flow} > new capacity {cap}")
        self.original[idx] = cap
        self.cap[2 * idx] = cap - flow

    def flow_on(self, idx: int) -> int:
        return self.cap[2 * idx + 1]

    def _bfs(self) -> list[int] | None:
        parent_slot = [-1] * self.node_count
        seen = [False] * self.node_count
        seen[self.source] = True
        queue = deque([self.source])
        head, cap, adj, sink = self.head, self.cap, self.adj, self.sink
        while queue:
            u = queue.popleft()
            for slot in adj[u]:
                if cap[slot] > 0:
                    v = head[slot]
                    if not seen[v]:
                        seen[v] = True
                        parent_slot[v] = slot
                        if v == sink:
                            return parent_slot
                        queue.append(v)
        return None

    def augment(self) -> int:
        """Push shortest augmenting paths until none remain; return flow added."""
        added = 0
        while True:
            parent_slot = self._bfs()
            if parent_slot is None:
                return added
            bottleneck = None
            v = self.sink
            while v != self.source:
                slot = parent_slot[v]
                c = self.cap[slot]
                bottleneck = c if bottleneck is None or c < bottleneck else bottleneck
                v = self.head[slot ^ 1]
            v = self.sink
            while v != self.source:
                slot = parent_slot[v]
                self.cap[slot] -= bottleneck
                self.cap[slot ^ 1] += bottleneck
                v = self.head[slot ^ 1]
            added += bottleneck
            self.flow_value += bottleneck
            self.augmentations += 1

    def reachable(self) -> set[int]:
        seen = {self.source}
        queue = deque([self.source])
        while queue:
            u = queue.popleft()
            for slot in self.adj[u]:
                v = self.head[slot]
                if self.cap[slot] > 0 and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def dump(self) -> str:
        """Text dump, one edge per line: ``from to cap flow``."""
        lines = []
        for idx, cap in enumerate(self.original):
            u, v = self.head[2 * idx + 1], self.head[2 * idx]
            lines.append(f"{u} {v} {cap} {self.flow_on(idx)}")
        return "\n".join(lines) + ("\n" if lines else "")


def max_flow(net: FlowNetwork) -> FlowResult:
    """Maximum flow from ``net.source`` to ``net.sink`` by Edmonds-Karp."""
    g = ResidualGraph.from_network(net)
    g.augment()
    flows = tuple(g.flow_on(i) for i in range(len(net.edges)))
    return FlowResult(g.flow_value, flows, g.augmentations)


def _residual_from_result(net: FlowNetwork, result: FlowResult) -> ResidualGraph:
    if len(result.edge_flows) != len(net.edges):
        raise StructuralError("result does not match network edge count")
    g = ResidualGraph.from_network(net)
    balance = [0] * net.node_count
    for idx, ((u, v, c), f) in enumerate(zip(net.edges, result.edge_flows)):
        if not 0 <= f <= c:
            raise StructuralError(f"edge {idx} flow {f} outside [0, {c}]")
        g.cap[2 * idx] = c - f
        g.cap[2 * idx + 1] = f
        balance[u] -= f
        balance[v] += f
    for node, b in enumerate(balance):
        if node not in (net.source, net.sink) and b != 0:
            raise StructuralError(f"flow not conserved at node {node}")
    if balance[net.sink] != result.max_flow_value:
        raise StructuralError("max_flow_value disagrees with sink inflow")
    return g


def min_cut(net: FlowNetwork, result: FlowResult) -> set[int]:
    """Source side of a minimum cut: nodes reachable in the residual graph."""
    g = _residual_from_result(net, result)
    side = g.reachable()
    if net.sink in side:
        raise StructuralError("result is not a maximum flow (sink reachable)")
    return side


def residual_dump(net: FlowNetwork, result: FlowResult) -> str:
    return _residual_from_result(net, result).dump()


def network(node_count: int, edges: Sequence[Edge], source: int = 0, sink: int | None = None) -> FlowNetwork:
    """Convenience constructor; ``sink`` defaults to the last node."""
    return FlowNetwork(node_count, tuple(edges), source, node_count - 1 if sink is None else sink)
