"""Integral maximum flow and minimum-cost flow.

Capacities are small integers in every network this package builds (unit
arcs, class ceilings, per-center counts), so plain BFS augmentation and
successive shortest paths are enough.  Both routines return integral flows.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

__all__ = ["FlowNetwork", "FlowResult", "FlowError", "max_flow", "min_cost_flow", "to_dot"]


class FlowError(ValueError):
    pass


@dataclass
class FlowNetwork:
    """Directed network with a designated source and sink.

    Arcs are stored in insertion order; that order breaks ties between
    equally good augmenting paths.
    """

    n_nodes: int = 2
    source: int = 0
    sink: int = 1
    arcs: list[tuple[int, int, int, float]] = field(default_factory=list)
    labels: dict[int, str] = field(default_factory=dict)

    def add_node(self, label: str | None = None) -> int:
        self.n_nodes += 1
        if label is not None:
            self.labels[self.n_nodes - 1] = label
        return self.n_nodes - 1

    def add_arc(self, u: int, v: int, capacity: int, cost: float = 0.0) -> int:
        if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
            raise FlowError(f"arc ({u},{v}) references an unknown node")
        if v == self.source:
            raise FlowError("arcs into the source are not allowed")
        if u == self.sink:
            raise FlowError("arcs out of the sink are not allowed")
        if isinstance(capacity, float):
            if not capacity.is_integer():
                raise FlowError(f"capacity {capacity} is not integral")
            capacity = int(capacity)
        if capacity < 0:
            raise FlowError("negative capacity")
        self.arcs.append((u, v, int(capacity), float(cost)))
        return len(self.arcs) - 1


@dataclass
class FlowResult:
    value: int
    flow: list[int]
    cost: float = 0.0

    def check(self, net: FlowNetwork) -> None:
        """Assert integrality, capacity and conservation."""
        excess = [0] * net.n_nodes
        for f, (u, v, cap, _) in zip(self.flow, net.arcs):
            if not isinstance(f, int) or not 0 <= f <= cap:
                raise AssertionError(f"flow {f} violates capacity {cap} on ({u},{v})")
            excess[u] -= f
            excess[v] += f
        for node, e in enumerate(excess):
            if node not in (net.source, net.sink) and e != 0:
                raise AssertionError(f"conservation fails at node {node}")
        if excess[net.sink] != self.value:
            raise AssertionError("sink inflow differs from the flow value")


class _Residual:
    def __init__(self, net: FlowNetwork):
        self.net = net
        n = net.n_nodes
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        for u, v, c, w in net.arcs:
            e = len(self.head)
            self.head += [v, u]
            self.cap += [c, 0]
            self.cost += [w, -w]
            self.adj[u].append(e)
            self.adj[v].append(e + 1)

    def push(self, e: int, amount: int) -> None:
        self.cap[e] -= amount
        self.cap[e ^ 1] += amount

    def arc_flows(self) -> list[int]:
        return [self.cap[2 * a + 1] for a in range(len(self.net.arcs))]


def _bfs_path(res: _Residual, s: int, t: int) -> list[int] | None:
    prev = [-1] * res.net.n_nodes
    seen = [False] * res.net.n_nodes
    seen[s] = True
    q = deque([s])
    while q:
        u = q.popleft()
        for e in res.adj[u]:
            v = res.head[e]
            if res.cap[e] > 0 and not seen[v]:
                seen[v] = True
                prev[v] = e
                if v == t:
                    return _unwind(res, prev, s, t)
                q.append(v)
    return None


def _unwind(res: _Residual, prev: list[int], s: int, t: int) -> list[int]:
    path = []
    v = t
    while v != s:
        e = prev[v]
        path.append(e)
        v = res.head[e ^ 1]
    path.reverse()
    return path


def max_flow(net: FlowNetwork) -> FlowResult:
    """Maximum source-sink flow by shortest augmenting paths."""
    res = _Residual(net)
    value = 0
    while True:
        path = _bfs_path(res, net.source, net.sink)
        if path is None:
            break
        amount = min(res.cap[e] for e in path)
        for e in path:
            res.push(e, amount)
        value += amount
    out = FlowResult(value, res.arc_flows(), _cost(net, res.arc_flows()))
    out.check(net)
    return out


def _cost(net: FlowNetwork, flow: list[int]) -> float:
    return float(sum(f * a[3] for f, a in zip(flow, net.arcs)))


def min_cost_flow(net: FlowNetwork, required_value: int) -> FlowResult:
    """Cheapest integral flow of exactly ``required_value``.

    Successive shortest augmenting paths with Johnson potentials.  Raises
    :class:`FlowError` ("value unreachable") when the maximum flow is
    smaller than ``required_value``.
    """
    if required_value < 0:
        raise FlowError("required value must be nonnegative")
    res = _Residual(net)
    n = net.n_nodes
    s, t = net.source, net.sink

    # Bellman-Ford for initial potentials (arc costs may be negative)
    pot = [0.0] * n
    for _ in range(n):
        changed = False
        for e in range(len(res.head)):
            if res.cap[e] > 0:
                u = res.head[e ^ 1]
                if pot[u] + res.cost[e] < pot[res.head[e]] - 1e-12:
                    pot[res.head[e]] = pot[u] + res.cost[e]
                    changed = True
        if not changed:
            break
    else:
        raise FlowError("negative cycle in the network")

    value = 0
    while value < required_value:
        dist = [math.inf] * n
        prev = [-1] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        done = [False] * n
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in res.adj[u]:
                if res.cap[e] <= 0:
                    continue
                v = res.head[e]
                rc = res.cost[e] + pot[u] - pot[v]
                if rc < 0:
                    rc = 0.0 if rc > -1e-9 else rc
                nd = d + rc
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    prev[v] = e
                    heapq.heappush(heap, (nd, v))
        if dist[t] == math.inf:
            raise FlowError(f"value unreachable: max flow is {value} < {required_value}")
        for v in range(n):
            if dist[v] < math.inf:
                pot[v] += dist[v]
        path = _unwind(res, prev, s, t)
        amount = min(min(res.cap[e] for e in path), required_value - value)
        for e in path:
            res.push(e, amount)
        value += amount
    flows = res.arc_flows()
    out = FlowResult(value, flows, _cost(net, flows))
    out.check(net)
    return out


def to_dot(net: FlowNetwork, result: FlowResult | None = None) -> str:
    """Graphviz rendering, for debugging."""
    lines = ["digraph G {"]
    for v in range(net.n_nodes):
        label = net.labels.get(v, "S" if v == net.source else "T" if v == net.sink else str(v))
        lines.append(f'  n{v} [label="{label}"];')
    for a, (u, v, cap, cost) in enumerate(net.arcs):
        f = f"{result.flow[a]}/" if result is not None else ""
        extra = f", {cost:g}" if cost else ""
        lines.append(f'  n{u} -> n{v} [label="{f}{cap}{extra}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
