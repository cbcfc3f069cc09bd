"""Immutable causal DAGs: validation, closures, d-separation, DOT export."""

from __future__ import annotations

import heapq
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property

from swid.errors import CycleError, DuplicateNode, GraphError, OverlappingSets, UnknownNode

NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")
BINARY = ("0", "1")


@dataclass(frozen=True)
class Node:
    name: str
    observed: bool = True
    support: tuple[str, ...] = BINARY


@dataclass(frozen=True)
class Edge:
    """``source -> target``; when ``inactive_when=(C, level)`` the target's
    mechanism ignores ``source`` whenever ``C`` takes ``level``."""

    source: str
    target: str
    inactive_when: tuple[str, int] | None = None


@dataclass(frozen=True)
class CausalDag:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    order: tuple[str, ...] = field(compare=False)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    @cached_property
    def _index(self) -> dict[str, Node]:
        return {n.name: n for n in self.nodes}

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        pos = {n: i for i, n in enumerate(self.names)}
        out: dict[str, list[str]] = {n: [] for n in self.names}
        for e in self.edges:
            out[e.target].append(e.source)
        return {k: tuple(sorted(v, key=pos.__getitem__)) for k, v in out.items()}

    @cached_property
    def _children(self) -> dict[str, tuple[str, ...]]:
        pos = {n: i for i, n in enumerate(self.names)}
        out: dict[str, list[str]] = {n: [] for n in self.names}
        for e in self.edges:
            out[e.source].append(e.target)
        return {k: tuple(sorted(v, key=pos.__getitem__)) for k, v in out.items()}

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def node(self, name: str) -> Node:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownNode(name) from None

    def parents(self, name: str) -> tuple[str, ...]:
        self.node(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        self.node(name)
        return self._children[name]

    def support(self, name: str) -> tuple[str, ...]:
        return self.node(name).support

    @property
    def latent(self) -> frozenset[str]:
        return frozenset(n.name for n in self.nodes if not n.observed)

    def has_edge(self, source: str, target: str) -> bool:
        return source in self._parents.get(target, ())

    def edge_set(self) -> frozenset[tuple[str, str]]:
        return frozenset((e.source, e.target) for e in self.edges)

    def to_dot(self) -> str:
        lines = ["digraph {"]
        for n in self.nodes:
            style = " [style=dashed]" if not n.observed else ""
            lines.append(f'  "{n.name}"{style};')
        for e in self.edges:
            attr = ""
            if e.inactive_when is not None:
                var, lvl = e.inactive_when
                attr = f' [label="unless {var}={self.support(var)[lvl]}"]'
            lines.append(f'  "{e.source}" -> "{e.target}"{attr};')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _as_node(spec: Node | str) -> Node:
    return spec if isinstance(spec, Node) else Node(spec)


def _as_edge(spec: Edge | tuple) -> Edge:
    if isinstance(spec, Edge):
        return spec
    if len(spec) == 2:
        return Edge(spec[0], spec[1])
    return Edge(spec[0], spec[1], tuple(spec[2]) if spec[2] is not None else None)


def _find_cycle(names: list[str], children: Mapping[str, list[str]], pending: set[str]) -> list[str]:
    # DFS restricted to nodes Kahn's algorithm could not emit; every such node lies on or above a cycle.
    color: dict[str, int] = {}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = 1
        stack.append(v)
        for c in children[v]:
            if c not in pending:
                continue
            if color.get(c) == 1:
                return stack[stack.index(c):] + [c]
            if c not in color:
                found = visit(c)
                if found:
                    return found
        stack.pop()
        color[v] = 2
        return None

    for v in names:
        if v in pending and v not in color:
            found = visit(v)
            if found:
                return found
    raise AssertionError("no cycle among pending nodes")


def validate_dag(nodes: Iterable[Node | str], edges: Iterable[Edge | tuple]) -> CausalDag:
    """Validate raw node/edge lists and return an immutable DAG.

    The canonical topological order breaks ties by declaration order.
    """
    node_list = [_as_node(n) for n in nodes]
    if not node_list:
        raise GraphError("a DAG needs at least one node")
    seen: set[str] = set()
    for n in node_list:
        if not NAME_RE.match(n.name):
            raise GraphError(f"invalid variable name {n.name!r}")
        if n.name in seen:
            raise DuplicateNode(n.name)
        if not n.support:
            raise GraphError(f"node {n.name!r} has empty support")
        if len(set(n.support)) != len(n.support):
            raise GraphError(f"node {n.name!r} has repeated support labels")
        seen.add(n.name)
    by_name = {n.name: n for n in node_list}

    edge_list = [_as_edge(e) for e in edges]
    pairs: set[tuple[str, str]] = set()
    for e in edge_list:
        for end in (e.source, e.target):
            if end not in seen:
                raise UnknownNode(end)
        if e.source == e.target:
            raise CycleError([e.source, e.source])
        if (e.source, e.target) in pairs:
            raise GraphError(f"duplicate edge {e.source} -> {e.target}")
        pairs.add((e.source, e.target))
    for e in edge_list:
        if e.inactive_when is None:
            continue
        var, lvl = e.inactive_when
        if var not in seen:
            raise UnknownNode(var)
        if (var, e.target) not in pairs or var == e.source:
            raise GraphError(f"context {var} of edge {e.source} -> {e.target} must be another parent of {e.target}")
        if not 0 <= lvl < len(by_name[var].support):
            raise GraphError(f"context level {lvl} outside support of {var}")

    names = [n.name for n in node_list]
    pos = {n: i for i, n in enumerate(names)}
    children: dict[str, list[str]] = {n: [] for n in names}
    indeg = {n: 0 for n in names}
    for e in edge_list:
        children[e.source].append(e.target)
        indeg[e.target] += 1
    heap = [pos[n] for n in names if indeg[n] == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        v = names[heapq.heappop(heap)]
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, pos[c])
    if len(order) < len(names):
        raise CycleError(_find_cycle(names, children, set(names) - set(order)))
    return CausalDag(tuple(node_list), tuple(edge_list), tuple(order))


def _closure(start: str, step: Mapping[str, Iterable[str]]) -> frozenset[str]:
    out = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in step[v]:
            if w not in out:
                out.add(w)
                todo.append(w)
    return frozenset(out)


def descendants(dag: CausalDag, v: str) -> frozenset[str]:
    dag.node(v)
    return _closure(v, dag._children)


def ancestors(dag: CausalDag, v: str) -> frozenset[str]:
    dag.node(v)
    return _closure(v, dag._parents)


def reachable(
    parents: Mapping, children: Mapping, sources: Iterable, given: frozenset
) -> set:
    """Nodes d-connected to ``sources`` given ``given`` (Bayes-ball traversal).

    Works on any hashable node ids so the SWIG engine can reuse it.
    """
    anc_given: set = set()
    todo = list(given)
    while todo:
        v = todo.pop()
        if v in anc_given:
            continue
        anc_given.add(v)
        todo.extend(parents[v])

    up, down = "up", "down"
    frontier = [(s, up) for s in sources]
    visited: set = set()
    found: set = set()
    while frontier:
        v, d = frontier.pop()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v not in given:
            found.add(v)
        if d == up and v not in given:
            frontier.extend((p, up) for p in parents[v])
            frontier.extend((c, down) for c in children[v])
        elif d == down:
            if v not in given:
                frontier.extend((c, down) for c in children[v])
            if v in anc_given:
                frontier.extend((p, up) for p in parents[v])
    return found


def _check_sets(dag: CausalDag, *sets: Iterable[str]) -> list[frozenset[str]]:
    out = [frozenset(s) for s in sets]
    for s in out:
        for v in s:
            dag.node(v)
    a, b, z = out
    if a & b or a & z or b & z:
        raise OverlappingSets("query sets must be pairwise disjoint")
    return out


def d_separated(dag: CausalDag, a: Iterable[str], b: Iterable[str], given: Iterable[str] = ()) -> bool:
    a, b, z = _check_sets(dag, a, b, given)
    return not (reachable(dag._parents, dag._children, a, z) & b)
