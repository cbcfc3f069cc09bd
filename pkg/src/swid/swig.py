"""Single world intervention graphs (templates) and exchangeability checks.

Regime values are either concrete level indices (``int``) or symbolic
names (``str``, e.g. ``"z"``) bound later, so one construction serves every
value of a symbolic intervention.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

from swid.errors import (
    GraphError,
    NoDesignatedOutcome,
    OverlappingSets,
    RegimeOrderError,
    UnknownNode,
)
from swid.graph import CausalDag, ancestors, reachable

Level = Union[int, str]


@dataclass(frozen=True)
class Regime:
    steps: tuple[tuple[str, Level], ...] = ()

    def __init__(self, steps: Iterable[tuple[str, Level]] = ()) -> None:
        steps = tuple((str(v), lvl) for v, lvl in steps)
        names = [v for v, _ in steps]
        if len(set(names)) != len(names):
            raise GraphError(f"regime repeats a variable: {names}")
        object.__setattr__(self, "steps", steps)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.steps)

    def value(self, var: str) -> Level:
        return dict(self.steps)[var]

    def __contains__(self, var: object) -> bool:
        return any(v == var for v, _ in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(lvl for _, lvl in self.steps if isinstance(lvl, str))

    @property
    def is_concrete(self) -> bool:
        return not self.symbols

    def bind(self, bindings: Mapping[str, int]) -> "Regime":
        return Regime((v, bindings.get(lvl, lvl) if isinstance(lvl, str) else lvl) for v, lvl in self.steps)

    def __add__(self, other: "Regime") -> "Regime":
        return Regime(self.steps + other.steps)

    def __str__(self) -> str:
        return ", ".join(f"{v}={lvl}" for v, lvl in self.steps)


def render_step(var: str, level: Level, support: Sequence[str] | None = None) -> str:
    low = var.lower()
    if isinstance(level, str):
        return level if level == low else f"{low}={level}"
    shown = support[level] if support is not None else str(level)
    return f"{low}={shown}"


@dataclass(frozen=True, order=True)
class CounterfactualLabel:
    base: str
    superscript: tuple[tuple[str, Level], ...] = ()

    def render(self, dag: CausalDag | None = None) -> str:
        if not self.superscript:
            return self.base
        parts = [render_step(v, lvl, dag.support(v) if dag is not None else None) for v, lvl in self.superscript]
        if len(parts) == 1 and "=" not in parts[0]:
            return f"{self.base}^{parts[0]}"
        return f"{self.base}^{{{','.join(parts)}}}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True, order=True)
class FixedNode:
    variable: str
    level: Level


NodeRef = Union[str, FixedNode]


@dataclass(frozen=True)
class Swig:
    """Split graph. Random nodes are keyed by variable name, fixed nodes by
    :class:`FixedNode`; ``labels`` maps each variable to its minimal label."""

    dag: CausalDag
    regime: Regime
    labels: Mapping[str, CounterfactualLabel] = field(compare=False)
    edges: frozenset[tuple[NodeRef, str]]

    @property
    def fixed(self) -> tuple[FixedNode, ...]:
        return tuple(FixedNode(v, lvl) for v, lvl in self.regime.steps)

    @property
    def random_nodes(self) -> frozenset[tuple[CounterfactualLabel, bool]]:
        return frozenset((self.labels[n.name], n.observed) for n in self.dag.nodes)

    @property
    def fixed_nodes(self) -> frozenset[tuple[str, Level]]:
        return frozenset(self.regime.steps)

    def label(self, var: str) -> CounterfactualLabel:
        try:
            return self.labels[var]
        except KeyError:
            raise UnknownNode(var) from None

    @cached_property
    def _adjacency(self) -> tuple[dict, dict]:
        parents: dict = {n: [] for n in self.dag.names}
        children: dict = {n: [] for n in self.dag.names}
        for f in self.fixed:
            parents[f] = []
            children[f] = []
        for s, t in sorted(self.edges, key=_edge_key):
            parents[t].append(s)
            children[s].append(t)
        return parents, children

    def parents(self, node: NodeRef) -> list:
        return self._adjacency[0][node]

    def children(self, node: NodeRef) -> list:
        return self._adjacency[1][node]

    def labelled_edges(self) -> frozenset[tuple[str, str]]:
        """Edges as (source, target) label strings; fixed nodes render as `r=1`."""
        out = set()
        for s, t in self.edges:
            src = render_step(s.variable, s.level, self.dag.support(s.variable)) if isinstance(s, FixedNode) else self.labels[s].render(self.dag)
            out.add((src, self.labels[t].render(self.dag)))
        return frozenset(out)

    def to_dot(self) -> str:
        lines = ["digraph {"]
        for n in self.dag.nodes:
            style = ", style=dashed" if not n.observed else ""
            lines.append(f'  "{n.name}" [label="{self.labels[n.name].render(self.dag)}"{style}];')
        for f in self.fixed:
            text = render_step(f.variable, f.level, self.dag.support(f.variable))
            lines.append(f'  "{_fixed_id(f)}" [label="{text}", shape=box];')
        for s, t in sorted(self.edges, key=_edge_key):
            src = _fixed_id(s) if isinstance(s, FixedNode) else s
            lines.append(f'  "{src}" -> "{t}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fixed_id(f: FixedNode) -> str:
    return f"{f.variable}|{f.level}"


def _edge_key(edge: tuple[NodeRef, str]) -> tuple:
    s, t = edge
    return (isinstance(s, FixedNode), s.variable if isinstance(s, FixedNode) else s, t)


def check_regime_order(dag: CausalDag, regime: Regime) -> None:
    for v in regime.variables:
        dag.node(v)
    steps = regime.variables
    for i, early in enumerate(steps):
        anc = ancestors(dag, early)
        for late in steps[i + 1:]:
            if late in anc:
                raise RegimeOrderError(f"regime sets {early} before its ancestor {late}")


def _edge_dropped(dag: CausalDag, edge, regime: Regime) -> bool:
    if edge.inactive_when is None:
        return False
    var, lvl = edge.inactive_when
    return var in regime and regime.value(var) == lvl


def minimal_label(
    children: Mapping[NodeRef, Iterable[str]], node: str, regime: Regime
) -> CounterfactualLabel:
    """Label ``node`` by the regime steps whose fixed node reaches it."""
    sup = []
    for var, lvl in regime.steps:
        seen: set = set()
        todo = list(children[FixedNode(var, lvl)])
        while todo:
            v = todo.pop()
            if v in seen:
                continue
            seen.add(v)
            todo.extend(children[v])
        if node in seen:
            sup.append((var, lvl))
    return CounterfactualLabel(node, tuple(sup))


def build_swig(dag: CausalDag, regime: Regime) -> Swig:
    check_regime_order(dag, regime)
    edges: set[tuple[NodeRef, str]] = set()
    for e in dag.edges:
        if _edge_dropped(dag, e, regime):
            continue
        src: NodeRef = FixedNode(e.source, regime.value(e.source)) if e.source in regime else e.source
        edges.add((src, e.target))
    children: dict[NodeRef, list[str]] = {n: [] for n in dag.names}
    for v, lvl in regime.steps:
        children[FixedNode(v, lvl)] = []
    for s, t in edges:
        children[s].append(t)
    labels = {n: minimal_label(children, n, regime) for n in dag.names}
    return Swig(dag, regime, labels, frozenset(edges))


def _resolve(swig: Swig, items: Iterable[CounterfactualLabel | str]) -> frozenset[str]:
    out = set()
    for item in items:
        if isinstance(item, CounterfactualLabel):
            if swig.labels.get(item.base) != item:
                raise GraphError(f"{item} is not a random node of this SWIG")
            out.add(item.base)
        else:
            swig.label(item)
            out.add(item)
    return frozenset(out)


def swig_d_separated(
    swig: Swig,
    a: Iterable[CounterfactualLabel | str],
    b: Iterable[CounterfactualLabel | str],
    given: Iterable[CounterfactualLabel | str] = (),
) -> bool:
    """d-separation over random nodes; fixed nodes always block."""
    a, b, z = _resolve(swig, a), _resolve(swig, b), _resolve(swig, given)
    if a & b or a & z or b & z:
        raise OverlappingSets("query sets must be pairwise disjoint")
    parents, children = swig._adjacency
    blocked = z | frozenset(swig.fixed)
    return not (reachable(parents, children, a, blocked) & b)


@dataclass(frozen=True)
class IndependenceCondition:
    left: CounterfactualLabel
    right: CounterfactualLabel
    given: tuple[CounterfactualLabel, ...]
    holds: bool
    warnings: tuple[str, ...] = ()

    def render(self, dag: CausalDag | None = None) -> str:
        text = f"{self.left.render(dag)} ⊥ {self.right.render(dag)}"
        if self.given:
            text += " | " + ", ".join(g.render(dag) for g in self.given)
        return text

    def __str__(self) -> str:
        return self.render()


def check_condition(
    swig: Swig, left: str, right: str, given: Iterable[str] = (), latent_note: Iterable[str] = ()
) -> IndependenceCondition:
    given = tuple(given)
    holds = swig_d_separated(swig, [left], [right], given)
    warnings = []
    hidden = tuple(latent_note)
    if hidden and swig_d_separated(swig, [left], [right], given + hidden) != holds:
        names = ", ".join(hidden)
        warnings.append(f"verdict would change if latent {names} could be conditioned on")
    return IndependenceCondition(
        swig.label(left), swig.label(right), tuple(swig.label(g) for g in given), holds, tuple(warnings)
    )


def derive_exchangeability(dag: CausalDag, regime: Regime, outcome: str | None) -> list[IndependenceCondition]:
    """One condition per regime step: outcome counterfactual independent of
    the step's random part given every observed earlier random node."""
    if not outcome:
        raise NoDesignatedOutcome("derive_exchangeability needs an explicit outcome")
    dag.node(outcome)
    if outcome in regime:
        raise GraphError(f"outcome {outcome} is intervened on")
    swig = build_swig(dag, regime)
    pos = {v: i for i, v in enumerate(dag.order)}
    conditions = []
    for var, _ in regime.steps:
        earlier = [v for v in dag.order[: pos[var]] if v != outcome]
        observed = [v for v in earlier if dag.node(v).observed]
        hidden = [v for v in earlier if not dag.node(v).observed]
        conditions.append(check_condition(swig, outcome, var, observed, hidden))
    return conditions
