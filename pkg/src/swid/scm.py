"""Discrete structural causal models used as the ground-truth oracle."""

from __future__ import annotations

import csv
import io
import random
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import prod

import numpy as np

from swid.dist import DiscreteJoint, Number, to_number
from swid.errors import InfeasibleFloor, ScmError, SizeLimit, UnknownNode
from swid.graph import CausalDag
from swid.swig import Regime, build_swig

MAX_NOISE_LEVELS = 8
MAX_STATES = 2**24


@dataclass(frozen=True)
class Mechanism:
    """``table[(parent levels..., noise level)] -> output level``."""

    parents: tuple[str, ...]
    noise: tuple[Fraction, ...]
    table: Mapping[tuple[int, ...], int]

    def output(self, parent_levels: tuple[int, ...], noise_level: int) -> int:
        return self.table[parent_levels + (noise_level,)]

    def cpt(self, parent_levels: tuple[int, ...], support: int) -> list[Fraction]:
        out = [Fraction(0)] * support
        for e, p in enumerate(self.noise):
            out[self.output(parent_levels, e)] += p
        return out


@dataclass(frozen=True)
class Scm:
    dag: CausalDag
    mechanisms: Mapping[str, Mechanism]

    def __post_init__(self) -> None:
        dag = self.dag
        if set(self.mechanisms) != set(dag.names):
            missing = set(dag.names) ^ set(self.mechanisms)
            raise ScmError(f"mechanisms and DAG nodes differ: {sorted(missing)}")
        for v in dag.names:
            m = self.mechanisms[v]
            if m.parents != dag.parents(v):
                raise ScmError(f"{v}: mechanism parents {m.parents} != DAG parents {dag.parents(v)}")
            if not 1 <= len(m.noise) <= MAX_NOISE_LEVELS:
                raise ScmError(f"{v}: noise needs 1..{MAX_NOISE_LEVELS} levels")
            if any(p < 0 for p in m.noise) or sum(m.noise) != 1:
                raise ScmError(f"{v}: noise probabilities must be nonnegative and sum to 1")
            support = len(dag.support(v))
            domains = [range(len(dag.support(p))) for p in m.parents] + [range(len(m.noise))]
            for key in product(*domains):
                if key not in m.table:
                    raise ScmError(f"{v}: mechanism table has no row for {key}")
                if not 0 <= m.table[key] < support:
                    raise ScmError(f"{v}: output {m.table[key]} outside support at {key}")
            if len(m.table) != prod(len(d) for d in domains):
                raise ScmError(f"{v}: mechanism table has rows outside its domain")
        for e in dag.edges:
            if e.inactive_when is None:
                continue
            m = self.mechanisms[e.target]
            ctx, lvl = e.inactive_when
            ci, si = m.parents.index(ctx), m.parents.index(e.source)
            for key, out in m.table.items():
                if key[ci] == lvl:
                    base = key[:si] + (0,) + key[si + 1:]
                    if m.table[base] != out:
                        raise ScmError(f"{e.target} depends on {e.source} when {ctx}={lvl}: row {key}")

    @property
    def variables(self) -> tuple[str, ...]:
        return self.dag.names

    @cached_property
    def supports(self) -> tuple[int, ...]:
        return tuple(len(self.dag.support(v)) for v in self.dag.names)


def _check_size(scm: Scm, extra: int = 1) -> None:
    if prod(scm.supports) * extra > MAX_STATES:
        raise SizeLimit(f"state space too large to enumerate ({prod(scm.supports) * extra})")


def _law(scm: Scm, forced: Mapping[str, int], backend: str | None) -> DiscreteJoint:
    # Truncated factorization, built up in topological order.
    _check_size(scm)
    dag = scm.dag
    states: dict[tuple[int, ...], Fraction] = {(): Fraction(1)}
    placed: list[str] = []
    for v in dag.order:
        m = scm.mechanisms[v]
        idx = [placed.index(p) for p in m.parents]
        support = len(dag.support(v))
        nxt: dict[tuple[int, ...], Fraction] = {}
        cache: dict[tuple[int, ...], list[Fraction]] = {}
        for key, p in states.items():
            if v in forced:
                nxt[key + (forced[v],)] = p
                continue
            pa = tuple(key[i] for i in idx)
            if pa not in cache:
                cache[pa] = m.cpt(pa, support)
            for level, q in enumerate(cache[pa]):
                if q:
                    nxt[key + (level,)] = p * q
        states = nxt
        placed.append(v)
    perm = [placed.index(v) for v in dag.names]
    table = {tuple(k[i] for i in perm): to_number(p, backend) for k, p in states.items()}
    return DiscreteJoint(dag.names, scm.supports, table)


def factual_law(scm: Scm, backend: str | None = None) -> DiscreteJoint:
    return _law(scm, {}, backend)


def _concrete(scm: Scm, regime: Regime) -> dict[str, int]:
    if not regime.is_concrete:
        raise ScmError(f"regime has unbound symbols {regime.symbols}")
    for v, lvl in regime.steps:
        if v not in scm.dag:
            raise UnknownNode(v)
        if not 0 <= lvl < len(scm.dag.support(v)):
            raise ScmError(f"level {lvl} outside support of {v}")
    return dict(regime.steps)


def do_law(scm: Scm, regime: Regime, backend: str | None = None) -> DiscreteJoint:
    return _law(scm, _concrete(scm, regime), backend)


def counterfactual_joint(scm: Scm, regime: Regime, backend: str | None = None) -> DiscreteJoint:
    """Exact joint of factual variables and the regime's counterfactuals.

    Each node's noise is shared between the factual world and the regime
    world. Counterfactual columns are named by their minimal label; nodes
    with an empty label coincide with their factual column.
    """
    forced = _concrete(scm, regime)
    swig = build_swig(scm.dag, regime)
    dag = scm.dag
    cf_vars = [v for v in dag.names if swig.labels[v].superscript]
    _check_size(scm, prod(len(dag.support(v)) for v in cf_vars))
    # state: factual values, then regime-world random-part values, both in topo order
    states: dict[tuple, Fraction] = {((), ()): Fraction(1)}
    placed: list[str] = []
    for v in dag.order:
        m = scm.mechanisms[v]
        idx = [placed.index(p) for p in m.parents]
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (fact, cf), p in states.items():
            pa_f = tuple(fact[i] for i in idx)
            pa_c = tuple(forced.get(q, cf[i]) for q, i in zip(m.parents, idx))
            for e, q in enumerate(m.noise):
                if q:
                    nxt[(fact + (m.output(pa_f, e),), cf + (m.output(pa_c, e),))] += p * q
        states = dict(nxt)
        placed.append(v)
    f_perm = [placed.index(v) for v in dag.names]
    c_perm = [placed.index(v) for v in cf_vars]
    table: dict[tuple[int, ...], Fraction] = defaultdict(Fraction)
    for (fact, cf), p in states.items():
        table[tuple(fact[i] for i in f_perm) + tuple(cf[i] for i in c_perm)] += p
    names = list(dag.names) + [str(swig.labels[v]) for v in cf_vars]
    supports = list(scm.supports) + [len(dag.support(v)) for v in cf_vars]
    return DiscreteJoint(tuple(names), tuple(supports), {k: to_number(p, backend) for k, p in table.items()})


@dataclass(frozen=True)
class Dataset:
    variables: tuple[str, ...]
    supports: tuple[int, ...]
    rows: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    def to_csv(self, columns: Sequence[str] | None = None) -> str:
        columns = list(columns or self.variables)
        idx = [self.variables.index(c) for c in columns]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(self.rows[:, idx].tolist())
        return buf.getvalue()

    def empirical(self, variables: Sequence[str] | None = None, backend: str | None = None) -> DiscreteJoint:
        variables = list(variables or self.variables)
        idx = [self.variables.index(v) for v in variables]
        keys, counts = np.unique(self.rows[:, idx], axis=0, return_counts=True)
        n = self.n
        table = {tuple(int(x) for x in k): to_number(Fraction(int(c), n), backend) for k, c in zip(keys, counts)}
        return DiscreteJoint(tuple(variables), tuple(self.supports[i] for i in idx), table)


SAMPLE_CHUNK = 65536


def _uniform_block(seed: int, start: int, rows: int, width: int) -> np.ndarray:
    # Philox is counter based: row i always reads counters [i*width/4, (i+1)*width/4).
    bitgen = np.random.Philox(key=seed)
    bitgen.advance(start * (width // 4))
    return np.random.Generator(bitgen).random((rows, width))


def sample(scm: Scm, n: int, seed: int) -> Dataset:
    """``n`` i.i.d. factual draws; row ``i`` depends only on ``(seed, i)``."""
    if n < 1:
        raise ScmError("n must be at least 1")
    dag = scm.dag
    width = 4 * -(-len(dag.names) // 4)
    cols = {v: i for i, v in enumerate(dag.names)}
    out = np.zeros((n, len(dag.names)), dtype=np.int64)
    plans = []
    for v in dag.order:
        m = scm.mechanisms[v]
        cum = np.cumsum([float(p) for p in m.noise])
        cum[-1] = np.inf
        radices = [len(dag.support(p)) for p in m.parents] + [len(m.noise)]
        lookup = np.zeros(prod(radices), dtype=np.int64)
        for key, level in m.table.items():
            lookup[np.ravel_multi_index(key, radices)] = level
        plans.append((cols[v], [cols[p] for p in m.parents], cum, radices, lookup))
    for start in range(0, n, SAMPLE_CHUNK):
        rows = min(SAMPLE_CHUNK, n - start)
        u = _uniform_block(seed, start, rows, width)
        block = out[start:start + rows]
        for col, pcols, cum, radices, lookup in plans:
            noise = np.searchsorted(cum, u[:, col], side="right")
            flat = np.ravel_multi_index(tuple(block[:, c] for c in pcols) + (noise,), radices)
            block[:, col] = lookup[flat]
    return Dataset(dag.names, scm.supports, out, seed)


def random_scm(
    dag: CausalDag, seed: int, min_prob: Fraction | float | str = Fraction(1, 20), noise_levels: int | None = None
) -> Scm:
    """Random mechanisms whose conditionals all sit at or above ``min_prob``.

    Every noise level carries at least ``min_prob`` mass and each output
    level receives at least one noise level, which gives the floor.
    Edges with an inactive context get tables that ignore the source there.
    """
    floor = Fraction(str(min_prob)) if isinstance(min_prob, float) else Fraction(min_prob)
    if floor <= 0:
        raise InfeasibleFloor("min_prob must be positive")
    widest = max(len(n.support) for n in dag.nodes)
    if floor * widest > 1:
        raise InfeasibleFloor(f"min_prob {floor} infeasible for support size {widest}")
    cap = min(MAX_NOISE_LEVELS, int(1 / floor))
    if noise_levels is not None:
        if noise_levels > cap:
            raise InfeasibleFloor(f"{noise_levels} noise levels cannot each carry {floor}")
        cap = noise_levels
    rng = random.Random(seed)
    mechanisms = {}
    for v in dag.names:
        support = len(dag.support(v))
        k = cap
        if k < support:
            raise InfeasibleFloor(f"{v}: {k} noise levels cannot cover {support} outputs")
        slack = 1 - k * floor
        weights = [rng.randint(1, 9) for _ in range(k)]
        noise = tuple(floor + slack * Fraction(w, sum(weights)) for w in weights)
        parents = dag.parents(v)
        contexts = [
            (parents.index(e.source), parents.index(e.inactive_when[0]), e.inactive_when[1])
            for e in dag.edges
            if e.target == v and e.inactive_when is not None
        ]
        maps: dict[tuple[int, ...], list[int]] = {}
        table = {}
        for pa in product(*(range(len(dag.support(p))) for p in parents)):
            canon = list(pa)
            for si, ci, lvl in contexts:
                if pa[ci] == lvl:
                    canon[si] = 0
            canon = tuple(canon)
            if canon not in maps:
                outs = list(range(support)) + [rng.randrange(support) for _ in range(k - support)]
                rng.shuffle(outs)
                maps[canon] = outs
            for e, level in enumerate(maps[canon]):
                table[pa + (e,)] = level
        mechanisms[v] = Mechanism(parents, noise, table)
    return Scm(dag, mechanisms)


def cpt_floor(scm: Scm) -> Fraction:
    """Smallest conditional probability any node assigns given its parents."""
    low = Fraction(1)
    for v in scm.dag.names:
        m = scm.mechanisms[v]
        for pa in product(*(range(len(scm.dag.support(p))) for p in m.parents)):
            low = min(low, min(m.cpt(pa, len(scm.dag.support(v)))))
    return low


def marginal_cdf(dist: DiscreteJoint, var: str, level: int) -> Number:
    i = dist.index(var)
    total = dist._zero
    for row, p in dist.table.items():
        if row[i] <= level:
            total += p
    return total
