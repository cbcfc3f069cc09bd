"""Sequential g-formula and IPW functionals, positivity, scenario presets."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from swid.dist import (
    DiscreteJoint,
    Event,
    Number,
    cond_cdf,
    conditional,
    expect_over,
    format_number,
)
from swid.errors import (
    EmptyCell,
    GraphError,
    IdentError,
    PositivityError,
    UnknownScenario,
    ZeroConditioningMass,
)
from swid.graph import CausalDag, Edge, Node, ancestors, validate_dag
from swid.scm import Dataset, Scm, do_law, factual_law, marginal_cdf
from swid.swig import (
    IndependenceCondition,
    Level,
    Regime,
    build_swig,
    check_condition,
    derive_exchangeability,
    render_step,
)


@dataclass(frozen=True)
class Step:
    decision: str
    forced: Level
    history: tuple[str, ...] = ()


@dataclass(frozen=True)
class RegimeSpec:
    baseline: tuple[str, ...]
    steps: tuple[Step, ...]
    outcome: str

    def __post_init__(self) -> None:
        seen = list(self.variables)
        dupes = {v for v in seen if seen.count(v) > 1}
        if dupes:
            raise IdentError(f"variables appear twice in the regime spec: {sorted(dupes)}")

    @classmethod
    def make(cls, baseline: Sequence[str], steps: Iterable, outcome: str) -> "RegimeSpec":
        built = []
        for s in steps:
            built.append(s if isinstance(s, Step) else Step(s[0], s[1], tuple(s[2]) if len(s) > 2 else ()))
        return cls(tuple(baseline), tuple(built), outcome)

    @property
    def decisions(self) -> tuple[str, ...]:
        return tuple(s.decision for s in self.steps)

    @property
    def sequence(self) -> tuple[str, ...]:
        out = list(self.baseline)
        for s in self.steps:
            out.extend(s.history)
            out.append(s.decision)
        out.append(self.outcome)
        return tuple(out)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.sequence

    def regime(self) -> Regime:
        return Regime((s.decision, s.forced) for s in self.steps)

    @property
    def is_concrete(self) -> bool:
        return all(isinstance(s.forced, int) for s in self.steps)

    def bind(self, bindings: Mapping[str, int]) -> "RegimeSpec":
        steps = tuple(
            Step(s.decision, bindings.get(s.forced, s.forced) if isinstance(s.forced, str) else s.forced, s.history)
            for s in self.steps
        )
        return RegimeSpec(self.baseline, steps, self.outcome)

    def validate(self, dag: CausalDag) -> None:
        for v in self.variables:
            if not dag.node(v).observed:
                raise IdentError(f"latent variable {v} cannot appear in a regime spec")
        seq = self.sequence
        base = set(self.baseline)
        for i, early in enumerate(seq):
            anc = ancestors(dag, early)
            for late in seq[i + 1:]:
                if late in anc and not (early in base and late in base):
                    raise IdentError(f"{late} is listed after its descendant {early}")
        for s in self.steps:
            if isinstance(s.forced, int) and not 0 <= s.forced < len(dag.support(s.decision)):
                raise IdentError(f"level {s.forced} outside support of {s.decision}")


def _require_concrete(spec: RegimeSpec) -> None:
    if not spec.is_concrete:
        unbound = [s.forced for s in spec.steps if isinstance(s.forced, str)]
        raise IdentError(f"regime spec has unbound symbols {unbound}")


def _history_through(spec: RegimeSpec, k: int) -> tuple[str, ...]:
    """Baseline plus history blocks of steps 0..k inclusive."""
    out = list(spec.baseline)
    for s in spec.steps[: k + 1]:
        out.extend(s.history)
    return tuple(out)


@dataclass(frozen=True)
class StepReport:
    decision: str
    forced: int
    conditioning: tuple[str, ...]
    violations: tuple[tuple[int, ...], ...]
    earlier: tuple[tuple[str, int], ...] = ()

    def cells(self) -> list[dict[str, int]]:
        return [dict(zip(self.conditioning, v)) for v in self.violations]


@dataclass(frozen=True)
class PositivityReport:
    steps: tuple[StepReport, ...]
    min_mass: Number | None = None

    @property
    def passed(self) -> bool:
        return all(not s.violations for s in self.steps)

    def violations(self) -> list[tuple[str, dict[str, int]]]:
        return [(s.decision, cell) for s in self.steps for cell in s.cells()]

    def _given(self, step: str) -> dict[str, int]:
        return next(dict(s.earlier) for s in self.steps if s.decision == step)

    def to_dict(self, dag: CausalDag | None = None) -> dict:
        def show(var: str, lvl: int) -> str:
            return dag.support(var)[lvl] if dag is not None else str(lvl)

        return {
            "pass": self.passed,
            "violations": [
                {
                    "step": step,
                    "cell": {v: show(v, x) for v, x in cell.items()},
                    "given": {v: show(v, x) for v, x in self._given(step).items()},
                }
                for step, cell in self.violations()
            ],
        }

    def __str__(self) -> str:
        if self.passed:
            return "positivity holds"
        return "; ".join(f"Pr[{step}=forced | {cell}] = 0" for step, cell in self.violations())


def check_positivity(dist: DiscreteJoint, spec: RegimeSpec) -> PositivityReport:
    """For each step, list positive-mass histories (earlier decisions forced)
    in which the forced decision has zero probability."""
    _require_concrete(spec)
    d = dist.marginal(spec.variables)
    pos = {v: i for i, v in enumerate(d.variables)}
    reports = []
    min_mass = None
    for k, step in enumerate(spec.steps):
        hist = _history_through(spec, k)
        hidx = [pos[v] for v in hist]
        earlier = [(pos[s.decision], s.forced) for s in spec.steps[:k]]
        di = pos[step.decision]
        before: dict[tuple[int, ...], Number] = defaultdict(lambda: d._zero)
        after: dict[tuple[int, ...], Number] = defaultdict(lambda: d._zero)
        for row, p in d.table.items():
            if p == 0 or any(row[i] != lvl for i, lvl in earlier):
                continue
            key = tuple(row[i] for i in hidx)
            before[key] += p
            if row[di] == step.forced:
                after[key] += p
        bad = []
        for key in sorted(before):
            if before[key] > 0 and after[key] == 0:
                bad.append(key)
            elif after[key] > 0:
                min_mass = after[key] if min_mass is None else min(min_mass, after[key])
        fixed = tuple((s.decision, s.forced) for s in spec.steps[:k])
        reports.append(StepReport(step.decision, step.forced, hist, tuple(bad), fixed))
    return PositivityReport(tuple(reports), min_mass)


def _prepare(dist: DiscreteJoint, spec: RegimeSpec, check: bool) -> DiscreteJoint:
    _require_concrete(spec)
    if check:
        report = check_positivity(dist, spec)
        if not report.passed:
            raise PositivityError(report)
    return dist.marginal(spec.variables)


def g_formula(dist: DiscreteJoint, spec: RegimeSpec, y: int, check: bool = True) -> Number:
    """Iterated conditional expectations, innermost first.

    Innermost: Pr[Y <= y | baseline, all histories, all decisions forced].
    Each history block is then averaged given the earlier history with the
    earlier decisions forced; the outermost average uses the baseline
    marginal of the whole ``dist``.
    """
    d = _prepare(dist, spec, check)
    steps = spec.steps

    def forced_through(k: int) -> dict[str, int]:
        return {s.decision: s.forced for s in steps[:k]}

    def nested(k: int, seen: dict[str, int]) -> Number:
        if k == len(steps):
            return cond_cdf(d, spec.outcome, y, Event.equal({**seen, **forced_through(k)}))
        block = steps[k].history
        if not block:
            return nested(k + 1, seen)
        given = Event.equal({**seen, **forced_through(k)})
        return expect_over(d, block, lambda h: nested(k + 1, {**seen, **h}), given)

    if not spec.baseline:
        return nested(0, {})
    return expect_over(d, spec.baseline, lambda x: nested(0, dict(x)))


def ipw_factors(dist: DiscreteJoint, spec: RegimeSpec, assignment: Mapping[str, int]) -> list[Number]:
    """Per-step Pr[D_k = d_k | baseline, histories through k, earlier decisions forced]."""
    _require_concrete(spec)
    out = []
    for k, step in enumerate(spec.steps):
        given = {v: assignment[v] for v in _history_through(spec, k)}
        given.update({s.decision: s.forced for s in spec.steps[:k]})
        out.append(conditional(dist, Event.equal({step.decision: step.forced}), Event.equal(given)))
    return out


def ipw(dist: DiscreteJoint, spec: RegimeSpec, y: int, check: bool = True) -> Number:
    """E[ I(Y <= y, decisions forced) / prod_k Pr[D_k = d_k | past] ]."""
    d = _prepare(dist, spec, check)
    pos = {v: i for i, v in enumerate(d.variables)}
    forced = [(pos[s.decision], s.forced) for s in spec.steps]
    yi = pos[spec.outcome]
    hist_idx = [[pos[v] for v in _history_through(spec, k)] for k in range(len(spec.steps))]
    cache: dict[tuple, Number] = {}
    total = d._zero
    for row, p in sorted(d.table.items()):
        if p == 0 or row[yi] > y or any(row[i] != lvl for i, lvl in forced):
            continue
        weight = None
        for k, step in enumerate(spec.steps):
            key = (k, tuple(row[i] for i in hist_idx[k]))
            if key not in cache:
                given = dict(zip(_history_through(spec, k), key[1]))
                given.update({s.decision: s.forced for s in spec.steps[:k]})
                cache[key] = conditional(d, Event.equal({step.decision: step.forced}), Event.equal(given))
            weight = cache[key] if weight is None else weight * cache[key]
        total += p if weight is None else p / weight
    return total


# ---------------------------------------------------------------- presets

ENGAGEMENT_EDGES = [
    ("X", "R"), ("X", "S"), ("X", "Z"), ("X", "Y"),
    ("R", "S"), ("R", "Z"), ("R", "Y"),
    ("S", "Z"), ("S", "Y"),
    ("Z", "Y"),
    ("U", "Z", ("S", 1)),  # participants are randomized: U only drives Z when S=0
    ("U", "Y"),
]
EXCLUSION_EDGES = [
    ("X", "R"), ("X", "S"), ("X", "Z"), ("X", "Y"),
    ("R", "S"), ("R", "Z"), ("S", "Z"), ("Z", "Y"),
]
CENSORING_EDGES = [("X", "Z"), ("X", "C"), ("X", "Y"), ("Z", "C"), ("Z", "Y")]
TIME_VARYING = ["L0", "A0", "C1", "L1", "A1", "C2", "Y"]


def _time_varying_edges() -> list[tuple[str, str]]:
    edges = [("X", "R"), ("X", "S"), ("X", "Z"), ("R", "S"), ("R", "Z"), ("S", "Z")]
    for i, node in enumerate(TIME_VARYING):
        edges.extend((b, node) for b in ("X", "R", "S", "Z"))
        for earlier in TIME_VARYING[:i]:
            if node == "Y" and earlier in ("C1", "C2"):
                continue
            edges.append((earlier, node))
    return edges


def _edges(raw: list[tuple]) -> list[Edge]:
    return [Edge(e[0], e[1], e[2] if len(e) > 2 else None) for e in raw]


ENGAGEMENT_SPEC = RegimeSpec.make(["X"], [("R", 1), ("S", 1), ("Z", "z")], "Y")
PRESETS = {
    "engagement": (
        lambda: validate_dag(
            [Node("X"), Node("R"), Node("S"), Node("Z"), Node("Y"), Node("U", observed=False)], _edges(ENGAGEMENT_EDGES)
        ),
        ENGAGEMENT_SPEC,
    ),
    "exclusion": (lambda: validate_dag(["X", "R", "S", "Z", "Y"], _edges(EXCLUSION_EDGES)), ENGAGEMENT_SPEC),
    "censoring": (
        lambda: validate_dag(["X", "Z", "C", "Y"], _edges(CENSORING_EDGES)),
        RegimeSpec.make(["X"], [("Z", "z"), ("C", 0)], "Y"),
    ),
    "time_varying": (
        lambda: validate_dag(["X", "R", "S", "Z", *TIME_VARYING], _edges(_time_varying_edges())),
        RegimeSpec.make(
            ["X"],
            [("R", 1), ("S", 1), ("Z", "z"), ("A0", "a0", ["L0"]), ("C1", 0), ("A1", "a1", ["L1"]), ("C2", 0)],
            "Y",
        ),
    ),
}
PRESET_BINDINGS = {"z": 1, "a0": 1, "a1": 1}


def preset(name: str) -> tuple[CausalDag, RegimeSpec]:
    try:
        build, spec = PRESETS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}") from None
    return build(), spec


# ---------------------------------------------------------------- identify

NO_CAUSAL = "no causal interpretation"
PARTIAL = "partially identified region not computed"


@dataclass
class ThresholdResult:
    y: int
    g_formula: Number | None
    ipw: Number | None
    oracle: Number | None = None

    @property
    def max_abs_diff(self) -> Number | None:
        vals = [v for v in (self.g_formula, self.ipw, self.oracle) if v is not None]
        if len(vals) < 2:
            return None
        return max(abs(a - b) for a in vals for b in vals)


@dataclass
class IdentResult:
    scenario: str | None
    dag: CausalDag
    spec: RegimeSpec
    thresholds: list[ThresholdResult]
    exchangeability: list[IndependenceCondition]
    positivity: PositivityReport
    flags: list[str] = field(default_factory=list)

    @property
    def identified(self) -> bool:
        return self.positivity.passed and all(c.holds for c in self.exchangeability)

    def to_dict(self) -> dict:
        dag = self.dag
        sup = dag.support(self.spec.outcome)

        def num(x: Number | None) -> str | None:
            return None if x is None else format_number(x)

        return {
            "scenario": self.scenario,
            "regime": ", ".join(render_step(s.decision, s.forced, dag.support(s.decision)) for s in self.spec.steps),
            "thresholds": [
                {
                    "y": sup[t.y],
                    "g_formula": num(t.g_formula),
                    "ipw": num(t.ipw),
                    "oracle": num(t.oracle),
                    "max_abs_diff": num(t.max_abs_diff),
                }
                for t in self.thresholds
            ],
            "exchangeability": [{"condition": c.render(dag), "holds": c.holds} for c in self.exchangeability],
            "positivity": self.positivity.to_dict(dag),
            "flags": list(self.flags),
        }


def exchangeability_conditions(
    dag: CausalDag, spec: RegimeSpec, extra: Iterable[tuple[str, str, Sequence[str]]] = ()
) -> list[IndependenceCondition]:
    regime = spec.regime()
    conds = derive_exchangeability(dag, regime, spec.outcome)
    extra = list(extra)
    if extra:
        swig = build_swig(dag, regime)
        conds += [check_condition(swig, a, b, given) for a, b, given in extra]
    return conds


def identify(
    dag: CausalDag,
    model: Scm | DiscreteJoint,
    spec: RegimeSpec,
    thresholds: Sequence[int] | None = None,
    bindings: Mapping[str, int] | None = None,
    extra_conditions: Iterable[tuple[str, str, Sequence[str]]] = (),
    override_positivity: bool = False,
    scenario: str | None = None,
    backend: str | None = None,
) -> IdentResult:
    """Check conditions, then evaluate g-formula, IPW and (for an SCM) the oracle."""
    if isinstance(model, Scm) and model.dag != dag:
        raise GraphError("the SCM's DAG differs from the supplied DAG")
    spec.validate(dag)
    conditions = exchangeability_conditions(dag, spec, extra_conditions)
    bound = spec.bind(bindings or {})
    _require_concrete(bound)
    bound.validate(dag)
    dist = factual_law(model, backend) if isinstance(model, Scm) else model
    report = check_positivity(dist, bound)
    flags = []
    if not all(c.holds for c in conditions):
        flags.append(NO_CAUSAL)
    for c in conditions:
        flags.extend(f"{c.render(dag)}: {w}" for w in c.warnings)
    if not report.passed:
        if not override_positivity:
            raise PositivityError(report)
        flags.append(PARTIAL)
    if thresholds is None:
        thresholds = range(len(dag.support(spec.outcome)))
    oracle_law = do_law(model, bound.regime(), backend) if isinstance(model, Scm) else None
    results = []
    for y in thresholds:
        try:
            g = g_formula(dist, bound, y, check=report.passed)
            w = ipw(dist, bound, y, check=report.passed)
        except ZeroConditioningMass:
            g = w = None
        oracle = marginal_cdf(oracle_law, spec.outcome, y) if oracle_law is not None else None
        results.append(ThresholdResult(int(y), g, w, oracle))
    return IdentResult(scenario, dag, bound, results, conditions, report, flags)


def plugin_estimate(dataset: Dataset, spec: RegimeSpec, y: int, backend: str | None = None) -> Number:
    """g-formula evaluated on the empirical law of ``dataset``."""
    _require_concrete(spec)
    emp = dataset.empirical(spec.variables, backend)
    report = check_positivity(emp, spec)
    if not report.passed:
        step, cell = report.violations()[0]
        raise EmptyCell(step, cell)
    return g_formula(emp, spec, y, check=False)


def exact_value(model: Scm | DiscreteJoint, spec: RegimeSpec, y: int) -> Fraction:
    dist = factual_law(model, "rational") if isinstance(model, Scm) else model
    return g_formula(dist, spec, y)
