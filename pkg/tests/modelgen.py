"""Random ``ModelFile`` generator for round-trip tests."""

from __future__ import annotations

import random

from swid.dsl import ModelFile, Query
from swid.graph import Node, validate_dag
from swid.ident import PRESETS, RegimeSpec, Step, preset
from swid.scm import factual_law, random_scm

LABELS = [("0", "1"), ("lo", "hi"), ("0", "1", "2"), ("lo", "mid", "hi")]


def random_model(seed: int) -> ModelFile:
    rng = random.Random(seed)
    if rng.random() < 0.15:
        name = rng.choice(sorted(PRESETS))
        dag, spec = preset(name)
        model = random_scm(dag, seed) if name != "time_varying" or rng.random() < 0.5 else None
        binds = tuple((s.forced, rng.randint(0, 1)) for s in spec.steps if isinstance(s.forced, str) and rng.random() < 0.7)
        return ModelFile(dag, model, None, Query(scenario=name, spec=spec, bindings=binds))

    n = rng.randint(1, 6)
    nodes = []
    for i in range(n):
        support = rng.choice(LABELS) if rng.random() < 0.3 else ("0", "1")
        nodes.append(Node(f"V{i}", observed=rng.random() > 0.15 or i == n - 1, support=support))
    rng.shuffle(nodes)
    order = [nd.name for nd in sorted(nodes, key=lambda nd: int(nd.name[1:]))]
    edges = [(a, b) for i, a in enumerate(order) for b in order[i + 1:] if rng.random() < 0.4]
    dag = validate_dag(nodes, edges)

    kind = rng.choice(["scm", "dist", "none"])
    scm = dist = None
    if kind == "scm":
        scm = random_scm(dag, seed, min_prob=rng.choice(["0.05", "0.1"]))
    elif kind == "dist":
        law = factual_law(random_scm(dag, seed))
        keep = [v for v in dag.names if rng.random() < 0.8] or [dag.names[0]]
        dist = law.marginal(keep)

    return ModelFile(dag, scm, dist, _random_query(dag, rng))


def _random_query(dag, rng) -> Query | None:
    observed = [v for v in dag.order if dag.node(v).observed]
    if len(observed) < 2 or rng.random() < 0.2:
        return None
    picked = [v for v in observed[:-1] if rng.random() < 0.6]
    outcome = observed[-1]
    baseline = picked[:1] if picked and rng.random() < 0.7 else []
    rest = picked[len(baseline):]
    steps, symbols = [], []
    i = 0
    while i < len(rest):
        history = ()
        if i + 1 < len(rest) and rng.random() < 0.3:
            history = (rest[i],)
            i += 1
        var = rest[i]
        if rng.random() < 0.4:
            forced = f"s{len(symbols)}"
            symbols.append((forced, var))
        else:
            forced = rng.randrange(len(dag.support(var)))
        steps.append(Step(var, forced, history))
        i += 1
    spec = RegimeSpec(tuple(baseline), tuple(steps), outcome)
    bindings = tuple((sym, rng.randrange(len(dag.support(var)))) for sym, var in symbols if rng.random() < 0.5)
    sup = len(dag.support(outcome))
    thresholds = tuple(sorted(rng.sample(range(sup), rng.randint(0, sup))))
    conditions = []
    if len(observed) >= 3 and rng.random() < 0.3:
        a, b, *given = rng.sample(observed, rng.randint(2, min(4, len(observed))))
        conditions.append((a, b, tuple(given)))
    options = tuple(o for o in ("lenient", "override_positivity") if rng.random() < 0.2)
    return Query(None, spec, bindings, thresholds, tuple(conditions), options)
