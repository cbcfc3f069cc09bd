import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import build, random_dag_edges
from swid.errors import NoDesignatedOutcome, RegimeOrderError, UnknownNode
from swid.graph import d_separated
from swid.ident import preset
from swid.swig import CounterfactualLabel, Regime, build_swig, derive_exchangeability, swig_d_separated

FULL = Regime([("R", 1), ("S", 1), ("Z", "z")])

# Expected labelled edges; fixed nodes are written by their value
ENGAGEMENT_SWIG = {
    ("X", "R"),
    ("X", "S^{r=1}"),
    ("X", "Z^{r=1,s=1}"),
    ("X", "Y^{r=1,s=1,z}"),
    ("r=1", "S^{r=1}"),
    ("r=1", "Z^{r=1,s=1}"),
    ("r=1", "Y^{r=1,s=1,z}"),
    ("s=1", "Z^{r=1,s=1}"),
    ("s=1", "Y^{r=1,s=1,z}"),
    ("z", "Y^{r=1,s=1,z}"),
}
EXCLUSION_SWIG = {
    ("X", "R"),
    ("X", "S^{r=1}"),
    ("X", "Z^{r=1,s=1}"),
    ("X", "Y^z"),
    ("r=1", "S^{r=1}"),
    ("r=1", "Z^{r=1,s=1}"),
    ("s=1", "Z^{r=1,s=1}"),
    ("z", "Y^z"),
}
CENSORING_SWIG = {("X", "Z"), ("X", "C^z"), ("X", "Y^z"), ("z", "C^z"), ("z", "Y^z")}


def rendered_labels(swig):
    return {v: swig.label(v).render(swig.dag) for v in swig.dag.names}


def test_engagement_swig_matches_drawn_graph():
    dag, _ = preset("engagement")
    swig = build_swig(dag, FULL)
    assert rendered_labels(swig) == {
        "X": "X", "R": "R", "S": "S^{r=1}", "Z": "Z^{r=1,s=1}", "Y": "Y^{r=1,s=1,z}", "U": "U",
    }
    edges = swig.labelled_edges()
    assert {e for e in edges if e[0] != "U"} == ENGAGEMENT_SWIG
    # U keeps its arrow into the outcome; the arrow into Z is inactive once s=1 is set
    assert {e for e in edges if e[0] == "U"} == {("U", "Y^{r=1,s=1,z}")}
    assert swig.fixed_nodes == {("R", 1), ("S", 1), ("Z", "z")}


def test_exclusion_swig_minimal_label():
    dag, _ = preset("exclusion")
    swig = build_swig(dag, FULL)
    assert swig.labelled_edges() == EXCLUSION_SWIG
    assert swig.label("Y") == CounterfactualLabel("Y", (("Z", "z"),))
    assert swig.label("Y").render() == "Y^z"


def test_censoring_swig_outcome_not_indexed_by_censoring():
    dag, spec = preset("censoring")
    swig = build_swig(dag, spec.regime())
    assert swig.labelled_edges() == CENSORING_SWIG
    assert rendered_labels(swig)["C"] == "C^z"
    assert rendered_labels(swig)["Y"] == "Y^z"


def test_empty_regime_is_the_dag():
    dag, _ = preset("engagement")
    swig = build_swig(dag, Regime())
    assert swig.edges == {(e.source, e.target) for e in dag.edges}
    assert all(not swig.label(v).superscript for v in dag.names)


def test_regime_order_and_unknown_nodes():
    dag, _ = preset("engagement")
    with pytest.raises(RegimeOrderError):
        build_swig(dag, Regime([("Z", 1), ("R", 1)]))
    with pytest.raises(UnknownNode):
        build_swig(dag, Regime([("Q", 1)]))


def test_fixed_nodes_block():
    dag, _ = preset("engagement")
    swig = build_swig(dag, FULL)
    assert swig_d_separated(swig, ["Y"], ["R"], ["X"])
    assert swig_d_separated(swig, ["Y"], ["Z"], ["X", "R", "S"])
    assert swig_d_separated(swig, [swig.label("Y")], [swig.label("S")], [swig.label("X"), swig.label("R")])


def test_treatment_only_regime_leaves_participation_path_open():
    dag, _ = preset("engagement")
    swig = build_swig(dag, Regime([("Z", "z")]))
    assert swig.label("Y").render() == "Y^z"
    assert not swig_d_separated(swig, ["Y"], ["S"], ["X"])


def test_derived_conditions_engagement():
    dag, spec = preset("engagement")
    conds = derive_exchangeability(dag, spec.regime(), "Y")
    assert [c.render(dag) for c in conds] == [
        "Y^{r=1,s=1,z} ⊥ R | X",
        "Y^{r=1,s=1,z} ⊥ S^{r=1} | X, R",
        "Y^{r=1,s=1,z} ⊥ Z^{r=1,s=1} | X, R, S^{r=1}",
    ]
    assert all(c.holds for c in conds)


def test_derived_conditions_censoring():
    dag, spec = preset("censoring")
    conds = derive_exchangeability(dag, spec.regime(), "Y")
    assert [c.render(dag) for c in conds] == ["Y^z ⊥ Z | X", "Y^z ⊥ C^z | X, Z"]
    assert all(c.holds for c in conds)


def test_derived_conditions_time_varying():
    dag, spec = preset("time_varying")
    conds = derive_exchangeability(dag, spec.regime(), "Y")
    y = "Y^{r=1,s=1,z,a0,c1=0,a1}"
    hist = ["X", "R", "S^{r=1}", "Z^{r=1,s=1}", "L0^{r=1,s=1,z}", "A0^{r=1,s=1,z}", "C1^{r=1,s=1,z,a0}",
            "L1^{r=1,s=1,z,a0,c1=0}", "A1^{r=1,s=1,z,a0,c1=0}"]
    expected = [
        (y, "R", 1), (y, "S^{r=1}", 2), (y, "Z^{r=1,s=1}", 3), (y, "A0^{r=1,s=1,z}", 5),
        (y, "C1^{r=1,s=1,z,a0}", 6), (y, "A1^{r=1,s=1,z,a0,c1=0}", 8), (y, "C2^{r=1,s=1,z,a0,c1=0,a1}", 9),
    ]
    got = [c.render(dag) for c in conds]
    want = [f"{a} ⊥ {b} | {', '.join(h for h in hist[:k] if h != b)}" for a, b, k in expected]
    assert got == want
    assert all(c.holds for c in conds)


def test_latent_warning_on_failing_condition():
    dag, _ = preset("engagement")
    (cond,) = derive_exchangeability(dag, Regime([("Z", "z")]), "Y")
    assert not cond.holds
    assert cond.warnings


def test_missing_outcome():
    dag, spec = preset("engagement")
    with pytest.raises(NoDesignatedOutcome):
        derive_exchangeability(dag, spec.regime(), None)


def test_dot_output_boxes_fixed_nodes():
    dag, spec = preset("engagement")
    dot = build_swig(dag, spec.regime()).to_dot()
    assert '"Z|z" [label="z", shape=box];' in dot
    assert '"Y" [label="Y^{r=1,s=1,z}"];' in dot


@given(st.integers(2, 7), st.integers(0, 10**6))
def test_no_edge_enters_a_fixed_node(n, seed):
    rng = random.Random(seed)
    names, edges = random_dag_edges(n, rng)
    dag = build(names, edges)
    picked = sorted(rng.sample(range(n), rng.randint(1, n)))
    swig = build_swig(dag, Regime((names[i], 1) for i in picked))
    fixed = set(swig.fixed)
    assert all(t not in fixed for _, t in swig.edges)
    assert len(swig.edges) == len(edges)


@given(st.integers(2, 7), st.integers(0, 10**6))
def test_minimal_label_is_ancestral_regime_steps(n, seed):
    # a step appears in v's label iff some child of the step's variable is an ancestor of v
    rng = random.Random(seed)
    names, edges = random_dag_edges(n, rng)
    dag = build(names, edges)
    picked = sorted(rng.sample(range(n), rng.randint(1, n)))
    regime = Regime((names[i], 0) for i in picked)
    swig = build_swig(dag, regime)
    for v in names:
        expected = []
        for var, lvl in regime.steps:
            # any directed path out of var whose interior avoids other intervened nodes
            frontier = [c for c in dag.children(var)]
            seen = set()
            while frontier:
                u = frontier.pop()
                if u in seen:
                    continue
                seen.add(u)
                if u not in regime:
                    frontier.extend(dag.children(u))
            if v in seen:
                expected.append((var, lvl))
        assert swig.label(v).superscript == tuple(expected)


@given(st.integers(2, 6), st.integers(0, 10**6))
def test_empty_regime_swig_dsep_equals_dag_dsep(n, seed):
    rng = random.Random(seed)
    names, edges = random_dag_edges(n, rng)
    dag = build(names, edges)
    swig = build_swig(dag, Regime())
    a, b = rng.sample(names, 2)
    z = {v for v in names if v not in (a, b) and rng.random() < 0.4}
    assert swig_d_separated(swig, [a], [b], z) == d_separated(dag, {a}, {b}, z)
