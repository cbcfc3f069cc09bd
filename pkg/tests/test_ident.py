from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_prob, random_positive_joint
from swid.dist import DiscreteJoint, cond_cdf, Event
from swid.errors import EmptyCell, IdentError, PositivityError, UnknownScenario
from swid.ident import (
    NO_CAUSAL,
    PARTIAL,
    RegimeSpec,
    check_positivity,
    g_formula,
    identify,
    ipw,
    plugin_estimate,
    preset,
)
from swid.scm import Dataset, Mechanism, Scm, do_law, factual_law, marginal_cdf, random_scm
from swid.swig import Regime

FIVE = ("X", "R", "S", "Z", "Y")
ENG = RegimeSpec.make(["X"], [("R", 1), ("S", 1), ("Z", 1)], "Y")
seeds = st.integers(0, 10**6)


def hand_g_formula(dist, y):
    """Sum over x of f(x) Pr[Y<=y | x, R=1, S=1, Z=1], every term by row enumeration."""
    total = Fraction(0)
    for x in (0, 1):
        fx = brute_prob(dist, lambda a: a["X"] == x)
        cell = lambda a: a["X"] == x and a["R"] == 1 and a["S"] == 1 and a["Z"] == 1  # noqa: E731
        num = brute_prob(dist, lambda a: cell(a) and a["Y"] <= y)
        total += fx * num / brute_prob(dist, cell)
    return total


def hand_ipw(dist, spec, y):
    """Weighted indicator sum; each weight factor is a ratio of enumerated row sums."""
    total = Fraction(0)
    for row, p in dist.table.items():
        a = dict(zip(dist.variables, row))
        if a[spec.outcome] > y or any(a[s.decision] != s.forced for s in spec.steps):
            continue
        weight = Fraction(1)
        seen = list(spec.baseline)
        for s in spec.steps:
            seen += list(s.history)
            ctx = {v: a[v] for v in seen}
            den = brute_prob(dist, lambda b: all(b[v] == ctx[v] for v in ctx))
            num = brute_prob(dist, lambda b: all(b[v] == ctx[v] for v in ctx) and b[s.decision] == s.forced)
            weight *= num / den
            seen.append(s.decision)
        total += p / weight
    return total


@given(seeds, st.integers(0, 1))
def test_g_formula_matches_hand_enumeration(seed, y):
    dist = random_positive_joint(FIVE, seed)
    assert g_formula(dist, ENG, y) == hand_g_formula(dist, y)


@given(seeds, st.integers(0, 1))
def test_ipw_matches_weighted_sum(seed, y):
    dist = random_positive_joint(FIVE, seed)
    assert ipw(dist, ENG, y) == hand_ipw(dist, ENG, y)


@given(seeds, st.integers(0, 1))
def test_ipw_equals_g_formula_without_causal_structure(seed, y):
    dist = random_positive_joint(FIVE, seed)
    assert ipw(dist, ENG, y) == g_formula(dist, ENG, y)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_ipw_equals_g_formula_with_histories(seed):
    names = ("X", "A0", "L1", "A1", "Y")
    spec = RegimeSpec.make(["X"], [("A0", 1), ("A1", 0, ["L1"])], "Y")
    dist = random_positive_joint(names, seed)
    assert ipw(dist, spec, 0) == g_formula(dist, spec, 0) == hand_ipw(dist, spec, 0)


def test_constant_covariate_reduces_to_conditional_cdf():
    base = random_positive_joint(FIVE[1:], 5)
    dist = DiscreteJoint(FIVE, (1, 2, 2, 2, 2), {(0,) + r: p for r, p in base.table.items()})
    given_ = Event.equal({"R": 1, "S": 1, "Z": 1})
    assert g_formula(dist, ENG, 0) == cond_cdf(dist, "Y", 0, given_)


def test_independent_decision_weight_is_constant():
    d_part = {0: Fraction(1, 4), 1: Fraction(3, 4)}
    rest = random_positive_joint(("X", "Y"), 9)
    table = {(x, d, yv): p * d_part[d] for (x, yv), p in rest.table.items() for d in (0, 1)}
    dist = DiscreteJoint(("X", "D", "Y"), (2, 2, 2), table)
    spec = RegimeSpec.make(["X"], [("D", 1)], "Y")
    direct = brute_prob(dist, lambda a: a["D"] == 1 and a["Y"] == 0) / d_part[1]
    assert ipw(dist, spec, 0) == direct == cond_cdf(dist, "Y", 0, Event.equal({"D": 1}))


@given(seeds)
def test_identified_value_is_a_cdf(seed):
    dag, _ = preset("censoring")
    scm = random_scm(dag, seed)
    spec = preset("censoring")[1].bind({"z": 0})
    law = factual_law(scm)
    assert g_formula(law, spec, 0) <= g_formula(law, spec, 1) == 1


def test_positivity_names_the_violating_cell():
    dag, spec = preset("engagement")
    scm = random_scm(dag, 4)
    m = scm.mechanisms["S"]
    table = {k: (0 if k[:2] == (0, 1) else v) for k, v in m.table.items()}
    broken = Scm(dag, {**scm.mechanisms, "S": Mechanism(m.parents, m.noise, table)})
    law = factual_law(broken)
    report = check_positivity(law, spec.bind({"z": 1}))
    assert not report.passed
    assert report.violations() == [("S", {"X": 0})]
    with pytest.raises(PositivityError):
        g_formula(law, spec.bind({"z": 1}), 0)
    with pytest.raises(PositivityError):
        identify(dag, broken, spec, bindings={"z": 1})
    result = identify(dag, broken, spec, bindings={"z": 1}, override_positivity=True)
    assert PARTIAL in result.flags

    # giving the empty cell some mass clears the diagnostic
    bump = Fraction(1, 100)
    cell = {k: p for k, p in law.table.items()}
    pos = {v: i for i, v in enumerate(law.variables)}
    key = next(k for k in cell if k[pos["X"]] == 0 and k[pos["R"]] == 1 and k[pos["S"]] == 0)
    hit = list(key)
    hit[pos["S"]] = hit[pos["Z"]] = 1  # the new participants also need treated members
    hit = tuple(hit)
    cell = {k: p * (1 - bump) for k, p in cell.items()}
    cell[hit] = cell.get(hit, Fraction(0)) + bump
    assert check_positivity(DiscreteJoint(law.variables, law.supports, cell), spec.bind({"z": 1})).passed


def test_random_models_pass_positivity():
    for name in ("engagement", "censoring", "time_varying"):
        dag, spec = preset(name)
        law = factual_law(random_scm(dag, 1))
        assert check_positivity(law, spec.bind({"z": 1, "a0": 0, "a1": 1})).passed


def test_zero_steps_vacuous():
    dist = random_positive_joint(("X", "Y"), 2)
    assert check_positivity(dist, RegimeSpec.make(["X"], [], "Y")).passed


def test_presets():
    dag, spec = preset("engagement")
    assert len(dag.names) == 6 and len(dag.edges) == 12 and dag.latent == {"U"}
    dag, _ = preset("censoring")
    assert not dag.has_edge("C", "Y")
    dag, spec = preset("time_varying")
    assert len(spec.steps) == 7
    assert [s.history for s in spec.steps if s.history] == [("L0",), ("L1",)]
    with pytest.raises(UnknownScenario):
        preset("nope")


def test_spec_validation():
    dag, _ = preset("engagement")
    with pytest.raises(IdentError):
        RegimeSpec.make(["X"], [("Z", 1), ("R", 1)], "Y").validate(dag)
    with pytest.raises(IdentError):
        RegimeSpec.make(["X", "U"], [("Z", 1)], "Y").validate(dag)
    with pytest.raises(IdentError):
        RegimeSpec.make(["X"], [("X", 1)], "Y")


def test_engagement_three_way_agreement():
    dag, spec = preset("engagement")
    result = identify(dag, random_scm(dag, 21), spec, bindings={"z": 1})
    assert all(t.max_abs_diff == 0 for t in result.thresholds)
    assert result.identified and not result.flags


def test_treatment_only_regime_is_flagged():
    dag, _ = preset("engagement")
    spec = RegimeSpec.make(["X"], [("Z", "z")], "Y")
    result = identify(dag, random_scm(dag, 2), spec, bindings={"z": 1}, extra_conditions=[("Y", "S", ["X"])])
    assert NO_CAUSAL in result.flags
    rendered = {c["condition"]: c["holds"] for c in result.to_dict()["exchangeability"]}
    assert rendered["Y^z ⊥ S | X"] is False


def test_exclusion_value_equals_treatment_only_intervention():
    dag, spec = preset("exclusion")
    scm = random_scm(dag, 8)
    result = identify(dag, scm, spec, bindings={"z": 1})
    z_only = do_law(scm, Regime([("Z", 1)]))
    for t in result.thresholds:
        assert t.g_formula == t.ipw == marginal_cdf(z_only, "Y", t.y)


def test_result_json_shape():
    dag, spec = preset("censoring")
    doc = identify(dag, random_scm(dag, 0), spec, bindings={"z": 1}, scenario="censoring").to_dict()
    assert set(doc) == {"scenario", "regime", "thresholds", "exchangeability", "positivity", "flags"}
    assert set(doc["thresholds"][0]) == {"y", "g_formula", "ipw", "oracle", "max_abs_diff"}
    assert doc["regime"] == "z=1, c=0"


def _dataset_from(dist: DiscreteJoint, scale: int) -> Dataset:
    rows = []
    for row, p in sorted(dist.table.items()):
        rows += [row] * int(p * scale)
    return Dataset(dist.variables, dist.supports, np.array(rows, dtype=np.int64), 0)


def test_plugin_on_exact_counts_is_exact():
    dist = random_positive_joint(FIVE, 4)
    scale = int(np.lcm.reduce([p.denominator for p in dist.table.values()]))
    data = _dataset_from(dist, scale)
    assert plugin_estimate(data, ENG, 0) == g_formula(dist, ENG, 0)


def test_plugin_empty_cell():
    dist = random_positive_joint(FIVE, 4)
    data = _dataset_from(dist, 2000)
    keep = data.rows[data.rows[:, FIVE.index("S")] == 0]
    with pytest.raises(EmptyCell) as info:
        plugin_estimate(replace(data, rows=keep), ENG, 0)
    assert info.value.step == "S"
