"""Single world intervention graphs, exact identification functionals and
an SCM oracle to check them against."""

from swid.dist import DiscreteJoint, Event, conditional, cond_cdf, expect_over, prob
from swid.graph import CausalDag, Edge, Node, ancestors, d_separated, descendants, validate_dag
from swid.ident import RegimeSpec, Step, check_positivity, g_formula, identify, ipw, plugin_estimate, preset
from swid.scm import Scm, counterfactual_joint, do_law, factual_law, random_scm, sample
from swid.swig import Regime, build_swig, derive_exchangeability, swig_d_separated

__all__ = [
    "CausalDag", "DiscreteJoint", "Edge", "Event", "Node", "Regime", "RegimeSpec", "Scm", "Step",
    "ancestors", "build_swig", "check_positivity", "cond_cdf", "conditional", "counterfactual_joint",
    "d_separated", "derive_exchangeability", "descendants", "do_law", "expect_over", "factual_law",
    "g_formula", "identify", "ipw", "plugin_estimate", "preset", "prob", "random_scm", "sample",
    "swig_d_separated", "validate_dag",
]
