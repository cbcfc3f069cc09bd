"""Compare g-formula, IPW and the interventional oracle on random SCMs.

Usage: python3 scripts/identity_sweep.py [--seeds 50] [--backend rational]
Prints one row per scenario with the largest disagreement seen.
"""

import argparse
import time

from swid.dist import format_number
from swid.ident import PRESET_BINDINGS, PRESETS, g_formula, ipw, preset
from swid.scm import do_law, factual_law, marginal_cdf, random_scm


def sweep(name: str, seeds: int, backend: str) -> tuple[object, float]:
    dag, spec = preset(name)
    bound = spec.bind({s.forced: PRESET_BINDINGS[s.forced] for s in spec.steps if isinstance(s.forced, str)})
    worst = 0
    start = time.perf_counter()
    for seed in range(seeds):
        scm = random_scm(dag, seed)
        law = factual_law(scm, backend)
        oracle = do_law(scm, bound.regime(), backend)
        for y in range(len(dag.support(spec.outcome))):
            values = (g_formula(law, bound, y), ipw(law, bound, y), marginal_cdf(oracle, spec.outcome, y))
            worst = max(worst, max(values) - min(values))
    return worst, time.perf_counter() - start


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--backend", choices=["rational", "decimal"], default="rational")
    args = parser.parse_args()
    print(f"{'scenario':<14} {'seeds':>5} {'max spread':>12} {'seconds':>8}")
    for name in PRESETS:
        worst, secs = sweep(name, args.seeds, args.backend)
        print(f"{name:<14} {args.seeds:>5} {format_number(worst):>12} {secs:>8.1f}")


if __name__ == "__main__":
    main()
