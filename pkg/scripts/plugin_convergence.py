"""Plug-in g-formula error against sample size on a bundled model.

Usage: python3 scripts/plugin_convergence.py [--model engagement.swid] [--reps 5]
"""

import argparse
from importlib import resources
from statistics import mean

from swid.dsl import parse_model
from swid.errors import EmptyCell
from swid.ident import PRESET_BINDINGS, exact_value, plugin_estimate
from swid.scm import sample


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default="engagement.swid")
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--sizes", default="1000,10000,100000")
    parser.add_argument("--y", type=int, default=0, help="outcome threshold index")
    args = parser.parse_args()
    model = parse_model(resources.files("swid.models").joinpath(args.model).read_text())
    bindings = dict(PRESET_BINDINGS) if model.query.scenario else {}
    bindings.update(model.query.binding_map)
    spec = model.query.spec.bind(bindings)
    exact = float(exact_value(model.scm, spec, args.y))
    print(f"exact P(Y <= {args.y}) = {exact:.5f}")
    print(f"{'n':>8} {'mean |err|':>11} {'max |err|':>10} {'empty':>6}")
    for n in map(int, args.sizes.split(",")):
        errors, empty = [], 0
        for seed in range(args.reps):
            try:
                errors.append(abs(float(plugin_estimate(sample(model.scm, n, seed), spec, args.y)) - exact))
            except EmptyCell:
                empty += 1
        if errors:
            print(f"{n:>8} {mean(errors):>11.5f} {max(errors):>10.5f} {empty:>6}")
        else:
            print(f"{n:>8} {'-':>11} {'-':>10} {empty:>6}")


if __name__ == "__main__":
    main()
