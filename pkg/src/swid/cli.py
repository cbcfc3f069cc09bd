"""Command line driver: ``swid {swig,check,identify,simulate,presets}``.

Exit codes: 0 ok, 2 parse error, 3 semantic error, 4 positivity failure,
5 exchangeability failure (``check`` without ``--lenient``).
"""

from __future__ import annotations

import argparse
import json
import sys
from itertools import product
from pathlib import Path

from swid.dist import format_number
from swid.dsl import DslSemanticError, DslSyntaxError, ModelFile, parse_model
from swid.errors import EmptyCell, PositivityError, SwidError
from swid.ident import (
    PRESET_BINDINGS,
    PRESETS,
    RegimeSpec,
    check_positivity,
    exchangeability_conditions,
    exact_value,
    identify,
    plugin_estimate,
    preset,
)
from swid.scm import factual_law, sample
from swid.swig import Regime, build_swig, render_step

EXIT_PARSE, EXIT_SEMANTIC, EXIT_POSITIVITY, EXIT_EXCHANGEABILITY = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _dump(doc: object) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load(path: str) -> ModelFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc.strerror}") from None
    try:
        return parse_model(text)
    except DslSyntaxError as exc:
        raise CliError(EXIT_PARSE, f"{path}:{exc}") from None
    except DslSemanticError as exc:
        raise CliError(EXIT_SEMANTIC, f"{path}:{exc}") from None


def _spec(model: ModelFile) -> RegimeSpec:
    if model.query is None or model.query.spec is None:
        raise CliError(EXIT_SEMANTIC, "the file has no query regime")
    return model.query.spec


def _bindings(model: ModelFile) -> dict[str, int]:
    q = model.query
    out = dict(PRESET_BINDINGS) if q.scenario else {}
    out.update(q.binding_map)
    return out


def _options(model: ModelFile) -> set[str]:
    return set(model.query.options) if model.query else set()


def parse_regime(text: str, model: ModelFile) -> Regime:
    steps = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        var, sep, value = part.partition("=")
        var, value = var.strip(), value.strip()
        if not sep or var not in model.dag:
            raise CliError(EXIT_SEMANTIC, f"bad regime step {part!r}")
        support = model.dag.support(var)
        steps.append((var, support.index(value) if value in support else value))
    try:
        return Regime(steps)
    except SwidError as exc:
        raise CliError(EXIT_SEMANTIC, str(exc)) from None


def cmd_swig(args: argparse.Namespace) -> int:
    model = load(args.file)
    regime = parse_regime(args.regime, model) if args.regime is not None else _spec(model).regime()
    sys.stdout.write(build_swig(model.dag, regime).to_dot())
    return 0


def _positivity(model: ModelFile, spec: RegimeSpec) -> dict | None:
    """Positivity for the bound regime; unbound symbols range over their support."""
    if model.model is None:
        return None
    dist = factual_law(model.scm) if model.scm is not None else model.dist
    bound = spec.bind(_bindings(model))
    free = [s for s in bound.steps if isinstance(s.forced, str)]
    violations = []
    for levels in product(*(range(len(model.dag.support(s.decision))) for s in free)):
        concrete = bound.bind({s.forced: lvl for s, lvl in zip(free, levels)})
        regime = ", ".join(render_step(s.decision, s.forced, model.dag.support(s.decision)) for s in concrete.steps)
        for v in check_positivity(dist, concrete).to_dict(model.dag)["violations"]:
            violations.append({**v, "regime": regime})
    return {"pass": not violations, "violations": violations}


def cmd_check(args: argparse.Namespace) -> int:
    model = load(args.file)
    spec = _spec(model)
    conditions = exchangeability_conditions(model.dag, spec, model.query.conditions)
    positivity = _positivity(model, spec)
    doc = {
        "exchangeability": [
            {"condition": c.render(model.dag), "holds": c.holds, "warnings": list(c.warnings)} for c in conditions
        ],
        "positivity": positivity,
    }
    sys.stdout.write(_dump(doc))
    if positivity is not None and not positivity["pass"]:
        return EXIT_POSITIVITY
    lenient = args.lenient or "lenient" in _options(model)
    if not lenient and not all(c.holds for c in conditions):
        return EXIT_EXCHANGEABILITY
    return 0


def _thresholds(text: str | None, model: ModelFile, spec: RegimeSpec) -> list[int] | None:
    if text is None:
        return list(model.query.thresholds) or None
    support = model.dag.support(spec.outcome)
    out = []
    for label in filter(None, (t.strip() for t in text.split(","))):
        if label not in support:
            raise CliError(EXIT_SEMANTIC, f"{label} is not a level of {spec.outcome}")
        out.append(support.index(label))
    return out


def cmd_identify(args: argparse.Namespace) -> int:
    model = load(args.file)
    spec = _spec(model)
    if model.model is None:
        raise CliError(EXIT_SEMANTIC, "identify needs an scm or dist block")
    override = args.override_positivity or "override_positivity" in _options(model)
    try:
        result = identify(
            model.dag,
            model.model,
            spec,
            thresholds=_thresholds(args.thresholds, model, spec),
            bindings=_bindings(model),
            extra_conditions=model.query.conditions,
            override_positivity=override,
            scenario=model.query.scenario,
        )
    except PositivityError as exc:
        sys.stdout.write(_dump({"positivity": exc.report.to_dict(model.dag)}))
        return EXIT_POSITIVITY
    sys.stdout.write(_dump(result.to_dict()))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    model = load(args.file)
    if model.scm is None:
        raise CliError(EXIT_SEMANTIC, "simulate needs an scm block")
    if args.n < 1:
        raise CliError(EXIT_SEMANTIC, "--n must be positive")
    data = sample(model.scm, args.n, args.seed)
    observed = [n.name for n in model.dag.nodes if n.observed]
    doc: dict = {"n": args.n, "seed": args.seed, "estimates": []}
    if model.query is not None and model.query.spec is not None:
        spec = model.query.spec.bind(_bindings(model))
        if not spec.is_concrete:
            raise CliError(EXIT_SEMANTIC, "bind every regime symbol before simulating")
        support = model.dag.support(spec.outcome)
        for y in list(model.query.thresholds) or range(len(support)):
            entry = {"y": support[y], "exact": format_number(exact_value(model.scm, spec, y))}
            try:
                entry["plugin"] = float(plugin_estimate(data, spec, y))
            except EmptyCell as exc:
                # small samples can miss a conditioning cell; the data are still written
                entry["plugin"] = None
                entry["empty_cell"] = {"step": exc.step, "cell": {v: model.dag.support(v)[x] for v, x in exc.assignment.items()}}
            doc["estimates"].append(entry)
    csv_text = data.to_csv(observed)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        sys.stdout.write(_dump(doc))
    else:
        sys.stdout.write(csv_text)
        sys.stderr.write(_dump(doc))
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    doc = []
    for name in PRESETS:
        dag, spec = preset(name)
        doc.append(
            {
                "name": name,
                "nodes": [n.name if n.observed else f"{n.name} (latent)" for n in dag.nodes],
                "steps": [render_step(s.decision, s.forced, dag.support(s.decision)) for s in spec.steps],
                "outcome": spec.outcome,
            }
        )
    sys.stdout.write(_dump(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("swig", help="print the SWIG as DOT")
    p.add_argument("file")
    p.add_argument("--regime", help="steps like R=1,S=1,Z=z (default: the query regime)")
    p.set_defaults(func=cmd_swig)

    p = sub.add_parser("check", help="derived exchangeability conditions and positivity")
    p.add_argument("file")
    p.add_argument("--lenient", action="store_true", help="exit 0 even if an exchangeability condition fails")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("identify", help="g-formula, IPW and oracle values")
    p.add_argument("file")
    p.add_argument("--thresholds", help="comma separated outcome levels")
    p.add_argument("--override-positivity", action="store_true")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("simulate", help="sample a dataset and report plug-in estimates")
    p.add_argument("file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="CSV path (default: CSV on stdout, JSON on stderr)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("presets", help="list the bundled scenarios")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"swid: {exc}", file=sys.stderr)
        return exc.code
    except SwidError as exc:
        print(f"swid: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
