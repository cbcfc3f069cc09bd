"""Regenerate the bundled ``.swid`` model files in ``src/swid/models``.

Usage: python3 scripts/make_models.py [--check]
With ``--check`` nothing is written; the script exits 1 if a file would change.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from swid.dsl import ModelFile, Query, serialize
from swid.ident import PRESET_BINDINGS, RegimeSpec, preset
from swid.scm import Mechanism, Scm, factual_law, random_scm

MODELS = Path(__file__).resolve().parent.parent / "src" / "swid" / "models"


def _header(title: str, expect: dict[str, int]) -> str:
    lines = [f"# {title}", "# Generated by scripts/make_models.py; edit that script, not this file."]
    lines += [f"# expect: {cmd}={code}" for cmd, code in expect.items()]
    return "\n".join(lines) + "\n"


def scenario_file(name: str, seed: int) -> ModelFile:
    dag, spec = preset(name)
    binds = tuple((s.forced, PRESET_BINDINGS[s.forced]) for s in spec.steps if isinstance(s.forced, str))
    return ModelFile(dag, random_scm(dag, seed), None, Query(scenario=name, spec=spec, bindings=binds))


def z_only_file(seed: int) -> ModelFile:
    dag, _ = preset("engagement")
    spec = RegimeSpec.make(["X"], [("Z", "z")], "Y")
    query = Query(spec=spec, bindings=(("z", 1),), conditions=(("Y", "S", ("X",)),))
    return ModelFile(dag, random_scm(dag, seed), None, query)


def positivity_file(seed: int) -> ModelFile:
    """Engagement model where nobody invited with X=0 participates."""
    base = scenario_file("engagement", seed)
    scm = base.scm
    m = scm.mechanisms["S"]
    table = {key: (0 if key[:2] == (0, 1) else out) for key, out in m.table.items()}
    mechanisms = {**scm.mechanisms, "S": Mechanism(m.parents, m.noise, table)}
    return replace(base, scm=Scm(scm.dag, mechanisms))


def dist_file(seed: int) -> ModelFile:
    """Censoring scenario given as an explicit observed joint (no oracle)."""
    dag, spec = preset("censoring")
    law = factual_law(random_scm(dag, seed))
    return ModelFile(dag, None, law, Query(spec=spec, bindings=(("z", 1),)))


def bundle() -> dict[str, str]:
    files = {
        "engagement.swid": (
            "Invitation, participation and treatment with latent prognostic factors",
            scenario_file("engagement", 11),
            {"check": 0, "identify": 0, "simulate": 0},
        ),
        "exclusion.swid": (
            "Engagement affects the outcome only through treatment",
            scenario_file("exclusion", 12),
            {"check": 0, "identify": 0},
        ),
        "censoring.swid": ("Treatment with loss to follow-up", scenario_file("censoring", 13), {"check": 0, "identify": 0}),
        "timevarying.swid": (
            "Engagement followed by two rounds of treatment and censoring",
            scenario_file("time_varying", 14),
            {"check": 0, "identify": 0},
        ),
        "fig1-z-only.swid": (
            "Intervening on treatment alone leaves engagement effects unblocked",
            z_only_file(15),
            {"check": 5, "identify": 0},
        ),
        "positivity-violation.swid": (
            "No invited individual with X=0 participates",
            positivity_file(16),
            {"check": 4, "identify": 4},
        ),
        "censoring-dist.swid": (
            "Censoring scenario as an explicit observed joint",
            dist_file(17),
            {"check": 0, "identify": 0},
        ),
    }
    return {name: _header(title, expect) + serialize(model) for name, (title, model, expect) in files.items()}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()
    stale = []
    for name, text in bundle().items():
        path = MODELS / name
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(name)
        else:
            path.write_text(text)
            print(f"wrote {path}")
    if stale:
        print("stale:", ", ".join(stale))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
