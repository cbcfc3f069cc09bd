"""Exact algebra over finite discrete joint distributions.

Two numeric backends: ``rational`` (``fractions.Fraction``, exact) and
``decimal`` (``decimal.Decimal``). ``SWID_BACKEND`` picks the default.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import prod
from typing import Union

from swid.errors import DistError, SizeLimit, SwidError, UnknownVariable, ZeroConditioningMass

Number = Union[Fraction, Decimal]

MAX_CELLS = 2**24
DECIMAL_TOLERANCE = Decimal("1e-12")
BACKENDS = ("rational", "decimal")


def default_backend() -> str:
    backend = os.environ.get("SWID_BACKEND", "rational").strip().lower()
    if backend not in BACKENDS:
        raise DistError(f"SWID_BACKEND must be one of {BACKENDS}, got {backend!r}")
    return backend


def to_number(x: object, backend: str | None = None) -> Number:
    backend = backend or default_backend()
    if isinstance(x, str):
        x = parse_number(x)
    if backend == "rational":
        if isinstance(x, Decimal):
            return Fraction(x)
        return Fraction(x)
    if isinstance(x, Fraction):
        return Decimal(x.numerator) / Decimal(x.denominator)
    return Decimal(x) if not isinstance(x, float) else Decimal(repr(x))


def parse_number(text: str) -> Fraction:
    """``"3/8"``, ``"0.375"`` and ``"1"`` all parse exactly."""
    text = text.strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise DistError(f"not a probability literal: {text!r}") from None


def format_number(x: Number | int) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, Decimal):
        return format(x.normalize(), "f") if x == x.to_integral_value() else str(x)
    return str(x)


def zero_like(x: Number) -> Number:
    return Decimal(0) if isinstance(x, Decimal) else Fraction(0)


@dataclass(frozen=True)
class Atom:
    var: str
    op: str  # "=" or "<="
    level: int

    def __post_init__(self) -> None:
        if self.op not in ("=", "<="):
            raise DistError(f"unsupported atom operator {self.op!r}")

    def holds(self, value: int) -> bool:
        return value == self.level if self.op == "=" else value <= self.level

    def __str__(self) -> str:
        return f"{self.var}{self.op}{self.level}"


@dataclass(frozen=True)
class Event:
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        names = [a.var for a in self.atoms]
        if len(set(names)) != len(names):
            raise DistError(f"event has two atoms on one variable: {self}")

    @classmethod
    def equal(cls, assignment: Mapping[str, int] | None = None) -> "Event":
        return cls(tuple(Atom(v, "=", int(x)) for v, x in (assignment or {}).items()))

    @classmethod
    def at_most(cls, var: str, level: int) -> "Event":
        return cls((Atom(var, "<=", int(level)),))

    def __and__(self, other: "Event") -> "Event":
        return Event(self.atoms + other.atoms)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(a.var for a in self.atoms)

    def __str__(self) -> str:
        return "(" + ", ".join(map(str, self.atoms)) + ")" if self.atoms else "(Ω)"


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint table over ``variables``; rows absent from ``table`` have mass 0."""

    variables: tuple[str, ...]
    supports: tuple[int, ...]
    table: Mapping[tuple[int, ...], Number]

    def __post_init__(self) -> None:
        if len(self.variables) != len(self.supports):
            raise DistError("variables and supports differ in length")
        if len(set(self.variables)) != len(self.variables):
            raise DistError(f"repeated variable in {self.variables}")
        if any(s < 1 for s in self.supports):
            raise DistError("every support size must be at least 1")
        if prod(self.supports) > MAX_CELLS:
            raise SizeLimit(f"{prod(self.supports)} cells exceeds the {MAX_CELLS} limit")
        total = None
        for row, p in self.table.items():
            if len(row) != len(self.variables) or any(not 0 <= x < s for x, s in zip(row, self.supports)):
                raise DistError(f"row {row} outside the declared supports")
            if p < 0:
                raise DistError(f"negative probability at {row}")
            total = p if total is None else total + p
        if total is None:
            raise DistError("empty table")
        if isinstance(total, Decimal):
            if abs(total - 1) > DECIMAL_TOLERANCE:
                raise DistError(f"total mass {total} != 1")
        elif total != 1:
            raise DistError(f"total mass {total} != 1")

    @classmethod
    def from_rows(
        cls,
        variables: Sequence[str],
        supports: Sequence[int],
        rows: Iterable[tuple[Sequence[int], object]],
        backend: str | None = None,
    ) -> "DiscreteJoint":
        table: dict[tuple[int, ...], Number] = {}
        for row, p in rows:
            key = tuple(int(x) for x in row)
            if key in table:
                raise DistError(f"duplicate row {key}")
            table[key] = to_number(p, backend)
        return cls(tuple(variables), tuple(supports), table)

    @classmethod
    def uniform(cls, variables: Sequence[str], supports: Sequence[int], backend: str | None = None) -> "DiscreteJoint":
        n = prod(supports)
        p = to_number(Fraction(1, n), backend)
        return cls(tuple(variables), tuple(supports), {row: p for row in product(*map(range, supports))})

    @cached_property
    def _pos(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.variables)}

    @property
    def backend(self) -> str:
        first = next(iter(self.table.values()))
        return "decimal" if isinstance(first, Decimal) else "rational"

    def index(self, var: str) -> int:
        try:
            return self._pos[var]
        except KeyError:
            raise UnknownVariable(var) from None

    def support(self, var: str) -> int:
        return self.supports[self.index(var)]

    def _matcher(self, event: Event) -> Callable[[tuple[int, ...]], bool]:
        checks = [(self.index(a.var), a) for a in event.atoms]
        return lambda row: all(a.holds(row[i]) for i, a in checks)

    def marginal(self, variables: Sequence[str]) -> "DiscreteJoint":
        idx = [self.index(v) for v in variables]
        out: dict[tuple[int, ...], Number] = defaultdict(lambda: zero_like(self._zero))
        for row, p in self.table.items():
            out[tuple(row[i] for i in idx)] += p
        return DiscreteJoint(tuple(variables), tuple(self.supports[i] for i in idx), dict(out))

    def convert(self, backend: str) -> "DiscreteJoint":
        return DiscreteJoint(self.variables, self.supports, {r: to_number(p, backend) for r, p in self.table.items()})

    @property
    def _zero(self) -> Number:
        return zero_like(next(iter(self.table.values())))

    def assignments(self, variables: Sequence[str]) -> Iterable[tuple[dict[str, int], Number]]:
        for row, p in self.marginal(variables).table.items():
            yield dict(zip(variables, row)), p

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*self.variables, "prob"])
        for row in sorted(self.table):
            writer.writerow([*row, format_number(self.table[row])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, supports: Sequence[int] | None = None, backend: str | None = None) -> "DiscreteJoint":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header[-1] != "prob":
            raise DistError("last CSV column must be 'prob'")
        rows = [(tuple(int(x) for x in r[:-1]), r[-1]) for r in reader if r]
        if supports is None:
            supports = [max(r[0][i] for r in rows) + 1 for i in range(len(header) - 1)]
        return cls.from_rows(header[:-1], supports, rows, backend)

    def to_json(self) -> str:
        doc = {
            "variables": list(self.variables),
            "supports": list(self.supports),
            "rows": [[list(r), format_number(self.table[r])] for r in sorted(self.table)],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, backend: str | None = None) -> "DiscreteJoint":
        doc = json.loads(text)
        return cls.from_rows(doc["variables"], doc["supports"], [(r, p) for r, p in doc["rows"]], backend)


def prob(dist: DiscreteJoint, event: Event = Event()) -> Number:
    match = dist._matcher(event)
    total = dist._zero
    for row, p in dist.table.items():
        if match(row):
            total += p
    return total


def conditional(dist: DiscreteJoint, event: Event, given: Event = Event()) -> Number:
    match_e, match_g = dist._matcher(event), dist._matcher(given)
    num = den = dist._zero
    for row, p in dist.table.items():
        if match_g(row):
            den += p
            if match_e(row):
                num += p
    if den == 0:
        raise ZeroConditioningMass(given)
    return num / den


def cond_cdf(dist: DiscreteJoint, y_var: str, y_level: int, given: Event = Event()) -> Number:
    return conditional(dist, Event.at_most(y_var, y_level), given)


def expect_over(
    dist: DiscreteJoint,
    outer_vars: Sequence[str],
    inner: Callable[[dict[str, int]], Number],
    given: Event = Event(),
) -> Number:
    """Sum of ``f(x | given) * inner(x)`` over positive-mass ``x``.

    With the default empty ``given`` this is the plain expectation over the
    marginal of ``outer_vars``.
    """
    match = dist._matcher(given)
    idx = [dist.index(v) for v in outer_vars]
    mass: dict[tuple[int, ...], Number] = defaultdict(lambda: dist._zero)
    den = dist._zero
    for row, p in dist.table.items():
        if match(row):
            mass[tuple(row[i] for i in idx)] += p
            den += p
    if den == 0:
        raise ZeroConditioningMass(given)
    total = dist._zero
    for key in sorted(mass):
        p = mass[key]
        if p == 0:
            continue
        x = dict(zip(outer_vars, key))
        try:
            value = inner(x)
        except SwidError as exc:
            raise exc.annotate(f"at {x}")
        total += p * value
    return total / den


def independent(
    dist: DiscreteJoint, a: Sequence[str], b: Sequence[str], given: Sequence[str] = ()
) -> bool:
    """Exact factorization check ``f(a,b,c) f(c) == f(a,c) f(b,c)`` on every cell."""
    a, b, c = list(a), list(b), list(given)
    abc = dist.marginal(a + b + c).table
    ac = dist.marginal(a + c).table
    bc = dist.marginal(b + c).table
    cc = dist.marginal(c).table if c else {(): prob(dist)}
    na, nb = len(a), len(b)
    zero = dist._zero
    for ka in ac:
        for kb in bc:
            if ka[na:] != kb[nb:]:
                continue
            kc = ka[na:]
            lhs = abc.get(ka[:na] + kb[:nb] + kc, zero) * cc.get(kc, zero)
            if lhs != ac[ka] * bc[kb]:
                return False
    return True
