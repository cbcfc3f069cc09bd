"""Parser and canonical serializer for ``.swid`` model files.

See ``docs/format.md`` for the grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from swid.dist import DiscreteJoint, format_number, parse_number
from swid.errors import DistError, GraphError, IdentError, ScmError, SwidError
from swid.graph import BINARY, CausalDag, Edge, Node, validate_dag
from swid.ident import PRESETS, RegimeSpec, Step, preset
from swid.scm import Mechanism, Scm
from swid.swig import check_regime_order

TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<indep>_\|\|_)
  | (?P<prob>\d+/\d+|\d*\.\d+)
  | (?P<word>[A-Za-z0-9_]+)
  | (?P<punct>[{}\[\]();,:=|])
    """,
    re.VERBOSE,
)


class DslSyntaxError(SwidError):
    def __init__(self, line: int, col: int, expected: list[str], found: str) -> None:
        super().__init__(f"{line}:{col}: expected {' or '.join(expected)}, found {found!r}")
        self.line, self.col, self.expected, self.found = line, col, expected, found


class DslSemanticError(SwidError):
    def __init__(self, line: int, col: int, message: str, cause: Exception | None = None) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col, self.cause = line, col, cause


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise DslSyntaxError(line, pos - start + 1, ["a token"], text[pos])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            tok_kind = "punct" if kind in ("arrow", "indep", "punct") else kind
            out.append(Token(tok_kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


@dataclass(frozen=True)
class Query:
    scenario: str | None = None
    spec: RegimeSpec | None = None
    bindings: tuple[tuple[str, int], ...] = ()
    thresholds: tuple[int, ...] = ()
    conditions: tuple[tuple[str, str, tuple[str, ...]], ...] = ()
    options: tuple[str, ...] = ()

    @property
    def binding_map(self) -> dict[str, int]:
        return dict(self.bindings)


@dataclass(frozen=True)
class ModelFile:
    dag: CausalDag
    scm: Scm | None = None
    dist: DiscreteJoint | None = None
    query: Query | None = None
    explicit_spec: bool = field(default=True, compare=False)

    @property
    def model(self) -> Scm | DiscreteJoint | None:
        return self.scm if self.scm is not None else self.dist


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, *expected: str) -> None:
        t = self.tok
        raise DslSyntaxError(t.line, t.col, list(expected), t.text or "end of file")

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def take(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def word(self, what: str = "a name") -> Token:
        if self.tok.kind != "word":
            self.fail(what)
        t = self.tok
        self.i += 1
        return t

    def probability(self) -> Fraction:
        t = self.tok
        if t.kind == "prob" or (t.kind == "word" and t.text.isdigit()):
            self.i += 1
            return parse_number(t.text)
        self.fail("a probability")

    def names(self, end: str) -> list[Token]:
        out = []
        if self.at(end):
            return out
        out.append(self.word())
        while self.accept(","):
            out.append(self.word())
        return out

    # -- blocks
    def parse(self) -> ModelFile:
        graph_tok = None
        nodes: list[tuple[Token, Node]] = []
        edges: list[tuple[Token, tuple]] = []
        mechs: list = []
        dist_block = None
        query_block = None
        while self.tok.kind != "eof":
            head = self.tok
            if self.accept("graph"):
                if graph_tok:
                    raise DslSemanticError(head.line, head.col, "second graph block")
                graph_tok = head
                self.graph_block(nodes, edges)
            elif self.accept("scm"):
                if mechs:
                    raise DslSemanticError(head.line, head.col, "second scm block")
                mechs = self.scm_block() or [None]
            elif self.accept("dist"):
                if dist_block:
                    raise DslSemanticError(head.line, head.col, "second dist block")
                dist_block = (head, self.dist_block())
            elif self.accept("query"):
                if query_block:
                    raise DslSemanticError(head.line, head.col, "second query block")
                query_block = (head, self.query_block())
            else:
                self.fail("'graph'", "'scm'", "'dist'", "'query'")
        if graph_tok is None:
            t = self.tok
            raise DslSemanticError(t.line, t.col, "missing graph block")
        dag = self.build_dag(graph_tok, nodes, edges)
        scm = self.build_scm(dag, [m for m in mechs if m]) if mechs else None
        dist = self.build_dist(dag, *dist_block) if dist_block else None
        if scm is not None and dist is not None:
            raise DslSemanticError(dist_block[0].line, dist_block[0].col, "give either an scm or a dist block, not both")
        query, explicit = self.build_query(dag, *query_block) if query_block else (None, True)
        return ModelFile(dag, scm, dist, query, explicit)

    def graph_block(self, nodes: list, edges: list) -> None:
        self.take("{")
        while not self.accept("}"):
            if self.at("node"):
                head = self.take("node")
                name = self.word("a node name").text
                observed = not self.accept("latent")
                support = BINARY
                if self.accept("support"):
                    self.take("[")
                    support = tuple(t.text for t in self.names("]"))
                    self.take("]")
                self.take(";")
                nodes.append((head, Node(name, observed, support)))
            elif self.tok.kind == "word":
                src = self.word()
                self.take("->")
                dst = self.word("a node name")
                ctx = None
                if self.accept("unless"):
                    var = self.word("a node name")
                    self.take("=")
                    ctx = (var, self.word("a level"))
                self.take(";")
                edges.append((src, (src.text, dst.text, ctx)))
            else:
                self.fail("'node'", "an edge", "'}'")

    def scm_block(self) -> list:
        self.take("{")
        out = []
        while not self.accept("}"):
            head = self.take("mechanism")
            name = self.word("a node name")
            self.take("(")
            parents = [t.text for t in self.names(")")]
            self.take(")")
            self.take("noise")
            self.take("[")
            noise = [self.probability()]
            while self.accept(","):
                noise.append(self.probability())
            self.take("]")
            self.take("table")
            self.take("{")
            rows = []
            while not self.accept("}"):
                row_tok = self.tok
                left = []
                while self.tok.kind == "word":
                    left.append(self.word().text)
                self.take(":")
                right = [self.word("an output level").text]
                while self.tok.kind == "word":
                    right.append(self.word().text)
                self.take(";")
                rows.append((row_tok, left, right))
            out.append((head, name, parents, noise, rows))
        return out

    def dist_block(self) -> tuple:
        self.take("(")
        variables = [t.text for t in self.names(")")]
        self.take(")")
        self.take("{")
        rows = []
        while not self.accept("}"):
            row_tok = self.tok
            levels = []
            while self.tok.kind == "word":
                levels.append(self.word().text)
            self.take(":")
            rows.append((row_tok, levels, self.probability()))
            self.take(";")
        return variables, rows

    def query_block(self) -> list:
        self.take("{")
        stmts = []
        while not self.accept("}"):
            head = self.word("a query statement")
            kw = head.text
            if kw == "scenario":
                stmts.append((head, kw, self.word("a scenario name").text))
            elif kw == "baseline":
                stmts.append((head, kw, [t.text for t in self.names(";")]))
            elif kw == "step":
                var = self.word("a decision variable").text
                self.take("=")
                value = self.word("a level or symbol").text
                hist = []
                if self.accept("after"):
                    hist = [t.text for t in self.names(";")]
                stmts.append((head, kw, (var, value, hist)))
            elif kw == "outcome":
                stmts.append((head, kw, self.word("an outcome variable").text))
            elif kw == "bind":
                pairs = []
                while True:
                    sym = self.word("a symbol").text
                    self.take("=")
                    pairs.append((sym, self.word("a level").text))
                    if not self.accept(","):
                        break
                stmts.append((head, kw, pairs))
            elif kw == "thresholds":
                stmts.append((head, kw, [t.text for t in self.names(";")]))
            elif kw == "condition":
                a = self.word().text
                self.take("_||_")
                b = self.word().text
                given = []
                if self.accept("|"):
                    given = [t.text for t in self.names(";")]
                stmts.append((head, kw, (a, b, given)))
            elif kw == "option":
                stmts.append((head, kw, self.word("an option name").text))
            else:
                raise DslSyntaxError(head.line, head.col, ["a query statement"], kw)
            self.take(";")
        return stmts

    # -- semantic resolution
    @staticmethod
    def build_dag(head: Token, nodes: list, edges: list) -> CausalDag:
        declared = {n.name: n for _, n in nodes}
        resolved = []
        for tok, (src, dst, ctx) in edges:
            context = None
            if ctx is not None:
                var, lvl = ctx
                if var.text not in declared:
                    raise DslSemanticError(var.line, var.col, f"undeclared variable {var.text}")
                context = (var.text, _level(declared[var.text], lvl))
            for name in (src, dst):
                if name not in declared:
                    raise DslSemanticError(tok.line, tok.col, f"undeclared variable {name}")
            resolved.append(Edge(src, dst, context))
        try:
            return validate_dag([n for _, n in nodes], resolved)
        except GraphError as exc:
            raise DslSemanticError(head.line, head.col, str(exc), exc) from exc

    @staticmethod
    def build_scm(dag: CausalDag, mechs: list) -> Scm:
        out = {}
        for head, name, parents, noise, rows in mechs:
            if name.text not in dag:
                raise DslSemanticError(name.line, name.col, f"undeclared variable {name.text}")
            if name.text in out:
                raise DslSemanticError(name.line, name.col, f"second mechanism for {name.text}")
            if tuple(parents) != dag.parents(name.text):
                raise DslSemanticError(
                    head.line, head.col, f"{name.text} lists parents {parents}, the graph has {list(dag.parents(name.text))}"
                )
            node = dag.node(name.text)
            table = {}
            for row_tok, left, right in rows:
                if len(left) != len(parents) or len(right) != len(noise):
                    raise DslSemanticError(row_tok.line, row_tok.col, "row has the wrong number of levels")
                try:
                    key = tuple(_level(dag.node(p), _tok(row_tok, t)) for p, t in zip(parents, left))
                    outs = [_level(node, _tok(row_tok, t)) for t in right]
                except DslSemanticError:
                    raise
                for e, level in enumerate(outs):
                    if key + (e,) in table:
                        raise DslSemanticError(row_tok.line, row_tok.col, f"repeated row {left}")
                    table[key + (e,)] = level
            domain = list(product(*(range(len(dag.support(p))) for p in parents)))
            missing = [k for k in domain if k + (0,) not in table]
            if missing:
                raise DslSemanticError(head.line, head.col, f"mechanism {name.text} is missing rows for {missing[:3]}")
            out[name.text] = Mechanism(tuple(parents), tuple(noise), table)
        missing_nodes = [v for v in dag.names if v not in out]
        if missing_nodes:
            raise DslSemanticError(1, 1, f"scm block lacks mechanisms for {missing_nodes}")
        try:
            return Scm(dag, out)
        except ScmError as exc:
            raise DslSemanticError(1, 1, str(exc), exc) from exc

    @staticmethod
    def build_dist(dag: CausalDag, head: Token, block: tuple) -> DiscreteJoint:
        variables, rows = block
        for v in variables:
            if v not in dag:
                raise DslSemanticError(head.line, head.col, f"undeclared variable {v}")
        table = {}
        for row_tok, levels, p in rows:
            if len(levels) != len(variables):
                raise DslSemanticError(row_tok.line, row_tok.col, "row has the wrong number of levels")
            key = tuple(_level(dag.node(v), _tok(row_tok, t)) for v, t in zip(variables, levels))
            if key in table:
                raise DslSemanticError(row_tok.line, row_tok.col, f"repeated row {levels}")
            table[key] = p
        try:
            return DiscreteJoint(tuple(variables), tuple(len(dag.support(v)) for v in variables), table)
        except DistError as exc:
            raise DslSemanticError(head.line, head.col, str(exc), exc) from exc

    @staticmethod
    def build_query(dag: CausalDag, head: Token, stmts: list) -> tuple[Query, bool]:
        scenario = None
        baseline: list[str] = []
        steps: list[tuple] = []
        outcome = None
        bindings_raw: list = []
        thresholds_raw: list = []
        conditions = []
        options = []
        explicit = False
        for tok, kw, val in stmts:
            if kw == "scenario":
                if val not in PRESETS:
                    raise DslSemanticError(tok.line, tok.col, f"unknown scenario {val}")
                scenario = val
            elif kw == "baseline":
                baseline.extend(val)
                explicit = True
            elif kw == "step":
                steps.append((tok, val))
                explicit = True
            elif kw == "outcome":
                outcome = val
                explicit = True
            elif kw == "bind":
                bindings_raw.extend((tok, p) for p in val)
            elif kw == "thresholds":
                thresholds_raw.append((tok, val))
            elif kw == "condition":
                a, b, given = val
                for v in (a, b, *given):
                    if v not in dag:
                        raise DslSemanticError(tok.line, tok.col, f"undeclared variable {v}")
                conditions.append((a, b, tuple(given)))
            elif kw == "option":
                options.append(val)
        if scenario and explicit:
            raise DslSemanticError(head.line, head.col, "give a scenario or explicit steps, not both")
        if scenario:
            spec = preset(scenario)[1]
        elif explicit:
            if outcome is None:
                raise DslSemanticError(head.line, head.col, "query needs an outcome")
            built = []
            for tok, (var, value, hist) in steps:
                for v in (var, *hist):
                    if v not in dag:
                        raise DslSemanticError(tok.line, tok.col, f"undeclared variable {v}")
                node = dag.node(var)
                forced = node.support.index(value) if value in node.support else value
                if isinstance(forced, str) and not re.match(r"^[A-Za-z_][A-Za-z0-9_]*$", forced):
                    raise DslSemanticError(tok.line, tok.col, f"{value} is neither a level of {var} nor a symbol")
                built.append(Step(var, forced, tuple(hist)))
            for v in (*baseline, outcome):
                if v not in dag:
                    raise DslSemanticError(head.line, head.col, f"undeclared variable {v}")
            try:
                spec = RegimeSpec(tuple(baseline), tuple(built), outcome)
            except IdentError as exc:
                raise DslSemanticError(head.line, head.col, str(exc), exc) from exc
        else:
            spec = None
        if spec is not None:
            try:
                check_regime_order(dag, spec.regime())
                spec.validate(dag)
            except (GraphError, IdentError) as exc:
                raise DslSemanticError(head.line, head.col, f"regime order: {exc}", exc) from exc
        bindings = []
        for tok, (sym, label) in bindings_raw:
            owners = [s.decision for s in (spec.steps if spec else ()) if s.forced == sym]
            if not owners:
                raise DslSemanticError(tok.line, tok.col, f"symbol {sym} is not used by any step")
            node = dag.node(owners[0])
            if label not in node.support:
                raise DslSemanticError(tok.line, tok.col, f"{label} is not a level of {owners[0]}")
            bindings.append((sym, node.support.index(label)))
        thresholds = []
        for tok, labels in thresholds_raw:
            if spec is None:
                raise DslSemanticError(tok.line, tok.col, "thresholds need an outcome")
            support = dag.support(spec.outcome)
            for label in labels:
                if label not in support:
                    raise DslSemanticError(tok.line, tok.col, f"{label} is not a level of {spec.outcome}")
                thresholds.append(support.index(label))
        query = Query(scenario, spec, tuple(bindings), tuple(thresholds), tuple(conditions), tuple(options))
        return query, not scenario


def _tok(row_tok: Token, text: str) -> Token:
    return Token("word", text, row_tok.line, row_tok.col)


def _level(node: Node, tok: Token) -> int:
    if tok.text not in node.support:
        raise DslSemanticError(tok.line, tok.col, f"{tok.text} is not a level of {node.name}")
    return node.support.index(tok.text)


def parse_model(text: str) -> ModelFile:
    return _Parser(text).parse()


# ---------------------------------------------------------------- serialize


def _label(dag: CausalDag, var: str, lvl: int) -> str:
    return dag.support(var)[lvl]


def serialize(model: ModelFile) -> str:
    dag = model.dag
    lines = ["graph {"]
    for n in dag.nodes:
        text = f"  node {n.name}"
        if not n.observed:
            text += " latent"
        if n.support != BINARY:
            text += " support [" + ", ".join(n.support) + "]"
        lines.append(text + ";")
    for e in dag.edges:
        text = f"  {e.source} -> {e.target}"
        if e.inactive_when is not None:
            var, lvl = e.inactive_when
            text += f" unless {var} = {_label(dag, var, lvl)}"
        lines.append(text + ";")
    lines.append("}")
    if model.scm is not None:
        lines.append("scm {")
        for v in dag.names:
            m = model.scm.mechanisms[v]
            noise = ", ".join(format_number(p) for p in m.noise)
            lines.append(f"  mechanism {v} ({', '.join(m.parents)}) noise [{noise}] table {{")
            for pa in product(*(range(len(dag.support(p))) for p in m.parents)):
                left = " ".join(_label(dag, p, x) for p, x in zip(m.parents, pa))
                right = " ".join(_label(dag, v, m.output(pa, e)) for e in range(len(m.noise)))
                lines.append(f"    {left} : {right};" if left else f"    : {right};")
            lines.append("  }")
        lines.append("}")
    if model.dist is not None:
        d = model.dist
        lines.append(f"dist ({', '.join(d.variables)}) {{")
        for row in sorted(d.table):
            left = " ".join(_label(dag, v, x) for v, x in zip(d.variables, row))
            lines.append(f"  {left} : {format_number(d.table[row])};")
        lines.append("}")
    q = model.query
    if q is not None:
        lines.append("query {")
        if q.scenario:
            lines.append(f"  scenario {q.scenario};")
        elif q.spec is not None:
            lines.append("  baseline " + ", ".join(q.spec.baseline) + ";")
            for s in q.spec.steps:
                value = s.forced if isinstance(s.forced, str) else _label(dag, s.decision, s.forced)
                text = f"  step {s.decision} = {value}"
                if s.history:
                    text += " after " + ", ".join(s.history)
                lines.append(text + ";")
            lines.append(f"  outcome {q.spec.outcome};")
        if q.bindings:
            owner = {s.forced: s.decision for s in q.spec.steps if isinstance(s.forced, str)}
            pairs = [f"{sym} = {_label(dag, owner[sym], lvl)}" for sym, lvl in q.bindings]
            lines.append("  bind " + ", ".join(pairs) + ";")
        if q.thresholds:
            lines.append("  thresholds " + ", ".join(_label(dag, q.spec.outcome, y) for y in q.thresholds) + ";")
        for a, b, given in q.conditions:
            text = f"  condition {a} _||_ {b}"
            if given:
                text += " | " + ", ".join(given)
            lines.append(text + ";")
        for opt in q.options:
            lines.append(f"  option {opt};")
        lines.append("}")
    return "\n".join(lines) + "\n"


EXPECT_RE = re.compile(r"^#\s*expect:\s*(\w+)\s*=\s*(\d+)", re.MULTILINE)


def expected_exits(text: str) -> dict[str, int]:
    """``# expect: check=0`` annotations carried in bundled model files."""
    return {cmd: int(code) for cmd, code in EXPECT_RE.findall(text)}
