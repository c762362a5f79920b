"""Discrete Bayesian networks: data model, BIF 0.3 reader/writer, validation, statistics.

Variable order is declaration order. CPT tables are dense ``(rows, K_child)``
arrays whose rows enumerate parent-state combinations with the *last* parent
varying fastest (``numpy.ravel_multi_index`` order).
"""
from __future__ import annotations

import hashlib
import heapq
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PARSE_ROW_TOL = 1e-6
RENORM_TOL = 1e-12
ROW_TOL = 1e-9


class BifError(ValueError):
    """Malformed or unsupported BIF input. Carries a 1-based line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class VariableSpec:
    name: str
    states: tuple[str, ...]
    index: int

    @property
    def card(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Cpt:
    child: int
    parents: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64, copy=True)
        if table.ndim != 2:
            raise ValueError("CPT table must be 2-D (parent rows x child states)")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return (self.child == other.child and self.parents == other.parents
                and self.table.shape == other.table.shape
                and bool(np.array_equal(self.table, other.table)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BayesianNetwork:
    """Immutable DAG of categorical variables with one CPT each.

    Construction does not check acyclicity or row sums; call :func:`validate`
    (``parse_bif`` always does).
    """

    variables: tuple[VariableSpec, ...]
    cpts: tuple[Cpt, ...]
    name: str = "unknown"
    _children: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpts", tuple(sorted(self.cpts, key=lambda c: c.child)))
        children: list[list[int]] = [[] for _ in self.variables]
        for cpt in self.cpts:
            for p in cpt.parents:
                if 0 <= p < len(children):
                    children[p].append(cpt.child)
        object.__setattr__(self, "_children", tuple(tuple(sorted(c)) for c in children))

    def __eq__(self, other):
        if not isinstance(other, BayesianNetwork):
            return NotImplemented
        return self.variables == other.variables and self.cpts == other.cpts

    __hash__ = None

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.card for v in self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def index(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.index
        raise KeyError(name)

    def cpt(self, j: int) -> Cpt:
        return self.cpts[j]

    def parents(self, j: int) -> tuple[int, ...]:
        return self.cpts[j].parents

    def children(self, j: int) -> tuple[int, ...]:
        return self._children[j]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, c.child) for c in self.cpts for p in c.parents]

    def cpt_array(self, j: int) -> np.ndarray:
        """CPT of variable ``j`` reshaped to ``(K_p1, ..., K_pn, K_j)``."""
        cpt = self.cpts[j]
        shape = tuple(self.variables[p].card for p in cpt.parents) + (self.variables[j].card,)
        return cpt.table.reshape(shape)

    def sha256(self) -> str:
        return hashlib.sha256(to_json(self).encode()).hexdigest()


# --------------------------------------------------------------------------- #
# BIF tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[{}()\[\]|,;])
  | (?P<word>[^\s{}()\[\]|,;"]+)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise BifError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("punct", "word", "string"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("eof", "", 1, 1)
            raise BifError("unexpected end of input", last.line, last.col)
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise BifError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def word(self) -> _Tok:
        tok = self.next()
        if tok.kind not in ("word", "string"):
            raise BifError(f"expected identifier, found {tok.text!r}", tok.line, tok.col)
        return tok

    def skip_statement(self):
        while self.next().text != ";":
            pass

    def skip_block(self):
        depth = 0
        while True:
            tok = self.next()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
                if depth == 0:
                    return

    def numbers_until(self, stop: str = ";") -> list[float]:
        out = []
        while True:
            tok = self.next()
            if tok.text == stop:
                return out
            if tok.text == ",":
                continue
            try:
                out.append(float(tok.text))
            except ValueError:
                raise BifError(f"expected a probability, found {tok.text!r}", tok.line, tok.col) from None


def parse_bif(text: str, name: str | None = None) -> BayesianNetwork:
    """Parse a BIF 0.3 document with discrete variables only."""
    p = _Parser(text)
    net_name = name or "unknown"
    var_decls: dict[str, tuple[tuple[str, ...], _Tok]] = {}
    prob_decls: list[tuple[str, list[str], list, _Tok]] = []

    while p.peek() is not None:
        tok = p.word()
        kw = tok.text.lower()
        if kw == "network":
            nm = p.word()
            if name is None:
                net_name = nm.text.strip('"')
            if p.peek() is not None and p.peek().text == "{":
                p.skip_block()
        elif kw == "variable":
            vname = p.word()
            states = _parse_variable_body(p)
            if vname.text in var_decls:
                raise BifError(f"duplicate variable {vname.text!r}", vname.line, vname.col)
            var_decls[vname.text] = (states, vname)
        elif kw == "probability":
            prob_decls.append(_parse_probability(p, tok))
        else:
            raise BifError(f"unknown block {tok.text!r}", tok.line, tok.col)

    variables = tuple(VariableSpec(n, st, i) for i, (n, (st, _)) in enumerate(var_decls.items()))
    by_name = {v.name: v for v in variables}
    cpts: dict[int, Cpt] = {}
    for child, parents, entries, tok in prob_decls:
        for nm in [child, *parents]:
            if nm not in by_name:
                raise BifError(f"undeclared variable {nm!r}", tok.line, tok.col)
        cv = by_name[child]
        if cv.index in cpts:
            raise BifError(f"duplicate probability block for {child!r}", tok.line, tok.col)
        pvars = [by_name[n] for n in parents]
        cpts[cv.index] = Cpt(cv.index, tuple(v.index for v in pvars), _build_table(cv, pvars, entries, tok))

    for v in variables:
        if v.index not in cpts:
            tok = var_decls[v.name][1]
            raise BifError(f"missing probability block for {v.name!r}", tok.line, tok.col)

    net = BayesianNetwork(variables, tuple(cpts.values()), net_name)
    report = validate(net, row_tol=PARSE_ROW_TOL)
    if not report.ok:
        raise BifError("invalid network: " + "; ".join(report.messages()))
    return BayesianNetwork(variables, tuple(_renormalize(c) for c in net.cpts), net_name)


def _renormalize(cpt: Cpt) -> Cpt:
    # rows already within rounding of 1 stay bit-exact, so BIF round trips are lossless
    sums = cpt.table.sum(axis=1, keepdims=True)
    if np.all(np.abs(sums - 1.0) <= RENORM_TOL):
        return cpt
    fix = np.abs(sums - 1.0) > RENORM_TOL
    return Cpt(cpt.child, cpt.parents, np.where(fix, cpt.table / sums, cpt.table))


def _parse_variable_body(p: _Parser) -> tuple[str, ...]:
    p.expect("{")
    states = None
    while True:
        tok = p.next()
        if tok.text == "}":
            break
        kw = tok.text.lower()
        if kw == "type":
            kind = p.word()
            if kind.text.lower() != "discrete":
                raise BifError(f"unsupported variable type {kind.text!r}", kind.line, kind.col)
            p.expect("[")
            ntok = p.word()
            p.expect("]")
            p.expect("{")
            labels = []
            while True:
                t = p.next()
                if t.text == "}":
                    break
                if t.text == ",":
                    continue
                labels.append(t.text.strip('"'))
            p.expect(";")
            if int(ntok.text) != len(labels):
                raise BifError(f"declared {ntok.text} states but listed {len(labels)}", ntok.line, ntok.col)
            if len(labels) < 2 or len(set(labels)) != len(labels):
                raise BifError("variables need >= 2 distinct state labels", ntok.line, ntok.col)
            states = tuple(labels)
        elif kw == "property":
            p.skip_statement()
        else:
            raise BifError(f"unexpected {tok.text!r} in variable block", tok.line, tok.col)
    if states is None:
        raise BifError("variable without a type declaration")
    return states


def _parse_probability(p: _Parser, head: _Tok):
    p.expect("(")
    child = p.word().text
    parents: list[str] = []
    tok = p.next()
    if tok.text == "|":
        while True:
            t = p.next()
            if t.text == ")":
                break
            if t.text != ",":
                parents.append(t.text)
    elif tok.text != ")":
        raise BifError(f"expected ')' or '|', found {tok.text!r}", tok.line, tok.col)
    p.expect("{")
    entries: list = []
    while True:
        tok = p.next()
        if tok.text == "}":
            break
        kw = tok.text.lower()
        if kw == "table":
            entries.append(("table", p.numbers_until(), tok))
        elif kw == "default":
            entries.append(("default", p.numbers_until(), tok))
        elif kw == "property":
            p.skip_statement()
        elif tok.text == "(":
            labels = []
            while True:
                t = p.next()
                if t.text == ")":
                    break
                if t.text != ",":
                    labels.append(t.text.strip('"'))
            entries.append(("row", (tuple(labels), p.numbers_until()), tok))
        else:
            raise BifError(f"unexpected {tok.text!r} in probability block", tok.line, tok.col)
    return child, parents, entries, head


def _build_table(child: VariableSpec, parents: list[VariableSpec], entries, head: _Tok) -> np.ndarray:
    k = child.card
    pcards = [v.card for v in parents]
    n_rows = int(np.prod(pcards)) if pcards else 1
    table = np.full((n_rows, k), np.nan)
    for kind, payload, tok in entries:
        if kind == "table":
            vals = np.asarray(payload, dtype=float)
            if vals.size != n_rows * k:
                raise BifError(f"table for {child.name!r} has {vals.size} entries, expected {n_rows * k}",
                               tok.line, tok.col)
            table[:] = vals.reshape(n_rows, k)
        elif kind == "default":
            if len(payload) != k:
                raise BifError("default row has wrong length", tok.line, tok.col)
            mask = np.isnan(table[:, 0])
            table[mask] = payload
        else:
            labels, vals = payload
            if len(labels) != len(parents) or len(vals) != k:
                raise BifError(f"malformed row for {child.name!r}", tok.line, tok.col)
            try:
                idx = tuple(pv.states.index(lab) for pv, lab in zip(parents, labels))
            except ValueError:
                raise BifError(f"unknown parent state in {labels!r}", tok.line, tok.col) from None
            table[np.ravel_multi_index(idx, pcards) if pcards else 0] = vals
    if np.isnan(table).any():
        raise BifError(f"incomplete probability table for {child.name!r}", head.line, head.col)
    return table


def to_bif(net: BayesianNetwork) -> str:
    """Serialize to BIF 0.3 using labelled parent rows (values written with repr precision)."""
    out = [f"network {net.name} {{\n}}"]
    for v in net.variables:
        out.append(f"variable {v.name} {{\n  type discrete [ {v.card} ] {{ {', '.join(v.states)} }};\n}}")
    for cpt in net.cpts:
        child = net.variables[cpt.child]
        if not cpt.parents:
            out.append(f"probability ( {child.name} ) {{\n  table {_fmt(cpt.table[0])};\n}}")
            continue
        pvars = [net.variables[p] for p in cpt.parents]
        lines = [f"probability ( {child.name} | {', '.join(v.name for v in pvars)} ) {{"]
        for r, idx in enumerate(np.ndindex(*[v.card for v in pvars])):
            labels = ", ".join(v.states[s] for v, s in zip(pvars, idx))
            lines.append(f"  ({labels}) {_fmt(cpt.table[r])};")
        lines.append("}")
        out.append("\n".join(lines))
    return "\n".join(out) + "\n"


def _fmt(row: Iterable[float]) -> str:
    return ", ".join(repr(float(x)) for x in row)


def to_json(net: BayesianNetwork) -> str:
    """Canonical JSON: variables array, CPTs row-major (parents then child state)."""
    doc = {
        "name": net.name,
        "variables": [{"name": v.name, "states": list(v.states)} for v in net.variables],
        "cpts": [{"child": c.child, "parents": list(c.parents),
                  "values": [float(x) for x in c.table.ravel()]} for c in net.cpts],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> BayesianNetwork:
    doc = json.loads(text)
    variables = tuple(VariableSpec(v["name"], tuple(v["states"]), i) for i, v in enumerate(doc["variables"]))
    cpts = []
    for c in doc["cpts"]:
        k = variables[c["child"]].card
        cpts.append(Cpt(c["child"], tuple(c["parents"]), np.asarray(c["values"], dtype=float).reshape(-1, k)))
    return BayesianNetwork(variables, tuple(cpts), doc.get("name", "unknown"))


def make_network(spec: Mapping[str, Sequence[str]], parents: Mapping[str, Sequence[str]],
                 tables: Mapping[str, Sequence], name: str = "custom") -> BayesianNetwork:
    """Build a network from name-keyed dicts; handy for tests and synthetic nets.

    ``tables[v]`` is anything reshapeable to ``(n_parent_rows, K_v)``.
    """
    variables = tuple(VariableSpec(n, tuple(st), i) for i, (n, st) in enumerate(spec.items()))
    idx = {v.name: v.index for v in variables}
    cpts = []
    for v in variables:
        pars = tuple(idx[p] for p in parents.get(v.name, ()))
        cpts.append(Cpt(v.index, pars, np.asarray(tables[v.name], dtype=float).reshape(-1, v.card)))
    return BayesianNetwork(variables, tuple(cpts), name)


# --------------------------------------------------------------------------- #
# Validation and structure


@dataclass
class ValidationReport:
    cycle: list[int] | None = None
    row_failures: list[tuple[int, int, float]] = field(default_factory=list)
    range_failures: list[tuple[int, int]] = field(default_factory=list)
    index_failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.cycle is None and not self.row_failures
                and not self.range_failures and not self.index_failures)

    def messages(self) -> list[str]:
        msgs = list(self.index_failures)
        if self.cycle is not None:
            msgs.append(f"cycle through variables {self.cycle}")
        msgs += [f"variable {v} row {r}: sum residual {res:.3g}" for v, r, res in self.row_failures]
        msgs += [f"variable {v} row {r}: entry outside [0, 1]" for v, r in self.range_failures]
        return msgs


def validate(net: BayesianNetwork, row_tol: float = ROW_TOL) -> ValidationReport:
    report = ValidationReport()
    m = net.n_vars
    names = [v.name for v in net.variables]
    if len(set(names)) != m:
        report.index_failures.append("duplicate variable names")
    for i, v in enumerate(net.variables):
        if v.index != i:
            report.index_failures.append(f"variable {v.name!r} has index {v.index}, expected {i}")
        if v.card < 2 or len(set(v.states)) != v.card:
            report.index_failures.append(f"variable {v.name!r} needs >= 2 distinct states")
    children = [c.child for c in net.cpts]
    if sorted(children) != list(range(m)):
        report.index_failures.append("need exactly one CPT per variable")
    for cpt in net.cpts:
        if not 0 <= cpt.child < m:
            continue
        if any(not 0 <= p < m for p in cpt.parents) or cpt.child in cpt.parents:
            report.index_failures.append(f"CPT of {cpt.child}: invalid parent index")
            continue
        rows = int(np.prod([net.variables[p].card for p in cpt.parents])) if cpt.parents else 1
        if cpt.table.shape != (rows, net.variables[cpt.child].card):
            report.index_failures.append(f"CPT of {cpt.child}: shape {cpt.table.shape}, expected "
                                         f"{(rows, net.variables[cpt.child].card)}")
            continue
        residual = np.abs(cpt.table.sum(axis=1) - 1.0)
        for r in np.flatnonzero(residual > row_tol):
            report.row_failures.append((cpt.child, int(r), float(residual[r])))
        bad = np.flatnonzero(((cpt.table < 0) | (cpt.table > 1)).any(axis=1))
        report.range_failures += [(cpt.child, int(r)) for r in bad]
    if not report.index_failures:
        report.cycle = _find_cycle(net)
    return report


def _find_cycle(net: BayesianNetwork) -> list[int] | None:
    color = [0] * net.n_vars
    stack_path: list[int] = []

    for root in range(net.n_vars):
        if color[root]:
            continue
        stack = [(root, iter(net.children(root)))]
        color[root] = 1
        stack_path.append(root)
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                stack_path.pop()
            elif color[nxt] == 1:
                return stack_path[stack_path.index(nxt):]
            elif color[nxt] == 0:
                color[nxt] = 1
                stack_path.append(nxt)
                stack.append((nxt, iter(net.children(nxt))))
    return None


def topological_order(net: BayesianNetwork) -> list[int]:
    """Kahn's algorithm; among ready variables the lowest declaration index goes first."""
    indeg = [len(net.parents(j)) for j in range(net.n_vars)]
    ready = [j for j in range(net.n_vars) if indeg[j] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        j = heapq.heappop(ready)
        order.append(j)
        for c in net.children(j):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != net.n_vars:
        raise CycleError("network contains a directed cycle")
    return order


def markov_blanket(net: BayesianNetwork, j: int) -> set[int]:
    blanket = set(net.parents(j)) | set(net.children(j))
    for c in net.children(j):
        blanket.update(net.parents(c))
    blanket.discard(j)
    return blanket


@dataclass(frozen=True)
class NetworkStats:
    node_count: int
    edge_count: int
    parameter_count: int
    full_entry_count: int
    avg_markov_blanket: float
    avg_degree: float
    max_in_degree: int


def network_stats(net: BayesianNetwork) -> NetworkStats:
    cards = net.cards
    free = full = 0
    for j in range(net.n_vars):
        rows = int(np.prod([cards[p] for p in net.parents(j)])) if net.parents(j) else 1
        free += (cards[j] - 1) * rows
        full += cards[j] * rows
    m = net.n_vars
    n_edges = len(net.edges)
    return NetworkStats(
        node_count=m,
        edge_count=n_edges,
        parameter_count=free,
        full_entry_count=full,
        avg_markov_blanket=float(np.mean([len(markov_blanket(net, j)) for j in range(m)])) if m else 0.0,
        avg_degree=2.0 * n_edges / m if m else 0.0,
        max_in_degree=max((len(net.parents(j)) for j in range(m)), default=0),
    )
