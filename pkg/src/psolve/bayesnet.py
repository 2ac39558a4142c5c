"""Bayesian network models and their JSON wire format.

A network is a DAG of named nodes.  Discrete nodes carry a conditional
probability table over integer values 0..m-1 (state names map to indices by
declaration order), or a polynomial of their parents when the dependency is
deterministic.  Continuous nodes are linear Gaussians, optionally switched
by discrete parents with one Gaussian per parent configuration.

All probabilities and coefficients are exact: JSON carries them as strings
(or integers), parsed into rationals or parameter expressions.  Binary
floats are rejected at load time so no value is silently approximated.

A dynamic network reuses the same node table as a repeating time slice.  A
node may additionally read its own previous-slice value, which appears as
the node's own name in its parent list and must be declared under
"inter_edges".  Initial values for slice zero come from the "initial" map.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Union

from .errors import ParseError, SchemaError
from .parser import RESERVED, parse_draw_expr, parse_poly, parse_ratfun
from .program import DrawRegistry, DrawSpec
from .symbolic import Param, Polynomial, RationalFunction, RF_ONE

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class CPT:
    """Rows ordered as given in the file; each row is (parent values, vector).

    The vector lists P(X = 0), ..., P(X = m-1) for one parent assignment.
    After loading, assignments hold integer state indices.
    """

    parents: tuple[str, ...]
    rows: tuple[tuple[Assignment, tuple[RationalFunction, ...]], ...]

    @property
    def support(self) -> int:
        return len(self.rows[0][1])

    def vector(self, assignment: Assignment) -> tuple[RationalFunction, ...]:
        for given, vec in self.rows:
            if given == assignment:
                return vec
        raise KeyError(assignment)


@dataclass(frozen=True)
class LinearGaussian:
    """X ~ N(intercept + sum of coeff * parent, variance)."""

    intercept: RationalFunction
    coeffs: tuple[tuple[str, RationalFunction], ...]
    variance: RationalFunction

    @property
    def parents(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.coeffs)


@dataclass(frozen=True)
class CLG:
    """One LinearGaussian per assignment of the discrete parents."""

    parents: tuple[str, ...]
    table: tuple[tuple[Assignment, LinearGaussian], ...]

    def branch(self, assignment: Assignment) -> LinearGaussian:
        for given, lg in self.table:
            if given == assignment:
                return lg
        raise KeyError(assignment)

    @property
    def continuous_parents(self) -> tuple[str, ...]:
        seen: list[str] = []
        for _, lg in self.table:
            for name in lg.parents:
                if name not in seen:
                    seen.append(name)
        return tuple(seen)


@dataclass(frozen=True)
class Deterministic:
    """X := expr(parents), values inside the node's support."""

    expr: Polynomial
    parents: tuple[str, ...]


LocalModel = Union[CPT, LinearGaussian, CLG, Deterministic]


@dataclass(frozen=True)
class Node:
    name: str
    states: Optional[tuple[str, ...]]  # None for continuous nodes
    model: LocalModel

    @property
    def is_discrete(self) -> bool:
        return self.states is not None

    @property
    def support(self) -> int:
        if self.states is None:
            raise SchemaError(f"node {self.name} is continuous and has no support")
        return len(self.states)

    @property
    def parents(self) -> tuple[str, ...]:
        m = self.model
        if isinstance(m, (CPT, Deterministic, LinearGaussian)):
            return m.parents
        return m.parents + m.continuous_parents

    def state_index(self, value: Union[int, str]) -> int:
        """Map a state name or index to its integer encoding."""
        if self.states is None:
            raise SchemaError(f"node {self.name} is continuous, not discrete")
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise SchemaError(f"bad state {value!r} for node {self.name}")
        if isinstance(value, str):
            if value in self.states:
                return self.states.index(value)
            if value.isdigit() and int(value) < len(self.states):
                return int(value)
            raise SchemaError(f"unknown state {value!r} of node {self.name}")
        if not 0 <= value < len(self.states):
            raise SchemaError(f"state {value} out of range for node {self.name}")
        return value


@dataclass(frozen=True)
class BayesNet:
    params: tuple[Param, ...]
    nodes: tuple[Node, ...]
    order: tuple[str, ...]  # a topological order over node names

    def node(self, name: str) -> Node:
        for nd in self.nodes:
            if nd.name == name:
                return nd
        raise SchemaError(f"unknown node {name!r}")

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(nd.name for nd in self.nodes)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(
            (parent, nd.name) for nd in self.nodes for parent in nd.parents
        )


@dataclass(frozen=True)
class DynBayesNet:
    """A repeating slice plus temporal self-edges and initial values."""

    net: BayesNet
    temporal: tuple[str, ...]  # nodes reading their own previous-slice value
    initial: tuple[tuple[str, Polynomial], ...]
    draws: Mapping[str, DrawSpec]  # draw symbols used by initial expressions

    def initial_expr(self, name: str) -> Polynomial:
        for node, expr in self.initial:
            if node == name:
                return expr
        return Polynomial.zero()

    def edges(self) -> tuple[tuple[str, str], ...]:
        intra = tuple(
            (parent, nd.name)
            for nd in self.net.nodes
            for parent in nd.parents
            if not (parent == nd.name and nd.name in self.temporal)
        )
        return intra + tuple((name, name) for name in self.temporal)


# -- JSON ingestion --------------------------------------------------------


def load_bn_path(path: Union[str, Path]) -> Union[BayesNet, DynBayesNet]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return load_bn(doc)


def load_bn(doc: Mapping) -> Union[BayesNet, DynBayesNet]:
    """Build and validate a network from a parsed JSON document."""
    if not isinstance(doc, Mapping):
        raise SchemaError("top level must be a JSON object")
    kind = doc.get("type", "bn")
    if kind not in ("bn", "dynbn"):
        raise SchemaError(f"unknown network type {kind!r}")
    known = {"type", "params", "nodes", "comment"}
    if kind == "dynbn":
        known |= {"inter_edges", "initial"}
    extra = set(doc) - known
    if extra:
        raise SchemaError(f"unknown top-level keys {sorted(extra)}")

    params = _load_params(doc.get("params", []))
    param_names = tuple(p.name for p in params)
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise SchemaError('"nodes" must be a non-empty list')

    temporal: tuple[str, ...] = ()
    if kind == "dynbn":
        temporal = _load_inter_edges(doc.get("inter_edges", {}))

    nodes = tuple(_load_node(e, raw_nodes, param_names) for e in raw_nodes)
    _check_names(nodes, param_names)
    nodes = tuple(_resolve_node(nd, nodes, temporal) for nd in nodes)
    order = _topo_order(nodes, temporal)
    net = BayesNet(params=params, nodes=nodes, order=order)

    if kind == "bn":
        return net
    for name in temporal:
        node = net.node(name)
        if name not in node.parents:
            raise SchemaError(
                f"inter_edges declares a previous-slice value for {name}, "
                "but its model never reads it"
            )
    registry = DrawRegistry()
    initial = _load_initial(doc.get("initial", {}), net, registry)
    return DynBayesNet(net=net, temporal=temporal, initial=initial, draws=registry.draws)


def _load_params(raw) -> tuple[Param, ...]:
    if not isinstance(raw, list):
        raise SchemaError('"params" must be a list')
    params: list[Param] = []
    for entry in raw:
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, Mapping) or "name" not in entry:
            raise SchemaError(f"bad parameter entry {entry!r}")
        name = entry["name"]
        if not isinstance(name, str) or not _NAME_RE.match(name) or name in RESERVED:
            raise SchemaError(f"bad parameter name {name!r}")
        if any(p.name == name for p in params):
            raise SchemaError(f"parameter {name} declared twice")
        lo = hi = None
        if "domain" in entry:
            dom = entry["domain"]
            if not isinstance(dom, list) or len(dom) != 2:
                raise SchemaError(f"domain of {name} must be a [lo, hi] pair")
            lo = _fraction(dom[0], f"domain of {name}")
            hi = _fraction(dom[1], f"domain of {name}")
            if lo >= hi:
                raise SchemaError(f"empty domain ({lo}, {hi}) for parameter {name}")
        params.append(Param(name, lo, hi))
    return tuple(params)


def _load_inter_edges(raw) -> tuple[str, ...]:
    if not isinstance(raw, Mapping):
        raise SchemaError('"inter_edges" must be an object')
    temporal: list[str] = []
    for name, parents in raw.items():
        if not isinstance(parents, list):
            raise SchemaError(f"inter_edges[{name!r}] must be a list")
        for parent in parents:
            if parent != name:
                raise SchemaError(
                    f"node {name} may only read its own previous-slice value, "
                    f"not {parent!r}"
                )
        if parents:
            temporal.append(name)
    return tuple(temporal)


def _load_node(entry, raw_nodes, param_names) -> Node:
    if not isinstance(entry, Mapping) or "name" not in entry:
        raise SchemaError(f"bad node entry {entry!r}")
    node_names = [e.get("name") for e in raw_nodes if isinstance(e, Mapping)]
    name = entry["name"]
    if not isinstance(name, str) or not _NAME_RE.match(name) or name in RESERVED:
        raise SchemaError(f"bad node name {name!r}")
    where = f"node {name}"
    extra = set(entry) - {"name", "states", "model", "comment"}
    if extra:
        raise SchemaError(f"{where}: unknown keys {sorted(extra)}")
    model = entry.get("model")
    if not isinstance(model, Mapping) or "kind" not in model:
        raise SchemaError(f'{where}: "model" must be an object with a "kind"')
    kind = model["kind"]

    states: Optional[tuple[str, ...]] = None
    if "states" in entry:
        raw_states = entry["states"]
        if (
            not isinstance(raw_states, list)
            or len(raw_states) < 2
            or not all(isinstance(s, str) for s in raw_states)
            or len(set(raw_states)) != len(raw_states)
        ):
            raise SchemaError(f"{where}: states must be >= 2 distinct strings")
        states = tuple(raw_states)

    if kind == "cpt":
        cpt = _load_cpt(model, name, node_names, param_names)
        if states is None:
            states = tuple(str(i) for i in range(cpt.support))
        elif len(states) != cpt.support:
            raise SchemaError(
                f"{where}: {len(states)} states but probability vectors "
                f"of length {cpt.support}"
            )
        return Node(name, states, cpt)
    if kind == "det":
        if states is None:
            states = ("0", "1")
        return Node(name, states, _load_det(model, name, node_names, param_names))
    if kind == "lingauss":
        if states is not None:
            raise SchemaError(f"{where}: a Gaussian node has no states")
        return Node(name, None, _load_lingauss(model, where, param_names))
    if kind == "clg":
        if states is not None:
            raise SchemaError(f"{where}: a Gaussian node has no states")
        return Node(name, None, _load_clg(model, name, param_names))
    raise SchemaError(f"{where}: unknown model kind {kind!r}")


def _load_cpt(model, name, node_names, param_names) -> CPT:
    where = f"node {name}"
    extra = set(model) - {"kind", "parents", "rows", "p", "comment"}
    if extra:
        raise SchemaError(f"{where}: unknown model keys {sorted(extra)}")
    parents = _parent_list(model.get("parents", []), where, node_names)
    raw_rows = model.get("rows")
    if raw_rows is None:
        if "p" not in model:
            raise SchemaError(f'{where}: a cpt needs "rows" (or "p" for a root)')
        if parents:
            raise SchemaError(f'{where}: "p" shorthand is only for parentless nodes')
        raw_rows = [{"given": [], "p": model["p"]}]
    if not isinstance(raw_rows, list) or not raw_rows:
        raise SchemaError(f'{where}: "rows" must be a non-empty list')
    rows = []
    for row in raw_rows:
        if not isinstance(row, Mapping) or set(row) - {"given", "p", "comment"}:
            raise SchemaError(f"{where}: each row is {{'given': [...], 'p': [...]}}")
        given = row.get("given", [])
        if not isinstance(given, list) or len(given) != len(parents):
            raise SchemaError(
                f"{where}: row 'given' must list one value per parent {list(parents)}"
            )
        vec = row.get("p")
        if not isinstance(vec, list) or len(vec) < 2:
            raise SchemaError(f"{where}: row 'p' must list >= 2 probabilities")
        probs = tuple(_ratfun(v, param_names, f"{where} probability") for v in vec)
        rows.append((tuple(given), probs))  # state names resolved later
    width = len(rows[0][1])
    for _, vec in rows:
        if len(vec) != width:
            raise SchemaError(f"{where}: probability vectors differ in length")
    return CPT(parents=parents, rows=tuple(rows))


def _load_det(model, name, node_names, param_names) -> Deterministic:
    where = f"node {name}"
    extra = set(model) - {"kind", "expr", "comment"}
    if extra:
        raise SchemaError(f"{where}: unknown model keys {sorted(extra)}")
    raw = model.get("expr")
    if not isinstance(raw, str):
        raise SchemaError(f'{where}: det needs an "expr" string')
    try:
        expr = parse_poly(raw, node_names, param_names)
    except ParseError as exc:
        raise SchemaError(f"{where}: bad expr: {exc}") from exc
    parents = tuple(s for s in sorted(expr.symbols()) if s in node_names)
    return Deterministic(expr=expr, parents=parents)


def _load_lingauss(model, where, param_names) -> LinearGaussian:
    extra = set(model) - {"kind", "intercept", "coeffs", "variance", "comment"}
    if extra:
        raise SchemaError(f"{where}: unknown model keys {sorted(extra)}")
    if "variance" not in model:
        raise SchemaError(f"{where}: a Gaussian needs a variance")
    intercept = _ratfun(model.get("intercept", 0), param_names, f"{where} intercept")
    variance = _ratfun(model["variance"], param_names, f"{where} variance")
    raw_coeffs = model.get("coeffs", {})
    if not isinstance(raw_coeffs, Mapping):
        raise SchemaError(f'{where}: "coeffs" must map parent -> coefficient')
    coeffs = tuple(
        (parent, _ratfun(value, param_names, f"{where} coefficient of {parent}"))
        for parent, value in raw_coeffs.items()
    )
    if variance.is_const() and variance.const_value() < 0:
        raise SchemaError(f"{where}: negative variance")
    return LinearGaussian(intercept=intercept, coeffs=coeffs, variance=variance)


def _load_clg(model, name, param_names) -> CLG:
    where = f"node {name}"
    extra = set(model) - {"kind", "parents", "table", "comment"}
    if extra:
        raise SchemaError(f"{where}: unknown model keys {sorted(extra)}")
    parents = model.get("parents")
    if not isinstance(parents, list) or not parents:
        raise SchemaError(f"{where}: clg needs discrete parents")
    raw_table = model.get("table")
    if not isinstance(raw_table, list) or not raw_table:
        raise SchemaError(f'{where}: clg needs a "table" list')
    table = []
    for row in raw_table:
        if not isinstance(row, Mapping) or "given" not in row:
            raise SchemaError(f"{where}: each table row needs a 'given' assignment")
        given = row["given"]
        if not isinstance(given, list) or len(given) != len(parents):
            raise SchemaError(
                f"{where}: row 'given' must list one value per parent {list(parents)}"
            )
        lg_doc = {k: v for k, v in row.items() if k != "given"}
        lg_doc["kind"] = "lingauss"
        table.append((tuple(given), _load_lingauss(lg_doc, where, param_names)))
    return CLG(parents=tuple(parents), table=tuple(table))


def _parent_list(raw, where, node_names) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(p, str) for p in raw):
        raise SchemaError(f'{where}: "parents" must be a list of node names')
    for p in raw:
        if p not in node_names:
            raise SchemaError(f"{where}: unknown parent {p!r}")
    if len(set(raw)) != len(raw):
        raise SchemaError(f"{where}: duplicate parent")
    return tuple(raw)


def _load_initial(raw, net: BayesNet, registry: DrawRegistry):
    if not isinstance(raw, Mapping):
        raise SchemaError('"initial" must map node -> expression')
    initial: list[tuple[str, Polynomial]] = []
    for name, value in raw.items():
        node = net.node(name)  # raises on unknown names
        where = f"initial value of {name}"
        if isinstance(value, bool):
            raise SchemaError(f"{where}: write 0 or 1, not a boolean")
        if isinstance(value, int):
            expr: Polynomial = Polynomial.const(Fraction(value))
        elif isinstance(value, str):
            try:
                expr = parse_draw_expr(value, net.param_names, registry)
            except ParseError as exc:
                raise SchemaError(f"{where}: {exc}") from exc
        else:
            raise SchemaError(f"{where}: expected an integer or expression string")
        if node.is_discrete and expr.is_const():
            c = expr.const_value()
            if c.denominator != 1 or not 0 <= c < node.support:
                raise SchemaError(f"{where}: {c} is outside the node's support")
        initial.append((name, expr))
    return tuple(initial)


# -- validation ------------------------------------------------------------


def _check_names(nodes: tuple[Node, ...], param_names) -> None:
    seen: set[str] = set()
    for nd in nodes:
        if nd.name in seen:
            raise SchemaError(f"node {nd.name} declared twice")
        if nd.name in param_names:
            raise SchemaError(f"{nd.name} names both a node and a parameter")
        seen.add(nd.name)


def _resolve_node(nd: Node, nodes: tuple[Node, ...], temporal) -> Node:
    """Check one node against the full table; returns the node with state
    names in assignments replaced by integer indices."""
    by_name = {other.name: other for other in nodes}
    where = f"node {nd.name}"
    for parent in nd.parents:
        if parent == nd.name and nd.name not in temporal:
            raise SchemaError(f"{where}: depends on itself (missing inter edge?)")

    def discrete_parent(name: str) -> Node:
        p = by_name[name]
        if not p.is_discrete:
            raise SchemaError(
                f"{where}: continuous node {name} cannot parent a discrete "
                "dependency"
            )
        return p

    m = nd.model
    if isinstance(m, CPT):
        shape = [discrete_parent(p).support for p in m.parents]
        resolved = _resolve_assignments(
            [given for given, _ in m.rows], m.parents, by_name, where
        )
        if len(resolved) != _product(shape):
            raise SchemaError(
                f"{where}: {len(resolved)} rows but {_product(shape)} "
                "parent assignments"
            )
        for (_, vec), given in zip(m.rows, resolved):
            total = RationalFunction(Polynomial.zero())
            for entry in vec:
                if entry.is_const() and not 0 <= entry.const_value() <= 1:
                    raise SchemaError(
                        f"{where}: probability {entry.const_value()} outside [0, 1]"
                    )
                total = total + entry
            if total != RF_ONE:
                raise SchemaError(
                    f"{where}: probabilities for {list(given)} sum to {total}"
                )
        rows = tuple((idx, vec) for idx, (_, vec) in zip(resolved, m.rows))
        return replace(nd, model=replace(m, rows=rows))
    if isinstance(m, Deterministic):
        for p in m.parents:
            discrete_parent(p)
        _check_det_range(nd, m, by_name)
        return nd
    if isinstance(m, LinearGaussian):
        for p in m.parents:
            if by_name[p].is_discrete:
                raise SchemaError(
                    f"{where}: discrete parent {p} in a plain Gaussian mean; "
                    "use a clg model instead"
                )
        return nd
    shape = [discrete_parent(p).support for p in m.parents]
    resolved = _resolve_assignments(
        [given for given, _ in m.table], m.parents, by_name, where
    )
    if len(resolved) != _product(shape):
        raise SchemaError(
            f"{where}: {len(resolved)} table rows but {_product(shape)} assignments"
        )
    for _, lg in m.table:
        for cp in lg.parents:
            if cp not in by_name:
                raise SchemaError(f"{where}: unknown parent {cp!r}")
            if by_name[cp].is_discrete:
                raise SchemaError(
                    f"{where}: discrete parent {cp} belongs in the clg "
                    "'parents' list, not in coefficients"
                )
    table = tuple((idx, lg) for idx, (_, lg) in zip(resolved, m.table))
    return replace(nd, model=replace(m, table=table))


def _resolve_assignments(rows, parents, by_name, where) -> list[Assignment]:
    resolved: list[Assignment] = []
    for given in rows:
        idx = tuple(by_name[p].state_index(v) for p, v in zip(parents, given))
        if idx in resolved:
            raise SchemaError(f"{where}: duplicate row for assignment {list(given)}")
        resolved.append(idx)
    return resolved


def _check_det_range(nd: Node, m: Deterministic, by_name) -> None:
    if any(s not in by_name for s in m.expr.symbols()):
        return  # parameters present; the range is the user's promise
    shape = [by_name[p].support for p in m.parents]
    if _product(shape) > 4096:
        return
    for assignment in _assignments(shape):
        value = m.expr.eval(dict(zip(m.parents, map(Fraction, assignment))))
        if value.denominator != 1 or not 0 <= value < nd.support:
            raise SchemaError(
                f"node {nd.name}: expr evaluates to {value} at "
                f"{dict(zip(m.parents, assignment))}, outside 0..{nd.support - 1}"
            )


def _topo_order(nodes: tuple[Node, ...], temporal) -> tuple[str, ...]:
    pending = {
        nd.name: set(nd.parents) - ({nd.name} if nd.name in temporal else set())
        for nd in nodes
    }
    names = [nd.name for nd in nodes]
    order: list[str] = []
    placed: set[str] = set()
    while pending:
        ready = [n for n in names if n in pending and pending[n] <= placed]
        if not ready:
            raise SchemaError("dependency cycle: " + " -> ".join(_find_cycle(pending, placed)))
        for n in ready:
            order.append(n)
            placed.add(n)
            del pending[n]
    return tuple(order)


def _find_cycle(pending: dict, placed: set) -> list[str]:
    start = next(iter(pending))
    path = [start]
    current = start
    while True:
        nxt = next(p for p in sorted(pending[current]) if p not in placed)
        if nxt in path:
            return path[path.index(nxt):] + [nxt]
        path.append(nxt)
        current = nxt


def _assignments(shape):
    if not shape:
        yield ()
        return
    for head in range(shape[0]):
        for rest in _assignments(shape[1:]):
            yield (head,) + rest


def _product(shape) -> int:
    out = 1
    for s in shape:
        out *= s
    return out


def _fraction(value, where) -> Fraction:
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, found a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise SchemaError(f"{where}: write numbers as strings, not binary floats")
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemaError(f"{where}: bad number {value!r}") from exc
    raise SchemaError(f"{where}: expected a number, found {type(value).__name__}")


def _ratfun(value, param_names, where) -> RationalFunction:
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, found a boolean")
    if isinstance(value, int):
        return RationalFunction(Polynomial.const(Fraction(value)))
    if isinstance(value, float):
        raise SchemaError(
            f"{where}: {value!r} is a binary float; write it as a string "
            'like "0.95" so it stays exact'
        )
    if isinstance(value, str):
        try:
            return parse_ratfun(value, param_names)
        except ParseError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}: expected a value, found {type(value).__name__}")
