"""Network analyses on top of moment invariants.

Static networks are compiled to loops whose first pass produces one joint
sample, so every query reads moments at n = 1.  Conditioning multiplies the
target by the evidence indicator and divides by the indicator's own
expectation.  Dynamic networks keep n symbolic: prediction returns the
closed form, its value at a horizon, or its limit.

Everything is exact.  Symbolic parameters flow through unchanged, so the
same code path answers numeric queries and sensitivity queries; decisions
that hold only generically (a nonzero denominator, a base inside the unit
interval) are recorded as assumption strings on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .bayesnet import BayesNet, CPT, Deterministic, DynBayesNet
from .encode import (
    compile_bn,
    compile_dynbn,
    compile_sampling_monitor,
    evidence_indicator,
    indicator_poly,
    normalize_evidence,
)
from .errors import InternalCheckError, QueryError, UnsupportedError
from .exppoly import ExpPoly, Limit, expoly_limit
from .moments import compute_mbis
from .parser import parse_poly
from .program import LoopProgram
from .recurrence import ClosedForm
from .symbolic import (
    Monomial,
    Polynomial,
    RationalFunction,
    RF_ONE,
    decimal_str,
    reduce_finite_support,
)

Value = Union[RationalFunction, ClosedForm, tuple]


@dataclass(frozen=True)
class QueryResult:
    kind: str
    value: Value
    assumptions: tuple[str, ...] = ()
    diagnostics: tuple[str, ...] = ()
    extras: tuple[tuple[str, str], ...] = ()

    def exact(self) -> str:
        return _exact_str(self.value)

    def decimal(self, digits: int = 6) -> str:
        return _decimal_str(self.value, digits)

    def to_json(self, digits: int = 6) -> dict:
        out = {
            "query": self.kind,
            "exact": self.exact(),
            "decimal": self.decimal(digits),
            "assumptions": list(self.assumptions),
        }
        if self.diagnostics:
            out["diagnostics"] = list(self.diagnostics)
        for key, value in self.extras:
            out[key] = value
        return out


def _exact_str(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, tuple):
        return "(" + ", ".join(_exact_str(v) for v in value) + ")"
    return str(value)


def _decimal_str(value, digits: int) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, tuple):
        return "(" + ", ".join(_decimal_str(v, digits) for v in value) + ")"
    if isinstance(value, RationalFunction) and value.is_const():
        return decimal_str(value.const_value(), digits)
    return _exact_str(value)


# -- expectation plumbing --------------------------------------------------


def _reduce(prog: LoopProgram, poly: Polynomial) -> Polynomial:
    for var, size in prog.supports.items():
        poly = reduce_finite_support(poly, var, size)
    return poly


def _closed_forms(prog: LoopProgram, poly: Polynomial):
    """Closed forms of every monomial of the reduced polynomial, plus the
    reduced polynomial itself."""
    poly = _reduce(prog, poly)
    goals = [m for m in poly.terms if not m.is_unit()]
    mbis = compute_mbis(prog, goals)
    return poly, {m: mbis[m].closed for m in goals}


def expectation_at(prog: LoopProgram, poly: Polynomial, n: int):
    """E[poly] after n loop iterations, with solver assumptions."""
    reduced, closeds = _closed_forms(prog, poly)
    value = RationalFunction(Polynomial.const(reduced.coeff(Monomial.unit())))
    assumptions: list[str] = []
    for mono, coeff in reduced.terms.items():
        if mono.is_unit():
            continue
        cf = closeds[mono]
        value = value + RationalFunction(Polynomial.const(coeff)) * cf.at(n)
        _merge(assumptions, cf.assumptions)
    return value, tuple(assumptions)


def expectation_closed(prog: LoopProgram, poly: Polynomial) -> ClosedForm:
    """E[poly] as a function of n (combining per-monomial closed forms)."""
    reduced, closeds = _closed_forms(prog, poly)
    start = max((cf.start for cf in closeds.values()), default=0)
    assumptions: list[str] = []
    tail = ExpPoly.const(
        RationalFunction(Polynomial.const(reduced.coeff(Monomial.unit())))
    )
    for mono, coeff in reduced.terms.items():
        if mono.is_unit():
            continue
        cf = closeds[mono]
        c = RationalFunction(Polynomial.const(coeff))
        tail = tail + ExpPoly.const(c) * cf.tail
        _merge(assumptions, cf.assumptions)
    prefix = []
    for j in range(start):
        value = RationalFunction(Polynomial.const(reduced.coeff(Monomial.unit())))
        for mono, coeff in reduced.terms.items():
            if not mono.is_unit():
                value = value + RationalFunction(Polynomial.const(coeff)) * closeds[mono].at(j)
        prefix.append(value)
    return ClosedForm(tuple(prefix), tail, tuple(assumptions)).normalized()


def _merge(into: list[str], new: Sequence[str]) -> None:
    for item in new:
        if item not in into:
            into.append(item)


def _target_poly(bn: BayesNet, target) -> Polynomial:
    """A query target: a node name, an expression string over nodes, a
    polynomial, or an event mapping {node: state}."""
    if isinstance(target, Polynomial):
        return target
    if isinstance(target, Monomial):
        return Polynomial({target: Fraction(1)})
    if isinstance(target, Mapping):
        return evidence_indicator(bn, target)
    if isinstance(target, str):
        return parse_poly(target, bn.node_names, bn.param_names)
    raise QueryError(f"cannot interpret query target {target!r}")


# -- static-network queries ------------------------------------------------


def joint_moment(bn, target, k: int = 1) -> QueryResult:
    """E[target^k]; at n = 1 for a static network, closed form in n for a
    dynamic one."""
    if k < 1:
        raise QueryError(f"moment order must be positive, got {k}")
    if isinstance(bn, DynBayesNet):
        prog = compile_dynbn(bn)
        poly = _target_poly(bn.net, target) ** k
        closed = expectation_closed(prog, poly)
        return QueryResult("moment", closed, closed.assumptions)
    prog = compile_bn(bn)
    poly = _target_poly(bn, target) ** k
    value, assumptions = expectation_at(prog, poly, 1)
    return QueryResult("moment", value, assumptions)


def conditional_moment(bn: BayesNet, target, k: int, evidence) -> QueryResult:
    """E[target^k | evidence] as a ratio of two joint moments."""
    if isinstance(bn, DynBayesNet):
        raise UnsupportedError("conditional queries apply to static networks")
    if k < 1:
        raise QueryError(f"moment order must be positive, got {k}")
    pairs = normalize_evidence(bn, evidence)
    if not pairs:
        raise QueryError("conditional query needs non-empty evidence")
    prog = compile_bn(bn)
    ind = evidence_indicator(bn, pairs)
    num_poly = (_target_poly(bn, target) ** k) * ind
    num, a1 = expectation_at(prog, num_poly, 1)
    den, a2 = expectation_at(prog, ind, 1)
    assumptions = list(a1)
    _merge(assumptions, a2)
    if den.is_zero() or (den.is_const() and den.const_value() == 0):
        detail = ", ".join(f"{name}={value}" for name, value in pairs)
        raise QueryError(f"evidence {detail} has probability zero")
    if not den.is_const():
        _merge(assumptions, (f"({den}) != 0",))
    return QueryResult("conditional", num / den, tuple(assumptions))


def distribution_from_moments(
    moments: Sequence[RationalFunction], m: int
) -> tuple[tuple[RationalFunction, ...], tuple[str, ...]]:
    """Solve for (P(X=0), ..., P(X=m-1)) from raw moments 1..m-1.

    Returns the exact vector and diagnostics; negative numeric entries mean
    the moments are inconsistent with a distribution on 0..m-1 and are
    reported, never clamped.
    """
    if m < 2:
        raise QueryError(f"support size must be at least 2, got {m}")
    if len(moments) != m - 1:
        raise QueryError(f"need exactly {m - 1} moments for support size {m}")
    one = RationalFunction(Polynomial.const(Fraction(1)))
    rows = [[one for _ in range(m)] + [one]]
    for k in range(1, m):
        mk = moments[k - 1]
        if not isinstance(mk, RationalFunction):
            mk = RationalFunction(Polynomial.const(Fraction(mk)))
        row = [
            RationalFunction(Polynomial.const(Fraction(i) ** k)) for i in range(m)
        ]
        rows.append(row + [mk])
    vector = _solve_linear(rows, m)
    diagnostics = []
    for i, p in enumerate(vector):
        if p.is_const() and not 0 <= p.const_value() <= 1:
            diagnostics.append(
                f"P(X={i}) = {p} is outside [0, 1]; the moments do not "
                "come from a distribution on this support"
            )
    return tuple(vector), tuple(diagnostics)


def _solve_linear(rows, m):
    """Gaussian elimination over rational functions; the matrix here is a
    transposed Vandermonde with distinct points, so it is never singular."""
    for col in range(m):
        pivot = next(
            (r for r in range(col, m) if not rows[r][col].is_zero()), None
        )
        if pivot is None:
            raise InternalCheckError("singular moment system")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        inv = rows[col][col]
        rows[col] = [entry / inv for entry in rows[col]]
        for r in range(m):
            if r != col and not rows[r][col].is_zero():
                factor = rows[r][col]
                rows[r] = [
                    a - factor * b for a, b in zip(rows[r], rows[col])
                ]
    return [rows[i][m] for i in range(m)]


def node_distribution(bn: BayesNet, name: str, evidence=None) -> QueryResult:
    """The (conditional) distribution of one discrete node, reconstructed
    from its first m-1 moments."""
    node = bn.node(name)
    if not node.is_discrete:
        raise QueryError(f"node {name} is continuous; it has no state vector")
    m = node.support
    moments = []
    assumptions: list[str] = []
    for k in range(1, m):
        if evidence:
            res = conditional_moment(bn, name, k, evidence)
        else:
            res = joint_moment(bn, name, k)
        moments.append(res.value)
        _merge(assumptions, res.assumptions)
    vector, diagnostics = distribution_from_moments(moments, m)
    return QueryResult("distribution", vector, tuple(assumptions), diagnostics)


def expected_samples(bn: BayesNet, evidence, cross_check: bool = True) -> QueryResult:
    """Expected number of samples drawn until the first one matching the
    evidence, i.e. 1/P(evidence).

    With cross_check, the rejection-monitor program is solved as well and
    its limiting count must equal 1/p exactly.
    """
    if isinstance(bn, DynBayesNet):
        raise UnsupportedError("sample-count queries apply to static networks")
    pairs = normalize_evidence(bn, evidence)
    if not pairs:
        raise QueryError("empty evidence: every sample would be accepted")
    prog = compile_bn(bn)
    ind = evidence_indicator(bn, pairs)
    p, assumptions = expectation_at(prog, ind, 1)
    if p.is_zero() or (p.is_const() and p.const_value() == 0):
        detail = ", ".join(f"{name}={value}" for name, value in pairs)
        raise QueryError(f"evidence {detail} has probability zero")
    assumptions = list(assumptions)
    if not p.is_const():
        _merge(assumptions, (f"({p}) != 0",))
    value = RF_ONE / p
    extras = [("probability", str(p))]
    if cross_check:
        monitor = compile_sampling_monitor(bn, pairs)
        count = expectation_closed(
            monitor.program, Polynomial.var(monitor.count_var)
        )
        limit = expoly_limit(count.tail, {p.name: p for p in bn.params})
        if limit.kind == "diverges" or limit.value is None:
            raise InternalCheckError(
                "monitor count diverges although the evidence has "
                f"probability {p}"
            )
        if limit.value != value:
            raise InternalCheckError(
                f"monitor limit {limit.value} disagrees with 1/p = {value}"
            )
        _merge(assumptions, limit.assumptions)
        extras.append(("monitor_limit", str(limit.value)))
    return QueryResult("samples", value, tuple(assumptions), extras=tuple(extras))


def expected_positive(bn: BayesNet, evidence, n_samples: int) -> QueryResult:
    """Expected number of evidence-matching instances among n samples."""
    if n_samples < 0:
        raise QueryError(f"sample count must be nonnegative, got {n_samples}")
    res = expected_samples(bn, evidence, cross_check=False)
    p = RationalFunction(Polynomial.const(Fraction(1))) / res.value
    value = p * RationalFunction(Polynomial.const(Fraction(n_samples)))
    return QueryResult("positive", value, res.assumptions)


def sensitivity(bn, query_spec: Mapping) -> QueryResult:
    """Run any query on a network with symbolic parameters; the answer is a
    rational function (or exponential polynomial) in those parameters."""
    return run_query(bn, query_spec)


# -- dynamic-network queries -----------------------------------------------


def predict(
    dyn: DynBayesNet,
    target,
    at: Optional[int] = None,
    limit: bool = False,
) -> QueryResult:
    """E[target] over time: the closed form in n, its value at a horizon,
    or its limit."""
    prog = compile_dynbn(dyn)
    poly = _target_poly(dyn.net, target)
    closed = expectation_closed(prog, poly)
    if at is not None:
        if at < 0:
            raise QueryError(f"horizon must be nonnegative, got {at}")
        return QueryResult("predict", closed.at(at), closed.assumptions)
    if limit:
        lim = expoly_limit(closed.tail, {p.name: p for p in dyn.net.params})
        assumptions = list(closed.assumptions)
        _merge(assumptions, lim.assumptions)
        if lim.kind == "diverges":
            return QueryResult(
                "predict", None, tuple(assumptions), diagnostics=("diverges",)
            )
        return QueryResult("predict", lim.value, tuple(assumptions))
    return QueryResult("predict", closed, closed.assumptions)


def forward_filter(dyn: DynBayesNet, observations) -> QueryResult:
    """Posterior over the temporal state after each observation step.

    Implements the standard forward pass: predict one slice ahead through
    the transition model, reweight by the likelihood of the step's
    observations, normalize.  A step may observe any subset of non-temporal
    discrete nodes; an empty step is a pure prediction step.
    """
    states, prior = _filter_setup(dyn)
    slices = [_normalize_obs(dyn.net, step) for step in observations]
    kernel = _slice_kernel(dyn)
    belief = prior
    out = []
    for t, obs in enumerate(slices, start=1):
        new_belief = {s: RationalFunction(Polynomial.zero()) for s in kernel.state_space}
        for prev, weight in belief.items():
            if weight.is_zero():
                continue
            for state, prob in kernel.step(prev, obs).items():
                new_belief[state] = new_belief[state] + weight * prob
        total = RationalFunction(Polynomial.zero())
        for value in new_belief.values():
            total = total + value
        if total.is_zero() or (total.is_const() and total.const_value() == 0):
            raise QueryError(
                f"observation step {t} ({obs}) has zero likelihood under "
                "the current belief"
            )
        belief = {s: v / total for s, v in new_belief.items()}
        out.append(tuple(belief[s] for s in kernel.state_space))
    labels = tuple(
        ", ".join(f"{n}={v}" for n, v in zip(states, s)) for s in kernel.state_space
    )
    return QueryResult(
        "filter",
        tuple(out),
        extras=(("states", " | ".join(labels)),),
    )


def _normalize_obs(bn: BayesNet, step) -> tuple[tuple[str, int], ...]:
    if not isinstance(step, Mapping) and not isinstance(step, Sequence):
        raise QueryError(f"each observation step must be a mapping, got {step!r}")
    return normalize_evidence(bn, step)


def _filter_setup(dyn: DynBayesNet):
    states = tuple(dyn.temporal)
    if not states:
        raise QueryError("network has no temporal nodes to track")
    for name in states:
        if not dyn.net.node(name).is_discrete:
            raise UnsupportedError(f"filtering needs a discrete state, {name} is not")
    prior: dict[tuple[int, ...], RationalFunction] = {}
    marginals = []
    for name in states:
        marginals.append(_initial_marginal(dyn, name))
    for assignment in _product_space([dyn.net.node(s).support for s in states]):
        weight = RF_ONE
        for value, marginal in zip(assignment, marginals):
            weight = weight * marginal[value]
        prior[assignment] = weight
    return states, prior


def _initial_marginal(dyn: DynBayesNet, name: str):
    """P(node = v) at slice zero, from the initial expression."""
    node = dyn.net.node(name)
    expr = dyn.initial_expr(name)
    zero = RationalFunction(Polynomial.zero())
    if expr.is_const():
        value = expr.const_value()
        if value.denominator != 1 or not 0 <= value < node.support:
            raise QueryError(f"initial value {value} of {name} is not a state")
        return [RF_ONE if i == value else zero for i in range(node.support)]
    draws = [s for s in expr.symbols()]
    if len(draws) == 1 and expr == Polynomial.var(draws[0]):
        spec = dyn.draws.get(draws[0])
        if spec is not None and spec.kind == "bern" and node.support == 2:
            return [RF_ONE - spec.arg, spec.arg]
    raise UnsupportedError(
        f"filtering needs a discrete initial distribution for {name}; "
        f"got {expr}"
    )


class _SliceKernel:
    """Exact one-slice distribution of a dynamic network, conditioned on
    the previous state assignment."""

    def __init__(self, dyn: DynBayesNet):
        self.dyn = dyn
        net = dyn.net
        for nd in net.nodes:
            if not nd.is_discrete:
                raise UnsupportedError(
                    f"filtering needs an all-discrete slice, {nd.name} is not"
                )
        self.order = net.order
        self.state_space = tuple(
            _product_space([net.node(s).support for s in dyn.temporal])
        )
        self._cache: dict = {}

    def step(self, prev: tuple[int, ...], obs) -> dict:
        """Distribution of the next state given the previous one, keeping
        only slices consistent with the observations."""
        key = (prev, obs)
        if key in self._cache:
            return self._cache[key]
        dyn, net = self.dyn, self.dyn.net
        prev_map = dict(zip(dyn.temporal, prev))
        obs_map = dict(obs)
        partial = [({}, RF_ONE)]
        for name in self.order:
            node = net.node(name)
            nxt = []
            for values, weight in partial:
                for value, prob in _node_dist(node, name in dyn.temporal,
                                              prev_map, values):
                    if name in obs_map and value != obs_map[name]:
                        continue
                    if prob.is_const() and prob.const_value() == 0:
                        continue
                    nxt.append(({**values, name: value}, weight * prob))
            partial = nxt
        result: dict = {}
        for values, weight in partial:
            state = tuple(values[s] for s in dyn.temporal)
            result[state] = result.get(state, RationalFunction(Polynomial.zero())) + weight
        self._cache[key] = result
        return result


def _node_dist(node, temporal: bool, prev_map, values):
    """Pairs (value, probability) of one node given its parents' values."""
    m = node.model
    if isinstance(m, CPT):
        assignment = tuple(
            prev_map[p] if (temporal and p == node.name) else values[p]
            for p in m.parents
        )
        return list(enumerate(m.vector(assignment)))
    if isinstance(m, Deterministic):
        env = {p: Fraction(values[p]) for p in m.parents}
        try:
            value = m.expr.eval(env)
        except KeyError as exc:
            raise UnsupportedError(
                f"deterministic node {node.name} depends on {exc.args[0]}, "
                "which has no value during filtering"
            ) from None
        return [(int(value), RF_ONE)]
    raise UnsupportedError(f"filtering supports CPT and deterministic nodes, "
                           f"not {type(m).__name__}")


def _slice_kernel(dyn: DynBayesNet) -> _SliceKernel:
    return _SliceKernel(dyn)


def _product_space(shape):
    if not shape:
        yield ()
        return
    for head in range(shape[0]):
        for rest in _product_space(shape[1:]):
            yield (head,) + rest


# -- query documents -------------------------------------------------------


def run_query(bn, spec: Mapping) -> QueryResult:
    """Dispatch a JSON-style query document against a network."""
    if not isinstance(spec, Mapping) or "query" not in spec:
        raise QueryError('a query document needs a "query" field')
    kind = spec["query"]
    if kind == "conditional":
        _require(spec, {"query", "target", "k", "evidence"})
        return conditional_moment(
            bn, spec.get("target"), spec.get("k", 1), spec.get("evidence", {})
        )
    if kind == "moment":
        _require(spec, {"query", "target", "k"})
        return joint_moment(bn, spec.get("target"), spec.get("k", 1))
    if kind == "samples":
        _require(spec, {"query", "evidence", "N", "cross_check"})
        if "N" in spec:
            return expected_positive(bn, spec.get("evidence", {}), spec["N"])
        return expected_samples(
            bn, spec.get("evidence", {}), spec.get("cross_check", True)
        )
    if kind == "predict":
        _require(spec, {"query", "target", "node", "at", "limit"})
        target = spec.get("target", spec.get("node"))
        if target is None:
            raise QueryError('predict needs a "target" node or expression')
        return predict(bn, target, spec.get("at"), spec.get("limit", False))
    if kind == "filter":
        _require(spec, {"query", "observations"})
        return forward_filter(bn, spec.get("observations", []))
    if kind == "distribution":
        _require(spec, {"query", "node", "evidence"})
        if "node" not in spec:
            raise QueryError('distribution needs a "node"')
        return node_distribution(bn, spec["node"], spec.get("evidence"))
    raise QueryError(f"unknown query kind {kind!r}")


def _require(spec: Mapping, allowed: set) -> None:
    extra = set(spec) - allowed
    if extra:
        raise QueryError(f"unknown query fields {sorted(extra)}")
