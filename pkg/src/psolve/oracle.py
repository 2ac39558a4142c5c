"""Independent ground-truth engines for differential testing.

Three oracles, in increasing generality and decreasing precision:

- exact joint enumeration for discrete networks (chain rule over the
  topological order);
- exact mean/covariance propagation for linear-Gaussian and conditional
  linear-Gaussian networks, one summary per discrete configuration;
- Monte Carlo simulation of the compiled loop program for anything
  samplable.

The first two keep symbolic parameters as rational functions, so they can
cross-check sensitivity answers too.  The sampler is deterministic given
(seed, sample count, chunk size): it derives every random number from a
counter-based SplitMix64 stream keyed by (seed, draw slot, iteration), so
results never depend on execution order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .bayesnet import (
    BayesNet,
    CLG,
    CPT,
    Deterministic,
    DynBayesNet,
    LinearGaussian,
    Node,
)
from .encode import compile_bn, compile_dynbn
from .errors import QueryError, UnsupportedError
from .parser import parse_poly
from .program import Assignment, Branch, DrawSpec, Initializer, LoopProgram
from .symbolic import (
    Monomial,
    Polynomial,
    RationalFunction,
    RF_ONE,
    RF_ZERO,
)

DEFAULT_STATE_CAP = 1 << 20
DEFAULT_CHUNK = 65536


# -- exact enumeration -----------------------------------------------------


@dataclass(frozen=True)
class JointTable:
    """Exact joint distribution of a discrete network, one row per full
    assignment in the network's node order."""

    names: tuple[str, ...]
    rows: tuple[tuple[tuple[int, ...], RationalFunction], ...]

    def total(self) -> RationalFunction:
        out = RF_ZERO
        for _, weight in self.rows:
            out = out + weight
        return out

    def expectation(self, poly: Polynomial) -> RationalFunction:
        """E[poly] with the polynomial read over node names."""
        out = RF_ZERO
        for assignment, weight in self.rows:
            env = dict(zip(self.names, (Fraction(v) for v in assignment)))
            out = out + weight * poly.eval(env)
        return out

    def probability(self, event: Sequence[tuple[str, int]]) -> RationalFunction:
        out = RF_ZERO
        for assignment, weight in self.rows:
            env = dict(zip(self.names, assignment))
            if all(env[name] == value for name, value in event):
                out = out + weight
        return out

    def conditional(self, poly: Polynomial, event) -> RationalFunction:
        """E[poly | event]; raises if the event has no numeric mass."""
        num = RF_ZERO
        den = RF_ZERO
        for assignment, weight in self.rows:
            env = dict(zip(self.names, assignment))
            if all(env[name] == value for name, value in event):
                den = den + weight
                frac_env = {k: Fraction(v) for k, v in env.items()}
                num = num + weight * poly.eval(frac_env)
        if den.is_zero() or (den.is_const() and den.const_value() == 0):
            raise QueryError(f"event {tuple(event)} has probability zero")
        return num / den


def enumerate_discrete(bn: BayesNet, cap: int = DEFAULT_STATE_CAP) -> JointTable:
    """The exact joint by chain rule; only for all-discrete networks whose
    state space fits under the cap."""
    size = 1
    for node in bn.nodes:
        if not node.is_discrete:
            raise UnsupportedError(
                f"cannot enumerate {node.name}: it is continuous"
            )
        size *= node.support
        if size > cap:
            raise UnsupportedError(
                f"state space exceeds {cap} assignments; raise the cap to "
                "enumerate this network"
            )
    order = bn.order
    partial: list[tuple[dict, RationalFunction]] = [({}, RF_ONE)]
    for name in order:
        node = bn.node(name)
        nxt = []
        for values, weight in partial:
            for value, prob in _local_dist(node, values):
                if isinstance(prob, RationalFunction) and prob.is_const() \
                        and prob.const_value() == 0:
                    continue
                nxt.append(({**values, name: value}, weight * prob))
        partial = nxt
    names = bn.node_names
    rows = tuple(
        (tuple(values[n] for n in names), weight) for values, weight in partial
    )
    return JointTable(names, rows)


def _local_dist(node: Node, values: Mapping[str, int]):
    m = node.model
    if isinstance(m, CPT):
        assignment = tuple(values[p] for p in m.parents)
        return list(enumerate(m.vector(assignment)))
    if isinstance(m, Deterministic):
        env = {p: Fraction(values[p]) for p in m.parents}
        return [(int(m.expr.eval(env)), RF_ONE)]
    raise UnsupportedError(
        f"node {node.name} has no discrete local model to enumerate"
    )


# -- Gaussian propagation --------------------------------------------------


@dataclass(frozen=True)
class GaussianSummary:
    """First two moments of the continuous nodes under one assignment of
    the discrete nodes."""

    config: tuple[tuple[str, int], ...]
    weight: RationalFunction
    names: tuple[str, ...]
    mean: tuple[RationalFunction, ...]
    cov: tuple[tuple[RationalFunction, ...], ...]

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class GaussianMixture:
    """All configuration summaries of a (conditional) linear-Gaussian
    network, with exact mixture moments."""

    summaries: tuple[GaussianSummary, ...]

    def _select(self, evidence) -> tuple[GaussianSummary, ...]:
        if not evidence:
            return self.summaries
        keep = []
        for s in self.summaries:
            env = dict(s.config)
            if all(env.get(name) == value for name, value in evidence):
                keep.append(s)
        if not keep:
            raise QueryError(f"no configuration matches {tuple(evidence)}")
        return tuple(keep)

    def moment1(self, name: str, evidence=()) -> RationalFunction:
        chosen = self._select(evidence)
        num = RF_ZERO
        den = RF_ZERO
        for s in chosen:
            num = num + s.weight * s.mean[s.index(name)]
            den = den + s.weight
        return num / den

    def moment2(self, a: str, b: Optional[str] = None, evidence=()) -> RationalFunction:
        """E[a*b | evidence] (b defaults to a, giving the raw second
        moment)."""
        b = a if b is None else b
        chosen = self._select(evidence)
        num = RF_ZERO
        den = RF_ZERO
        for s in chosen:
            i, j = s.index(a), s.index(b)
            second = s.cov[i][j] + s.mean[i] * s.mean[j]
            num = num + s.weight * second
            den = den + s.weight
        return num / den


def gaussian_propagate(bn: BayesNet, cap: int = DEFAULT_STATE_CAP) -> GaussianMixture:
    """Exact means and covariances of every continuous node, per discrete
    configuration, weighted by the discrete subnet's joint."""
    discrete = [nd for nd in bn.nodes if nd.is_discrete]
    continuous = [name for name in bn.order if not bn.node(name).is_discrete]
    if not continuous:
        raise UnsupportedError("network has no continuous nodes to propagate")
    if discrete:
        sub = BayesNet(
            params=bn.params,
            nodes=tuple(discrete),
            order=tuple(n for n in bn.order if bn.node(n).is_discrete),
        )
        table = enumerate_discrete(sub, cap)
        configs = [
            (tuple(zip(table.names, assignment)), weight)
            for assignment, weight in table.rows
        ]
    else:
        configs = [((), RF_ONE)]

    summaries = []
    for config, weight in configs:
        env = dict(config)
        mean: dict[str, RationalFunction] = {}
        cov: dict[tuple[str, str], RationalFunction] = {}
        for name in continuous:
            lg = _linear_model(bn.node(name), env)
            mu = lg.intercept
            for parent, coeff in lg.coeffs:
                mu = mu + coeff * mean[parent]
            mean[name] = mu
            for other in continuous:
                if other == name:
                    break
                c = RF_ZERO
                for parent, coeff in lg.coeffs:
                    c = c + coeff * _cov(cov, parent, other)
                cov[(name, other)] = cov[(other, name)] = c
            var = lg.variance
            for pa, ca in lg.coeffs:
                for pb, cb in lg.coeffs:
                    var = var + ca * cb * _cov(cov, pa, pb)
            cov[(name, name)] = var
        names = tuple(continuous)
        summaries.append(
            GaussianSummary(
                config=config,
                weight=weight,
                names=names,
                mean=tuple(mean[n] for n in names),
                cov=tuple(
                    tuple(_cov(cov, a, b) for b in names) for a in names
                ),
            )
        )
    return GaussianMixture(tuple(summaries))


def _cov(cov, a: str, b: str) -> RationalFunction:
    return cov.get((a, b), RF_ZERO)


def _linear_model(node: Node, env: Mapping[str, int]) -> LinearGaussian:
    m = node.model
    if isinstance(m, LinearGaussian):
        return m
    if isinstance(m, CLG):
        assignment = tuple(env[p] for p in m.parents)
        return m.branch(assignment)
    raise UnsupportedError(f"node {node.name} is not linear-Gaussian")


# -- Monte Carlo simulation ------------------------------------------------

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64_scalar(x: int) -> int:
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def _stream_key(*parts: int) -> int:
    h = _GAMMA
    for p in parts:
        h = _mix64_scalar(h ^ (p & _MASK))
        h = (h * _GAMMA + 1) & _MASK
    return h


def _mix64(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def _uniforms(key: int, start: int, count: int) -> np.ndarray:
    """count uniforms in (0, 1) at counter positions start..start+count-1."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    bits = _mix64(np.uint64(key) + idx * np.uint64(_GAMMA))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


@dataclass(frozen=True)
class MCEstimate:
    target: str
    mean: float
    stderr: float
    n_samples: int


class _Simulator:
    """Vectorized execution of a parameter-free loop program."""

    def __init__(self, prog: LoopProgram, seed: int, chunk: int):
        self.prog = prog
        self.seed = seed
        self.chunk = chunk
        self.slots: dict[tuple, int] = {}
        for i, init in enumerate(prog.inits):
            for sym in _draw_syms(prog, init.expr):
                self._slot(("init", i, sym))
        for i, upd in enumerate(prog.updates):
            self._slot(("select", i))
            for br in upd.branches:
                for sym in _draw_syms(prog, br.expr):
                    self._slot(("update", i, sym))
        for spec in prog.draws.values():
            if spec.kind == "moments":
                raise UnsupportedError(
                    "cannot simulate a draw given only by raw moments"
                )

    def _slot(self, key) -> int:
        if key not in self.slots:
            self.slots[key] = len(self.slots)
        return self.slots[key]

    def _draw(self, key, iteration: int, start: int, count: int) -> np.ndarray:
        slot = self.slots[key]
        sym = key[2]
        spec = self.prog.draws[sym]
        k1 = _stream_key(self.seed, slot, iteration, 0)
        u = _uniforms(k1, start, count)
        if spec.kind == "bern":
            p = float(spec.arg.const_value())
            return (u < p).astype(np.float64)
        if spec.kind == "unif01":
            return u
        if spec.kind == "gauss0":
            k2 = _stream_key(self.seed, slot, iteration, 1)
            u2 = _uniforms(k2, start, count)
            z = np.sqrt(-2.0 * np.log(u)) * np.cos(2.0 * math.pi * u2)
            return math.sqrt(float(spec.arg.const_value())) * z
        raise UnsupportedError(f"unknown draw kind {spec.kind}")

    def run_chunk(self, start: int, count: int, n_iters: int) -> dict[str, np.ndarray]:
        env: dict[str, np.ndarray] = {}
        for i, init in enumerate(self.prog.inits):
            for sym in _draw_syms(self.prog, init.expr):
                env[sym] = self._draw(("init", i, sym), 0, start, count)
            env[init.target] = _eval_poly(init.expr, env, count)
        for t in range(n_iters):
            for i, upd in enumerate(self.prog.updates):
                env[upd.target] = self._step(i, upd, t, env, start, count)
        return env

    def _step(self, i: int, upd: Assignment, t: int, env, start, count):
        values = []
        for br in upd.branches:
            for sym in _draw_syms(self.prog, br.expr):
                env[sym] = self._draw(("update", i, sym), t, start, count)
            values.append(_eval_poly(br.expr, env, count))
        if len(values) == 1:
            return values[0]
        key = _stream_key(self.seed, self.slots[("select", i)], t, 0)
        u = _uniforms(key, start, count)
        out = values[-1].copy()
        acc = 0.0
        for br, val in zip(upd.branches[:-1], values[:-1]):
            p = float(br.prob.const_value())
            mask = (u >= acc) & (u < acc + p)
            out[mask] = val[mask]
            acc += p
        return out


def _draw_syms(prog: LoopProgram, poly: Polynomial) -> list[str]:
    syms = {s for s in poly.symbols() if s in prog.draws}
    return sorted(syms, key=lambda s: (len(s), s))


def _eval_poly(poly: Polynomial, env: Mapping[str, np.ndarray], count: int) -> np.ndarray:
    out = np.zeros(count)
    for mono, coeff in poly.terms.items():
        term = np.full(count, float(coeff))
        for s, e in mono.powers:
            term = term * env[s] ** e
        out += term
    return out


def _bind(prog: LoopProgram, values: Mapping[str, Fraction]) -> LoopProgram:
    """Substitute numeric parameter values, yielding a closed program."""
    missing = [p.name for p in prog.params if p.name not in values]
    if missing:
        raise QueryError(
            f"simulation needs numeric values for parameters {missing}"
        )
    if not prog.params:
        return prog
    sub = {name: Fraction(v) for name, v in values.items()}

    def poly(p: Polynomial) -> Polynomial:
        return p.substitute(sub)

    def rf(r: RationalFunction) -> RationalFunction:
        return r.subs(sub)

    draws = {
        sym: DrawSpec(
            kind=spec.kind,
            arg=None if spec.arg is None else rf(spec.arg),
            raw_moments=tuple(rf(m) for m in spec.raw_moments),
        )
        for sym, spec in prog.draws.items()
    }
    return LoopProgram(
        params=(),
        supports=dict(prog.supports),
        inits=tuple(Initializer(i.target, poly(i.expr)) for i in prog.inits),
        updates=tuple(
            Assignment(
                u.target,
                tuple(Branch(rf(b.prob), poly(b.expr)) for b in u.branches),
            )
            for u in prog.updates
        ),
        draws=draws,
    )


def mc_estimate(
    model: Union[BayesNet, DynBayesNet, LoopProgram],
    targets: Sequence[Union[str, Monomial, Polynomial]],
    n_samples: int,
    seed: int = 0,
    n_iters: int = 1,
    param_values: Optional[Mapping[str, Fraction]] = None,
    chunk: int = DEFAULT_CHUNK,
) -> list[MCEstimate]:
    """Sample means and standard errors of target expressions after
    n_iters loop iterations."""
    if n_samples < 1:
        raise QueryError(f"sample count must be positive, got {n_samples}")
    if isinstance(model, DynBayesNet):
        prog = compile_dynbn(model)
    elif isinstance(model, BayesNet):
        prog = compile_bn(model)
    else:
        prog = model
    prog = _bind(prog, param_values or {})
    polys = []
    for t in targets:
        if isinstance(t, Polynomial):
            polys.append((str(t), t))
        elif isinstance(t, Monomial):
            polys.append((str(t), Polynomial({t: Fraction(1)})))
        else:
            polys.append(
                (t, parse_poly(t, tuple(v for v in prog.variables), ()))
            )
    sim = _Simulator(prog, seed, chunk)
    sums = [0.0] * len(polys)
    sqsums = [0.0] * len(polys)
    done = 0
    while done < n_samples:
        count = min(chunk, n_samples - done)
        env = sim.run_chunk(done, count, n_iters)
        for j, (_, poly) in enumerate(polys):
            vals = _eval_poly(poly, env, count)
            sums[j] += float(np.sum(vals))
            sqsums[j] += float(np.sum(vals * vals))
        done += count
    out = []
    for (label, _), s, ss in zip(polys, sums, sqsums):
        mean = s / n_samples
        var = max(ss / n_samples - mean * mean, 0.0)
        stderr = math.sqrt(var / n_samples)
        out.append(MCEstimate(label, mean, stderr, n_samples))
    return out


# -- differential checks ---------------------------------------------------


@dataclass(frozen=True)
class CheckLine:
    label: str
    engine: str
    oracle: str
    ok: bool


def differential_check(
    bn: Union[BayesNet, DynBayesNet],
    mc_samples: Optional[int] = None,
    seed: int = 0,
    cap: int = DEFAULT_STATE_CAP,
) -> list[CheckLine]:
    """Engine-vs-oracle comparison on a network's basic moments.

    Exact oracles compare exactly; the Monte Carlo comparison (enabled by
    mc_samples) accepts anything within four standard errors.
    """
    from . import queries

    lines: list[CheckLine] = []
    if isinstance(bn, DynBayesNet):
        lines += _check_dyn(bn, queries)
    else:
        discrete = all(nd.is_discrete for nd in bn.nodes)
        if discrete:
            table = enumerate_discrete(bn, cap)
            lines.append(
                CheckLine("joint total", "1", str(table.total()),
                          table.total() == RF_ONE)
            )
            for nd in bn.nodes:
                got = queries.joint_moment(bn, nd.name).value
                want = table.expectation(Polynomial.var(nd.name))
                lines.append(
                    CheckLine(f"E[{nd.name}]", str(got), str(want), got == want)
                )
            for i, a in enumerate(bn.nodes):
                for b in bn.nodes[i + 1:]:
                    poly = Polynomial.var(a.name) * Polynomial.var(b.name)
                    got = queries.joint_moment(bn, poly).value
                    want = table.expectation(poly)
                    lines.append(
                        CheckLine(
                            f"E[{a.name}*{b.name}]", str(got), str(want),
                            got == want,
                        )
                    )
        else:
            mix = gaussian_propagate(bn, cap)
            for name in bn.order:
                if bn.node(name).is_discrete:
                    continue
                got1 = queries.joint_moment(bn, name, 1).value
                want1 = mix.moment1(name)
                lines.append(
                    CheckLine(f"E[{name}]", str(got1), str(want1), got1 == want1)
                )
                got2 = queries.joint_moment(bn, name, 2).value
                want2 = mix.moment2(name)
                lines.append(
                    CheckLine(f"E[{name}^2]", str(got2), str(want2), got2 == want2)
                )
    if mc_samples:
        lines += _check_mc(bn, mc_samples, seed)
    return lines


def _check_dyn(dyn: DynBayesNet, queries) -> list[CheckLine]:
    lines = []
    if not all(nd.is_discrete for nd in dyn.net.nodes):
        return lines
    horizon = 3
    beliefs = queries.forward_filter(dyn, [{}] * horizon).value
    for name in dyn.temporal:
        closed = queries.predict(dyn, name).value
        idx = dyn.temporal.index(name)
        space = [
            s for s in _space([dyn.net.node(v).support for v in dyn.temporal])
        ]
        for t in range(1, horizon + 1):
            want = RF_ZERO
            for state, prob in zip(space, beliefs[t - 1]):
                want = want + prob * Fraction(state[idx])
            got = closed.at(t)
            lines.append(
                CheckLine(f"E[{name}] at n={t}", str(got), str(want), got == want)
            )
    return lines


def _space(shape):
    if not shape:
        yield ()
        return
    for head in range(shape[0]):
        for rest in _space(shape[1:]):
            yield (head,) + rest


def _check_mc(bn, n_samples: int, seed: int) -> list[CheckLine]:
    from . import queries

    lines = []
    if isinstance(bn, DynBayesNet):
        horizon = 5
        for name in dyn_targets(bn):
            est = mc_estimate(bn, [name], n_samples, seed, n_iters=horizon)[0]
            exact = queries.predict(bn, name, at=horizon).value
            if not exact.is_const():
                continue
            lines.append(_band_line(f"MC E[{name}] at n={horizon}", exact, est))
    else:
        if bn.params:
            return lines
        for nd in bn.nodes:
            est = mc_estimate(bn, [nd.name], n_samples, seed)[0]
            exact = queries.joint_moment(bn, nd.name).value
            lines.append(_band_line(f"MC E[{nd.name}]", exact, est))
    return lines


def dyn_targets(dyn: DynBayesNet) -> list[str]:
    return [name for name in dyn.temporal if dyn.net.node(name).is_discrete]


def _band_line(label: str, exact: RationalFunction, est: MCEstimate) -> CheckLine:
    value = float(exact.const_value())
    band = 4.0 * est.stderr
    ok = abs(est.mean - value) <= max(band, 1e-12)
    return CheckLine(
        label,
        f"{value:.6f}",
        f"{est.mean:.6f} (se {est.stderr:.2e})",
        ok,
    )
