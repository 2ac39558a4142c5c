"""Moment recurrences and their closed forms.

The expected value of each monomial over program variables satisfies a
first-order linear recurrence with constant coefficients.  Extraction
substitutes every variable's update into the target monomial, last declared
variable first, so that by the end every variable reference means its value
at the start of the iteration; branchy updates contribute a probability mix
of branch powers (one shared coin per variable per monomial), and draws
turn into their raw moments.  A worklist closes the set of needed moments,
then closed forms are solved bottom-up along the dependency order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction

from .errors import DegreeCapError, InternalCheckError, ProgramError, UnsupportedError
from .exppoly import ExpPoly
from .program import LoopProgram, is_draw
from .recurrence import ClosedForm, FirstOrderRecurrence, solve_first_order, verify_solution
from .symbolic import (
    Monomial,
    Polynomial,
    RationalFunction,
    RF_ONE,
    RF_ZERO,
    reduce_finite_support,
)

DEFAULT_DEGREE_CAP = 64
_CAP_ENV = "PSOLVE_DEGREE_CAP"


def degree_cap() -> int:
    raw = os.environ.get(_CAP_ENV)
    if raw is None:
        return DEFAULT_DEGREE_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise UnsupportedError(f"{_CAP_ENV} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise UnsupportedError(f"{_CAP_ENV} must be positive")
    return cap


@dataclass(frozen=True)
class MomentRecurrence:
    """E[target](n+1) = self_coeff * E[target](n) + sum a_i E[N_i](n) + constant."""

    target: Monomial
    self_coeff: RationalFunction
    linear: tuple[tuple[Monomial, RationalFunction], ...]
    constant: RationalFunction


@dataclass(frozen=True)
class MBI:
    """A solved moment invariant: the recurrence and its closed form."""

    target: Monomial
    recurrence: MomentRecurrence
    closed: ClosedForm

    def at(self, n: int) -> RationalFunction:
        return self.closed.at(n)


class MomentEngine:
    """Caches per-program substitution data across many extractions."""

    def __init__(self, prog: LoopProgram):
        self.prog = prog
        self.vars = prog.variables
        self.var_set = set(self.vars)
        self.supports = dict(prog.supports)
        self._upd_pows: dict[tuple[str, int], Polynomial] = {}
        self._moments: dict[tuple[str, int], RationalFunction] = {}
        self._init_moments: dict[tuple[str, int], RationalFunction] = {}

    # -- update powers -----------------------------------------------------

    def _upd_pow(self, var: str, k: int) -> Polynomial:
        key = (var, k)
        cached = self._upd_pows.get(key)
        if cached is not None:
            return cached
        upd = self.prog.update_for(var)
        total = Polynomial()
        for br in upd.branches:
            if not br.prob.is_poly():
                raise UnsupportedError(
                    f"branch probability of {var} has a symbolic denominator"
                )
            total = total + br.prob.num * br.expr**k
        total = self._reduce(total)
        self._upd_pows[key] = total
        return total

    def _reduce(self, poly: Polynomial) -> Polynomial:
        for var, size in self.supports.items():
            if poly.degree_in(var) >= size:
                poly = reduce_finite_support(poly, var, size)
        return poly

    def substitute_body(self, target: Monomial) -> Polynomial:
        """One full body substitution: result refers only to start-of-iteration
        values, draws and parameters."""
        poly = Polynomial({target: Fraction(1)})
        for var in reversed(self.vars):
            if poly.degree_in(var) == 0:
                continue
            out: dict[Monomial, Fraction] = {}
            for mono, coeff in poly.terms.items():
                e = mono.exponent(var)
                if e == 0:
                    out[mono] = out.get(mono, Fraction(0)) + coeff
                    continue
                rest = mono.without(var)
                for m2, c2 in self._upd_pow(var, e).terms.items():
                    m = rest * m2
                    out[m] = out.get(m, Fraction(0)) + coeff * c2
            poly = self._reduce(Polynomial(out))
        return poly

    # -- expectation normal form ------------------------------------------

    def _draw_moment(self, sym: str, k: int) -> RationalFunction:
        key = (sym, k)
        cached = self._moments.get(key)
        if cached is None:
            cached = self.prog.draws[sym].moment(k)
            self._moments[key] = cached
        return cached

    def expectation(self, poly: Polynomial) -> tuple[dict[Monomial, RationalFunction], RationalFunction]:
        """Split E[poly] into a linear combination of moment variables.

        Returns (linear map monomial -> coefficient, constant).  Draws are
        independent of the state and of each other, so each monomial factors
        into draw moments, a parameter monomial and one moment variable.
        """
        acc_poly: dict[Monomial, dict[Monomial, Fraction]] = {}
        acc_rf: dict[Monomial, RationalFunction] = {}
        for mono, coeff in poly.terms.items():
            evar: list[tuple[str, int]] = []
            pmono: list[tuple[str, int]] = []
            contrib = None
            rf_factor = None
            for s, e in mono.powers:
                if s in self.var_set:
                    evar.append((s, e))
                elif is_draw(s):
                    m = self._draw_moment(s, e)
                    if m.is_zero():
                        contrib = Polynomial()
                        break
                    if m.is_poly():
                        contrib = m.num if contrib is None else contrib * m.num
                    else:
                        rf_factor = m if rf_factor is None else rf_factor * m
                else:
                    pmono.append((s, e))
            if contrib is not None and contrib.is_zero():
                continue
            base = Polynomial({Monomial(pmono): coeff})
            if contrib is not None:
                base = base * contrib
            key = Monomial(evar)
            if rf_factor is None:
                slot = acc_poly.setdefault(key, {})
                for m2, c2 in base.terms.items():
                    slot[m2] = slot.get(m2, Fraction(0)) + c2
            else:
                extra = RationalFunction(base) * rf_factor
                acc_rf[key] = acc_rf.get(key, RF_ZERO) + extra
        linear: dict[Monomial, RationalFunction] = {}
        for key, slot in acc_poly.items():
            linear[key] = RationalFunction(Polynomial(slot))
        for key, rf in acc_rf.items():
            linear[key] = linear.get(key, RF_ZERO) + rf
        constant = linear.pop(Monomial.unit(), RF_ZERO)
        linear = {k: v for k, v in linear.items() if not v.is_zero()}
        return linear, constant

    def extract(self, target: Monomial) -> MomentRecurrence:
        bad = target.symbols() - self.var_set
        if bad:
            raise ProgramError(f"unknown program variable {sorted(bad)[0]} in moment target")
        body = self.substitute_body(target)
        linear, constant = self.expectation(body)
        self_coeff = linear.pop(target, RF_ZERO)
        ordered = tuple(sorted(linear.items(), key=lambda kv: kv[0], reverse=True))
        return MomentRecurrence(target, self_coeff, ordered, constant)

    # -- initial values ----------------------------------------------------

    def initial_moment(self, target: Monomial) -> RationalFunction:
        """E[target] at n = 0; initializers are mutually independent."""
        total = RF_ONE
        for var, k in target.powers:
            key = (var, k)
            cached = self._init_moments.get(key)
            if cached is None:
                for init in self.prog.inits:
                    if init.target == var:
                        expr = init.expr
                        break
                else:
                    raise ProgramError(f"variable {var} has no initializer")
                _, cached = self.expectation(self._reduce(expr**k))
                self._init_moments[key] = cached
            total = total * cached
        return total


def extract_recurrence(prog: LoopProgram, target: Monomial) -> MomentRecurrence:
    return MomentEngine(prog).extract(target)


def _toposort(recs: dict[Monomial, MomentRecurrence]) -> list[Monomial]:
    order: list[Monomial] = []
    state: dict[Monomial, int] = {}  # 1 = visiting, 2 = done

    def visit(m: Monomial, path: list[Monomial]) -> None:
        mark = state.get(m)
        if mark == 2:
            return
        if mark == 1:
            cyc = " -> ".join(str(x) for x in path + [m])
            raise InternalCheckError(f"cyclic moment dependence: {cyc}")
        state[m] = 1
        for dep, _ in recs[m].linear:
            visit(dep, path + [m])
        state[m] = 2
        order.append(m)

    for m in recs:
        visit(m, [])
    return order


def _g_tail(rec: MomentRecurrence, solved: dict[Monomial, ClosedForm]) -> ExpPoly:
    g = ExpPoly.const(rec.constant) if not rec.constant.is_zero() else ExpPoly.zero()
    for dep, a in rec.linear:
        g = g + solved[dep].tail * a
    return g


def _g_at(rec: MomentRecurrence, solved: dict[Monomial, ClosedForm], n: int) -> RationalFunction:
    g = rec.constant
    for dep, a in rec.linear:
        g = g + a * solved[dep].at(n)
    return g


def compute_mbis(
    prog: LoopProgram,
    goals,
    cap: int | None = None,
    check: bool = True,
) -> dict[Monomial, MBI]:
    """Closed forms for the expected values of the goal monomials.

    The worklist adds every moment the goals transitively depend on; a
    monomial whose total degree exceeds the cap (PSOLVE_DEGREE_CAP or 64)
    aborts with the chain that produced it.  With check=True every solution
    is verified by back-substitution before being returned.
    """
    if cap is None:
        cap = degree_cap()
    engine = MomentEngine(prog)
    recs: dict[Monomial, MomentRecurrence] = {}
    parent: dict[Monomial, Monomial] = {}
    pending: list[Monomial] = []
    for goal in goals:
        if not isinstance(goal, Monomial):
            raise TypeError("goals must be monomials over program variables")
        pending.append(goal)
    while pending:
        m = pending.pop()
        if m in recs:
            continue
        if m.degree() > cap:
            chain = [m]
            while chain[-1] in parent:
                chain.append(parent[chain[-1]])
            trail = " <- ".join(str(x) for x in chain)
            raise DegreeCapError(
                f"moment degree {m.degree()} exceeds cap {cap}: {trail}"
            )
        rec = engine.extract(m)
        recs[m] = rec
        for dep, _ in rec.linear:
            if dep not in recs:
                parent.setdefault(dep, m)
                pending.append(dep)

    solved: dict[Monomial, ClosedForm] = {}
    for m in _toposort(recs):
        rec = recs[m]
        start = max((solved[dep].start for dep, _ in rec.linear), default=0)
        values = [engine.initial_moment(m)]
        for j in range(start):
            values.append(rec.self_coeff * values[j] + _g_at(rec, solved, j))
        cf = solve_first_order(
            FirstOrderRecurrence(rec.self_coeff, _g_tail(rec, solved), values[start]),
            start=start,
            prefix=tuple(values[:start]),
        )
        solved[m] = cf

    mbis = {m: MBI(m, recs[m], solved[m]) for m in recs}
    if check:
        check_mbis(prog, mbis)
    return mbis


def check_mbis(prog: LoopProgram, mbis: dict[Monomial, MBI]) -> None:
    """Back-substitution check: every closed form must satisfy its recurrence
    and initial value exactly.  Raises InternalCheckError on failure."""
    engine = MomentEngine(prog)
    solved = {m: mbi.closed for m, mbi in mbis.items()}
    for m, mbi in mbis.items():
        rec = mbi.recurrence
        cf = mbi.closed
        for dep, _ in rec.linear:
            if dep not in solved:
                raise InternalCheckError(f"moment {m} depends on unsolved {dep}")
        if not cf.at(0) == engine.initial_moment(m):
            raise InternalCheckError(f"closed form of E[{m}] wrong at n = 0")
        start = max((solved[dep].start for dep, _ in rec.linear), default=0)
        fo = FirstOrderRecurrence(rec.self_coeff, _g_tail(rec, solved), cf.at(start))
        if not verify_solution(fo, cf, start=start):
            raise InternalCheckError(f"closed form of E[{m}] fails back-substitution")
        for j in range(start):
            lhs = cf.at(j + 1)
            rhs = rec.self_coeff * cf.at(j) + _g_at(rec, solved, j)
            if not lhs == rhs:
                raise InternalCheckError(
                    f"closed form of E[{m}] fails the recurrence at n = {j}"
                )
