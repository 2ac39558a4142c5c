"""First-order linear recurrences with constant coefficient.

f(n+1) = c * f(n) + g(n), with g an exponential polynomial, solved by
undetermined coefficients.  A base equal to c (decided exactly on rational
functions) is resonant and raises the particular-solution degree by one; a
symbolic base merely unequal to c is treated as nonresonant and the
assumption recorded.  c = 0 has no exponential closed form, so solutions
are piecewise: explicit values below a start index, an ExpPoly tail above.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .exppoly import ExpPoly
from .symbolic import RationalFunction, RF_ZERO


@dataclass(frozen=True)
class FirstOrderRecurrence:
    self_coeff: RationalFunction
    inhomog: ExpPoly
    initial: RationalFunction  # value at the start index


@dataclass(frozen=True)
class ClosedForm:
    """Piecewise closed form: prefix[n] below start, tail(n) from start on."""

    prefix: tuple[RationalFunction, ...]
    tail: ExpPoly
    assumptions: tuple[str, ...] = ()

    @property
    def start(self) -> int:
        return len(self.prefix)

    def at(self, n: int) -> RationalFunction:
        if n < len(self.prefix):
            return self.prefix[n]
        return self.tail.at(n)

    def total(self) -> ExpPoly | None:
        """The tail, if it is valid from n = 0 (no piecewise exception)."""
        return self.tail if not self.prefix else None

    def normalized(self) -> "ClosedForm":
        """Drop trailing prefix values that the tail already reproduces."""
        prefix = list(self.prefix)
        while prefix and self.tail.at(len(prefix) - 1) == prefix[-1]:
            prefix.pop()
        if len(prefix) == len(self.prefix):
            return self
        return ClosedForm(tuple(prefix), self.tail, self.assumptions)

    def subs(self, mapping) -> "ClosedForm":
        """Substitute parameter values; may fail if a base becomes zero."""
        return ClosedForm(
            tuple(v.subs(mapping) for v in self.prefix),
            self.tail.subs(mapping),
            self.assumptions,
        )

    def __str__(self) -> str:
        if not self.prefix:
            return str(self.tail)
        pieces = ", ".join(f"f({i}) = {v}" for i, v in enumerate(self.prefix))
        return f"{self.tail} for n >= {self.start}; {pieces}"


def _particular(g: ExpPoly, c: RationalFunction) -> tuple[list, list[str]]:
    """Particular solution terms for f(n+1) - c*f(n) = g(n)."""
    groups: list[tuple[RationalFunction, dict[int, RationalFunction]]] = []
    for coeff, base, degree in g.terms:
        for b, coeffs in groups:
            if b == base:
                coeffs[degree] = coeffs.get(degree, RF_ZERO) + coeff
                break
        else:
            groups.append((base, {degree: coeff}))

    terms = []
    assumptions: list[str] = []
    for base, coeffs in groups:
        top = max(coeffs)
        diff = base - c
        if diff.is_zero():
            # Resonant: q has degrees 1..top+1, with r*(q(n+1) - q(n)) = p(n).
            q: dict[int, RationalFunction] = {}
            for j in range(top, -1, -1):
                rhs = coeffs.get(j, RF_ZERO) / base
                for l in range(j + 2, top + 2):
                    if l in q:
                        rhs = rhs - q[l] * comb(l, j)
                q[j + 1] = rhs / (j + 1)
            for deg, qc in q.items():
                terms.append((qc, base, deg))
        else:
            if not diff.is_const():
                assumptions.append(f"{base} != {c}")
            # Nonresonant: r*q(n+1) - c*q(n) = p(n) with deg q = top.
            q = {}
            for j in range(top, -1, -1):
                rhs = coeffs.get(j, RF_ZERO)
                for l in range(j + 1, top + 1):
                    if l in q:
                        rhs = rhs - base * q[l] * comb(l, j)
                q[j] = rhs / diff
            for deg, qc in q.items():
                terms.append((qc, base, deg))
    return terms, assumptions


def solve_first_order(
    rec: FirstOrderRecurrence,
    start: int = 0,
    prefix: tuple[RationalFunction, ...] = (),
) -> ClosedForm:
    """Solve f(n+1) = c*f(n) + g(n) for n >= start with f(start) = rec.initial.

    `prefix` supplies the exact values f(0), ..., f(start-1) when start > 0.
    """
    if len(prefix) != start:
        raise ValueError("prefix must list exactly the values below start")
    c = rec.self_coeff
    if c.is_zero():
        tail = rec.inhomog.shift(-1)
        return ClosedForm(prefix + (rec.initial,), tail).normalized()
    part_terms, assumptions = _particular(rec.inhomog, c)
    part = ExpPoly(part_terms)
    if start > 0 and not c.is_const():
        assumptions.append(f"{c} != 0")
    amp = (rec.initial - part.at(start)) / c**start
    tail = part + ExpPoly.term(amp, c, 0)
    return ClosedForm(prefix, tail, tuple(assumptions)).normalized()


def verify_solution(rec: FirstOrderRecurrence, cf: ClosedForm, start: int = 0) -> bool:
    """Check the closed form against the recurrence.

    The tail is checked formally (the ExpPoly identity tail(n+1) - c*tail(n)
    - g(n) = 0), the boundary and any prefix steps pointwise in exact
    arithmetic.  Nothing is sampled and nothing is rounded.
    """
    if not cf.at(start) == rec.initial:
        return False
    c = rec.self_coeff
    tail_ident = cf.tail.shift(1) - ExpPoly.term(c, 1, 0) * cf.tail - rec.inhomog
    if not tail_ident.is_zero():
        return False
    # Pointwise spot checks across the piecewise boundary.
    hi = max(cf.start + 2, start + 2)
    for n in range(start, hi):
        lhs = cf.at(n + 1)
        rhs = c * cf.at(n) + rec.inhomog.at(n)
        if not lhs == rhs:
            return False
    return True
