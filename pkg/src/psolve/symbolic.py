"""Exact symbolic arithmetic: monomials, polynomials, rational functions.

Everything here is immutable and exact.  Coefficients are
`fractions.Fraction`; symbols are plain strings (program variables,
parameters and draw markers share one namespace, kept apart by callers).
Zero coefficients are never stored, so the zero polynomial has no terms and
structural equality is semantic equality for polynomials.  Rational-function
equality is the cross-multiplication test, which also identifies
representatives that differ by a common polynomial factor; rational
functions are therefore unhashable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from math import gcd, lcm
from typing import Iterable, Iterator, Mapping, Optional, Union

Scalar = Union[int, Fraction]


@total_ordering
class Monomial:
    """A power product of symbols, e.g. x^2*y.

    Stored as a tuple of (symbol, exponent) pairs sorted by symbol, all
    exponents positive.  The empty tuple is the unit monomial.  Ordering is
    graded lexicographic: total degree first, then higher power of the
    alphabetically earliest differing symbol wins.
    """

    __slots__ = ("powers",)

    def __init__(self, powers: Iterable[tuple[str, int]] = ()):
        items: dict[str, int] = {}
        for sym, exp in powers:
            if exp < 0:
                raise ValueError(f"negative exponent for {sym}")
            if exp:
                items[sym] = items.get(sym, 0) + exp
        object.__setattr__(self, "powers", tuple(sorted(items.items())))

    def __setattr__(self, name, value):
        raise AttributeError("Monomial is immutable")

    @staticmethod
    def unit() -> "Monomial":
        return _UNIT

    @staticmethod
    def of(sym: str, exp: int = 1) -> "Monomial":
        return Monomial(((sym, exp),))

    def degree(self) -> int:
        return sum(e for _, e in self.powers)

    def exponent(self, sym: str) -> int:
        for s, e in self.powers:
            if s == sym:
                return e
        return 0

    def symbols(self) -> frozenset[str]:
        return frozenset(s for s, _ in self.powers)

    def is_unit(self) -> bool:
        return not self.powers

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(self.powers + other.powers)

    def __pow__(self, k: int) -> "Monomial":
        return Monomial((s, e * k) for s, e in self.powers)

    def without(self, sym: str) -> "Monomial":
        return Monomial((s, e) for s, e in self.powers if s != sym)

    def divides(self, other: "Monomial") -> bool:
        return all(other.exponent(s) >= e for s, e in self.powers)

    def __truediv__(self, other: "Monomial") -> "Monomial":
        out = dict(self.powers)
        for s, e in other.powers:
            r = out.get(s, 0) - e
            if r < 0:
                raise ValueError(f"{other} does not divide {self}")
            out[s] = r
        return Monomial(out.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, Monomial) and self.powers == other.powers

    def __hash__(self) -> int:
        return hash(self.powers)

    def __lt__(self, other: "Monomial") -> bool:
        da, db = self.degree(), other.degree()
        if da != db:
            return da < db
        # Lex on the union of symbols in name order.
        syms = sorted(self.symbols() | other.symbols())
        for s in syms:
            ea, eb = self.exponent(s), other.exponent(s)
            if ea != eb:
                return ea < eb
        return False

    def __str__(self) -> str:
        if not self.powers:
            return "1"
        return "*".join(s if e == 1 else f"{s}^{e}" for s, e in self.powers)

    def __repr__(self) -> str:
        return f"Monomial({self})"


_UNIT = Monomial.__new__(Monomial)
object.__setattr__(_UNIT, "powers", ())


class Polynomial:
    """Multivariate polynomial with Fraction coefficients.

    Backed by a dict Monomial -> Fraction with no zero entries.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                c = Fraction(coeff)
                if c:
                    clean[mono] = c
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def const(value: Scalar) -> "Polynomial":
        return Polynomial({_UNIT: Fraction(value)})

    @staticmethod
    def var(sym: str) -> "Polynomial":
        return Polynomial({Monomial.of(sym): Fraction(1)})

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and _UNIT in self.terms)

    def const_value(self) -> Fraction:
        if not self.is_const():
            raise ValueError(f"not a constant: {self}")
        return self.terms.get(_UNIT, Fraction(0))

    def coeff(self, mono: Monomial) -> Fraction:
        return self.terms.get(mono, Fraction(0))

    def degree(self) -> int:
        return max((m.degree() for m in self.terms), default=0)

    def degree_in(self, sym: str) -> int:
        return max((m.exponent(sym) for m in self.terms), default=0)

    def symbols(self) -> frozenset[str]:
        out: set[str] = set()
        for m in self.terms:
            out |= m.symbols()
        return frozenset(out)

    def leading(self) -> tuple[Monomial, Fraction]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        m = max(self.terms)
        return m, self.terms[m]

    def content(self) -> Fraction:
        """Positive rational c such that self/c has coprime integer coefficients."""
        if not self.terms:
            return Fraction(1)
        num = 0
        den = 1
        for c in self.terms.values():
            num = gcd(num, c.numerator)
            den = lcm(den, c.denominator)
        return Fraction(num, den)

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: t[0], reverse=True)

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(value) -> "Polynomial":
        if isinstance(value, Polynomial):
            return value
        if isinstance(value, (int, Fraction)):
            return Polynomial.const(value)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other) -> "Polynomial":
        other = Polynomial._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        other = Polynomial._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return Polynomial._coerce(other) + (-self)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            if not c:
                return Polynomial()
            return Polynomial({m: k * c for m, k in self.terms.items()})
        other = Polynomial._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = ma * mb
                out[m] = out.get(m, Fraction(0)) + ca * cb
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Polynomial.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None  # type: ignore[assignment]

    # -- substitution and evaluation ---------------------------------------

    def substitute(self, mapping: Mapping[str, Union["Polynomial", Scalar]]) -> "Polynomial":
        """Replace each named symbol with a polynomial (or constant)."""
        if not mapping:
            return self
        repl = {s: Polynomial._coerce(v) for s, v in mapping.items()}
        out = Polynomial()
        powers: dict[tuple[str, int], Polynomial] = {}
        for mono, coeff in self.terms.items():
            factor = Polynomial.const(coeff)
            keep: list[tuple[str, int]] = []
            for s, e in mono.powers:
                if s in repl:
                    key = (s, e)
                    if key not in powers:
                        powers[key] = repl[s] ** e
                    factor = factor * powers[key]
                else:
                    keep.append((s, e))
            if keep:
                factor = factor * Polynomial({Monomial(keep): Fraction(1)})
            out = out + factor
        return out

    def eval(self, values: Mapping[str, Scalar]) -> Fraction:
        total = Fraction(0)
        for mono, coeff in self.terms.items():
            term = coeff
            for s, e in mono.powers:
                term *= Fraction(values[s]) ** e
            total += term
        return total

    def interval(self, bounds: Mapping[str, tuple[Fraction, Fraction]]) -> tuple[Fraction, Fraction]:
        """Conservative interval enclosure given per-symbol bounds."""
        lo = hi = Fraction(0)
        for mono, coeff in self.terms.items():
            tlo, thi = Fraction(1), Fraction(1)
            for s, e in mono.powers:
                if s not in bounds:
                    raise KeyError(f"no bounds for symbol {s}")
                plo, phi = _interval_pow(bounds[s][0], bounds[s][1], e)
                tlo, thi = _interval_mul(tlo, thi, plo, phi)
            tlo, thi = (tlo * coeff, thi * coeff) if coeff > 0 else (thi * coeff, tlo * coeff)
            lo, hi = lo + tlo, hi + thi
        return lo, hi

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: list[str] = []
        for mono, coeff in self.sorted_terms():
            if mono.is_unit():
                body = str(abs(coeff))
            elif abs(coeff) == 1:
                body = str(mono)
            else:
                body = f"{abs(coeff)}*{mono}"
            if not parts:
                parts.append(body if coeff > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self})"


def _interval_mul(alo: Fraction, ahi: Fraction, blo: Fraction, bhi: Fraction) -> tuple[Fraction, Fraction]:
    cands = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
    return min(cands), max(cands)


def _interval_pow(lo: Fraction, hi: Fraction, e: int) -> tuple[Fraction, Fraction]:
    if e == 0:
        return Fraction(1), Fraction(1)
    if e % 2 == 1 or lo >= 0:
        return lo**e, hi**e
    if hi <= 0:
        return hi**e, lo**e
    # Even power over an interval straddling zero.
    return Fraction(0), max(lo**e, hi**e)


def exact_div(num: Polynomial, den: Polynomial) -> Optional[Polynomial]:
    """Quotient num/den if den divides num exactly, else None.

    Single-divisor division by leading terms in graded-lex order; for exact
    quotients the leading term of the running remainder is always divisible.
    """
    if den.is_zero():
        raise ZeroDivisionError("division by zero polynomial")
    if num.is_zero():
        return Polynomial()
    dm, dc = den.leading()
    quot: dict[Monomial, Fraction] = {}
    rem = num
    while not rem.is_zero():
        rm, rc = rem.leading()
        if not dm.divides(rm):
            return None
        qm = rm / dm
        qc = rc / dc
        quot[qm] = quot.get(qm, Fraction(0)) + qc
        rem = rem - den * Polynomial({qm: qc})
    return Polynomial(quot)


class RationalFunction:
    """Ratio of two polynomials, denominator nonzero.

    Canonical form: exact polynomial cancellation is attempted (single
    divisor only, no multivariate gcd), the denominator is made primitive
    with positive leading coefficient, and a zero numerator forces
    denominator 1.  Equality is cross-multiplication, so representatives
    differing by a common factor still compare equal.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        num = _as_poly(num)
        den = Polynomial.const(1) if den is None else _as_poly(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            den = Polynomial.const(1)
        elif not den.is_const():
            q = exact_div(num, den)
            if q is not None:
                num, den = q, Polynomial.const(1)
        if den.is_const():
            c = den.const_value()
            if c != 1:
                num, den = num * (1 / c), Polynomial.const(1)
        else:
            c = den.content()
            _, lead = den.leading()
            if lead < 0:
                c = -c
            num, den = num * (1 / c), den * (1 / c)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFunction is immutable")

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_const(self) -> bool:
        return self.num.is_const() and self.den.is_const()

    def const_value(self) -> Fraction:
        return self.num.const_value() / self.den.const_value()

    def is_poly(self) -> bool:
        return self.den == Polynomial.const(1)

    def symbols(self) -> frozenset[str]:
        return self.num.symbols() | self.den.symbols()

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(value) -> "RationalFunction":
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, (int, Fraction, Polynomial)):
            return RationalFunction(value)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other) -> "RationalFunction":
        other = RationalFunction._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == other.den:
            return RationalFunction(self.num + other.num, self.den)
        return RationalFunction(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other) -> "RationalFunction":
        other = RationalFunction._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "RationalFunction":
        return RationalFunction._coerce(other) + (-self)

    def __mul__(self, other) -> "RationalFunction":
        other = RationalFunction._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "RationalFunction":
        other = RationalFunction._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.num.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other) -> "RationalFunction":
        return RationalFunction._coerce(other) / self

    def __pow__(self, k: int) -> "RationalFunction":
        if k < 0:
            return (RationalFunction(1) / self) ** (-k)
        return RationalFunction(self.num**k, self.den**k)

    def __eq__(self, other) -> bool:
        other = RationalFunction._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self.num * other.den - other.num * self.den).is_zero()

    __hash__ = None  # type: ignore[assignment]

    # -- substitution and evaluation ---------------------------------------

    def subs(self, mapping: Mapping[str, Union[Polynomial, Scalar]]) -> "RationalFunction":
        return RationalFunction(self.num.substitute(mapping), self.den.substitute(mapping))

    def eval(self, values: Mapping[str, Scalar]) -> Fraction:
        d = self.den.eval(values)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at {dict(values)}")
        return self.num.eval(values) / d

    def interval(self, bounds: Mapping[str, tuple[Fraction, Fraction]]) -> Optional[tuple[Fraction, Fraction]]:
        """Conservative enclosure, or None when the denominator may vanish."""
        nlo, nhi = self.num.interval(bounds)
        dlo, dhi = self.den.interval(bounds)
        if dlo <= 0 <= dhi:
            return None
        cands = (nlo / dlo, nlo / dhi, nhi / dlo, nhi / dhi)
        return min(cands), max(cands)

    def __str__(self) -> str:
        if self.is_poly():
            return str(self.num)
        num = str(self.num)
        den = str(self.den)
        if len(self.num.terms) > 1:
            num = f"({num})"
        if len(self.den.terms) > 1 or not self.den.is_const():
            den = f"({den})"
        return f"{num}/{den}"

    def __repr__(self) -> str:
        return f"RationalFunction({self})"


def _as_poly(value) -> Polynomial:
    if isinstance(value, Polynomial):
        return value
    if isinstance(value, (int, Fraction)):
        return Polynomial.const(value)
    raise TypeError(f"cannot treat {value!r} as a polynomial")


RF_ZERO = RationalFunction(0)
RF_ONE = RationalFunction(1)


@dataclass(frozen=True)
class Param:
    """A symbolic parameter, optionally restricted to a closed interval."""

    name: str
    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None

    def bounds(self) -> Optional[tuple[Fraction, Fraction]]:
        if self.lo is None or self.hi is None:
            return None
        return self.lo, self.hi


def reduce_finite_support(poly: Polynomial, sym: str, size: int) -> Polynomial:
    """Reduce powers of `sym` modulo sym*(sym-1)*...*(sym-size+1).

    The result agrees with `poly` on every point where sym takes a value in
    {0, ..., size-1} and has degree < size in sym.
    """
    if size < 1:
        raise ValueError("support size must be >= 1")
    top = poly.degree_in(sym)
    if top < size:
        return poly
    # rem[k] = coefficient vector of sym^k reduced, length `size`.
    rem: list[list[Fraction]] = []
    for k in range(size):
        row = [Fraction(0)] * size
        row[k] = Fraction(1)
        rem.append(row)
    # sym^size = sum_j mu_j sym^j where mu is sym*(sym-1)*...*(sym-size+1)
    # minus its leading term, negated: compute falling-factorial coefficients.
    mu = Polynomial.const(1)
    x = Polynomial.var(sym)
    for i in range(size):
        mu = mu * (x - i)
    reduce_top = [-mu.coeff(Monomial.of(sym, j)) if j else -mu.coeff(_UNIT) for j in range(size)]
    for k in range(size, top + 1):
        prev = rem[k - 1]
        row = [Fraction(0)] * size
        for j in range(size - 1):
            row[j + 1] += prev[j]
        if prev[size - 1]:
            for j in range(size):
                row[j] += prev[size - 1] * reduce_top[j]
        rem.append(row)
    out: dict[Monomial, Fraction] = {}
    for mono, coeff in poly.terms.items():
        e = mono.exponent(sym)
        if e < size:
            out[mono] = out.get(mono, Fraction(0)) + coeff
            continue
        rest = mono.without(sym)
        for j, c in enumerate(rem[e]):
            if c:
                m = rest if j == 0 else rest * Monomial.of(sym, j)
                out[m] = out.get(m, Fraction(0)) + coeff * c
    return Polynomial(out)


def decimal_str(value: Fraction, digits: int = 6) -> str:
    """Exact fixed-point rendering with round-half-to-even."""
    scaled = round(value * Fraction(10) ** digits)  # Fraction rounds half-even
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    whole, frac = divmod(scaled, 10**digits)
    if digits == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:0{digits}d}"
