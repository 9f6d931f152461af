"""Exact arithmetic over F_q[t] and Carlitz polynomials.

Elements of F_q are encoded as integers 0..q-1 (base-p digits of a
polynomial over F_p reduced by a fixed irreducible), so non-prime q works
with the same integer-keyed dictionaries as prime q.  Polynomials are
immutable coefficient tuples, lowest degree first; the zero polynomial has
degree -1 by convention.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

from sympy import isprime

# minimal irreducible moduli over F_p, as tuples of low-order coefficients
# (the modulus x^e + m[e-1] x^(e-1) + ... + m[0] is monic of degree e)
_MODULI = {
    4: (1, 1),       # x^2 + x + 1 over F_2
    8: (1, 1, 0),    # x^3 + x + 1
    9: (1, 0),       # x^2 + 1 over F_3
    16: (1, 1, 0, 0),
    25: (2, 0),      # x^2 + 2 over F_5
    27: (1, 2, 0),   # x^3 + 2x + 1
    32: (1, 0, 1, 0, 0),
    49: (1, 0),      # x^2 + 1 over F_7
}


def _factor_prime_power(q):
    for p in range(2, q + 1):
        if isprime(p):
            e = 0
            m = q
            while m % p == 0:
                m //= p
                e += 1
            if m == 1 and e >= 1:
                return p, e
            if q % p == 0:
                break
    raise ValueError(f"{q} is not a prime power")


class GFq:
    """The field with q elements; elements are the integers 0..q-1.

    For prime q this is arithmetic mod q.  Otherwise an element's base-p
    digits are the coefficients of a polynomial over F_p, reduced modulo a
    fixed irreducible from a small built-in table; add/mul tables are
    precomputed once per field.
    """

    _cache = {}

    def __new__(cls, q):
        if q in cls._cache:
            return cls._cache[q]
        self = object.__new__(cls)
        p, e = _factor_prime_power(q)
        self.q, self.p, self.e = q, p, e
        if e == 1:
            self._add = [[(a + b) % p for b in range(p)] for a in range(p)]
            self._mul = [[(a * b) % p for b in range(p)] for a in range(p)]
        else:
            if q not in _MODULI:
                raise ValueError(f"no modulus on file for q = {q}")
            mod = _MODULI[q]

            def digits(a):
                out = []
                for _ in range(e):
                    out.append(a % p)
                    a //= p
                return out

            def undig(ds):
                a = 0
                for d in reversed(ds):
                    a = a * p + d
                return a

            def polymul(a, b):
                da, db = digits(a), digits(b)
                prod = [0] * (2 * e - 1)
                for i, x in enumerate(da):
                    if x:
                        for j, y in enumerate(db):
                            prod[i + j] = (prod[i + j] + x * y) % p
                for i in range(2 * e - 2, e - 1, -1):
                    c = prod[i]
                    if c:
                        prod[i] = 0
                        for j in range(e):
                            prod[i - e + j] = (prod[i - e + j] - c * mod[j]) % p
                return undig(prod[:e])

            self._add = [
                [undig([(x + y) % p for x, y in zip(digits(a), digits(b))])
                 for b in range(q)]
                for a in range(q)
            ]
            self._mul = [[polymul(a, b) for b in range(q)] for a in range(q)]
        self._neg = [next(b for b in range(q) if self._add[a][b] == 0) for a in range(q)]
        self._inv = [None] + [
            next(b for b in range(1, q) if self._mul[a][b] == 1) for a in range(1, q)
        ]
        self.units = tuple(range(1, q))
        cls._cache[q] = self
        return self

    def add(self, a, b):
        return self._add[a][b]

    def sub(self, a, b):
        return self._add[a][self._neg[b]]

    def mul(self, a, b):
        return self._mul[a][b]

    def neg(self, a):
        return self._neg[a]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in GF(q)")
        return self._inv[a]

    def pow(self, a, n):
        if a == 0:
            return 0 if n else 1
        acc, cur = 1, a
        n %= self.q - 1
        while n:
            if n & 1:
                acc = self._mul[acc][cur]
            cur = self._mul[cur][cur]
            n >>= 1
        return acc

    def __repr__(self):
        return f"GF({self.q})"


class FqPoly:
    """Immutable polynomial over GF(q) in the variable t."""

    __slots__ = ("field", "coeffs", "_hash")

    def __init__(self, field, coeffs):
        while coeffs and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        self.field = field
        self.coeffs = tuple(coeffs)
        self._hash = hash((field.q, self.coeffs))

    @staticmethod
    def constant(field, c):
        return FqPoly(field, (c,))

    @staticmethod
    def zero(field):
        return FqPoly(field, ())

    @staticmethod
    def one(field):
        return FqPoly(field, (1,))

    @staticmethod
    def t(field):
        return FqPoly(field, (0, 1))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_zero(self):
        return not self.coeffs

    @property
    def is_monic(self):
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def leading(self):
        return self.coeffs[-1] if self.coeffs else 0

    def __add__(self, other):
        F = self.field
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = F.add(out[i], c)
        return FqPoly(F, out)

    def __neg__(self):
        F = self.field
        return FqPoly(F, [F.neg(c) for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        F = self.field
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return FqPoly(F, ())
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        out[i + j] = F.add(out[i + j], F.mul(x, y))
        return FqPoly(F, out)

    def scale(self, c):
        F = self.field
        return FqPoly(F, [F.mul(c, x) for x in self.coeffs])

    def monic(self):
        if self.is_zero or self.is_monic:
            return self
        return self.scale(self.field.inv(self.leading()))

    def shift(self, k):
        """Multiply by t^k."""
        if self.is_zero:
            return self
        return FqPoly(self.field, (0,) * k + self.coeffs)

    def divmod(self, other):
        if other.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        F = self.field
        rem = list(self.coeffs)
        db = other.degree
        inv_lead = F.inv(other.leading())
        quo = [0] * max(len(rem) - db, 0)
        for i in range(len(rem) - 1, db - 1, -1):
            c = rem[i]
            if c:
                f = F.mul(c, inv_lead)
                quo[i - db] = f
                for j, y in enumerate(other.coeffs):
                    rem[i - db + j] = F.sub(rem[i - db + j], F.mul(f, y))
        return FqPoly(F, quo), FqPoly(F, rem)

    def __mod__(self, other):
        return self.divmod(other)[1]

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def gcd(self, other):
        a, b = self, other
        while not b.is_zero:
            a, b = b, a % b
        return a.monic() if not a.is_zero else a

    def xgcd(self, other):
        """(g, s, u) with s*self + u*other = g, g monic (or zero)."""
        F = self.field
        a, b = self, other
        sa, sb = FqPoly.one(F), FqPoly.zero(F)
        ua, ub = FqPoly.zero(F), FqPoly.one(F)
        while not b.is_zero:
            q, r = a.divmod(b)
            a, b = b, r
            sa, sb = sb, sa - q * sb
            ua, ub = ub, ua - q * ub
        if a.is_zero:
            return a, sa, ua
        c = F.inv(a.leading())
        return a.scale(c), sa.scale(c), ua.scale(c)

    def evaluate(self, x):
        F = self.field
        acc = 0
        for c in reversed(self.coeffs):
            acc = F.add(F.mul(acc, x), c)
        return acc

    def frobenius_power(self, k):
        """self(t)^(q^k), via coefficient Frobenius and exponent spreading."""
        F = self.field
        if k == 0 or self.is_zero:
            return self
        step = F.q**k
        out = [0] * (self.degree * step + 1)
        for i, c in enumerate(self.coeffs):
            if c:
                out[i * step] = F.pow(c, step)
        return FqPoly(F, out)

    def is_irreducible(self):
        if self.degree < 1:
            return False
        if self.degree == 1:
            return True
        for d in range(1, self.degree // 2 + 1):
            for g in monic_polys(self.field, d):
                if (self % g).is_zero:
                    return False
        return True

    def factor(self):
        """Monic irreducible factors with multiplicity, by trial division."""
        out = []
        rem = self.monic()
        d = 1
        while rem.degree > 0:
            if d > rem.degree // 2:
                out.append((rem, 1))
                break
            for g in monic_polys(self.field, d):
                if rem.degree < 2 * d:
                    break
                e = 0
                while (rem % g).is_zero:
                    rem = rem // g
                    e += 1
                if e:
                    out.append((g, e))
            if 0 < rem.degree <= 2 * d - 1:
                out.append((rem, 1))
                break
            d += 1
        return out

    def __eq__(self, other):
        return (isinstance(other, FqPoly) and other.field is self.field
                and other.coeffs == self.coeffs)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.is_zero:
            return "0"
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            if i == 0:
                parts.append(str(c))
            elif i == 1:
                parts.append("t" if c == 1 else f"{c}*t")
            else:
                parts.append(f"t^{i}" if c == 1 else f"{c}*t^{i}")
        return " + ".join(parts)


def monic_polys(field, degree):
    """All monic polynomials of exactly the given degree."""
    if degree < 0:
        return
    for tail in product(range(field.q), repeat=degree):
        yield FqPoly(field, tail + (1,))


def polys_below(field, degree):
    """All polynomials of degree < `degree` (the residues mod any monic of
    that degree), zero included."""
    for tup in product(range(field.q), repeat=degree):
        yield FqPoly(field, tup)


@lru_cache(maxsize=None)
def monic_irreducibles(q, max_degree):
    field = GFq(q)
    out = []
    for d in range(1, max_degree + 1):
        for f in monic_polys(field, d):
            if f.is_irreducible():
                out.append(f)
    return tuple(out)


# ---------------------------------------------------------------------------
# Carlitz polynomials
# ---------------------------------------------------------------------------


class CarlitzPoly:
    """An F_q-linear polynomial sum a_i x^(q^i), stored by its linear
    coefficients a_i in F_q[t]."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        cs = list(coeffs)
        while cs and cs[-1].is_zero:
            cs.pop()
        self.field = field
        self.coeffs = tuple(cs)

    @property
    def degree(self):
        """Degree in x (q^i for the top nonzero linear coefficient)."""
        if not self.coeffs:
            return -1
        return self.field.q ** (len(self.coeffs) - 1)

    @property
    def is_monic(self):
        return bool(self.coeffs) and self.coeffs[-1] == FqPoly.one(self.field)

    def __add__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        zero = FqPoly.zero(self.field)
        a = list(self.coeffs) + [zero] * (n - len(self.coeffs))
        b = list(other.coeffs) + [zero] * (n - len(other.coeffs))
        return CarlitzPoly(self.field, [x + y for x, y in zip(a, b)])

    def scale(self, c):
        """Left composition with x -> c x for constant c."""
        return CarlitzPoly(self.field, [a.scale(c) for a in self.coeffs])

    def compose(self, other):
        """self(other(x)) — additive polynomials are closed under composition:
        (a x^(q^i)) o (b x^(q^j)) = a b^(q^i) x^(q^(i+j))."""
        if not self.coeffs or not other.coeffs:
            return CarlitzPoly(self.field, ())
        zero = FqPoly.zero(self.field)
        out = [zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coeffs):
                if b.is_zero:
                    continue
                out[i + j] = out[i + j] + a * b.frobenius_power(i)
        return CarlitzPoly(self.field, out)

    def monomials(self):
        """Pairs (q^i, a_i) for the nonzero linear coefficients, top first."""
        q = self.field.q
        return [(q**i, a) for i, a in reversed(list(enumerate(self.coeffs)))
                if not a.is_zero]

    def __eq__(self, other):
        return (isinstance(other, CarlitzPoly) and other.field is self.field
                and other.coeffs == self.coeffs)

    def __hash__(self):
        return hash((self.field.q,) + self.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for e, a in self.monomials():
            xs = "x" if e == 1 else f"x^{e}"
            parts.append(xs if a == FqPoly.one(self.field) else f"({a})*{xs}")
        return " + ".join(parts)


def carlitz_polynomial(N):
    """rho_N for the Carlitz module rho_t(x) = t x + x^q.

    Built from the module axioms: additive in N, rho_{fg} = rho_f o rho_g,
    rho_c = c x for constants.  N must be monic (so rho_N is monic of degree
    q^deg N).
    """
    field = N.field
    if not N.is_monic:
        raise ValueError("carlitz_polynomial expects a monic polynomial")
    one = FqPoly.one(field)
    tpoly = FqPoly.t(field)
    rho_t = CarlitzPoly(field, (tpoly, one))
    # rho_{t^d} by iterated composition, then F_q-linear combination
    rho_power = CarlitzPoly(field, (one,))  # rho_1 = x
    total = CarlitzPoly(field, ())
    for d, c in enumerate(N.coeffs):
        if d:
            rho_power = rho_t.compose(rho_power)
        if c:
            total = total + rho_power.scale(c)
    return total
