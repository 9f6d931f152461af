"""Coefficient rings: exact cyclotomics Q(zeta_m) and finite-precision Z_p[theta].

The p-adic rings are (Z/p^k)[x]/(h) with h a Hensel factor of the m-th
cyclotomic polynomial.  The block is chosen canonically: the root's power
lying in mu_{p-1} must be the Teichmueller lift of (the right power of) the
smallest primitive root mod p, which makes the choices for different m
mutually coherent -- see `aligned_block_index`.  This matters: quantities
like generalized Bernoulli numbers are often p-integral at the embedding
where a character's p-part acts through Teichmueller powers while having
genuine p-denominators at conjugate embeddings, so a stray block choice
would misreport integrality.  Character values computed exactly in
Q(zeta_m) enter the p-adic world only through `ZpRing.embed`, which
performs the integrality check exactly (power-basis reduction at raised
precision), so a p in a denominator can never slip through silently.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm

from eislab.errors import NotIntegral, NotInvertible

# ---------------------------------------------------------------------------
# dense polynomial helpers (coefficient lists, low degree first)
# ---------------------------------------------------------------------------


def poly_trim(a):
    while a and not a[-1]:
        a.pop()
    return a


def poly_sub(a, b):
    n = max(len(a), len(b))
    return poly_trim(
        [(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)]
    )


def poly_mul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] += x * y
    return poly_trim(out)


def poly_divmod_monic(a, b):
    """Divide by a monic b; exact over any commutative coefficient ring."""
    a = list(a)
    db = len(b) - 1
    if db < 0 or b[-1] != 1:
        raise ValueError("divisor must be monic")
    q = [0] * max(0, len(a) - db)
    for i in range(len(a) - db - 1, -1, -1):
        c = a[i + db]
        if c:
            q[i] = c
            for j in range(db + 1):
                a[i + j] -= c * b[j]
    return q, poly_trim(a[:db])


@lru_cache(maxsize=None)
def cyclotomic_poly(m):
    """Integer coefficients of Phi_m via the product formula."""
    if m == 1:
        return (-1, 1)
    rem = [-1] + [0] * (m - 1) + [1]  # x^m - 1
    for d in range(1, m):
        if m % d == 0:
            rem, r = poly_divmod_monic(rem, list(cyclotomic_poly(d)))
            assert not r
    return tuple(rem)


# ---------------------------------------------------------------------------
# Q(zeta_m)
# ---------------------------------------------------------------------------

_FIELD_CACHE = {}


class CycField:
    """Q(zeta_m) presented as Q[x]/Phi_m(x)."""

    def __new__(cls, m):
        if m in _FIELD_CACHE:
            return _FIELD_CACHE[m]
        self = super().__new__(cls)
        self.m = m
        self.phi = [Fraction(c) for c in cyclotomic_poly(m)]
        self.deg = len(self.phi) - 1
        # reduction table for x^j, j < max(2*deg, m)
        table = []
        cur = [Fraction(1)]
        for _ in range(max(2 * self.deg, m) + 1):
            table.append(tuple(cur) + (Fraction(0),) * (self.deg - len(cur)))
            cur = [Fraction(0)] + list(cur)
            if len(cur) > self.deg:
                lead = cur[self.deg]
                cur = [c - lead * self.phi[i] for i, c in enumerate(cur[: self.deg])]
            cur = poly_trim(cur) or [Fraction(0)]
        self._xpow = table
        _FIELD_CACHE[m] = self
        return self

    def elt(self, coeffs):
        coeffs = [Fraction(c) for c in coeffs]
        if len(coeffs) > self.deg:
            acc = [Fraction(0)] * self.deg
            for j, c in enumerate(coeffs):
                if c:
                    row = self._xpow[j]
                    for i in range(self.deg):
                        acc[i] += c * row[i]
            coeffs = acc
        else:
            coeffs = coeffs + [Fraction(0)] * (self.deg - len(coeffs))
        return CycElt(self, tuple(coeffs))

    def zeta(self, power=1):
        power %= self.m
        return self.elt(list(self._xpow[power]))

    def one(self):
        return self.elt([1])

    def zero(self):
        return self.elt([])

    def from_rational(self, q):
        return self.elt([Fraction(q)])


class CycElt:
    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def _coerce(self, other):
        if isinstance(other, CycElt):
            if other.field is not self.field:
                raise ValueError("mixed cyclotomic fields; embed first")
            return other
        return self.field.from_rational(other)

    def __add__(self, other):
        other = self._coerce(other)
        return CycElt(
            self.field, tuple(a + b for a, b in zip(self.coeffs, other.coeffs))
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return CycElt(
            self.field, tuple(a - b for a, b in zip(self.coeffs, other.coeffs))
        )

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return CycElt(self.field, tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        other = self._coerce(other)
        deg = self.field.deg
        acc = [Fraction(0)] * deg
        xpow = self.field._xpow
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        row = xpow[i + j]
                        ab = a * b
                        for t in range(deg):
                            if row[t]:
                                acc[t] += ab * row[t]
        return CycElt(self.field, tuple(acc))

    __rmul__ = __mul__

    def inverse(self):
        """Extended Euclid against Phi_m over Q[x]."""
        r0 = list(self.field.phi)
        r1 = poly_trim(list(self.coeffs))
        if not r1:
            raise NotInvertible("zero in cyclotomic field")
        t0, t1 = [], [Fraction(1)]
        while r1:
            lead = r1[-1]
            q, r = poly_divmod_monic(r0, [c / lead for c in r1])
            q = [c / lead for c in q]
            r0, r1 = r1, r
            t0, t1 = t1, poly_sub(t0, poly_mul(q, t1))
        if len(r0) != 1:
            raise NotInvertible("not invertible modulo Phi_m")
        c = r0[0]
        return self.field.elt([x / c for x in t0])

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except (ValueError, TypeError):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.field.m, self.coeffs))

    def is_zero(self):
        return not any(self.coeffs)

    def is_rational(self):
        return not any(self.coeffs[1:])

    def rational_value(self):
        if not self.is_rational():
            raise ValueError("not rational")
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def embed_into(self, target: "CycField"):
        """Map into Q(zeta_M) for m | M via zeta_m -> zeta_M^(M/m)."""
        if target.m % self.field.m:
            raise ValueError("no canonical embedding")
        if target is self.field:
            return self
        step = target.m // self.field.m
        acc = [Fraction(0)] * target.deg
        for j, c in enumerate(self.coeffs):
            if c:
                row = target._xpow[(j * step) % target.m]
                for t in range(target.deg):
                    acc[t] += c * row[t]
        return target.elt(acc)

    def __repr__(self):
        return f"CycElt(m={self.field.m}, {self.coeffs})"


# ---------------------------------------------------------------------------
# F_p[x] helpers for the Hensel seed
# ---------------------------------------------------------------------------


def _poly_mod_p(a, p):
    return poly_trim([c % p for c in a])


def _poly_mul_p(a, b, p):
    return poly_trim([c % p for c in poly_mul(a, b)])


def _poly_divmod_p(a, b, p):
    a = [c % p for c in a]
    b = poly_trim([c % p for c in b])
    if not b:
        raise ZeroDivisionError
    inv_lead = pow(b[-1], -1, p)
    db = len(b) - 1
    q = [0] * max(0, len(a) - db)
    for i in range(len(a) - db - 1, -1, -1):
        c = (a[i + db] * inv_lead) % p
        if c:
            q[i] = c
            for j in range(db + 1):
                a[i + j] = (a[i + j] - c * b[j]) % p
    return poly_trim(q), poly_trim(a[:db])


def _poly_xgcd_p(a, b, p):
    """(g, s, t) with s*a + t*b = g monic over F_p (g = [] for a = b = 0)."""
    r0, r1 = _poly_mod_p(a, p), _poly_mod_p(b, p)
    s0, s1 = [1], []
    t0, t1 = [], [1]
    while r1:
        q, r = _poly_divmod_p(r0, r1, p)
        r0, r1 = r1, r
        s0, s1 = s1, _poly_mod_p(poly_sub(s0, poly_mul(q, s1)), p)
        t0, t1 = t1, _poly_mod_p(poly_sub(t0, poly_mul(q, t1)), p)
    if not r0:
        return [], [], []
    inv = pow(r0[-1], -1, p)
    return (
        [(c * inv) % p for c in r0],
        [(c * inv) % p for c in s0],
        [(c * inv) % p for c in t0],
    )


def _factor_mod_p(coeffs, p):
    """Monic irreducible factors over F_p via sympy, sorted canonically."""
    from sympy import GF, Poly, symbols

    x = symbols("x")
    poly = Poly(list(reversed([c % p for c in coeffs])), x, domain=GF(p))
    _, factors = poly.factor_list()
    out = []
    for f, mult in factors:
        fc = [int(c) % p for c in reversed(f.all_coeffs())]
        out.append((tuple(fc), mult))
    out.sort(key=lambda t: (len(t[0]), t[0]))
    return out


@lru_cache(maxsize=None)
def hensel_blocks(m, p, k):
    """Monic factors of Phi_m over Z/p^k, one per irreducible-block.

    For m = m'·p^a the blocks mod p are g_j^{phi(p^a)} with g_j the distinct
    irreducible factors of Phi_{m'} mod p; they are pairwise coprime mod p,
    lift uniquely, and each lift is irreducible over Z_p.  Sorted by
    (degree, mod-p coefficient tuple), which is stable across precisions.
    """
    pk = p**k
    mp, a = m, 0
    while mp % p == 0:
        mp //= p
        a += 1
    phi_m = [c % pk for c in cyclotomic_poly(m)]
    seed = _factor_mod_p(list(cyclotomic_poly(mp)), p)
    epow = (p - 1) * p ** (a - 1) if a else 1
    blocks = []
    for g, mult in seed:
        assert mult == 1, "Phi_{m'} mod p must be squarefree for p coprime to m'"
        b = [1]
        for _ in range(epow):
            b = _poly_mul_p(b, list(g), p)
        blocks.append(b)
    if len(blocks) == 1:
        return (tuple(phi_m),)
    cof_inv = []
    for i, g in enumerate(blocks):
        cof = [1]
        for j, h in enumerate(blocks):
            if j != i:
                cof = _poly_mul_p(cof, h, p)
        gg, s, _ = _poly_xgcd_p(cof, g, p)
        assert gg == [1], "blocks must be coprime mod p"
        cof_inv.append(s)  # s·cof ≡ 1 (mod g, p)
    cur = [list(b) for b in blocks]
    for e in range(1, k):
        pe = p**e
        mod_next = p ** (e + 1)
        prod = [1]
        for b in cur:
            prod = poly_mul(prod, b)
        diff = poly_sub(phi_m, prod)
        delta = poly_trim([(d // pe) % p for d in diff])
        if delta:
            for i in range(len(cur)):
                db = _poly_mul_p(delta, cof_inv[i], p)
                _, db = _poly_divmod_p(db, blocks[i], p)
                if db:
                    nb = list(cur[i])
                    for j, c in enumerate(db):
                        nb[j] = (nb[j] + pe * c) % mod_next
                    cur[i] = nb
        cur = [[c % mod_next for c in b] for b in cur]
    out = [tuple(c % pk for c in b) for b in cur]
    out.sort(key=lambda t: (len(t), tuple(c % p for c in t)))
    return tuple(out)


def _teichmuller(a, p, k):
    """The (p-1)-th root of unity in Z/p^k congruent to a mod p."""
    pk = p**k
    a %= pk
    cur = a
    while True:
        nxt = pow(cur, p, pk)
        if nxt == cur:
            return cur
        cur = nxt


@lru_cache(maxsize=None)
def _smallest_primitive_root(p):
    for g in range(2, p):
        x, o = g, 1
        while x != 1:
            x = x * g % p
            o += 1
        if o == p - 1:
            return g
    raise ValueError(f"{p} has no primitive root; is it prime?")


def _x_power_mod(e, h, mod):
    """x^e reduced modulo the monic polynomial h, coefficients mod `mod`."""
    deg = len(h) - 1
    if deg == 1:
        return [pow((-h[0]) % mod, e, mod)]
    base = [0, 1]
    acc = [1]
    while e:
        if e & 1:
            acc = [c % mod for c in poly_mul(acc, base)]
            if len(acc) > deg:
                _, acc = poly_divmod_monic(acc, list(h))
                acc = [c % mod for c in acc]
        e >>= 1
        if e:
            base = [c % mod for c in poly_mul(base, base)]
            if len(base) > deg:
                _, base = poly_divmod_monic(base, list(h))
                base = [c % mod for c in base]
    return acc


@lru_cache(maxsize=None)
def aligned_block_index(m, p, k):
    """Index of the Hensel block of Phi_m whose root is Teichmueller-aligned.

    The part of zeta_m lying in mu_{p-1} already has canonical p-adic values
    (Teichmueller lifts); requiring zeta_m^(m/w) = teich(g0)^((p-1)/w) for
    w = gcd(m, p-1) and g0 the smallest primitive root mod p makes the block
    choices for different m mutually compatible, so cyclotomic values of a
    character and of its restrictions land in a single coherent embedding.
    The remaining freedom (unramified away from mu_{p-1}, and the totally
    ramified p-power layer) is Galois over Q_p, where the sorted-first choice
    is harmless.
    """
    blocks = hensel_blocks(m, p, k)
    if len(blocks) == 1:
        return 0
    w = gcd(m, p - 1)
    if w <= 2:
        return 0
    pk = p**k
    g0 = _smallest_primitive_root(p)
    target = pow(_teichmuller(g0, p, k), (p - 1) // w, pk)
    e = m // w
    for i, h in enumerate(blocks):
        img = _x_power_mod(e, h, pk)
        if img and img[0] == target and all(c == 0 for c in img[1:]):
            return i
    raise AssertionError(f"no Teichmueller-aligned block of Phi_{m} at p={p}")


# ---------------------------------------------------------------------------
# Z_p[theta] at finite precision
# ---------------------------------------------------------------------------

_ZP_CACHE = {}


class ZpRing:
    """(Z/p^k)[x]/(h) with h | Phi_m the deterministic Hensel block.

    m <= 2 degenerates to plain Z/p^k (deg 1, zeta = ±1).  Elements are
    coefficient tuples in [0, p^k).
    """

    def __new__(cls, p, k, m=1):
        key = (p, k, m)
        if key in _ZP_CACHE:
            return _ZP_CACHE[key]
        self = super().__new__(cls)
        self.p = p
        self.k = k
        self.m = m
        self.pk = p**k
        if m == 1:
            self.h = (self.pk - 1, 1)  # x - 1
            self.block_index = 0
        elif m == 2:
            self.h = (1, 1)  # x + 1
            self.block_index = 0
        else:
            self.block_index = aligned_block_index(m, p, k)
            self.h = hensel_blocks(m, p, k)[self.block_index]
        self.deg = len(self.h) - 1
        self.ramified = m > 1 and m % p == 0
        _ZP_CACHE[key] = self
        return self

    def elt(self, coeffs):
        if isinstance(coeffs, int):
            coeffs = [coeffs]
        coeffs = [c % self.pk for c in coeffs]
        if len(coeffs) > self.deg:
            coeffs = self._reduce_poly(coeffs)
        coeffs = coeffs + [0] * (self.deg - len(coeffs))
        return ZpElt(self, tuple(coeffs[: self.deg]))

    def zero(self):
        return self.elt([])

    def one(self):
        return self.elt([1])

    def zeta(self, power=1):
        if self.m == 1:
            return self.one()
        if self.m == 2:
            return self.elt([-1]) if power % 2 else self.one()
        return self.elt([0] * (power % self.m) + [1])

    def _reduce_poly(self, coeffs, modulus=None, h=None):
        mod = self.pk if modulus is None else modulus
        hh = list(self.h) if h is None else list(h)
        a = [c % mod for c in coeffs]
        db = len(hh) - 1
        for i in range(len(a) - db - 1, -1, -1):
            c = a[i + db]
            if c:
                for j in range(db + 1):
                    a[i + j] = (a[i + j] - c * hh[j]) % mod
        a = a[:db]
        return a + [0] * (db - len(a))

    def embed(self, celt: CycElt):
        """Image of an exact cyclotomic element; raises NotIntegral when the
        element is not a p-adic integer here.  Exact and ramified-safe: the
        power basis of (Z/p^k)[x]/(h) is an integral basis, so integrality is
        coordinate-wise divisibility after reduction at raised precision."""
        d = celt.field.m
        den = 1
        for c in celt.coeffs:
            den = lcm(den, c.denominator)
        v = 0
        unit_den = den
        while unit_den % self.p == 0:
            unit_den //= self.p
            v += 1
        num = [int(c * den) for c in celt.coeffs]
        modulus = self.p ** (self.k + v)
        if d <= 2:
            # the source field is Q, possibly presented via zeta_2 = -1
            root = 1 if d == 1 else -1
            val = 0
            cur = 1
            for c in num:
                val += c * cur
                cur *= root
            red = [val % modulus] + [0] * (self.deg - 1)
        elif self.m % d:
            raise ValueError("element's field does not embed in this ring")
        elif self.deg == 1:
            # split block: x maps to the root -h[0]; zeta_d to its power
            h_hi = (
                hensel_blocks(self.m, self.p, self.k + v)[self.block_index]
                if v
                else self.h
            )
            root = pow((-h_hi[0]) % modulus, self.m // d, modulus)
            val = 0
            for c in reversed(num):
                val = (val * root + c) % modulus
            red = [val]
        else:
            step = self.m // d
            expanded = [0] * ((len(num) - 1) * step + 1)
            for j, c in enumerate(num):
                expanded[j * step] += c
            h_hi = (
                hensel_blocks(self.m, self.p, self.k + v)[self.block_index]
                if v
                else self.h
            )
            red = self._reduce_poly(expanded, modulus=modulus, h=h_hi)
        pv = self.p**v
        out = []
        for c in red:
            c %= modulus
            if c % pv:
                raise NotIntegral(
                    f"p^{v} in the denominator does not divide all coordinates"
                )
            out.append(c // pv)
        inv_unit = pow(unit_den % self.pk, -1, self.pk)
        return self.elt([(c * inv_unit) % self.pk for c in out])

    def from_rational(self, q):
        q = Fraction(q)
        if q.denominator % self.p == 0:
            raise NotIntegral(f"{q} has p in its denominator")
        val = (q.numerator * pow(q.denominator, -1, self.pk)) % self.pk
        return self.elt([val])

    def __repr__(self):
        return f"ZpRing(p={self.p}, k={self.k}, m={self.m}, deg={self.deg})"


class ZpElt:
    __slots__ = ("ring", "coeffs")

    def __init__(self, ring, coeffs):
        self.ring = ring
        self.coeffs = coeffs

    def _coerce(self, other):
        if isinstance(other, ZpElt):
            if other.ring is not self.ring:
                raise ValueError("mixed p-adic rings")
            return other
        if isinstance(other, (int, Fraction)):
            return self.ring.from_rational(other)
        raise TypeError(f"cannot coerce {other!r}")

    def __add__(self, other):
        other = self._coerce(other)
        pk = self.ring.pk
        return ZpElt(
            self.ring, tuple((a + b) % pk for a, b in zip(self.coeffs, other.coeffs))
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        pk = self.ring.pk
        return ZpElt(
            self.ring, tuple((a - b) % pk for a, b in zip(self.coeffs, other.coeffs))
        )

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        pk = self.ring.pk
        return ZpElt(self.ring, tuple((-a) % pk for a in self.coeffs))

    def __mul__(self, other):
        other = self._coerce(other)
        prod = poly_mul(list(self.coeffs), list(other.coeffs))
        return self.ring.elt(prod)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash((id(self.ring), self.coeffs))

    def is_zero(self):
        return not any(self.coeffs)

    def is_unit(self):
        p = self.ring.p
        if self.ring.deg == 1:
            return self.coeffs[0] % p != 0
        g, _, _ = _poly_xgcd_p(list(self.coeffs), list(self.ring.h), p)
        return g == [1]

    def inverse(self):
        """Newton lift of the residue inverse; NotInvertible for non-units."""
        ring = self.ring
        if ring.deg == 1:
            if self.coeffs[0] % ring.p == 0:
                raise NotInvertible("not a unit")
            return ring.elt([pow(self.coeffs[0], -1, ring.pk)])
        g, s, _ = _poly_xgcd_p(list(self.coeffs), list(ring.h), ring.p)
        if g != [1]:
            raise NotInvertible("not a unit")
        inv = ring.elt([c % ring.p for c in s])
        two = ring.elt([2])
        prec = 1
        while prec < ring.k:
            prec *= 2
            inv = inv * (two - self * inv)
        return inv

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()

    def mul_matrix(self):
        """Rows: coordinates of x^i * self on the power basis."""
        ring = self.ring
        rows = []
        cur = list(self.coeffs)
        for _ in range(ring.deg):
            rows.append(list(cur) + [0] * (ring.deg - len(cur)))
            cur = ring._reduce_poly([0] + list(cur))
        return rows

    def coord_val(self):
        """Minimum p-valuation of the power-basis coordinates (the true
        valuation for unramified rings; a coordinate-wise proxy otherwise)."""
        p, k = self.ring.p, self.ring.k
        best = k
        for c in self.coeffs:
            if c:
                v = 0
                while c % p == 0:
                    c //= p
                    v += 1
                best = min(best, v)
                if best == 0:
                    return 0
        return best

    def __repr__(self):
        return f"ZpElt({self.coeffs} in {self.ring!r})"
