"""Finite abelian groups, characters, group rings, and isotypic parts.

A group is handed over as raw hashable elements plus a multiplication
callable; the cyclic decomposition is recovered from the relation lattice of
the Cayley graph, so unit groups of Z/n and of F_q[t]/(N) share one code
path.  Characters are exponent tuples against the computed decomposition and
evaluate exactly in Q(zeta) or in a finite-precision p-adic ring.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import gcd, lcm

from eislab.errors import NotIntegral, NotInvertible, PrecisionExhausted, SpanMismatch
from eislab.intlinalg import IntMatrix, QuotientModPK, snf
from eislab.rings import CycField, ZpRing

# ---------------------------------------------------------------------------
# groups
# ---------------------------------------------------------------------------


def _hnf_insert(basis, row):
    """Insert an integer row into an echelonized lattice basis (in place)."""
    row = list(row)
    for b in basis:
        lead = next(i for i, c in enumerate(b) if c)
        if row[lead]:
            while row[lead]:
                q = row[lead] // b[lead]
                if q:
                    for i in range(lead, len(row)):
                        row[i] -= q * b[i]
                if row[lead]:
                    b[:], row[:] = row[:], b[:]
        if not any(row):
            return
    if any(row):
        lead = next(i for i, c in enumerate(row) if c)
        if row[lead] < 0:
            row = [-c for c in row]
        basis.append(row)
        basis.sort(key=lambda r: next(i for i, c in enumerate(r) if c))


class FiniteAbelianGroup:
    """Explicit finite abelian group with computed cyclic decomposition.

    `coords(g)` are coordinates in prod Z/d_i with d_1 | d_2 | ... the
    invariant factors; multiplication of elements is coordinate addition.
    """

    def __init__(self, elements, mul, one):
        self.elements = tuple(elements)
        self._mul = mul
        self.one = one
        self.order = len(self.elements)
        eltset = set(self.elements)
        assert len(eltset) == self.order, "duplicate elements"
        # greedy generating set
        gens = []
        reached = {one: ()}
        frontier = [one]
        for x in self.elements:
            if x in reached:
                continue
            gens.append(x)
            j = len(gens) - 1
            frontier = list(reached)
            while frontier:
                nxt = []
                for g in frontier:
                    for jj, y in enumerate(gens):
                        h = mul(g, y)
                        if h not in reached:
                            vec = list(reached[g]) + [0] * (jj + 1 - len(reached[g]))
                            vec = vec + [0] * (len(gens) - len(vec))
                            vec[jj] += 1
                            reached[h] = tuple(vec)
                            nxt.append(h)
                frontier = nxt
        s = len(gens)
        assert len(reached) == self.order, "element list is not closed"
        vec = {g: tuple(v) + (0,) * (s - len(v)) for g, v in reached.items()}
        self.generators = tuple(gens)
        if s == 0:
            self._snf_r = []
            self._kept = []
            self.cyclic_orders = ()
            self._coords = {one: ()}
            self.factor_generators = ()
            self.exponent = 1
            return
        # relation lattice of the Cayley graph
        basis = []
        for g in self.elements:
            vg = vec[g]
            for j, y in enumerate(gens):
                vh = vec[mul(g, y)]
                rel = [vg[i] - vh[i] + (1 if i == j else 0) for i in range(s)]
                if any(rel):
                    _hnf_insert(basis, rel)
        assert len(basis) == s, "relation lattice must have full rank"
        res = snf(IntMatrix.from_rows(basis))
        d_full = res.diagonal()
        r_mat = res.R.dense_rows()
        self._kept = [i for i in range(s) if d_full[i] != 1]
        self.cyclic_orders = tuple(d_full[i] for i in self._kept)
        self.exponent = self.cyclic_orders[-1] if self.cyclic_orders else 1
        coords = {}
        for g in self.elements:
            v = vec[g]
            full = [sum(v[t] * r_mat[t][i] for t in range(s)) for i in range(s)]
            coords[g] = tuple(full[i] % d_full[i] for i in self._kept)
        self._coords = coords
        r_inv = _int_matrix_inverse(r_mat)
        gen_orders = [self._raw_order(x) for x in gens]
        fgens = []
        for i in self._kept:
            g = one
            for j in range(s):
                e = r_inv[i][j] % gen_orders[j]
                g = mul(g, self._raw_power(gens[j], e))
            fgens.append(g)
        self.factor_generators = tuple(fgens)
        for idx, g in enumerate(fgens):
            expect = tuple(
                1 if t == idx else 0 for t in range(len(self._kept))
            )
            assert self.coords(g) == expect, "factor generator mismatch"
        prod = 1
        for d in self.cyclic_orders:
            prod *= d
        assert prod == self.order, "decomposition does not match group order"

    def _raw_order(self, g):
        o, cur = 1, g
        while cur != self.one:
            cur = self._mul(cur, g)
            o += 1
        return o

    def _raw_power(self, g, e):
        acc, cur = self.one, g
        while e:
            if e & 1:
                acc = self._mul(acc, cur)
            cur = self._mul(cur, cur)
            e >>= 1
        return acc

    # -- public API ---------------------------------------------------------

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g):
        return g in self._coords

    def __len__(self):
        return self.order

    def mul(self, a, b):
        return self._mul(a, b)

    def coords(self, g):
        return self._coords[g]

    def element_order(self, g):
        o = 1
        for d, c in zip(self.cyclic_orders, self._coords[g]):
            o = lcm(o, d // gcd(d, c))
        return o

    def power(self, g, e):
        if e < 0:
            return self._raw_power(self.inverse(g), -e)
        return self._raw_power(g, e)

    def inverse(self, g):
        return self._raw_power(g, self.element_order(g) - 1)

    def element_with_coords(self, coords):
        g = self.one
        for fg, c in zip(self.factor_generators, coords):
            g = self._mul(g, self._raw_power(fg, c))
        return g

    # -- common instances ----------------------------------------------------

    @staticmethod
    def unit_group(n):
        """(Z/n)^x, elements as canonical residues."""
        if n <= 1:
            return FiniteAbelianGroup([0], lambda a, b: 0, 0)
        elts = [a for a in range(n) if gcd(a, n) == 1]
        return FiniteAbelianGroup(elts, lambda a, b: (a * b) % n, 1)

    @staticmethod
    def unit_group_mod_pm(n):
        """(Z/n)^x / ±1, elements as the smaller of the two residue lifts."""
        if n <= 2:
            return FiniteAbelianGroup([n - 1 if n == 2 else 0], lambda a, b: n - 1 if n == 2 else 0, n - 1 if n == 2 else 0)

        def canon(a):
            a %= n
            return min(a, n - a)

        elts = sorted({canon(a) for a in range(n) if gcd(a, n) == 1})
        return FiniteAbelianGroup(elts, lambda a, b: canon(a * b), 1)


def _int_matrix_inverse(rows):
    """Exact inverse of a unimodular integer matrix."""
    s = len(rows)
    aug = [[Fraction(rows[i][j]) for j in range(s)] + [Fraction(1 if t == i else 0) for t in range(s)] for i in range(s)]
    for col in range(s):
        piv = next(r for r in range(col, s) if aug[r][col])
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [c / pv for c in aug[col]]
        for r in range(s):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    inv = []
    for i in range(s):
        row = []
        for j in range(s):
            v = aug[i][s + j]
            assert v.denominator == 1, "matrix is not unimodular"
            row.append(int(v))
        inv.append(row)
    return inv


# ---------------------------------------------------------------------------
# characters
# ---------------------------------------------------------------------------


class Character:
    """Character of a FiniteAbelianGroup, as exponents on its cyclic factors.

    Values are roots of unity; `value_exponent(g)` returns r with
    chi(g) = zeta_e^r for e = group exponent.
    """

    def __init__(self, group, exps):
        self.group = group
        self.exps = tuple(
            e % d for e, d in zip(exps, group.cyclic_orders)
        )
        e = group.exponent
        g0 = e
        for t, d in zip(self.exps, group.cyclic_orders):
            g0 = gcd(g0, t * (e // d))
        self.order = e // g0 if g0 else 1

    @staticmethod
    def trivial(group):
        return Character(group, (0,) * len(group.cyclic_orders))

    @staticmethod
    def all_characters(group):
        for exps in itertools.product(*(range(d) for d in group.cyclic_orders)):
            yield Character(group, exps)

    def value_exponent(self, g):
        e = self.group.exponent
        c = self.group.coords(g)
        return sum(t * ci * (e // d) for t, ci, d in zip(self.exps, c, self.group.cyclic_orders)) % e

    def eval_cyc(self, g, field=None):
        field = field or CycField(self.order)
        e = self.group.exponent
        r = self.value_exponent(g)
        num = r * field.m
        if num % e:
            raise ValueError("character order does not divide the field level")
        return field.zeta(num // e)

    def eval_zp(self, g, ring):
        e = self.group.exponent
        r = self.value_exponent(g)
        num = r * ring.m
        if num % e:
            raise ValueError("character order does not divide the ring level")
        return ring.zeta(num // e)

    @property
    def is_trivial(self):
        return all(t == 0 for t in self.exps)

    def is_trivial_on(self, elements):
        return all(self.value_exponent(g) == 0 for g in elements)

    def __mul__(self, other):
        if other.group is not self.group:
            raise ValueError("characters of different groups")
        return Character(self.group, tuple(a + b for a, b in zip(self.exps, other.exps)))

    def inverse(self):
        return Character(self.group, tuple(-a for a in self.exps))

    def __pow__(self, e):
        return Character(self.group, tuple(a * e for a in self.exps))

    def __eq__(self, other):
        return isinstance(other, Character) and self.group is other.group and self.exps == other.exps

    def __hash__(self):
        return hash((id(self.group), self.exps))

    def __repr__(self):
        return f"Character(exps={self.exps}, order={self.order})"


_UNIT_GROUP_CACHE = {}


def unit_group(n):
    if n not in _UNIT_GROUP_CACHE:
        _UNIT_GROUP_CACHE[n] = FiniteAbelianGroup.unit_group(n)
    return _UNIT_GROUP_CACHE[n]


class DirichletCharacter:
    """Character of (Z/n)^x evaluated at integers; 0 off the units is `None`."""

    def __init__(self, modulus, char):
        self.modulus = modulus
        self.char = char
        self.group = char.group
        self._conductor = None

    @staticmethod
    def all_mod(n):
        g = unit_group(n)
        return [DirichletCharacter(n, chi) for chi in Character.all_characters(g)]

    @staticmethod
    def trivial_mod(n):
        return DirichletCharacter(n, Character.trivial(unit_group(n)))

    @property
    def order(self):
        return self.char.order

    def value_exponent(self, a):
        """r with chi(a) = zeta_e^r (e = group exponent), or None off units."""
        a %= self.modulus
        if self.modulus > 1 and gcd(a, self.modulus) != 1:
            return None
        if self.modulus == 1:
            a = 0
        return self.char.value_exponent(a)

    def __call__(self, a, field=None):
        r = self.value_exponent(a)
        if r is None:
            return None
        field = field or CycField(self.order)
        e = self.group.exponent
        num = r * field.m
        if num % e:
            raise ValueError("character order does not divide the field level")
        return field.zeta(num // e)

    @property
    def is_even(self):
        r = self.value_exponent(self.modulus - 1)
        return r == 0 or r is None

    @property
    def is_odd(self):
        return not self.is_even

    @property
    def conductor(self):
        if self._conductor is None:
            n = self.modulus
            units = [a for a in range(1, n + 1) if gcd(a, n) == 1] if n > 1 else [1]
            for f in sorted(d for d in range(1, n + 1) if n % d == 0):
                if all(
                    self.char.value_exponent(a % n) == 0
                    for a in units
                    if a % f == 1 % f
                ):
                    self._conductor = f
                    break
        return self._conductor

    @property
    def is_primitive(self):
        return self.conductor == self.modulus

    def _transfer(self, target_modulus):
        """The character mod `target_modulus` with the same values; requires
        conductor | target_modulus | lcm-compatible lifts."""
        n, m = self.modulus, target_modulus
        gt = unit_group(m)
        e_n, e_m = self.group.exponent, gt.exponent
        exps = []
        for y, d in zip(gt.factor_generators, gt.cyclic_orders):
            # find a unit mod lcm(n, m) reducing to y mod m, evaluate mod n
            big = lcm(n, m)
            a = next(
                a
                for a in range(1, big + 1)
                if gcd(a, big) == 1 and a % m == y % m
            )
            r = self.value_exponent(a % n)
            assert r is not None
            num = r * e_m
            if num % e_n:
                raise ValueError("character does not transfer to this modulus")
            rf = num // e_n
            step = e_m // d
            if rf % step:
                raise ValueError("character does not transfer to this modulus")
            exps.append((rf // step) % d)
        return DirichletCharacter(m, Character(gt, tuple(exps)))

    def primitive_part(self):
        return self._transfer(self.conductor)

    def lift_to(self, target_modulus):
        if target_modulus % self.conductor:
            raise ValueError("conductor does not divide the target modulus")
        return self._transfer(target_modulus)

    def __mul__(self, other):
        if other.modulus == self.modulus:
            return DirichletCharacter(self.modulus, self.char * other.char)
        m = lcm(self.modulus, other.modulus)
        return self.lift_to(m) * other.lift_to(m)

    def inverse(self):
        return DirichletCharacter(self.modulus, self.char.inverse())

    def __pow__(self, e):
        return DirichletCharacter(self.modulus, self.char**e)

    def __eq__(self, other):
        return (
            isinstance(other, DirichletCharacter)
            and self.modulus == other.modulus
            and self.char == other.char
        )

    def __hash__(self):
        return hash((self.modulus, self.char))

    def __repr__(self):
        return f"DirichletCharacter(mod={self.modulus}, exps={self.char.exps}, order={self.order})"


def teichmuller_character(p):
    """The character omega mod p whose p-adic embedding satisfies
    omega(a) = a mod p (the unique such character of full order p-1)."""
    g = unit_group(p)
    if not g.factor_generators:
        return DirichletCharacter(p, Character.trivial(g))
    ring = ZpRing(p, 2, p - 1)
    # the ring's zeta reduces to a primitive (p-1)-root in F_p; omega sends it
    # to the abstract zeta_{p-1}, which forces omega(a) = a mod p throughout
    z0 = ring.zeta().coeffs[0] % p
    (gen,) = g.factor_generators
    d = p - 1
    t = next(t for t in range(d) if pow(z0, t, p) == gen % p)
    return DirichletCharacter(p, Character(g, (t,)))


def teichmuller_int(a, p, k):
    """The Teichmueller lift of a mod p^k: the (p-1)-root congruent to a."""
    pk = p**k
    a %= pk
    if a % p == 0:
        return 0
    cur = a
    while True:
        nxt = pow(cur, p, pk)
        if nxt == cur:
            return cur
        cur = nxt


# ---------------------------------------------------------------------------
# group rings
# ---------------------------------------------------------------------------


def _is_zero_coef(c):
    if hasattr(c, "is_zero"):
        return c.is_zero()
    return not c


class GroupRingElement:
    """Element of R[G] as a sparse dict g -> coefficient.

    Coefficients may be ints, Fractions, CycElts or ZpElts — anything with
    ring arithmetic; mixed use within one element is the caller's problem.
    """

    def __init__(self, group, coeffs=None):
        self.group = group
        self.coeffs = {g: c for g, c in (coeffs or {}).items() if not _is_zero_coef(c)}

    def __add__(self, other):
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out[g] + c if g in out else c
        return GroupRingElement(self.group, out)

    def __sub__(self, other):
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out[g] - c if g in out else -c
        return GroupRingElement(self.group, out)

    def __neg__(self):
        return GroupRingElement(self.group, {g: -c for g, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, GroupRingElement):
            out = {}
            mul = self.group.mul
            for g, a in self.coeffs.items():
                for h, b in other.coeffs.items():
                    gh = mul(g, h)
                    ab = a * b
                    out[gh] = out[gh] + ab if gh in out else ab
            return GroupRingElement(self.group, out)
        return GroupRingElement(self.group, {g: c * other for g, c in self.coeffs.items()})

    __rmul__ = __mul__

    def star(self):
        """The involution [g] -> [g^{-1}]."""
        inv = self.group.inverse
        return GroupRingElement(self.group, {inv(g): c for g, c in self.coeffs.items()})

    def apply_character(self, chi, field=None):
        """Ring homomorphism R[G] -> R(zeta) induced by chi (exact values)."""
        field = field or CycField(chi.order)
        acc = field.zero()
        for g, c in self.coeffs.items():
            acc = acc + chi.eval_cyc(g, field) * c
        return acc

    def apply_character_zp(self, chi, ring):
        acc = ring.zero()
        for g, c in self.coeffs.items():
            if isinstance(c, (int, Fraction)):
                c = ring.from_rational(c)
            acc = acc + chi.eval_zp(g, ring) * c
        return acc

    def map_group(self, fn, target_group):
        """Push forward along a group homomorphism g -> fn(g)."""
        out = {}
        for g, c in self.coeffs.items():
            h = fn(g)
            out[h] = out[h] + c if h in out else c
        return GroupRingElement(target_group, out)

    def __eq__(self, other):
        return (
            isinstance(other, GroupRingElement)
            and self.group is other.group
            and self.coeffs == other.coeffs
        )

    def __repr__(self):
        items = sorted(self.coeffs.items(), key=lambda t: str(t[0]))
        return "GroupRingElement({" + ", ".join(f"{g}: {c}" for g, c in items) + "})"


# ---------------------------------------------------------------------------
# isotypic parts of finite modules with group action
# ---------------------------------------------------------------------------


def _field_rank(rows, field):
    """Rank of a matrix with entries coercible to `field` (exact)."""
    work = [[c if hasattr(c, "field") else field.from_rational(c) for c in row] for row in rows]
    ncols = len(work[0]) if work else 0
    rank = 0
    col = 0
    while col < ncols and rank < len(work):
        piv = None
        for r in range(rank, len(work)):
            if not work[r][col].is_zero():
                piv = r
                break
        if piv is None:
            col += 1
            continue
        work[rank], work[piv] = work[piv], work[rank]
        pr = work[rank]
        pinv = pr[col].inverse()
        for r in range(rank + 1, len(work)):
            if not work[r][col].is_zero():
                f = work[r][col] * pinv
                work[r] = [a - f * b for a, b in zip(work[r], pr)]
        rank += 1
        col += 1
    return rank


def _rank_mod_prime(rows, ell):
    work = [[c % ell for c in row] for row in rows]
    ncols = len(work[0]) if work else 0
    rank = 0
    col = 0
    while col < ncols and rank < len(work):
        piv = None
        for r in range(rank, len(work)):
            if work[r][col]:
                piv = r
                break
        if piv is None:
            col += 1
            continue
        work[rank], work[piv] = work[piv], work[rank]
        pr = work[rank]
        pinv = pow(pr[col], -1, ell)
        for r in range(rank + 1, len(work)):
            if work[r][col]:
                f = (work[r][col] * pinv) % ell
                work[r] = [(a - f * b) % ell for a, b in zip(work[r], pr)]
        rank += 1
        col += 1
    return rank


class ThetaPart:
    """The chi-isotypic piece of a finite-presentation module mod p^k."""

    def __init__(self, quotient, ring, chi, zp_exponents, deep_count, free_rank, rank_certified, op_invariants):
        self.quotient = quotient
        self.ring = ring
        self.chi = chi
        self.zp_exponents = tuple(zp_exponents)
        self.deep_count = deep_count
        self.free_rank = free_rank
        self.rank_certified = rank_certified
        self.op_invariants = op_invariants  # over Z_p[chi]; None when ramified
        self.dh = ring.deg

    @property
    def torsion_order_exponent(self):
        """v_p of the order of the certified-torsion part."""
        return sum(self.zp_exponents)

    def operator_matrix(self, mat):
        """Push an ambient operator (acting on row vectors, commuting with the
        group) down to the isotypic coordinates."""
        dh = self.dh
        n = len(mat)
        pk = self.ring.pk
        big_width = n * dh
        rows = []
        for pos in range(len(self.quotient.kept)):
            lifted = self.quotient.lift(pos)
            image = [0] * big_width
            for pos, val in enumerate(lifted):
                if val % pk:
                    i, t = divmod(pos, dh)
                    mi = mat[i]
                    for j in range(n):
                        a = mi[j]
                        if a:
                            image[j * dh + t] = (image[j * dh + t] + val * a) % pk
            rows.append(self.quotient.project(image))
        return rows

    def summary(self):
        return {
            "character_order": self.chi.order,
            "ring_degree": self.dh,
            "zp_exponents": list(self.zp_exponents),
            "deep_count": self.deep_count,
            "free_rank": self.free_rank,
            "rank_certified": self.rank_certified,
            "invariants": None if self.op_invariants is None else list(self.op_invariants),
            "torsion_order_exponent": self.torsion_order_exponent,
        }


def theta_idempotent(group, chi, ring):
    """e_chi = |G|^{-1} sum chi(g^{-1})[g] over `ring`.

    Requires |G| invertible in the ring; for a p-adic ring that means
    p does not divide |G|.
    """
    try:
        inv = ring.from_rational(Fraction(1, group.order))
    except NotIntegral as exc:
        raise NotInvertible(
            f"group order {group.order} is not invertible in the ring"
        ) from exc
    coeffs = {}
    for g in group:
        ginv = group.inverse(g)
        val = (
            chi.eval_cyc(ginv, ring)
            if isinstance(ring, CycField)
            else chi.eval_zp(ginv, ring)
        )
        coeffs[g] = val * inv
    return GroupRingElement(group, coeffs)


def _span_tensor_rows(span_rows, n, dh, pk):
    rows = []
    for r in span_rows:
        for t in range(dh):
            row = [0] * (n * dh)
            for j, v in enumerate(r):
                if v % pk:
                    row[j * dh + t] = v % pk
            rows.append(row)
    return rows


def theta_part(span_rows, width, p, k, group, action, chi, *, exact_rank_limit=80):
    """chi-part M ⊗_{Z_p[G]} Z_p[chi] of M = (Z^width / span) ⊗ Z_p, mod p^k.

    Base change along the ring map Z_p[G] -> Z_p[chi], g -> chi(g): the
    quotient of M ⊗ Z_p[chi] by the submodule generated by the images of
    (g - chi(g)) over group generators g.  `action` maps group elements to
    width x width integer matrices acting on row vectors (x -> x·A) and
    preserving the span.  No coprimality of |G| and p is required; when
    p ∤ |G| this agrees with cutting by the idempotent of chi.
    """
    if chi.group is not group:
        raise ValueError("character is not defined on the acting group")
    ring = ZpRing(p, k, chi.order)
    dh = ring.deg
    pk = ring.pk
    n = width
    big = n * dh
    rows = _span_tensor_rows(span_rows, n, dh, pk)
    for g in group.factor_generators:
        a_mat = action[g]
        theta_mul = chi.eval_zp(g, ring).mul_matrix()
        for i in range(n):
            ai = a_mat[i]
            for t in range(dh):
                row = [0] * big
                for j in range(n):
                    a = ai[j] % pk
                    if a:
                        row[j * dh + t] = a
                mt = theta_mul[t]
                for s in range(dh):
                    row[i * dh + s] = (row[i * dh + s] - mt[s]) % pk
                rows.append(row)
    quotient = QuotientModPK(rows, big, p, k)
    torsion = quotient.torsion_exponents()
    deep = quotient.deep_count()
    if deep == 0:
        free_rank, certified = 0, True
    else:
        F = CycField(chi.order)
        gens = list(group.factor_generators)
        if n <= exact_rank_limit:
            stacked = [[Fraction(v) for v in r] for r in span_rows]
            for g in gens:
                a_mat = action[g]
                val = chi.eval_cyc(g, F)
                for i in range(n):
                    row = [F.from_rational(a_mat[i][j]) for j in range(n)]
                    row[i] = row[i] - val
                    stacked.append(row)
            rank = _field_rank(stacked, F)
            certified = True
        else:
            # modular rank at primes splitting the character field
            from sympy import isprime

            m = max(chi.order, 1)
            prime_divs = [q for q in range(2, m + 1) if m % q == 0 and isprime(q)]
            ells = []
            cand = (1 << 29) // m * m + 1
            while len(ells) < 2:
                cand += m
                if isprime(cand):
                    ells.append(cand)
            ranks = set()
            e_grp = group.exponent
            for ell in ells:
                # an element of exact order m in F_ell
                w = 1
                for x in range(2, 1000):
                    w = pow(x, (ell - 1) // m, ell)
                    if all(pow(w, m // q, ell) != 1 for q in prime_divs):
                        break
                else:
                    raise PrecisionExhausted("no root of unity found mod ell")
                stacked = [[v % ell for v in r] for r in span_rows]
                for g in gens:
                    a_mat = action[g]
                    val = pow(w, chi.value_exponent(g) * m // e_grp, ell)
                    for i in range(n):
                        row = [a_mat[i][j] % ell for j in range(n)]
                        row[i] = (row[i] - val) % ell
                        stacked.append(row)
                ranks.add(_rank_mod_prime(stacked, ell))
            if len(ranks) != 1:
                raise PrecisionExhausted("modular ranks disagree")
            rank = ranks.pop()
            certified = False
        free_rank = n - rank
        if deep != dh * free_rank:
            raise PrecisionExhausted(
                f"deep coordinate count {deep} does not match free rank {free_rank} x degree {dh}"
            )
    if ring.ramified:
        op_inv = None
    else:
        counts = {}
        for e in torsion:
            counts[e] = counts.get(e, 0) + 1
        op_inv = []
        for e in sorted(counts):
            if counts[e] % dh:
                raise SpanMismatch(
                    "torsion exponents do not group into character-ring factors"
                )
            op_inv.extend([e] * (counts[e] // dh))
        op_inv = tuple(sorted(op_inv))
    return ThetaPart(quotient, ring, chi, torsion, deep, free_rank, certified, op_inv)
