"""Weight-2 modular symbols for Gamma_1(M), presented by Manin generators.

A generator is a coprime pair [u:v] over Z/M, identified with its negative
(u,v) ~ (-u,-v), subject to the two- and three-term relations

    [u:v] + [v:-u] = 0,        [u:v] + [v:-u-v] + [-u-v:u] = 0.

The pair (u,v) is the bottom row of a matrix gamma = (a b; c d) in SL2(Z),
and the symbol is the geodesic path {d/(bM) -> c/(aM)} between cusps.  With
this dictionary the diamond action reads <a>[u:v] = [a^{-1}u : a^{-1}v], and
a vanishing index (u = 0 or v = 0) flags an endpoint lying over the 0-cusp
of X_0(M).  See Stein, *Modular Forms: A Computational Approach*, ch. 8 for
the untwisted presentation; here paths are composed with z -> 1/(Mz), which
normalizes Gamma_1(M).

Flavors: the full space, the subspace whose boundary avoids the cusps over
0, the cuspidal kernel, and plus quotients by conjugation [u:v] -> [-u:v]
(with 2 inverted).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd

from sympy import isprime

from .errors import SpanMismatch
from .intlinalg import (
    IntMatrix,
    SparseExactEliminator,
    charpoly_exact,
    exact_left_kernel,
)

INFINITY = (1, 0)
DEFAULT_STAR_SIGN = 1
SPACE_SCHEMA = "eislab/symbol-space/1"

_PLUS_FLAVORS = {"full": "full_plus", "intermediate": "intermediate_plus",
                 "cuspidal": "cuspidal_plus"}


# ---------------------------------------------------------------------------
# levels, cusps, pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Level:
    """Integer level M >= 1, optionally factored as M = N * p**r."""

    M: int
    N: int = None
    p: int = None
    r: int = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("level must be >= 1")
        parts = (self.N, self.p, self.r)
        if any(x is not None for x in parts):
            if any(x is None for x in parts):
                raise ValueError("factorization needs all of N, p, r")
            if self.p == 2 or not isprime(self.p):
                raise ValueError("p must be an odd prime")
            if self.r < 1 or self.N < 1 or self.N % self.p == 0:
                raise ValueError("need r >= 1 and p not dividing N")
            if self.N * self.p**self.r != self.M:
                raise ValueError("factorization does not multiply out to M")

    @classmethod
    def of(cls, x):
        if isinstance(x, Level):
            return x
        return cls(int(x))

    @property
    def factored(self):
        return self.N is not None

    def __int__(self):
        return self.M


def reduce_cusp(num, den):
    """Lowest-terms representative (p, q) with q >= 0; (1, 0) is infinity."""
    if den == 0:
        return INFINITY
    if den < 0:
        num, den = -num, -den
    g = gcd(abs(num), den)
    return (num // g, den // g)


def fricke_cusp(M, x):
    """The involution z -> 1/(Mz) on P^1(Q)."""
    p, q = x
    return reduce_cusp(q, M * p)


def cusps_equivalent(M, x, y):
    """Gamma_1(M)-equivalence of reduced cusps: q' = s*q (mod M) and
    p' = s*p (mod gcd(q, M)) for a common sign s."""
    p, q = x
    p2, q2 = y
    g = gcd(q, M)
    for s in (1, -1):
        if (q2 - s * q) % M == 0 and (p2 - s * p) % g == 0:
            return True
    return False


@dataclass(frozen=True)
class CuspClass:
    rep: tuple
    members: tuple
    over_zero: bool


def pair_normalize(M, u, v):
    u %= M
    v %= M
    return min((u, v), ((M - u) % M, (M - v) % M))


def pair_is_symbol(M, u, v):
    return gcd(gcd(u % M, v % M), M) == 1


@lru_cache(maxsize=None)
def symbol_generators(M):
    """All normalized coprime pairs mod M, in scan order."""
    gens = []
    for u in range(M):
        for v in range(M):
            if pair_is_symbol(M, u, v) and pair_normalize(M, u, v) == (u, v):
                gens.append((u, v))
    return tuple(gens)


@lru_cache(maxsize=None)
def _generator_index(M):
    return {g: i for i, g in enumerate(symbol_generators(M))}


def gamma_lift(M, u, v):
    """Deterministic lift of [u:v] to (a, b, c, d) in SL2(Z) with
    (c, d) = (u, v) mod M; the adjustable entry is reduced to the smallest
    nonnegative residue."""
    u %= M
    v %= M
    if not pair_is_symbol(M, u, v):
        raise ValueError("not a symbol pair: gcd(u, v, M) != 1")
    for c in ([u] if u else [0, M]):
        d = None
        for t in range(4 * M + 4):
            cand = v + t * M
            if (cand or c) and gcd(c, cand) == 1:
                d = cand
                break
        if d is None:
            continue
        # a*d - b*c = 1 from s*c + t*d = gcd = 1
        g, s, t = _xgcd(c, d)
        assert g == 1
        a, b = t, -s
        if d != 0:
            j = b // d
            a, b = a - j * c, b - j * d
        elif c != 0:
            j = a // c
            a = a - j * c
        assert a * d - b * c == 1
        return (a, b, c, d)
    raise AssertionError("no coprime lift found")


def _xgcd(a, b):
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def cusp_list(level):
    """Cusp classes of X_1(M): representatives, their seen orbit members,
    and whether the class sits over the 0-cusp of X_0(M)."""
    M = int(Level.of(level))
    points = set()
    for u, v in symbol_generators(M):
        a, b, c, d = gamma_lift(M, u, v)
        points.add(reduce_cusp(c, a * M))
        points.add(reduce_cusp(d, b * M))
    classes = []
    for x in sorted(points, key=lambda t: (t[1], t[0])):
        for cls in classes:
            if cusps_equivalent(M, cls[0], x):
                cls.append(x)
                break
        else:
            classes.append([x])
    return [
        CuspClass(rep=cls[0], members=tuple(cls),
                  over_zero=gcd(cls[0][1], M) == 1)
        for cls in classes
    ]


# ---------------------------------------------------------------------------
# relation rows
# ---------------------------------------------------------------------------


def _tau(pair):
    u, v = pair
    return (v, -u - v)


def two_term_rows(M):
    index = _generator_index(M)
    rows = set()
    for i, (u, v) in enumerate(symbol_generators(M)):
        j = index[pair_normalize(M, v, -u)]
        row = {i: 1}
        row[j] = row.get(j, 0) + 1
        rows.add(tuple(sorted(row.items())))
    return [dict(r) for r in sorted(rows)]


def three_term_rows(M):
    index = _generator_index(M)
    rows = set()
    for u, v in symbol_generators(M):
        row = {}
        pair = (u, v)
        for _ in range(3):
            j = index[pair_normalize(M, *pair)]
            row[j] = row.get(j, 0) + 1
            pair = _tau(pair)
        rows.add(tuple(sorted(row.items())))
    return [dict(r) for r in sorted(rows)]


def star_rows(M, sign):
    """Rows x - iota(x) presenting the quotient by conjugation
    [u:v] -> sign * [-u:v]."""
    index = _generator_index(M)
    rows = set()
    for i, (u, v) in enumerate(symbol_generators(M)):
        j = index[pair_normalize(M, -u, v)]
        row = {i: 1}
        row[j] = row.get(j, 0) - sign
        row = {k: c for k, c in row.items() if c}
        if row:
            rows.add(tuple(sorted(row.items())))
    return [dict(r) for r in sorted(rows)]


# ---------------------------------------------------------------------------
# exact span bookkeeping over Q
# ---------------------------------------------------------------------------


class SpanSolver:
    """Row span over Q with coordinate recovery: express(v) returns x with
    sum x_i * row_i = v, or None if v is outside the span."""

    def __init__(self, ncols):
        self.ncols = ncols
        self.nrows = 0
        self.pivots = {}  # col -> (row dict, aug dict over inserted indices)

    def _reduce(self, main, aug):
        main = {c: Fraction(v) for c, v in main.items() if v}
        aug = {c: Fraction(v) for c, v in aug.items() if v}
        while True:
            cols = [c for c in main if c in self.pivots]
            if not cols:
                break
            c = min(cols)
            coeff = main[c]
            prow, paug = self.pivots[c]
            for cc, vv in prow.items():
                nv = main.get(cc, 0) - coeff * vv
                if nv:
                    main[cc] = nv
                else:
                    main.pop(cc, None)
            for cc, vv in paug.items():
                nv = aug.get(cc, 0) - coeff * vv
                if nv:
                    aug[cc] = nv
                else:
                    aug.pop(cc, None)
        return main, aug

    def add_row(self, row):
        """Insert a vector (sparse dict or dense sequence); returns True if
        it enlarged the span."""
        if not isinstance(row, dict):
            row = {i: v for i, v in enumerate(row) if v}
        idx = self.nrows
        self.nrows += 1
        main, aug = self._reduce(row, {idx: 1})
        if not main:
            return False
        col = min(main)
        coeff = main[col]
        main = {c: v / coeff for c, v in main.items()}
        aug = {c: v / coeff for c, v in aug.items()}
        self.pivots[col] = (main, aug)
        return True

    @property
    def rank(self):
        return len(self.pivots)

    def contains(self, row):
        if not isinstance(row, dict):
            row = {i: v for i, v in enumerate(row) if v}
        main, _ = self._reduce(row, {})
        return not main

    def express(self, row):
        if not isinstance(row, dict):
            row = {i: v for i, v in enumerate(row) if v}
        main, aug = self._reduce(row, {})
        if main:
            return None
        return [-aug.get(i, Fraction(0)) for i in range(self.nrows)]


def _primitive_integer_vector(vec):
    """Scale a rational vector to a primitive integer vector with positive
    leading entry."""
    denom = 1
    for v in vec:
        denom = denom * Fraction(v).denominator // gcd(denom, Fraction(v).denominator)
    ints = [int(Fraction(v) * denom) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    lead = next((v for v in ints if v), 0)
    if lead < 0:
        ints = [-v for v in ints]
    return tuple(ints)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def as_cusp(x):
    if isinstance(x, tuple):
        return reduce_cusp(*x)
    if isinstance(x, Fraction):
        return reduce_cusp(x.numerator, x.denominator)
    if isinstance(x, int):
        return (x, 1)
    raise TypeError(f"cannot interpret {x!r} as a cusp")


@dataclass(frozen=True)
class PathSymbol:
    """Geodesic path {alpha -> beta} between cusps, in lowest terms."""

    alpha: tuple
    beta: tuple

    @classmethod
    def of(cls, alpha, beta):
        return cls(as_cusp(alpha), as_cusp(beta))


def _infinity_legs(M, x, out, flip):
    """Accumulate the Manin legs of the plain path {oo -> x}."""
    if x == INFINITY:
        return
    p, q = x
    cf = []
    num, den = p, q
    while den:
        a = num // den
        cf.append(a)
        num, den = den, num - a * den
    index = _generator_index(M)
    qk_2, qk_1 = 1, 0
    for k, a in enumerate(cf):
        qk = a * qk_1 + qk_2
        sign = -1 if k % 2 == 0 else 1
        key = index[pair_normalize(M, sign * qk, qk_1)]
        out[key] = out.get(key, 0) + flip
        if not out[key]:
            del out[key]
        qk_2, qk_1 = qk_1, qk


def path_to_manin(level, path):
    """Vector over the Manin generators whose class is the path
    {alpha -> beta}; exact additivity holds already at the vector level."""
    M = int(Level.of(level))
    alpha, beta = path.alpha, path.beta
    if alpha == beta:
        return {}
    out = {}
    _infinity_legs(M, fricke_cusp(M, beta), out, 1)
    _infinity_legs(M, fricke_cusp(M, alpha), out, -1)
    return out


# ---------------------------------------------------------------------------
# symbol spaces
# ---------------------------------------------------------------------------


class SymbolSpace:
    """A presented symbol space (full or plus quotient) or a subspace of one
    (cuspidal or intermediate flavor), with an exact basis over Q."""

    def __init__(self):
        raise TypeError("use manin_presentation() and the flavor functions")

    # -- construction ------------------------------------------------------

    @classmethod
    def _presented(cls, level, flavor, star_sign, relation_rows, coeff):
        self = object.__new__(cls)
        self.level = level
        self.flavor = flavor
        self.star_sign = star_sign
        self.coefficient_ring = coeff
        self.generators = symbol_generators(level.M)
        self.gen_index = _generator_index(level.M)
        self.relation_rows = tuple(relation_rows)
        self.ambient = None
        self.sub_basis = None
        self._basis = None
        self._cusps = None
        self._gen_cache = {}
        self._solver = None
        return self

    @classmethod
    def _subspace(cls, ambient, flavor, vectors):
        self = object.__new__(cls)
        self.level = ambient.level
        self.flavor = flavor
        self.star_sign = ambient.star_sign
        self.coefficient_ring = ambient.coefficient_ring
        self.generators = ambient.generators
        self.gen_index = ambient.gen_index
        self.relation_rows = ambient.relation_rows
        self.ambient = ambient
        self.sub_basis = tuple(tuple(Fraction(v) for v in vec) for vec in vectors)
        self._basis = None
        self._cusps = None
        self._gen_cache = {}
        self._solver = None
        return self

    @property
    def M(self):
        return self.level.M

    @property
    def is_plus(self):
        return self.flavor.endswith("_plus")

    @property
    def is_subspace(self):
        return self.ambient is not None

    def __repr__(self):
        return f"SymbolSpace(M={self.M}, flavor={self.flavor!r}, rank={self.rank})"

    # -- presented reduction ------------------------------------------------

    def _find(self, i):
        chain = []
        node = i
        while self._parent[node] != node:
            chain.append(node)
            node = self._parent[node]
        total = 1
        for n in reversed(chain):
            total *= self._sign[n]
            self._parent[n] = node
            self._sign[n] = total
        return node, (self._sign[i] if chain else 1)

    def _union(self, i, ci, j, cj):
        # row ci*e_i + cj*e_j = 0 with unit coefficients
        ri, si = self._find(i)
        rj, sj = self._find(j)
        t = -ci * cj * si * sj
        if ri == rj:
            if t != 1:
                self._killed[ri] = True
            return
        self._parent[ri] = rj
        self._sign[ri] = t
        if self._killed[ri]:
            self._killed[rj] = True

    def _ensure_reduction(self):
        if self._basis is not None:
            return
        if self.is_subspace:
            self.ambient._ensure_reduction()
            self._basis = tuple(range(len(self.sub_basis)))
            return
        n = len(self.generators)
        self._parent = list(range(n))
        self._sign = [1] * n
        self._killed = [False] * n
        leftovers = []
        for row in self.relation_rows:
            items = [(i, c) for i, c in row.items() if c]
            if not items:
                continue
            if len(items) == 1:
                i, c = items[0]
                r, _ = self._find(i)
                self._killed[r] = True
            elif len(items) == 2 and all(abs(c) == 1 for _, c in items):
                (i, ci), (j, cj) = items
                self._union(i, ci, j, cj)
            else:
                leftovers.append(row)
        elim = SparseExactEliminator(n)
        for row in leftovers:
            acc = {}
            for i, c in row.items():
                r, s = self._find(i)
                if self._killed[r]:
                    continue
                acc[r] = acc.get(r, 0) + s * c
            acc = {c: v for c, v in acc.items() if v}
            if acc:
                elim.add_row(acc)
        self._elim = elim
        basis = []
        for c in range(n):
            r, _ = self._find(c)
            if r == c and not self._killed[c] and c not in elim.pivots:
                basis.append(c)
        self._basis = tuple(basis)
        self._basis_pos = {c: pos for pos, c in enumerate(basis)}

    @property
    def rank(self):
        self._ensure_reduction()
        return len(self._basis)

    dimension = rank

    @property
    def basis(self):
        """Presented flavors: generator indices lifting a Q-basis.
        Subspaces: positions into the stored basis vectors."""
        self._ensure_reduction()
        return self._basis

    def reduce_generator_vector(self, vec):
        """Class of a formal sum of generators, as coordinates in the basis
        (presented flavors only)."""
        if self.is_subspace:
            raise ValueError("subspace flavors have no generator reduction")
        self._ensure_reduction()
        acc = {}
        for i, c in vec.items():
            if not c:
                continue
            r, s = self._find(i)
            if self._killed[r]:
                continue
            acc[r] = acc.get(r, 0) + s * c
        red = self._elim.reduce_vector({c: v for c, v in acc.items() if v})
        out = [Fraction(0)] * len(self._basis)
        for c, v in red.items():
            out[self._basis_pos[c]] = Fraction(v)
        return tuple(out)

    def _reduced_generator(self, i):
        cached = self._gen_cache.get(i)
        if cached is None:
            cached = self.reduce_generator_vector({i: 1})
            self._gen_cache[i] = cached
        return cached

    def path_class(self, path):
        """Coordinates of a path's class (presented flavors)."""
        return self.reduce_generator_vector(path_to_manin(self.level, path))

    def basis_path(self, pos):
        """A geodesic path representing basis element `pos`."""
        self._ensure_reduction()
        if self.is_subspace:
            raise ValueError("subspace basis elements are not single paths")
        u, v = self.generators[self._basis[pos]]
        a, b, c, d = gamma_lift(self.M, u, v)
        return PathSymbol.of(reduce_cusp(d, b * self.M), reduce_cusp(c, a * self.M))

    # -- cusps and boundary --------------------------------------------------

    def _ensure_cusps(self):
        if self._cusps is not None:
            return
        self._cusps = cusp_list(self.level)
        reps = [c.rep for c in self._cusps]
        if not self.is_plus:
            self._cusp_col = list(range(len(reps)))
            self._boundary_cols = len(reps)
            self._col_over_zero = [c.over_zero for c in self._cusps]
            return
        # fold classes by the conjugation a/c -> -a/c
        col_of = {}
        cols = []
        fold = []
        for idx, x in enumerate(reps):
            conj = reduce_cusp(-x[0], x[1])
            cidx = self._classify(conj)
            key = min(idx, cidx)
            if key not in col_of:
                col_of[key] = len(cols)
                cols.append(key)
            fold.append(col_of[key])
        self._cusp_col = fold
        self._boundary_cols = len(cols)
        self._col_over_zero = [None] * len(cols)
        for idx, col in enumerate(fold):
            oz = self._cusps[idx].over_zero
            if self._col_over_zero[col] is None:
                self._col_over_zero[col] = oz
            elif self._col_over_zero[col] != oz:
                raise SpanMismatch("conjugation mixed cusps over 0 with others")

    def _classify(self, x):
        for idx, cls in enumerate(self._cusps):
            if cusps_equivalent(self.M, cls.rep, x):
                return idx
        raise AssertionError(f"cusp {x} missed by cusp_list")

    def cusp_classes(self):
        self._ensure_cusps()
        return self._cusps

    def boundary_columns(self):
        """Number of boundary coordinates (cusp classes, folded by
        conjugation on plus flavors) and their over-zero flags."""
        self._ensure_cusps()
        return self._boundary_cols, tuple(self._col_over_zero)

    def generator_boundary(self, i):
        """Sparse boundary row of generator i: (target) - (source)."""
        self._ensure_cusps()
        u, v = self.generators[i]
        a, b, c, d = gamma_lift(self.M, u, v)
        tgt = self._cusp_col[self._classify(reduce_cusp(c, a * self.M))]
        src = self._cusp_col[self._classify(reduce_cusp(d, b * self.M))]
        row = {}
        row[tgt] = row.get(tgt, 0) + 1
        row[src] = row.get(src, 0) - 1
        return {k: v2 for k, v2 in row.items() if v2}

    def basis_boundary_rows(self):
        self._ensure_reduction()
        self._ensure_cusps()
        if self.is_subspace:
            raise ValueError("boundary rows are defined on presented flavors")
        return [self.generator_boundary(i) for i in self._basis]

    # -- subspace plumbing ---------------------------------------------------

    def _ensure_solver(self):
        if self._solver is None:
            self._solver = SpanSolver(self.ambient.rank)
            for vec in self.sub_basis:
                if not self._solver.add_row(vec):
                    raise AssertionError("dependent subspace basis vector")

    def coordinates_in_subspace(self, ambient_vec):
        """Express an ambient-basis vector in the subspace basis, or None."""
        self._ensure_solver()
        return self._solver.express(ambient_vec)

    def embed_vector(self, coords):
        """Subspace coordinates -> ambient basis vector."""
        dim = self.ambient.rank
        out = [Fraction(0)] * dim
        for x, vec in zip(coords, self.sub_basis):
            if x:
                for j, v in enumerate(vec):
                    out[j] += x * v
        return tuple(out)

    # -- operators -----------------------------------------------------------

    def image_of_pair(self, image_fn, u, v):
        """Free vector of an image list [(coeff, u', v'), ...]; pairs not
        coprime to M are dropped."""
        M = self.M
        out = {}
        for coeff, u2, v2 in image_fn(u, v):
            if not coeff or not pair_is_symbol(M, u2, v2):
                continue
            key = self.gen_index[pair_normalize(M, u2, v2)]
            out[key] = out.get(key, 0) + coeff
            if not out[key]:
                del out[key]
        return out

    def matrix_from_generator_map(self, image_fn, label):
        """Operator whose action on a generator [u:v] is given by
        image_fn(u, v) -> [(coeff, u', v'), ...] (presented flavors)."""
        if self.is_subspace:
            raise ValueError("build on the ambient space and restrict")
        self._ensure_reduction()
        rows = []
        for b in self._basis:
            u, v = self.generators[b]
            vec = self.image_of_pair(image_fn, u, v)
            rows.append(self.reduce_generator_vector(vec))
        return OperatorMatrix(self, rows, label)

    def generator_map_well_defined(self, image_fn):
        """Whether the map sends every relation row to zero in the quotient."""
        if self.is_subspace:
            raise ValueError("defined on presented flavors")
        for row in self.relation_rows:
            acc = {}
            for i, c in row.items():
                u, v = self.generators[i]
                for j, c2 in self.image_of_pair(image_fn, u, v).items():
                    acc[j] = acc.get(j, 0) + c * c2
            if any(self.reduce_generator_vector(acc)):
                return False
        return True

    def restrict_operator(self, op, label=None):
        """Restriction of an ambient OperatorMatrix to this subspace."""
        if not self.is_subspace or op.space is not self.ambient:
            raise ValueError("operator does not act on the ambient space")
        self._ensure_solver()
        rows = []
        for vec in self.sub_basis:
            image = _apply_rows(vec, op.rows)
            coords = self._solver.express(image)
            if coords is None:
                raise SpanMismatch(
                    f"operator {op.label} does not preserve flavor {self.flavor}")
            rows.append(tuple(coords))
        return OperatorMatrix(self, rows, label or op.label)

    # -- serialization --------------------------------------------------------

    def to_json_doc(self):
        self._ensure_reduction()
        doc = {
            "schema": SPACE_SCHEMA,
            "level": self.M,
            "factorization": ([self.level.N, self.level.p, self.level.r]
                              if self.level.factored else None),
            "flavor": self.flavor,
            "star_sign": self.star_sign,
            "coefficients": self.coefficient_ring,
        }
        if self.is_subspace:
            doc["ambient"] = self.ambient.presentation_hash()
            doc["vectors"] = [list(_primitive_integer_vector(v))
                              for v in self.sub_basis]
            return doc
        triplets = []
        for r, row in enumerate(self.relation_rows):
            for c in sorted(row):
                triplets.append([r, c, row[c]])
        doc["generators"] = [list(g) for g in self.generators]
        doc["relations"] = triplets
        doc["basis"] = list(self._basis)
        return doc

    def presentation_hash(self):
        blob = json.dumps(self.to_json_doc(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _apply_rows(vec, rows):
    dim = len(rows[0]) if rows else 0
    out = [Fraction(0)] * dim
    for x, row in zip(vec, rows):
        if x:
            for j, v in enumerate(row):
                if v:
                    out[j] += x * v
    return tuple(out)


class OperatorMatrix:
    """Square matrix acting on a SymbolSpace basis by row convention:
    row i is the image of basis element i."""

    def __init__(self, space, rows, label):
        self.space = space
        self.rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
        self.label = label

    @classmethod
    def identity(cls, space, label="1"):
        n = space.rank
        return cls(space, [[Fraction(i == j) for j in range(n)] for i in range(n)],
                   label)

    @property
    def dimension(self):
        return len(self.rows)

    def apply(self, vec):
        return _apply_rows(vec, self.rows)

    def __mul__(self, other):
        if isinstance(other, OperatorMatrix):
            if other.space is not self.space:
                raise ValueError("operators act on different spaces")
            rows = [_apply_rows(row, other.rows) for row in self.rows]
            return OperatorMatrix(self.space, rows, f"{self.label}*{other.label}")
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, c):
        c = Fraction(c)
        rows = [[c * v for v in row] for row in self.rows]
        return OperatorMatrix(self.space, rows, f"{c}*{self.label}")

    def __add__(self, other):
        rows = [[a + b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.rows, other.rows)]
        return OperatorMatrix(self.space, rows, f"{self.label}+{other.label}")

    def __sub__(self, other):
        rows = [[a - b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.rows, other.rows)]
        return OperatorMatrix(self.space, rows, f"{self.label}-{other.label}")

    def __neg__(self):
        return self.scale(-1)

    def __eq__(self, other):
        return (isinstance(other, OperatorMatrix)
                and self.space is other.space and self.rows == other.rows)

    def __hash__(self):
        return hash(self.rows)

    def is_identity(self):
        return all(row[i] == 1 and sum(1 for v in row if v) == 1
                   for i, row in enumerate(self.rows))

    def is_zero(self):
        return all(not v for row in self.rows for v in row)

    def trace(self):
        return sum(row[i] for i, row in enumerate(self.rows))

    def charpoly(self):
        """Monic characteristic polynomial coefficients, highest degree
        first."""
        return tuple(charpoly_exact([list(r) for r in self.rows]))

    def __repr__(self):
        return f"OperatorMatrix({self.label!r}, dim={self.dimension})"


# ---------------------------------------------------------------------------
# flavor constructors
# ---------------------------------------------------------------------------


def manin_presentation(level, star_sign=DEFAULT_STAR_SIGN):
    """The full symbol space for Gamma_1(M) over Z."""
    level = Level.of(level)
    if star_sign not in (1, -1):
        raise ValueError("star_sign must be +1 or -1")
    M = level.M
    rows = two_term_rows(M) + three_term_rows(M)
    return SymbolSpace._presented(level, "full", star_sign, rows, "Z")


def plus_quotient(space):
    """Quotient by conjugation (2 inverted): a further-presented quotient
    for the full flavor, the image subspace for cuspidal/intermediate."""
    if space.is_plus:
        raise ValueError("already a plus quotient")
    if space.flavor == "full":
        rows = list(space.relation_rows) + star_rows(space.M, space.star_sign)
        return SymbolSpace._presented(space.level, "full_plus",
                                      space.star_sign, rows, "Z[1/2]")
    ambient_plus = plus_quotient(space.ambient)
    solver = SpanSolver(ambient_plus.rank)
    vectors = []
    for vec in space.sub_basis:
        gen_vec = {space.ambient.basis[j]: v for j, v in enumerate(vec) if v}
        image = ambient_plus.reduce_generator_vector(gen_vec)
        if solver.add_row(image):
            vectors.append(_primitive_integer_vector(image))
    return SymbolSpace._subspace(ambient_plus,
                                 _PLUS_FLAVORS[space.flavor], vectors)


def boundary_matrix(space):
    """Boundary of every generator as a row over the cusp columns."""
    if space.is_subspace:
        raise ValueError("boundary rows are defined on presented flavors")
    space._ensure_cusps()
    ncols = space._boundary_cols
    rows = []
    for i in range(len(space.generators)):
        sparse = space.generator_boundary(i)
        rows.append([sparse.get(j, 0) for j in range(ncols)])
    return IntMatrix.from_rows(rows)


def cuspidal_subspace(space):
    """Kernel of the boundary, as a subspace with an exact basis."""
    if space.is_subspace:
        raise ValueError("take the cuspidal subspace of a presented flavor")
    rows = space.basis_boundary_rows()
    kernel = exact_left_kernel(rows, space._boundary_cols)
    dim = space.rank
    vectors = []
    for vec in kernel:
        dense = [vec.get(i, 0) for i in range(dim)]
        vectors.append(_primitive_integer_vector(dense))
    flavor = "cuspidal_plus" if space.is_plus else "cuspidal"
    return SymbolSpace._subspace(space, flavor, vectors)


def intermediate_subspace(space):
    """Preimage of the divisors supported away from the cusps over 0;
    checked against the span of the cuspidal subspace and the [u:v] with
    u, v != 0."""
    if space.is_subspace:
        raise ValueError("take the intermediate subspace of a presented flavor")
    space._ensure_reduction()
    space._ensure_cusps()
    oz_cols = [j for j, flag in enumerate(space._col_over_zero) if flag]
    col_pos = {c: i for i, c in enumerate(oz_cols)}
    rows = []
    for sparse in space.basis_boundary_rows():
        rows.append({col_pos[c]: v for c, v in sparse.items() if c in col_pos})
    kernel = exact_left_kernel(rows, len(oz_cols))
    dim = space.rank
    vectors = [
        _primitive_integer_vector([vec.get(i, 0) for i in range(dim)])
        for vec in kernel
    ]
    # cross-check: same span as S + nonzero symbols
    kernel_span = SpanSolver(dim)
    for v in vectors:
        kernel_span.add_row(v)
    other = SpanSolver(dim)
    spanning = [tuple(v) for v in cuspidal_subspace(space).sub_basis]
    for i, (u, vv) in enumerate(space.generators):
        if u and vv:
            spanning.append(space._reduced_generator(i))
    for vec in spanning:
        if not kernel_span.contains(vec):
            raise SpanMismatch("nonzero symbol outside the boundary preimage")
        other.add_row(vec)
    if other.rank != kernel_span.rank:
        raise SpanMismatch("boundary preimage exceeds the nonzero-symbol span")
    flavor = "intermediate_plus" if space.is_plus else "intermediate"
    return SymbolSpace._subspace(space, flavor, vectors)


def star_involution(space):
    """Conjugation as an operator: [u:v] -> sign * [-u:v]."""
    sign = space.star_sign
    if space.is_subspace:
        ambient_star = star_involution(space.ambient)
        return space.restrict_operator(ambient_star, "iota")
    return space.matrix_from_generator_map(
        lambda u, v: [(sign, -u % space.M, v)], "iota")
