"""Eisenstein operators and the cuspidal quotient they cut out, mod p^k.

Two lanes share one set of conventions.  Over Q, ``eisenstein_generators``
materializes eta_n = T(n) - sum_{d | n, (d,M)=1} d<d> on any space flavor,
which gives exact small-level checks and the operator-ideal tests.  Mod p^k,
``eisenstein_quotient`` computes the structure of

    P  =  (plus-cuspidal space) / (span of all eta_n images)

together with the inverse-diamond action of (Z/M)^x / {+-1}, entirely over
Z/p^k: Hecke images are pushed through the same matrix families as the
Q-side operators, so agreement between the lanes is a meaningful check
rather than a tautology.

Only prime-index eta's are swept.  The recurrences

    T(m) eta_n    = eta_{mn} - e(n) eta_m           (m, n coprime)
    T(l) eta_{l^e} = eta_{l^{e+1}} + l<l> eta_{l^{e-1}} - e(l^e) eta_l

with e(n) = sum_{d | n, (d,M)=1} d<d> show every eta_n image lies in the
span of prime ones, so the prime sweep computes the full span; the
stabilization scan up to twice the bound guards the conclusion at runtime,
and ``eta_ideal_spans_match`` checks the operator-ideal statement directly
on small levels.

The quotient construction requires the presentation to be p-integral (all
denominators in the generator reduction prime to p); this is asserted,
never assumed.
"""

from __future__ import annotations

from math import gcd

from sympy import divisors, isprime, primefactors, primerange

from eislab import kernels
from eislab.errors import (
    NotAUnit,
    NotStabilized,
    PrecisionExhausted,
    SpanMismatch,
    ZeroIndex,
)
from eislab.groupring import Character, FiniteAbelianGroup, theta_part
from eislab.heckeq import diamond_matrix, fricke_operator, hecke_matrix, merel_family
from eislab.intlinalg import (
    FiniteModuleStructure,
    HowellSpan,
    IntMatrix,
    QuotientModPK,
    snf,
)
from eislab.maninq import OperatorMatrix, SpanSolver, pair_normalize

# ---------------------------------------------------------------------------
# spanning bound and the eta operators over Q
# ---------------------------------------------------------------------------


def gamma1_index(M):
    """Index of the level-M congruence subgroup in SL2(Z)."""
    idx = M * M
    for q in primefactors(M):
        idx = idx // (q * q) * (q * q - 1)
    return idx


def sturm_bound(M):
    """Sturm-type spanning bound ceil(index / 6) for weight-2 operators.

    T(n) for n <= sturm_bound(M) span the Hecke algebra (Stein, Modular
    Forms: A Computational Approach, ch. 9), so eta generators beyond it
    add nothing.
    """
    return -(-gamma1_index(M) // 6)


def eisenstein_generator(space, n):
    """eta_n = T(n) - sum_{d | n, (d,M)=1} d<d> as a matrix on `space`."""
    op = hecke_matrix(space, n)
    for d in divisors(n):
        if gcd(d, space.M) == 1:
            op = op - d * diamond_matrix(space, d)
    return OperatorMatrix(space, op.rows, f"eta({n})")


class EisensteinGens:
    """The eta-operator family on one space, up to a bound."""

    def __init__(self, space, bound=None):
        self.space = space
        self.bound = sturm_bound(space.M) if bound is None else int(bound)
        if self.bound < 1:
            raise ValueError("bound must be at least 1")
        self.operators = tuple(
            (n, eisenstein_generator(space, n)) for n in range(1, self.bound + 1)
        )

    def __iter__(self):
        return iter(self.operators)

    def __len__(self):
        return len(self.operators)

    def __repr__(self):
        return f"EisensteinGens(M={self.space.M}, bound={self.bound})"


def eisenstein_generators(space, bound=None):
    return EisensteinGens(space, bound)


def eta_ideal_spans_match(space, bound=None):
    """Whether the operator ideal from prime-index eta's contains every
    eta_n with n <= bound (the reverse containment is trivial).

    The ideal is materialized as the span of d * T(m) * eta_l over the
    multipliers the recurrences actually need: m up to half the bound and
    one diamond factor.
    """
    B = sturm_bound(space.M) if bound is None else int(bound)
    dim = space.rank
    if dim == 0:
        return True
    M = space.M
    span = SpanSolver(dim * dim)
    units = sorted({min(a, M - a) for a in range(1, M) if gcd(a, M) == 1}) or [1]
    for ell in primerange(2, B + 1):
        eta = eisenstein_generator(space, ell)
        seeds = [eta]
        for m in range(2, B // 2 + 1):
            seeds.append(hecke_matrix(space, m) * eta)
        for seed in seeds:
            for a in units:
                op = diamond_matrix(space, a) * seed if a != 1 else seed
                span.add_row([x for row in op.rows for x in row])
    for n in range(1, B + 1):
        eta = eisenstein_generator(space, n)
        if not span.contains([x for row in eta.rows for x in row]):
            return False
    return True


# ---------------------------------------------------------------------------
# cyclotomic pair bookkeeping
# ---------------------------------------------------------------------------


class CyclotomicPairSymbol:
    """Formal pair (1 - zeta^u, 1 - zeta^v) at level M, with sign tracking.

    Negating an index fixes the symbol, swapping the two indices negates
    it; the stored representative has 1 <= u <= v <= M//2 and a sign.
    The swap relation makes (u, u) two-torsion, so its sign is normalized
    positive.  This is bookkeeping only -- no cyclotomic arithmetic is
    performed on the entries.
    """

    __slots__ = ("M", "u", "v", "sign")

    def __init__(self, M, u, v, sign=1):
        M = int(M)
        if M < 2:
            raise ValueError("level must be at least 2")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        u %= M
        v %= M
        if u == 0 or v == 0:
            raise ZeroIndex(f"pair ({u}, {v}) has a zero index at level {M}")
        u = min(u, M - u)
        v = min(v, M - v)
        if u > v:
            u, v, sign = v, u, -sign
        elif u == v:
            sign = 1
        self.M = M
        self.u = u
        self.v = v
        self.sign = sign

    def sigma(self, a):
        """Unit action (u, v) -> (au, av)."""
        if gcd(a, self.M) != 1:
            raise NotAUnit(f"{a} is not a unit mod {self.M}")
        return CyclotomicPairSymbol(self.M, a * self.u, a * self.v, self.sign)

    def __neg__(self):
        return CyclotomicPairSymbol(self.M, self.u, self.v, -self.sign)

    def __eq__(self, other):
        return (
            isinstance(other, CyclotomicPairSymbol)
            and (self.M, self.u, self.v, self.sign)
            == (other.M, other.u, other.v, other.sign)
        )

    def __hash__(self):
        return hash((self.M, self.u, self.v, self.sign))

    def __repr__(self):
        s = "-" if self.sign < 0 else ""
        return f"{s}(1-z^{self.u}, 1-z^{self.v})@{self.M}"


def varpi_symbol(level, u, v):
    """The pair symbol of the generator [u:v]; both indices must be nonzero."""
    return CyclotomicPairSymbol(int(level), u, v)


# ---------------------------------------------------------------------------
# the quotient mod p^k
# ---------------------------------------------------------------------------


def _frac_mod(x, p, pk, what):
    num, den = x.numerator, x.denominator
    if den % p == 0:
        raise NotAUnit(f"{what}: denominator {den} is divisible by {p}")
    return num * pow(den, -1, pk) % pk


def _matrix_mod(rows, p, pk, what):
    return [[_frac_mod(x, p, pk, what) for x in row] for row in rows]


def _inverse_mod_pk(rows, p, pk):
    """Inverse of an integer matrix invertible mod p (e.g. unimodular)."""
    m = len(rows)
    aug = [
        [rows[i][j] % pk for j in range(m)] + [int(t == i) for t in range(m)]
        for i in range(m)
    ]
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col] % p), None)
        if piv is None:
            raise NotAUnit("matrix is not invertible mod p")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = pow(aug[col][col], -1, pk)
        aug[col] = [x * inv % pk for x in aug[col]]
        for r in range(m):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(a - f * b) % pk for a, b in zip(aug[r], aug[col])]
    return [row[m:] for row in aug]


class EisensteinQuotient:
    """Structure of S+ / (Eisenstein span) mod p^k with its group action.

    Built by ``eisenstein_quotient``; the heavy lifting happens once in the
    constructor.  Exposes the finite-module structure of P, the
    inverse-diamond action matrices of (Z/M)^x / {+-1} on P's presentation,
    the stabilization record of the prime sweep, and theta components.
    """

    def __init__(self, space, p, bound, precision):
        self.space = space
        self.p = p
        self.bound = bound
        self.precision = precision
        M = space.M
        self.M = M
        self.r = 0
        mm = M
        while mm % p == 0:
            mm //= p
            self.r += 1
        self.N = mm
        self._pk = p**precision
        self._kern = kernels.for_modulus(self._pk)
        self._diamond_cache = {}
        self._fricke_mod = None
        self._build_presentation()
        self._sweep_primes()
        self._build_action()

    # -- presentation data ----------------------------------------------------

    def _build_presentation(self):
        amb = self.space.ambient
        p, pk = self.p, self._pk
        self._amb = amb
        m = amb.rank
        n = len(amb.generators)
        self._gen_red = [
            [
                _frac_mod(c, p, pk, f"generator reduction at level {self.M}")
                for c in amb.reduce_generator_vector({i: 1})
            ]
            for i in range(n)
        ]
        ncols = amb.boundary_columns()[0]
        brows = [
            [sparse.get(j, 0) for j in range(ncols)]
            for sparse in amb.basis_boundary_rows()
        ]
        # In coordinates adapted to the boundary's Smith form the map onto
        # its image lattice is y -> y[:rank], so the kernel rows of the left
        # transform are an exact basis of the cuspidal part and stay one
        # after tensoring with Z/p^k (the image lattice is free, so the
        # kernel sequence splits).
        res = snf(IntMatrix.from_rows(brows))
        s = res.rank
        lrows = res.L.dense_rows()
        if m - s != self.space.rank:
            raise SpanMismatch(
                f"boundary kernel rank {m - s} != cuspidal rank {self.space.rank}"
            )
        self.rank = m - s
        self._split = s
        self._kernel_basis = [lrows[i] for i in range(s, m)]
        self._linv = _inverse_mod_pk(lrows, p, pk)
        self._K = [[c % pk for c in row] for row in self._kernel_basis]
        gidx = list(amb.basis)
        self._gidx = gidx
        V = [[0] * n for _ in range(self.rank)]
        for i, row in enumerate(self._K):
            for j, c in enumerate(row):
                V[i][gidx[j]] = c
        self._V = V
        M = self.M
        lookup = [-1] * (M * M)
        for x in range(M):
            for y in range(M):
                if gcd(gcd(x, y), M) == 1:
                    lookup[x * M + y] = amb.gen_index[pair_normalize(M, x, y)]
        self._lookup = lookup

    def _scoords_rows(self, rows):
        """Ambient (plus-basis) coordinate rows -> kernel-basis coordinates;
        rejects anything outside the cuspidal subspace."""
        pk = self._pk
        y = self._kern.matmul_mod(rows, self._linv, pk)
        s = self._split
        for row in y:
            if any(c % pk for c in row[:s]):
                raise SpanMismatch(
                    f"operator image leaves the cuspidal subspace at level {self.M}"
                )
        return [row[s:] for row in y]

    def _diamond_mod(self, a):
        a %= self.M
        mat = self._diamond_cache.get(a)
        if mat is None:
            mat = _matrix_mod(
                diamond_matrix(self._amb, a).rows,
                self.p,
                self._pk,
                f"<{a}> at level {self.M}",
            )
            self._diamond_cache[a] = mat
        return mat

    def _fricke_class_mod(self):
        if self._fricke_mod is None:
            self._fricke_mod = _matrix_mod(
                fricke_operator(self._amb).rows,
                self.p,
                self._pk,
                f"level involution at {self.M}",
            )
        return self._fricke_mod

    def _scatter(self, rows):
        n = len(self._amb.generators)
        out = [[0] * n for _ in rows]
        for i, row in enumerate(rows):
            oi = out[i]
            for j, c in enumerate(row):
                oi[self._gidx[j]] = c
        return out

    def _eta_prime_rows(self, ell):
        """Images of the kernel basis under eta_ell, in kernel coordinates."""
        M, pk, kern = self.M, self._pk, self._kern
        n = len(self._amb.generators)
        fam = merel_family(ell)
        if M % ell:
            # T(l) = <l> after the matrix family; realized by scaling the
            # lookup key, exactly as the Q-side operator twists its images
            t = pow(ell, -1, M)
            lk = self._lookup
            tl = [-1] * (M * M)
            for x in range(M):
                tx = (t * x % M) * M
                xm = x * M
                for y in range(M):
                    tl[xm + y] = lk[tx + t * y % M]
            img = kern.hecke_image_mod(
                fam, tl, M, self._amb.generators, n, self._V, pk
            )
            timg = kern.matmul_mod(img, self._gen_red, pk)
            shift = kern.matmul_mod(self._K, self._diamond_mod(ell), pk)
            eta = [
                [
                    (ti[j] - ki[j] - ell * si[j]) % pk
                    for j in range(len(ti))
                ]
                for ti, ki, si in zip(timg, self._K, shift)
            ]
        else:
            # T(l) at l | M: conjugate the dropped-image family by the
            # level involution, matching the Q-side operator
            w = self._fricke_class_mod()
            xn = self._scatter(kern.matmul_mod(self._K, w, pk))
            img = kern.hecke_image_mod(
                fam, self._lookup, M, self._amb.generators, n, xn, pk
            )
            timg = kern.matmul_mod(
                kern.matmul_mod(img, self._gen_red, pk), w, pk
            )
            eta = [
                [(ti[j] - ki[j]) % pk for j in range(len(ti))]
                for ti, ki in zip(timg, self._K)
            ]
        return self._scoords_rows(eta)

    # -- the sweep -------------------------------------------------------------

    def _sweep_primes(self):
        p, k = self.p, self.precision
        span = HowellSpan(self.rank, p, k)
        history = []
        last_change = None
        if self.rank:
            fp = span.fingerprint()
            for ell in primerange(2, 2 * self.bound + 1):
                span.insert_rows(self._eta_prime_rows(ell))
                nfp = span.fingerprint()
                changed = nfp != fp
                fp = nfp
                history.append((ell, changed))
                if changed:
                    last_change = ell
        if last_change is not None and last_change > self.bound:
            raise NotStabilized(
                f"Eisenstein span at level {self.M} still grew at prime "
                f"{last_change} > bound {self.bound}; raise the bound"
            )
        self.history = tuple(history)
        self.stabilized_at = last_change if last_change is not None else 1
        self._span_rows = [list(r) for r in span.basis]
        quot = QuotientModPK(self._span_rows, self.rank, p, k)
        if quot.deep_count():
            raise PrecisionExhausted(
                f"invariant factors of the Eisenstein quotient reach p^{k}; "
                "raise the precision"
            )
        self.invariant_exponents = tuple(quot.torsion_exponents())
        self.structure = FiniteModuleStructure.from_factors(
            tuple(p**e for e in self.invariant_exponents)
        )

    @property
    def order_exponent(self):
        """v_p of |P|."""
        return sum(self.invariant_exponents)

    # -- group action ----------------------------------------------------------

    def _inverse_diamond_matrix(self, a):
        """Matrix of <a>^{-1} (the pair scaling (u,v) -> (au,av)) on the
        kernel basis."""
        M, pk, kern = self.M, self._pk, self._kern
        amb = self._amb
        cls_rows = []
        for j in self._gidx:
            u, v = amb.generators[j]
            cls_rows.append(self._gen_red[self._lookup[(a * u % M) * M + a * v % M]])
        return self._scoords_rows(kern.matmul_mod(self._K, cls_rows, pk))

    def _build_action(self):
        self.group = FiniteAbelianGroup.unit_group_mod_pm(self.M)
        self.action = {
            g: self._inverse_diamond_matrix(g) for g in self.group.elements
        }
        if not self.rank:
            return
        kern, pk = self._kern, self._pk
        ident = [[int(i == j) for j in range(self.rank)] for i in range(self.rank)]
        if self.action[self.group.one] != ident:
            raise SpanMismatch("inverse-diamond action: identity is not 1")
        checks = list(self.group.factor_generators)
        checks.append(self.group.elements[len(self.group.elements) // 2])
        for g in checks:
            for h in checks:
                gh = self.group.mul(g, h)
                prod = kern.matmul_mod(self.action[g], self.action[h], pk)
                if prod != [[c % pk for c in row] for row in self.action[gh]]:
                    raise SpanMismatch(
                        f"inverse-diamond action violates the group law at "
                        f"({g}, {h}) for level {self.M}"
                    )

    # -- theta components -------------------------------------------------------

    def _group_character(self, theta):
        """Match a Dirichlet character (even, conductor dividing the level)
        to a character of the plus-minus unit group."""
        if theta.modulus != self.M:
            theta = theta.lift_to(self.M)
        if not theta.is_even:
            raise ValueError("only even characters factor through the group")
        e_t = theta.group.exponent
        e_g = self.group.exponent
        for chi in Character.all_characters(self.group):
            if all(
                chi.value_exponent(g) * e_t == theta.value_exponent(g) * e_g
                for g in self.group.elements
            ):
                return chi
        raise SpanMismatch("character does not factor through the unit group")

    def theta_component(self, theta):
        """The theta-isotypic part of P, as a ThetaPart.

        `theta` is a Character on ``self.group`` or an even Dirichlet
        character whose conductor divides the level.
        """
        chi = (
            theta
            if isinstance(theta, Character) and theta.group is self.group
            else self._group_character(theta)
        )
        return theta_part(
            self._span_rows,
            self.rank,
            self.p,
            self.precision,
            self.group,
            self.action,
            chi,
        )

    # -- reporting ---------------------------------------------------------------

    def summary(self):
        return {
            "level": self.M,
            "tame_level": self.N,
            "p": self.p,
            "depth": self.r,
            "precision": self.precision,
            "bound": self.bound,
            "cuspidal_rank": self.rank,
            "invariant_factor_exponents": list(self.invariant_exponents),
            "order_exponent": self.order_exponent,
            "stabilized_at": self.stabilized_at,
            "primes_swept": len(self.history),
        }

    def __repr__(self):
        return (
            f"EisensteinQuotient(M={self.M}, p={self.p}, "
            f"exponents={list(self.invariant_exponents)})"
        )


def eisenstein_quotient(space, p, bound=None, precision=20):
    """Structure of S+ (x) Z/p^k modulo the Eisenstein span.

    `space` must be the plus-cuspidal flavor at a level divisible by the odd
    prime p.  `bound` defaults to the Sturm-type spanning bound and may only
    be raised; primes up to twice the bound are swept and NotStabilized is
    raised if the span was still growing past the bound.  All invariant
    factors must stay below p^precision or PrecisionExhausted is raised.
    """
    if space.flavor != "cuspidal_plus":
        raise ValueError("eisenstein_quotient wants the plus-cuspidal flavor")
    if p == 2 or not isprime(p):
        raise ValueError("p must be an odd prime")
    if space.M % p:
        raise ValueError(f"{p} does not divide the level {space.M}")
    default_b = sturm_bound(space.M)
    if bound is None:
        bound = default_b
    elif bound < default_b:
        raise ValueError(f"bound {bound} is below the spanning bound {default_b}")
    precision = int(precision)
    if precision < 2:
        raise ValueError("precision must be at least 2")
    return EisensteinQuotient(space, p, int(bound), precision)
