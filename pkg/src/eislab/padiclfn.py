"""Finite-level interpolations of p-adic L-functions.

Everything here is exact until the last step.  The central object, built by
`xi_level`, is an element of O[Gamma] -- O generated by the values of an
even tame character theta mod Np, Gamma the cyclic group of 1-units at
level r -- pinned down by character identities: for every character eps of
(Z/Np^r)^x/{+-1} restricting to theta on the tame part,

    eps(xi)  =  -B_{2, eps^{-1}} / 2,

the generalized Bernoulli number taken at modulus N p^r.  When theta has
conductor Np these equal the primitive values L(eps^{-1}, -1) outright (the
spurious Euler factors vanish because p divides every lift's conductor);
this is the degree-two Stickelberger construction, and in the limit over r
the element becomes the branch of the Kubota--Leopoldt p-adic L-function
attached to theta.  See Washington, "Introduction to Cyclotomic Fields",
chapters 4-7; the finite-sum formula of his Theorem 5.11 is implemented in
`washington_lp` and serves as the independent cross-check.

Coefficients are exact cyclotomic numbers, embedded into (Z/p^k)[theta]
only on demand, so a stray p in a denominator raises `NotIntegral` instead
of corrupting digits.  The one component where that genuinely happens --
theta the square of the Teichmueller character at tame level 1, where the
attached zeta branch has its pole -- can still be requested with
`allow_nonintegral`, which tracks the scaling exponent explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, gcd, lcm

from sympy import isprime

from eislab.errors import NotIntegral, OracleMismatch, PrecisionExhausted, ZeroIndex
from eislab.groupring import (
    Character,
    DirichletCharacter,
    teichmuller_character,
    unit_group,
)
from eislab.intlinalg import FiniteModuleStructure, QuotientModPK
from eislab.rings import CycElt, CycField, ZpRing
from eislab.series import PowerSeries, u_value


# ---------------------------------------------------------------------------
# generalized Bernoulli numbers (exact)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _bernoulli_number(n):
    """Ordinary Bernoulli number B_n, with B_1 = -1/2."""
    if n == 0:
        return Fraction(1)
    acc = Fraction(0)
    for j in range(n):
        acc += comb(n + 1, j) * _bernoulli_number(j)
    return -acc / (n + 1)


def _bernoulli_polynomial(n, x):
    acc = Fraction(0)
    xp = Fraction(1)
    for j in range(n, -1, -1):
        acc += comb(n, j) * _bernoulli_number(j) * xp
        xp *= x
    return acc


@dataclass(frozen=True)
class BernoulliValue:
    """Exact B_{2,chi} at the character's own modulus."""

    char: DirichletCharacter
    value: CycElt

    def is_zero(self):
        return self.value.is_zero()

    def rational(self):
        return self.value.rational_value()


def _bernoulli_weight_buckets(chi, n, field):
    """Fraction weights of zeta^e in M^{n-1} sum_a chi(a) B_n(a/M)."""
    M = chi.modulus
    e_g = chi.group.exponent
    scale = Fraction(M) ** (n - 1)
    buckets = {}
    for a in range(1, M + 1) if M > 1 else [1]:
        r = chi.value_exponent(a)
        if r is None:
            continue
        num = r * field.m
        assert num % e_g == 0, "character order must divide the field level"
        fe = (num // e_g) % field.m
        w = scale * _bernoulli_polynomial(n, Fraction(a, M))
        buckets[fe] = buckets.get(fe, Fraction(0)) + w
    return buckets


def generalized_bernoulli_n(chi, n, field=None):
    """Exact B_{n,chi} = M^{n-1} sum_{a=1}^{M} chi(a) B_n(a/M) as a CycElt.

    The value is taken at the modulus of chi; pass chi.primitive_part() for
    the conductor-level number.  Vanishes when chi(-1) != (-1)^n (pair a
    with M - a), except for the classical n = 1 case which is not needed
    here.
    """
    field = field or CycField(max(chi.order, 1))
    acc = [Fraction(0)] * field.deg
    for fe, w in _bernoulli_weight_buckets(chi, n, field).items():
        if w:
            row = field._xpow[fe]
            for i in range(field.deg):
                if row[i]:
                    acc[i] += w * row[i]
    return field.elt(acc)


def generalized_bernoulli(chi, field=None):
    """B_{2,chi} at the modulus of chi: M * sum_a chi(a) B_2(a/M), exact.

    Trivial character mod 1 gives B_2 = 1/6; odd characters give exactly 0.
    """
    return BernoulliValue(chi, generalized_bernoulli_n(chi, 2, field=field))


# ---------------------------------------------------------------------------
# small p-adic utilities
# ---------------------------------------------------------------------------


def _crt(a1, m1, a2, m2):
    if m1 == 1:
        return a2 % m2 if m2 > 1 else 0
    if m2 == 1:
        return a1 % m1
    g = gcd(m1, m2)
    assert g == 1, "moduli must be coprime"
    return (a1 + m1 * ((a2 - a1) * pow(m1, -1, m2) % m2)) % (m1 * m2)


def _vp(x, p):
    v = 0
    while x and x % p == 0:
        x //= p
        v += 1
    return v


def _log_one_unit(x, p, r):
    """p-adic logarithm of x = 1 (mod p), exact modulo p^r (p odd).

    Term i of the series has valuation >= i - v_p(i), and the lift
    ambiguity of x contributes only multiples of p^r after division, so a
    short integer loop certifies every digit.
    """
    pr = p**r
    z = (x - 1) % pr
    if z == 0:
        return 0
    assert z % p == 0, "argument is not a 1-unit"
    vmax = 0
    b = 1
    while b <= r + 2:
        b *= p
        vmax += 1
    big = p ** (r + vmax)
    total = 0
    zi = 1
    for i in range(1, r + vmax + 2):
        zi = (zi * z) % big
        v = _vp(i, p)
        if i - v >= r:
            continue
        t = (zi // p**v) * pow(i // p**v, -1, pr)
        total = (total + t) if i % 2 else (total - t)
    return total % pr


def _cyc_conjugate(x):
    """zeta -> zeta^{-1} on a cyclotomic element (complex conjugation)."""
    f = x.field
    acc = [Fraction(0)] * f.deg
    for i, c in enumerate(x.coeffs):
        if c:
            row = f._xpow[(-i) % f.m if f.m > 1 else 0]
            for t in range(f.deg):
                if row[t]:
                    acc[t] += c * row[t]
    return f.elt(acc)


# ---------------------------------------------------------------------------
# eligibility of the tame character
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EligibilityRecord:
    theta: DirichletCharacter
    p: int
    N: int
    eligible: bool
    reason: str
    primitive: bool
    pole_branch: bool
    branch_exponent: object  # i with omega^2 theta^{-1} = omega^i (N = 1), else None


def _restrict_crt(chi, m_keep, m_other):
    """The character mod m_keep given by chi on units that are 1 mod m_other."""
    g = unit_group(m_keep)
    e = chi.group.exponent
    exps = []
    for y, d in zip(g.factor_generators, g.cyclic_orders):
        a = _crt(y, m_keep, 1, m_other)
        r = chi.value_exponent(a)
        assert r is not None
        num = r * d
        assert num % e == 0, "restricted value is not a d-th root of unity"
        exps.append((num // e) % d)
    return DirichletCharacter(m_keep, Character(g, tuple(exps)))


def classify_theta(p, N, theta):
    """Eligibility of an even tame character for the interpolation theory.

    At tame level N = 1 every even character except the square of the
    Teichmueller character is accepted (that one component is the pole of
    the attached zeta branch, and its element is genuinely non-integral).
    For N > 1 the character must have full conductor Np and its twist by
    the inverse Teichmueller character must either be nontrivial on the
    p-part or send p to a nontrivial root of unity on the tame part.
    """
    if theta.modulus != N * p:
        raise ValueError("character modulus must be N*p")
    if theta.is_odd:
        return EligibilityRecord(theta, p, N, False, "odd character", theta.is_primitive, False, None)
    omega = teichmuller_character(p)
    if N == 1:
        i_theta = next(i for i in range(max(p - 2, 1)) if omega**i == theta)
        branch = (2 - i_theta) % (p - 1) if p > 2 else 0
        if branch == 0:
            return EligibilityRecord(
                theta, p, N, False,
                "pole branch: theta is the square of the Teichmueller character",
                theta.is_primitive, True, branch,
            )
        return EligibilityRecord(theta, p, N, True, "eligible", theta.is_primitive, False, branch)
    cond = theta.conductor
    if cond != N * p:
        return EligibilityRecord(
            theta, p, N, False, f"imprimitive: conductor {cond} < {N * p}",
            False, False, None,
        )
    twist = theta * omega.lift_to(N * p).inverse()
    t_p = _restrict_crt(twist, p, N)
    t_n = _restrict_crt(twist, N, p)
    if t_p.char.is_trivial and t_n.value_exponent(p) == 0:
        return EligibilityRecord(
            theta, p, N, False,
            "inverse-Teichmueller twist is trivial on the p-part and sends p to 1",
            True, False, None,
        )
    return EligibilityRecord(theta, p, N, True, "eligible", True, False, None)


def eligible_thetas(p, N):
    """All even characters mod Np with their eligibility records."""
    out = []
    for theta in DirichletCharacter.all_mod(N * p):
        if theta.is_even:
            out.append((theta, classify_theta(p, N, theta)))
    return out


# ---------------------------------------------------------------------------
# the level-r element
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class XiValue:
    """A p-adic evaluation: `value` approximates p^scale_exponent times the
    true number, certified modulo p^certified."""

    value: object
    certified: int
    scale_exponent: int


class XiElement:
    """Level-r interpolating element of the theta component.

    `exact_coeffs[j]` is the cyclotomic coefficient of the j-th power of
    the distinguished generator: the group element of the 1-unit u whose
    p-adic logarithm is p/(p-1), i.e. (1 - p^{-1})^{-1}.  The p-adic lane
    (`zp_coefficients`, `series`, `evaluate_at_s`) is re-derived from the
    exact coefficients at whatever precision is requested, so precision can
    be escalated after the fact.  `star()` is the group-ring involution
    [g] -> [g^{-1}]; it is never applied implicitly (quotient orders are
    invariant under it).
    """

    def __init__(self, p, N, r, theta, exact_coeffs, denominator_exponent,
                 eligibility, interpolation_checked, precision):
        self.p = p
        self.N = N
        self.r = r
        self.theta = theta
        self.exact_coeffs = tuple(exact_coeffs)
        self.denominator_exponent = denominator_exponent
        self.eligibility = eligibility
        self.interpolation_checked = tuple(interpolation_checked)
        self.precision = precision
        d = max(theta.order, 1)
        self.ring = ZpRing(p, precision, d if d > 2 else 1)
        self._zp_cache = {}
        self._zp_cache[precision] = self._embed(precision)
        self.u_residue = u_value(p, r)

    # -- basic structure -----------------------------------------------------

    @property
    def wild_order(self):
        return self.p ** (self.r - 1)

    def _embed(self, k):
        ring = ZpRing(self.p, k, self.ring.m)
        scale = self.p**self.denominator_exponent
        return tuple(ring.embed(x * scale) for x in self.exact_coeffs)

    def zp_coefficients(self, k=None):
        """Coefficients of p^denominator_exponent * xi in (Z/p^k)[theta]."""
        k = k or self.precision
        if k not in self._zp_cache:
            self._zp_cache[k] = self._embed(k)
        return self._zp_cache[k]

    def eval_character(self, t=0, field=None):
        """Exact pairing against the character sending the distinguished
        generator to zeta_n^t (the tame part theta is already folded in).
        The result lives in the cyclotomic field generated by the values,
        sized by the order of zeta_n^t rather than by n itself."""
        n = self.wild_order
        t = t % n if n > 1 else 0
        g = gcd(t, n) if n > 1 else 1
        o = n // g if n > 1 else 1
        d = max(self.theta.order, 1)
        field = field or CycField(lcm(d, o))
        assert field.m % lcm(d, o) == 0
        acc = field.zero()
        step = (t // g) * (field.m // o) % field.m if t else 0
        for j, x in enumerate(self.exact_coeffs):
            if not x.is_zero():
                acc = acc + x.embed_into(field) * field.zeta((j * step) % field.m)
        return acc

    def constant_term_exact(self):
        """Sum of the coefficients: the pairing with the trivial wild
        character, i.e. the image at level 1."""
        return self.eval_character(0, CycField(max(self.theta.order, 1)))

    # -- series form -----------------------------------------------------------

    def series(self, k=None, scaled=False):
        """Image under generator -> 1 + T, certified modulo
        ((1+T)^{p^{r-1}} - 1, p^k).  For non-integral components the series
        of p^e * xi is returned only when `scaled` is requested."""
        if self.denominator_exponent and not scaled:
            raise NotIntegral(
                "coefficients carry p-denominators; request the scaled series explicitly"
            )
        k = k or self.precision
        ring = ZpRing(self.p, k, self.ring.m)
        return PowerSeries.from_gamma_coeffs(ring, list(self.zp_coefficients(k)), self.r)

    def evaluate_at_s(self, s, k=None):
        """Value at T = u^s - 1 (the s-line of the attached L-function)."""
        ser = self.series(k, scaled=self.denominator_exponent > 0)
        val, cert = ser.evaluate_at_us_minus_1(s, self.p)
        return XiValue(val, cert, self.denominator_exponent)

    # -- structural maps -------------------------------------------------------

    def project_to(self, r_new):
        """Image at a lower level: generator powers fold modulo p^{r_new-1}."""
        assert 1 <= r_new <= self.r
        n_new = self.p ** (r_new - 1)
        fld = self.exact_coeffs[0].field
        folded = [fld.zero() for _ in range(n_new)]
        for j, x in enumerate(self.exact_coeffs):
            folded[j % n_new] = folded[j % n_new] + x
        return XiElement(
            self.p, self.N, r_new, self.theta, folded,
            self.denominator_exponent, self.eligibility, (), self.precision,
        )

    def star(self):
        """Group-ring involution: inverts group elements, so the wild index
        reverses and the tame coefficients are complex-conjugated; the
        result lives in the component of theta^{-1}."""
        n = self.wild_order
        xs = [
            _cyc_conjugate(self.exact_coeffs[(-j) % n]) for j in range(n)
        ]
        return XiElement(
            self.p, self.N, self.r, self.theta.inverse(), xs,
            self.denominator_exponent, None, (), self.precision,
        )

    def __eq__(self, other):
        return (
            isinstance(other, XiElement)
            and (self.p, self.N, self.r) == (other.p, other.N, other.r)
            and self.theta == other.theta
            and self.exact_coeffs == other.exact_coeffs
            and self.denominator_exponent == other.denominator_exponent
        )

    def summary(self, series_precision=None):
        """JSON-ready description (exact coefficients as fraction strings)."""
        out = {
            "p": self.p,
            "N": self.N,
            "level": self.r,
            "theta": {
                "modulus": self.theta.modulus,
                "exponents": list(self.theta.char.exps),
                "order": self.theta.order,
            },
            "eligible": None if self.eligibility is None else self.eligibility.eligible,
            "reason": None if self.eligibility is None else self.eligibility.reason,
            "denominator_exponent": self.denominator_exponent,
            "precision": self.precision,
            "interpolation_checked": list(self.interpolation_checked),
            "coefficients": [
                [str(c) for c in x.coeffs] for x in self.exact_coeffs
            ],
        }
        try:
            ser = self.series(series_precision, scaled=self.denominator_exponent > 0)
            mu, lam = ser.weierstrass_invariants()
            out["series"] = {
                "coefficients": ser.coefficients_mod_certified(),
                "certified_exponent": ser.prec,
                "mu": mu,
                "lambda": lam,
                "scaled_by_p_power": self.denominator_exponent,
            }
        except PrecisionExhausted:
            out["series"] = None
        return out

    def __repr__(self):
        return (
            f"XiElement(p={self.p}, N={self.N}, r={self.r}, "
            f"theta_order={self.theta.order}, prec={self.precision})"
        )


def _denominator_exponent(xs, p, d, k):
    """Largest e with p^e in a denominator of some coefficient, measured at
    the aligned p-adic embedding.  A rational-coordinate denominator test
    would be wrong for d > 2: a value can be integral at the embedding where
    the character acts through Teichmueller powers yet non-integral at a
    conjugate one, and only the aligned valuation is meaningful here."""
    if d <= 2:
        worst = 0
        for x in xs:
            for c in x.coeffs:
                worst = max(worst, _vp(c.denominator, p))
        return worst
    ring = ZpRing(p, k, d)
    worst = 0
    for x in xs:
        e = 0
        while True:
            try:
                ring.embed(x if e == 0 else x * p**e)
                break
            except NotIntegral:
                e += 1
                if e > k:
                    raise
        worst = max(worst, e)
    return worst


def _interp_scope(n, p, scope):
    if scope == "auto":
        if n <= p * p:
            return list(range(n))
        return list(range(0, n, n // (p * p)))
    if scope is None or scope == 0:
        return []
    return list(scope)


def _check_interpolation(p, N, r, theta, xs, dlog_fn, t):
    """Exact identity at one lift: the pairing of the element against the
    character eps = theta * (generator -> zeta_n^t) equals -B_{2,eps^{-1}}/2
    at modulus Np^r, with eps rebuilt as a character of (Z/Np^r)^x through
    the generic unit-group machinery (an independent code path), and the
    Bernoulli value cross-checked against its conductor-level form times
    the removed Euler factors."""
    M = N * p**r
    n = p ** (r - 1)
    t = t % n if n > 1 else 0
    g = gcd(t, n) if n > 1 else 1
    o = n // g if n > 1 else 1  # order of the wild twist
    d = max(theta.order, 1)
    L = lcm(d, o)
    Lf = CycField(L)
    e_g = theta.group.exponent

    # pairing from the computed coefficients
    s_val = Lf.zero()
    step = (t // g) * (L // o) % L if t else 0
    for j, x in enumerate(xs):
        if not x.is_zero():
            s_val = s_val + x.embed_into(Lf) * Lf.zeta((j * step) % L)

    # the pairing character delta = (theta psi_t)^{-1}, i.e.
    # delta(a) = theta^{-1}(a) zeta_n^{-t m(a)}, rebuilt as an honest
    # character mod M from values on the group generators
    g_m = unit_group(M)
    theta_inv = theta.inverse()

    def delta_exp(a):
        rv = theta_inv.value_exponent(a)
        ex = rv * L // e_g
        if t:
            ex -= step * dlog_fn(a)
        return ex % L

    exps = []
    for y, dd in zip(g_m.factor_generators, g_m.cyclic_orders):
        ex = delta_exp(y)
        num = ex * dd
        assert num % L == 0, "lift value is not a root of unity of the right order"
        exps.append((num // L) % dd)
    delta = DirichletCharacter(M, Character(g_m, tuple(exps)))

    b_full = generalized_bernoulli(delta, field=Lf).value
    if s_val != b_full * Fraction(-1, 2):
        raise OracleMismatch(
            f"pairing at wild twist {t} disagrees with the Bernoulli value "
            f"(level {r}, theta order {theta.order})"
        )

    # conductor-level consistency: B at modulus M = primitive B times the
    # Euler factors (1 - chi(l) l) over primes l | M away from the conductor
    prim = delta.primitive_part()
    b_prim = generalized_bernoulli(prim, field=Lf).value
    euler = Lf.one()
    rest = M
    ells = []
    q = 2
    while q * q <= rest:
        if rest % q == 0:
            ells.append(q)
            while rest % q == 0:
                rest //= q
        q += 1
    if rest > 1:
        ells.append(rest)
    for ell in ells:
        if prim.modulus % ell:
            euler = euler * (Lf.one() - prim(ell, Lf) * ell)
    if b_full != b_prim * euler:
        raise OracleMismatch("Euler-factor relation between moduli failed")
    if theta.modulus > 1 and theta.is_primitive and euler != Lf.one():
        raise OracleMismatch(
            "primitive tame character must make every lift's Euler correction trivial"
        )


def xi_level(p, N, r, theta, precision=20, allow_nonintegral=False,
             interpolation_scope="auto"):
    """The level-r interpolating element of the theta component.

    Built as the theta-projection of the degree-two Stickelberger element
    of (Z/Np^r)^x/{+-1}: each unit-class a contributes -M B_2(a/M) (an
    exact rational; M = Np^r) on the inverse group element, and the class
    is split into its tame part (theta evaluates there) and its 1-unit
    part (a verified discrete logarithm against the distinguished
    generator).  Character pairings are then re-checked exactly against
    generalized Bernoulli values over `interpolation_scope` (all p^{r-1}
    lifts when there are at most p^2 of them, else the lifts of wild order
    at most p^2), and the coefficients are embedded p-adically.

    Raises NotIntegral on the pole branch (theta = omega^2, N = 1) unless
    `allow_nonintegral` is set, in which case the element is stored as
    exact coefficients of xi with the p-power denominator recorded.
    """
    if not isprime(p) or p == 2:
        raise ValueError("p must be an odd prime")
    if N < 1 or N % p == 0:
        raise ValueError("tame level must be a positive integer prime to p")
    if r < 1:
        raise ValueError("level must be at least 1")
    if theta.modulus != N * p:
        raise ValueError(f"character modulus {theta.modulus} is not N*p = {N * p}")
    if theta.is_odd:
        raise ValueError(
            "odd tame character: every even-character pairing vanishes, "
            "so there is nothing to interpolate"
        )

    record = classify_theta(p, N, theta)
    M = N * p**r
    n = p ** (r - 1)
    d = max(theta.order, 1)
    fld = CycField(d)
    e_g = theta.group.exponent
    theta_inv = theta.inverse()
    pr = p**r

    dlog_cache = {}
    if n > 1:
        u_r = u_value(p, r)
        logu = _log_one_unit(u_r, p, r)
        assert logu % p == 0 and (logu // p) % p, "log u must have valuation exactly 1"
        inv_alpha = pow(logu // p, -1, n)

        def dlog(a):
            m_a = dlog_cache.get(a)
            if m_a is None:
                om = pow(a, n, pr)
                w = (a % pr) * pow(om, -1, pr) % pr
                m_a = (_log_one_unit(w, p, r) // p) * inv_alpha % n
                assert pow(u_r, m_a, pr) == w, "wild discrete logarithm failed"
                dlog_cache[a] = m_a
            return m_a
    else:
        def dlog(a):
            return 0

    deg = fld.deg
    acc = [[Fraction(0)] * deg for _ in range(n)]
    six_m = 6 * M
    for a in range(1, M // 2 + 1):
        if gcd(a, M) != 1:
            continue
        c_a = Fraction(6 * a * M - 6 * a * a - M * M, six_m)
        rv = theta_inv.value_exponent(a)
        num = rv * d
        assert num % e_g == 0
        row = fld._xpow[(num // e_g) % d]
        arow = acc[(-dlog(a)) % n]
        for i in range(deg):
            if row[i]:
                arow[i] += c_a * row[i]
    xs = tuple(fld.elt(list(c)) for c in acc)

    checked = []
    for t in _interp_scope(n, p, interpolation_scope):
        _check_interpolation(p, N, r, theta, xs, dlog, t)
        checked.append(t)

    den_exp = _denominator_exponent(xs, p, d, precision)
    if den_exp and not allow_nonintegral:
        raise NotIntegral(
            f"coefficients have a p^{den_exp} denominator ({record.reason}); "
            "pass allow_nonintegral to work with the scaled element"
        )

    return XiElement(p, N, r, theta, xs, den_exp, record, checked, precision)


def xi_series(p, N, r, theta, precision=20, allow_nonintegral=False):
    """Series form directly: the image of the level-r element under
    generator -> 1 + T, certified modulo ((1+T)^{p^{r-1}} - 1, p^k)."""
    xi = xi_level(p, N, r, theta, precision=precision,
                  allow_nonintegral=allow_nonintegral)
    return xi.series(scaled=allow_nonintegral and xi.denominator_exponent > 0)


def xi_derivative(obj, p=None):
    """The s-line derivative (1 - p^{-1})^{-1} (1+T) d/dT of a series, or of
    an element's series; kills constants and is the d/ds of the value at
    T = u^s - 1."""
    if isinstance(obj, XiElement):
        return obj.series().s_derivative(obj.p)
    if p is None:
        p = obj.ring.p
    return obj.s_derivative(p)


# ---------------------------------------------------------------------------
# independent finite-sum values (Washington's formula)
# ---------------------------------------------------------------------------


def washington_lp(p, branch_exponent, s, k, F=None):
    """L_p(s, omega^branch_exponent) by the exact finite sum

        (1/(F(s-1))) sum_{a<F, p∤a} omega^i(a) <a>^{1-s}
                     sum_j C(1-s, j) (F/a)^j B_j

    (Washington, Thm 5.11), evaluated for an integer s != 1 modulo p^k.
    All arithmetic is modular-exact; the Teichmueller factors are computed
    by Fermat iteration.  Returns the residue mod p^k.
    """
    if s == 1:
        raise ValueError("the finite sum degenerates at s = 1; use washington_lp_near_one")
    if not isprime(p) or p == 2:
        raise ValueError("p must be an odd prime")
    if branch_exponent % (p - 1) == 0:
        raise ValueError(
            "trivial (zeta) branch: values can be non-integral, so the "
            "residue contract fails; use the exact interpolation formula"
        )
    F = F or p
    if F % p:
        raise ValueError("the auxiliary modulus must be divisible by p")
    vF = _vp(F, p)
    vs = _vp(s - 1, p)
    K = k + vF + vs + 2
    pK = p**K
    J = K + 1
    # j-th inner constant: C(1-s, j) B_j F^j, exactly divided by any p-power
    # in the Bernoulli denominator (F^j absorbs it)
    consts = []
    for j in range(J + 1):
        b = _bernoulli_number(j)
        binom = 1
        for i in range(j):
            binom = binom * (1 - s - i) // (i + 1)
        num = b.numerator * F**j
        e = _vp(b.denominator, p)
        assert num % p**e == 0
        cj = (num // p**e) * pow(b.denominator // p**e, -1, pK) % pK
        consts.append(cj * binom % pK)
    total = 0
    for a in range(1, F):
        if a % p == 0 or gcd(a, F) != 1:
            continue
        # Teichmueller lift and the 1-unit part <a>
        tau = a % pK
        while True:
            nxt = pow(tau, p, pK)
            if nxt == tau:
                break
            tau = nxt
        chi_a = pow(tau, branch_exponent % (p - 1), pK)
        one_unit = a * pow(tau, -1, pK) % pK
        inv_a = pow(a, -1, pK)
        inner = 0
        fa = 1
        for j in range(J + 1):
            inner = (inner + consts[j] * fa) % pK
            fa = fa * inv_a % pK
        total = (total + chi_a * pow(one_unit, 1 - s, pK) % pK * inner) % pK
    div = p ** (vF + vs)
    assert total % div == 0, "finite sum lost the expected p-divisibility"
    unit = (F // p**vF) * ((s - 1) // p**vs)
    return (total // div) * pow(unit, -1, p**k) % p**k


def washington_lp_near_one(p, branch_exponent, k):
    """L_p(1, omega^branch_exponent) mod p^k for a nontrivial even branch.

    The finite-sum formula degenerates at s = 1, but the branch series has
    integral coefficients, so values at s and s' agree modulo p to the
    power 1 + v_p(s - s'); evaluating at 1 + p^{k+1} (with a stability
    check at 1 + p^{k+2}) therefore certifies k digits.
    """
    if branch_exponent % (p - 1) == 0:
        raise ValueError("the trivial branch has a pole at s = 1")
    v1 = washington_lp(p, branch_exponent, 1 + p ** (k + 1), k)
    v2 = washington_lp(p, branch_exponent, 1 + p ** (k + 2), k)
    assert v1 == v2, "shifted evaluations disagree; branch series not integral?"
    return v1


# ---------------------------------------------------------------------------
# quotient orders
# ---------------------------------------------------------------------------


def group_ring_quotient_structure(p, m, exact_coeffs, k, eval_at_twist,
                                  max_precision=160):
    """Structure of O[Z/n]/(x) as a finite Z_p-module, O the local ring of
    the aligned prime of Q(zeta_m) over p.

    `exact_coeffs` are the cyclotomic coefficients of x on the group basis
    (n = their count); k is raised, re-embedding the exact coefficients,
    until every invariant factor is strictly certified.  `eval_at_twist(t)`
    must return the exact pairing of x against the order-n character
    gamma -> zeta_n^t; if some pairing is exactly zero the quotient is
    infinite and reported by ZeroIndex, never as a fake large order.
    """
    n = len(exact_coeffs)
    while True:
        ring = ZpRing(p, k, m)
        zp = [ring.embed(c) for c in exact_coeffs]
        dh = ring.deg
        D = dh * n
        mats = [c.mul_matrix() for c in zp]
        rows = []
        for j in range(n):
            for i in range(dh):
                row = [0] * D
                for jj in range(n):
                    mr = mats[jj][i]
                    base = ((j + jj) % n) * dh
                    for tpos in range(dh):
                        if mr[tpos]:
                            row[base + tpos] = (row[base + tpos] + mr[tpos]) % ring.pk
                rows.append(row)
        q = QuotientModPK(rows, D, p, k)
        if q.deep_count() == 0:
            return FiniteModuleStructure.from_factors(
                [p**e for e in sorted(q.torsion_exponents())]
            )
        if 2 * k > max_precision:
            for t in range(n):
                if eval_at_twist(t).is_zero():
                    raise ZeroIndex(
                        f"the element pairs to zero against wild twist {t}; "
                        "the quotient is infinite"
                    )
            raise PrecisionExhausted(
                f"invariant factors exceed p^{max_precision // 2} but the "
                "element is a nonzerodivisor; raise max_precision"
            )
        k = min(2 * k, max_precision)


def lambda_quotient_order(xi, precision=None, max_precision=160):
    """Structure of O[Gamma]/(xi) as a finite Z_p-module.

    Multiplication by xi is a Z_p-linear map on the free module of rank
    deg(O) * p^{r-1}; the cokernel comes from the mod-p^k Smith form via
    group_ring_quotient_structure.
    """
    if xi.denominator_exponent:
        raise NotIntegral("quotient order needs integral coefficients")
    k = precision or max(xi.precision, 12)
    return group_ring_quotient_structure(
        xi.p, xi.ring.m, xi.exact_coeffs, k, xi.eval_character,
        max_precision=max_precision,
    )


def order_exponent(structure, p):
    """Total p-exponent of a finite p-module structure (0 when trivial)."""
    e = 0
    for f in structure.invariant_factors:
        v = _vp(f, p)
        assert p**v == f, "invariant factor is not a p-power"
        e += v
    return e


# ---------------------------------------------------------------------------
# Galois conjugacy over Q_p and the bridge to plus-quotient characters
# ---------------------------------------------------------------------------


def qp_conjugacy_classes(chars, p):
    """Partition characters into conjugacy classes over Q_p.

    The absolute Galois group of Q_p acts on values by Frobenius
    (zeta -> zeta^p) on roots of unity of order prime to p and by the full
    automorphism group on p-power roots, so chi ~ chi^u exactly for units
    u that are a power of p modulo the tame part of the order and
    arbitrary modulo its p-part.  Works on any character object with
    `order` and `**`. Returns a list of orbits (each sorted), sorted by
    their smallest member's key.
    """

    def key(c):
        ch = c.char if isinstance(c, DirichletCharacter) else c
        return ch.exps

    remaining = {key(c): c for c in chars}
    classes = []
    while remaining:
        _, c = min(remaining.items())
        m = c.order
        mp = 1
        while m % p == 0:
            m //= p
            mp *= p
        orbit = {}
        seen_i = set()
        i = 0
        fr = 1 % max(m, 1)
        while fr not in seen_i:
            seen_i.add(fr)
            for w in range(mp):
                if mp > 1 and w % p == 0:
                    continue
                u = _crt(fr, m, w if mp > 1 else 0, mp)
                if m * mp > 1 and gcd(u, m * mp) != 1:
                    continue
                cu = c**u if m * mp > 1 else c
                orbit[key(cu)] = cu
            fr = (fr * p) % m if m > 1 else fr
            if m <= 1:
                break
        members = [orbit[kk] for kk in sorted(orbit)]
        for kk in orbit:
            remaining.pop(kk, None)
        classes.append(members)
    classes.sort(key=lambda orb: key(orb[0]))
    return classes


def dirichlet_to_pm_character(theta, group):
    """The character of (Z/M)^x/{+-1} matching an even Dirichlet character
    mod M (elements of the quotient group are the smaller residue lifts)."""
    if not theta.is_even:
        raise ValueError("only even characters factor through the quotient by -1")
    e = theta.group.exponent
    exps = []
    for y, d in zip(group.factor_generators, group.cyclic_orders):
        r = theta.value_exponent(y)
        num = r * d
        assert num % e == 0, "even character must factor through the quotient"
        exps.append((num // e) % d)
    return Character(group, tuple(exps))
