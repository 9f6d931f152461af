"""Finite-level power series over a p-adic coefficient ring.

A series lives in R[T]/J for R = ZpRing(p, k, m) and J one of:

* ``("cyclic", r)`` — J = ((1+T)^{p^{r-1}} - 1), the level-r group algebra of
  a cyclic p-group with generator 1+T;
* ``("power", n)`` — J = (T^n), a plain truncation.

Every series carries `prec`, the exponent c <= k such that its coefficients
are certified modulo p^c.  Operations never report more precision than the
inputs justify: differentiation in the cyclic model costs min(c, r-1) since
the ideal generator's derivative has valuation r-1, and evaluation at
T = u^s - 1 is certified modulo p^{min(c, r + v_p(s))} because representatives
differ by multiples of u^{s p^{r-1}} - 1.
"""

from __future__ import annotations

from fractions import Fraction

from eislab.errors import PrecisionExhausted
from eislab.rings import ZpElt, ZpRing


def log_u_unit_part(p, k):
    """log(u)/p for u the 1-unit with p-adic logarithm p/(p-1); this is the
    unit 1/(p-1) in Z/p^k."""
    return pow(p - 1, -1, p**k)


def u_value(p, k):
    """u = exp(p/(p-1)) mod p^k: the 1-unit whose logarithm is p/(p-1),
    i.e. (1-p^{-1})^{-1}; computed by the exponential series (p odd)."""
    pk = p**k
    x = Fraction(p, p - 1)
    # v_p(x^j/j!) = j - v_p(j!) >= j - (j-1)/(p-1), so terms beyond
    # J = ceil((k(p-1)-1)/(p-2)) vanish mod p^k
    bound = (k * (p - 1) - 1 + (p - 3)) // (p - 2) + 1
    total = 0
    term = Fraction(1)
    for j in range(bound + 1):
        num, den = term.numerator, term.denominator
        v = 0
        while num and num % p == 0:
            num //= p
            v += 1
        while den % p == 0:
            den //= p
            v -= 1
        assert v >= 0, "exp series term not integral"
        if v < k:
            total = (total + pow(p, v, pk) * num * pow(den, -1, pk)) % pk
        term = term * x / (j + 1)
    return total % pk


class PowerSeries:
    """Coefficients are ZpElts of one ring; index = power of T."""

    def __init__(self, ring, coeffs, ideal, prec=None):
        self.ring = ring
        self.ideal = ideal  # ("cyclic", r) | ("power", n)
        self.prec = ring.k if prec is None else min(prec, ring.k)
        if self.prec < 1:
            raise PrecisionExhausted("series has no certified digits left")
        coeffs = [c if isinstance(c, ZpElt) else ring.elt(c) for c in coeffs]
        length = self.length()
        if len(coeffs) > length:
            coeffs = self._reduce(coeffs)
        self.coeffs = tuple(coeffs) + (ring.zero(),) * (length - len(coeffs))

    # -- ideal helpers -------------------------------------------------------

    def length(self):
        kind, a = self.ideal
        if kind == "cyclic":
            return self.ring.p ** (a - 1)
        return a

    def _ideal_poly(self):
        """Monic generator of the ideal as ZpElt list (cyclic model only)."""
        kind, r = self.ideal
        assert kind == "cyclic"
        n = self.ring.p ** (r - 1)
        # (1+T)^n - 1
        from math import comb

        out = [self.ring.elt(comb(n, i)) for i in range(n + 1)]
        out[0] = out[0] - self.ring.one()
        return out

    def _reduce(self, coeffs):
        kind, a = self.ideal
        if kind == "power":
            return list(coeffs[: a])
        mod = self._ideal_poly()
        n = len(mod) - 1
        work = list(coeffs)
        for i in range(len(work) - n - 1, -1, -1):
            c = work[i + n]
            if not c.is_zero():
                for j in range(n + 1):
                    work[i + j] = work[i + j] - c * mod[j]
        return work[:n]

    # -- arithmetic ----------------------------------------------------------

    def _compat(self, other):
        if self.ring is not other.ring or self.ideal != other.ideal:
            raise ValueError("series live in different rings")

    def __add__(self, other):
        self._compat(other)
        return PowerSeries(
            self.ring,
            [a + b for a, b in zip(self.coeffs, other.coeffs)],
            self.ideal,
            min(self.prec, other.prec),
        )

    def __sub__(self, other):
        self._compat(other)
        return PowerSeries(
            self.ring,
            [a - b for a, b in zip(self.coeffs, other.coeffs)],
            self.ideal,
            min(self.prec, other.prec),
        )

    def __mul__(self, other):
        self._compat(other)
        raw = [self.ring.zero()] * (2 * self.length())
        for i, a in enumerate(self.coeffs):
            if not a.is_zero():
                for j, b in enumerate(other.coeffs):
                    if not b.is_zero():
                        raw[i + j] = raw[i + j] + a * b
        return PowerSeries(self.ring, raw, self.ideal, min(self.prec, other.prec))

    def scale(self, scalar, valuation_gain=0):
        """Multiply by a ring scalar; `valuation_gain` raises the certificate
        when the scalar is divisible by p^gain (caller-asserted)."""
        if not isinstance(scalar, ZpElt):
            scalar = self.ring.elt(scalar)
        return PowerSeries(
            self.ring,
            [c * scalar for c in self.coeffs],
            self.ideal,
            min(self.prec + valuation_gain, self.ring.k),
        )

    def mul_one_plus_t(self):
        shifted = [self.ring.zero()] + list(self.coeffs)
        for i, c in enumerate(self.coeffs):
            shifted[i] = shifted[i] + c
        return PowerSeries(self.ring, shifted, self.ideal, self.prec)

    def derivative(self):
        """d/dT.  In the cyclic model the class is only defined modulo the
        ideal generator, whose derivative has p-valuation r-1."""
        kind, a = self.ideal
        d = [self.coeffs[i] * i for i in range(1, len(self.coeffs))]
        if kind == "cyclic":
            new_prec = min(self.prec, a - 1)
            if new_prec < 1:
                raise PrecisionExhausted(
                    "derivative at level r certifies only r-1 digits"
                )
            return PowerSeries(self.ring, d, self.ideal, new_prec)
        return PowerSeries(self.ring, d, ("power", a - 1), self.prec)

    def s_derivative(self, p):
        """The chain-rule derivative in s under T = u^s - 1 with
        log u = (1 - p^{-1})^{-1}: xi' = (1-p^{-1})^{-1} (1+T) dxi/dT.

        log u = p/(p-1) has valuation 1, so the certificate gains one digit
        after the derivative's r-1 cap.
        """
        d = self.derivative().mul_one_plus_t()
        unit = log_u_unit_part(p, self.ring.k)
        return d.scale(self.ring.elt(p * unit), valuation_gain=1)

    def evaluate(self, t_val, extra_prec=None):
        """Horner evaluation at a ZpElt t; returns (value, certified_prec).

        For the cyclic model the caller passes `extra_prec` = v_p of the
        ideal generator at this point (r + v_p(s) for t = u^s - 1); plain
        truncations use v_p(t) * length.
        """
        if not isinstance(t_val, ZpElt):
            t_val = self.ring.elt(t_val)
        acc = self.ring.zero()
        for c in reversed(self.coeffs):
            acc = acc * t_val + c
        kind, a = self.ideal
        if kind == "cyclic":
            if extra_prec is None:
                raise ValueError("cyclic evaluation needs the ideal valuation")
            cert = min(self.prec, extra_prec)
        else:
            cert = min(self.prec, t_val.coord_val() * a)
        if cert < 1:
            raise PrecisionExhausted("no certified digits at this point")
        return acc, cert

    def evaluate_at_us_minus_1(self, s, p=None):
        """Value at T = u^s - 1 (u as in `u_value`); certificate
        min(prec, r + v_p(s)) in the cyclic model."""
        p = p or self.ring.p
        k = self.ring.k
        u = u_value(p, k)
        t = (pow(u, s, p**k) - 1) % p**k
        kind, r = self.ideal
        if kind == "cyclic":
            vs = 0
            ss = abs(s)
            while ss and ss % p == 0:
                ss //= p
                vs += 1
            extra = k if s == 0 else r + vs
            return self.evaluate(self.ring.elt(t), extra_prec=extra)
        return self.evaluate(self.ring.elt(t))

    def weierstrass_invariants(self):
        """(mu, lambda): mu = min valuation among certified coefficients,
        lambda = first index attaining it."""
        best = None
        best_idx = None
        for i, c in enumerate(self.coeffs):
            v = c.coord_val() if not c.is_zero() else self.ring.k
            v = min(v, self.prec)
            if v < self.prec and (best is None or v < best):
                best = v
                best_idx = i
        if best is None:
            raise PrecisionExhausted(
                "all coefficients vanish to certified precision"
            )
        return best, best_idx

    def __eq__(self, other):
        return (
            isinstance(other, PowerSeries)
            and self.ring is other.ring
            and self.ideal == other.ideal
            and self.coeffs == other.coeffs
        )

    def reduce_precision(self, c):
        return PowerSeries(self.ring, list(self.coeffs), self.ideal, min(self.prec, c))

    def coefficients_mod_certified(self):
        """Coefficient coordinate lists reduced mod p^prec (reportable)."""
        q = self.ring.p**self.prec
        return [[x % q for x in c.coeffs] for c in self.coeffs]

    def project_to_level(self, r_new):
        """Reduce a cyclic-model series to a lower level (T -> T along the
        natural surjection of group algebras)."""
        kind, r = self.ideal
        assert kind == "cyclic" and 1 <= r_new <= r
        return PowerSeries(self.ring, list(self.coeffs), ("cyclic", r_new), self.prec)

    @staticmethod
    def from_gamma_coeffs(ring, coeffs_by_power, r):
        """sum_j c_j (1+T)^j in the level-r cyclic model (gamma = 1+T).

        Exponents wrap mod p^{r-1} in the (1+T)-power basis, then the sum is
        expanded into the T-basis by a Pascal-row walk (integer arithmetic on
        raw coordinate vectors; binomials reduced mod p^k as they grow).
        """
        n = ring.p ** (r - 1)
        dh, pk = ring.deg, ring.pk
        buckets = [None] * n
        for j, c in enumerate(coeffs_by_power):
            if not isinstance(c, ZpElt):
                c = ring.elt(c)
            if not c.is_zero():
                cur = buckets[j % n]
                buckets[j % n] = c if cur is None else cur + c
        acc = [[0] * dh for _ in range(n)]
        row = [1]
        for j in range(n):
            b = buckets[j]
            if b is not None and not b.is_zero():
                bc = b.coeffs
                for i, binom in enumerate(row):
                    if binom:
                        ai = acc[i]
                        for t in range(dh):
                            ai[t] = (ai[t] + bc[t] * binom) % pk
            if j + 1 < n:
                row = [1] + [(row[i - 1] + row[i]) % pk for i in range(1, j + 1)] + [1]
        return PowerSeries(ring, [ring.elt(a) for a in acc], ("cyclic", r))

    def __repr__(self):
        return (
            f"PowerSeries(len={self.length()}, ideal={self.ideal}, "
            f"prec={self.prec})"
        )
