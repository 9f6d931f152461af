"""Exact integer/rational linear algebra and its mod-p^k companion.

Two lanes run through the whole library:

* an exact lane over Z and Q (Smith normal form with transforms, sparse
  Gaussian elimination preferring unit pivots so Fractions only appear when
  genuinely needed), used for rank contracts and small structure; and
* a certified mod-p^k lane (Howell form, diagonalization with column
  transforms) for p-adic module structure, where any invariant factor that
  reaches p^k is reported to the caller instead of being silently truncated.

The mod-p^k inner loops delegate to eislab.kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from eislab import kernels
from eislab.errors import NotInvertible

# Fill ratio above which new matrices are stored densely.
DENSITY_THRESHOLD = 0.2


class IntMatrix:
    """Immutable integer matrix with density-chosen storage.

    Storage is a representation detail: equality, hashing and serialization
    are by shape and entries only.
    """

    __slots__ = ("rows", "cols", "_dense", "_sparse")

    def __init__(self, rows, cols, dense=None, sparse=None):
        self.rows = rows
        self.cols = cols
        self._dense = dense
        self._sparse = sparse

    @classmethod
    def from_rows(cls, data, threshold=None):
        rows = len(data)
        cols = len(data[0]) if rows else 0
        nnz = sum(1 for r in data for x in r if x)
        total = rows * cols
        thr = DENSITY_THRESHOLD if threshold is None else threshold
        if total and nnz / total <= thr:
            sparse = {}
            for i, r in enumerate(data):
                for j, x in enumerate(r):
                    if x:
                        sparse[(i, j)] = int(x)
            return cls(rows, cols, sparse=sparse)
        return cls(rows, cols, dense=tuple(tuple(int(x) for x in r) for r in data))

    @classmethod
    def from_triplets(cls, rows, cols, triplets, threshold=None):
        data = [[0] * cols for _ in range(rows)]
        for i, j, v in triplets:
            data[i][j] = int(v)
        return cls.from_rows(data, threshold=threshold)

    @classmethod
    def identity(cls, n):
        return cls.from_rows([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols, sparse={})

    def get(self, i, j):
        if self._dense is not None:
            return self._dense[i][j]
        return self._sparse.get((i, j), 0)

    def dense_rows(self):
        """Mutable list-of-lists copy."""
        if self._dense is not None:
            return [list(r) for r in self._dense]
        out = [[0] * self.cols for _ in range(self.rows)]
        for (i, j), v in self._sparse.items():
            out[i][j] = v
        return out

    def to_triplets(self):
        """Sorted (row, col, str(entry)) triplets — the wire format."""
        if self._dense is not None:
            items = [
                (i, j, v)
                for i, r in enumerate(self._dense)
                for j, v in enumerate(r)
                if v
            ]
        else:
            items = [(i, j, v) for (i, j), v in self._sparse.items()]
        return [(i, j, str(v)) for i, j, v in sorted(items)]

    @property
    def is_sparse(self):
        return self._sparse is not None

    def transpose(self):
        return IntMatrix.from_rows(
            [[self.get(i, j) for i in range(self.rows)] for j in range(self.cols)]
        )

    def mul(self, other):
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        a = self.dense_rows()
        b = other.dense_rows()
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                row.append(sum(a[i][t] * b[t][j] for t in range(self.cols)))
            out.append(row)
        return IntMatrix.from_rows(out)

    def stack(self, other):
        if self.cols != other.cols:
            raise ValueError("shape mismatch")
        return IntMatrix.from_rows(self.dense_rows() + other.dense_rows())

    def __eq__(self, other):
        if not isinstance(other, IntMatrix):
            return NotImplemented
        if (self.rows, self.cols) != (other.rows, other.cols):
            return False
        return self.dense_rows() == other.dense_rows()

    def __hash__(self):
        return hash((self.rows, self.cols, tuple(self.to_triplets())))

    def __repr__(self):
        return f"IntMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class SNFResult:
    """D = L·M·R with L, R unimodular, D diagonal with d_i | d_{i+1} >= 0."""

    D: IntMatrix
    L: IntMatrix
    R: IntMatrix
    rank: int

    def diagonal(self):
        return [self.D.get(i, i) for i in range(min(self.D.rows, self.D.cols))]


def _row_sub(a, i, t, q):
    at = a[t]
    a[i] = [x - q * y for x, y in zip(a[i], at)]


def _col_sub(a, j, t, q):
    for row in a:
        row[j] -= q * row[t]


def snf(m: IntMatrix) -> SNFResult:
    """Smith normal form over Z with both transforms.

    Pivot rule: minimal |entry| in the remaining submatrix, ties by (row,
    col); the textbook reduce-and-swap loop, then a divisibility sweep so the
    diagonal is a chain.
    """
    a = m.dense_rows()
    rows, cols = m.rows, m.cols
    lmat = [[1 if i == j else 0 for j in range(rows)] for i in range(rows)]
    rmat = [[1 if i == j else 0 for j in range(cols)] for i in range(cols)]
    dim = min(rows, cols)
    t = 0
    while t < dim:
        pivot = None
        for i in range(t, rows):
            for j in range(t, cols):
                x = a[i][j]
                if x and (pivot is None or abs(x) < pivot[0]):
                    pivot = (abs(x), i, j)
        if pivot is None:
            break
        _, pi, pj = pivot
        if pi != t:
            a[t], a[pi] = a[pi], a[t]
            lmat[t], lmat[pi] = lmat[pi], lmat[t]
        if pj != t:
            for row in a:
                row[t], row[pj] = row[pj], row[t]
            for row in rmat:
                row[t], row[pj] = row[pj], row[t]
        while True:
            # clear column t
            dirty = True
            while dirty:
                dirty = False
                for i in range(rows):
                    if i != t and a[i][t]:
                        q = a[i][t] // a[t][t]
                        if q:
                            _row_sub(a, i, t, q)
                            _row_sub(lmat, i, t, q)
                        if a[i][t]:
                            a[t], a[i] = a[i], a[t]
                            lmat[t], lmat[i] = lmat[i], lmat[t]
                            dirty = True
            # clear row t
            dirty = True
            row_clean = True
            while dirty:
                dirty = False
                for j in range(cols):
                    if j != t and a[t][j]:
                        q = a[t][j] // a[t][t]
                        if q:
                            _col_sub(a, j, t, q)
                            _col_sub(rmat, j, t, q)
                        if a[t][j]:
                            for row in a:
                                row[t], row[j] = row[j], row[t]
                            for row in rmat:
                                row[t], row[j] = row[j], row[t]
                            dirty = True
                            row_clean = False
            if not row_clean:
                # the column may have been dirtied by the swaps; go again
                if any(a[i][t] for i in range(rows) if i != t):
                    continue
            # divisibility sweep
            d = a[t][t]
            bad = None
            for i in range(t + 1, rows):
                for j in range(t + 1, cols):
                    if a[i][j] % d:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            _row_sub(a, t, bad, -1)
            _row_sub(lmat, t, bad, -1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            lmat[t] = [-x for x in lmat[t]]
        t += 1
    rank = sum(1 for i in range(dim) if a[i][i])
    return SNFResult(
        D=IntMatrix.from_rows(a),
        L=IntMatrix.from_rows(lmat),
        R=IntMatrix.from_rows(rmat),
        rank=rank,
    )


@dataclass(frozen=True)
class FiniteModuleStructure:
    """Cyclic decomposition: Z^free_rank + sum Z/d_i with d_1 | d_2 | ...

    invariant_factors keeps only factors > 1; order is the product, or None
    when free_rank > 0.
    """

    invariant_factors: tuple
    free_rank: int
    order: object  # int or None

    def __post_init__(self):
        for i in range(len(self.invariant_factors) - 1):
            if self.invariant_factors[i + 1] % self.invariant_factors[i]:
                raise ValueError("invariant factors must form a divisibility chain")
        if any(d <= 1 for d in self.invariant_factors):
            raise ValueError("invariant factors must exceed 1")

    @classmethod
    def from_factors(cls, factors, free_rank=0):
        factors = tuple(int(d) for d in factors if d > 1)
        order = None
        if free_rank == 0:
            order = 1
            for d in factors:
                order *= d
        return cls(invariant_factors=factors, free_rank=free_rank, order=order)


def cokernel_structure(m: IntMatrix, ambient_rank=None) -> FiniteModuleStructure:
    """Structure of Z^cols / (row span of m)."""
    n = m.cols if ambient_rank is None else ambient_rank
    if ambient_rank is not None and ambient_rank != m.cols:
        raise ValueError("ambient rank must equal column count")
    res = snf(m)
    diag = [d for d in res.diagonal() if d]
    return FiniteModuleStructure.from_factors(diag, free_rank=n - len(diag))


# ---------------------------------------------------------------------------
# mod-p^k lane
# ---------------------------------------------------------------------------


class HowellSpan:
    """Incrementally accumulated row span in (Z/p^k)^width, kept in Howell
    form so membership and span equality are exact."""

    def __init__(self, width, p, k):
        self.width = width
        self.p = p
        self.k = k
        self.pk = p**k
        self.basis = []
        self.pivot_cols = []
        self.pivot_exps = []

    def insert_rows(self, rows):
        if not rows:
            return
        kern = kernels.for_modulus(self.pk)
        self.basis, self.pivot_cols, self.pivot_exps = kern.howell_form(
            self.basis + [list(r) for r in rows], self.width, self.p, self.k, self.pk
        )

    def reduce(self, row):
        kern = kernels.for_modulus(self.pk)
        return kern.reduce_rows(
            [list(row)],
            self.basis,
            self.pivot_cols,
            self.pivot_exps,
            self.p,
            self.k,
            self.pk,
        )[0]

    def reduce_many(self, rows):
        kern = kernels.for_modulus(self.pk)
        return kern.reduce_rows(
            [list(r) for r in rows],
            self.basis,
            self.pivot_cols,
            self.pivot_exps,
            self.p,
            self.k,
            self.pk,
        )

    def contains(self, row):
        return not any(self.reduce(row))

    def fingerprint(self):
        """Span-intrinsic tuple (Howell form is canonical)."""
        return tuple(tuple(r) for r in self.basis)


class QuotientModPK:
    """(Z/p^k)^n modulo a row span, with projection and lift maps.

    Coordinates: z = x·R; coordinate i lives in Z/p^{e_i}.  Exponents e_i = k
    mean the working precision cannot tell Z/p^{>=k} from a free line; the
    caller applies its own policy (usually PrecisionExhausted).
    """

    def __init__(self, span_rows, n, p, k):
        self.n = n
        self.p = p
        self.k = k
        self.pk = p**k
        kern = kernels.for_modulus(self.pk)
        rows = [list(r) for r in span_rows] if span_rows else [[0] * n]
        exps, rmat, rinv = kern.snf_modpk_transforms(rows, p, k, self.pk)
        full = list(exps) + [k] * (n - len(exps))
        self.exponents = full
        self._rmat = rmat
        self._rinv = rinv
        self.kept = [i for i, e in enumerate(full) if e > 0]
        self.kept_moduli = [p ** full[i] for i in self.kept]

    def project(self, x):
        """Ambient row vector -> quotient coordinates (kept positions)."""
        kern = kernels.for_modulus(self.pk)
        z = kern.matmul_mod([list(x)], self._rmat, self.pk)[0]
        return [z[i] % m for i, m in zip(self.kept, self.kept_moduli)]

    def project_rows(self, rows):
        kern = kernels.for_modulus(self.pk)
        zs = kern.matmul_mod([list(r) for r in rows], self._rmat, self.pk)
        return [
            [z[i] % m for i, m in zip(self.kept, self.kept_moduli)] for z in zs
        ]

    def lift(self, idx):
        """Ambient representative of the idx-th kept quotient generator."""
        return list(self._rinv[self.kept[idx]])

    def torsion_exponents(self):
        return [e for e in self.exponents if 0 < e < self.k]

    def deep_count(self):
        """Coordinates indistinguishable from free at this precision."""
        return sum(1 for e in self.exponents if e == self.k)


# ---------------------------------------------------------------------------
# exact sparse elimination over Q
# ---------------------------------------------------------------------------


class SparseExactEliminator:
    """Gaussian elimination on sparse rows, exact over Q.

    Pivots prefer entries of absolute value 1 so arithmetic stays in Z; a
    Fraction pivot is only used when no unit entry exists.  Deterministic for
    a fixed insertion order.
    """

    def __init__(self, ncols):
        self.ncols = ncols
        self.pivots = {}  # col -> normalized row dict (pivot coeff 1)

    def _reduce(self, row):
        row = dict(row)
        while True:
            cols = [c for c in row if row[c] and c in self.pivots]
            if not cols:
                break
            c = min(cols)
            coeff = row[c]
            prow = self.pivots[c]
            for cc, vv in prow.items():
                nv = row.get(cc, 0) - coeff * vv
                if nv:
                    row[cc] = nv
                else:
                    row.pop(cc, None)
        return {c: v for c, v in row.items() if v}

    def add_row(self, row):
        """Insert a relation; returns True if the rank increased."""
        row = self._reduce(row)
        if not row:
            return False
        units = sorted(c for c, v in row.items() if v == 1 or v == -1)
        col = units[0] if units else min(row)
        coeff = row[col]
        if coeff == 1:
            norm = row
        elif coeff == -1:
            norm = {c: -v for c, v in row.items()}
        else:
            coeff = Fraction(coeff)
            norm = {c: Fraction(v) / coeff for c, v in row.items()}
        self.pivots[col] = norm
        return True

    @property
    def rank(self):
        return len(self.pivots)

    def basis_columns(self):
        return [c for c in range(self.ncols) if c not in self.pivots]

    def reduce_vector(self, row):
        """Express `row` in the quotient: coordinates over non-pivot columns."""
        return self._reduce(row)


def exact_left_kernel(rows, width):
    """Basis of {x : sum_i x_i * rows_i = 0} over Q.

    rows are sparse dicts over `width` columns; returns kernel vectors as
    dicts over row indices (exact Fractions/ints).
    """
    elim = {}  # pivot col -> (main row dict, aug dict)
    kernel = []
    for idx, row in enumerate(rows):
        main = dict(row)
        aug = {idx: 1}
        while True:
            cols = [c for c in main if main[c] and c in elim]
            if not cols:
                break
            c = min(cols)
            coeff = main[c]
            prow, paug = elim[c]
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
        main = {c: v for c, v in main.items() if v}
        if not main:
            kernel.append({c: v for c, v in aug.items() if v})
            continue
        units = sorted(c for c, v in main.items() if v == 1 or v == -1)
        col = units[0] if units else min(main)
        coeff = main[col]
        if coeff == -1:
            main = {c: -v for c, v in main.items()}
            aug = {c: -v for c, v in aug.items()}
        elif coeff != 1:
            coeff = Fraction(coeff)
            main = {c: Fraction(v) / coeff for c, v in main.items()}
            aug = {c: Fraction(v) / coeff for c, v in aug.items()}
        elim[col] = (main, aug)
    return kernel


def charpoly_exact(mat):
    """Characteristic polynomial of a square matrix over Q
    (Faddeev–LeVerrier); returns coefficients [1, c_1, ..., c_n] for
    x^n + c_1 x^{n-1} + ... + c_n."""
    n = len(mat)
    a = [[Fraction(x) for x in row] for row in mat]
    m = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)]
    for step in range(1, n + 1):
        am = [
            [sum(a[i][t] * m[t][j] for t in range(n)) for j in range(n)]
            for i in range(n)
        ]
        tr = sum(am[i][i] for i in range(n))
        c = -tr / step
        coeffs.append(c)
        m = [[am[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def solve_exact(mat, rhs):
    """Solve x·mat = rhs over Q (row-vector convention); raises NotInvertible
    if the system is inconsistent or underdetermined on the relevant space."""
    nrows = len(mat)
    aug = [dict((j, v) for j, v in enumerate(row) if v) for row in mat]
    kernel_cols = exact_left_kernel(aug + [dict((j, v) for j, v in enumerate(rhs) if v)], len(mat[0]) if mat else 0)
    for vec in kernel_cols:
        if vec.get(nrows):
            scale = vec[nrows]
            return [-Fraction(vec.get(i, 0)) / scale for i in range(nrows)]
    raise NotInvertible("no solution expressing rhs over the given rows")
