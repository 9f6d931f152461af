"""Pure-Python kernels: reference implementations of the hot loops.

`eislab.kernels` selects between this module and the compiled twin
``eislab._kernels`` at import time.  Both expose the same functions with
list-of-lists ints in [0, mod) as the exchange format, and results must be
bit-identical.  Straight-line integer arithmetic only; no object state.
"""

from __future__ import annotations

BACKEND = "python"


def matmul_mod(a, b, mod):
    """(m x k) @ (k x n) with entries reduced mod `mod`."""
    m = len(a)
    k = len(b)
    n = len(b[0]) if k else 0
    bt = [[b[i][j] for i in range(k)] for j in range(n)]
    out = []
    for i in range(m):
        ai = a[i]
        row = []
        for j in range(n):
            bj = bt[j]
            acc = 0
            for t in range(k):
                acc += ai[t] * bj[t]
            row.append(acc % mod)
        out.append(row)
    return out


def _val(x, p, k):
    """p-adic valuation of x mod p^k, with v(0) = k."""
    if x == 0:
        return k
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def howell_form(rows, width, p, k, pk):
    """Howell basis of the span of `rows` in (Z/p^k)^width.

    Returns (basis, pivot_cols, pivot_exps): rows with strictly increasing
    pivot columns, pivot entry exactly p^a, zeros left of each pivot, entries
    above a pivot reduced into [0, p^a), and Howell closure (p^{k-a} times a
    pivot row lies in the span of the later rows).  This is the canonical
    form of the submodule, so the output depends only on the span.
    """
    piv_col_to_slot = {}
    basis = []  # parallel lists: (col, exp, row)
    work = [[x % pk for x in r] for r in rows]
    while work:
        r = work.pop()
        start = 0
        while True:
            c = -1
            for j in range(start, width):
                if r[j]:
                    c = j
                    break
            if c < 0:
                break
            start = c
            v = _val(r[c], p, k)
            slot = piv_col_to_slot.get(c)
            if slot is None:
                unit = (r[c] // (p**v)) % pk
                inv = pow(unit, -1, pk)
                r = [(x * inv) % pk for x in r]
                basis.append((c, v, r))
                piv_col_to_slot[c] = len(basis) - 1
                if v > 0:
                    tail = [(x * p ** (k - v)) % pk for x in r]
                    if any(tail):
                        work.append(tail)
                break
            bc, bv, brow = basis[slot]
            if bv <= v:
                q = r[c] // (p**bv)
                r = [(x - q * y) % pk for x, y in zip(r, brow)]
            else:
                unit = (r[c] // (p**v)) % pk
                inv = pow(unit, -1, pk)
                r = [(x * inv) % pk for x in r]
                basis[slot] = (c, v, r)
                if v > 0:
                    tail = [(x * p ** (k - v)) % pk for x in r]
                    if any(tail):
                        work.append(tail)
                work.append(brow)
                break
    order = sorted(range(len(basis)), key=lambda s: basis[s][0])
    basis = [basis[s] for s in order]
    for j in range(len(basis)):
        cj, aj, rowj = basis[j]
        paj = p**aj
        for i in range(j):
            ci, ai, rowi = basis[i]
            q = rowi[cj] // paj
            if q:
                basis[i] = (ci, ai, [(u - q * w) % pk for u, w in zip(rowi, rowj)])
    return (
        [r for (_, _, r) in basis],
        [c for (c, _, _) in basis],
        [a for (_, a, _) in basis],
    )


def reduce_rows(rows, basis, pivot_cols, pivot_exps, p, k, pk):
    """Greedy remainders of `rows` against a Howell basis.

    Remainder zero iff the row lies in the span (this needs the Howell
    closure, not just row echelon).  Nonzero remainders live in the canonical
    complement coordinates used for quotient bookkeeping.
    """
    out = []
    ppow = [p**a for a in pivot_exps]
    for r in rows:
        r = [x % pk for x in r]
        for s, c in enumerate(pivot_cols):
            x = r[c]
            if x == 0:
                continue
            pa = ppow[s]
            if x % pa:
                continue
            q = x // pa
            brow = basis[s]
            r = [(u - q * w) % pk for u, w in zip(r, brow)]
        out.append(r)
    return out


def hecke_counts(mats, lookup, m_level, gen_pairs, ngens):
    """For each (u,v) in gen_pairs, count images (u,v)·(a b; c d) over mats.

    lookup is a flat m_level*m_level list mapping u*m_level+v to a generator
    index, or -1 when gcd(u,v,M) > 1 (image dropped).  Returns plain integer
    count rows; the caller reduces them into whatever ring it works in.
    """
    out = []
    for (u, v) in gen_pairs:
        counts = [0] * ngens
        for (a, b, c, d) in mats:
            x = (u * a + v * c) % m_level
            y = (u * b + v * d) % m_level
            g = lookup[x * m_level + y]
            if g >= 0:
                counts[g] += 1
        out.append(counts)
    return out


def hecke_image_mod(mats, lookup, m_level, gen_pairs, ngens, vectors, mod):
    """Images of a stack of vectors under the counted family action.

    Equivalent to matmul_mod(vectors, hecke_counts(...), mod); vectors are
    rows over the gen_pairs positions.  Kept as one call so the compiled
    lane can scatter directly instead of materializing the count matrix.
    """
    counts = hecke_counts(mats, lookup, m_level, gen_pairs, ngens)
    return matmul_mod(vectors, counts, mod)


def snf_modpk_transforms(mat, p, k, pk):
    """Diagonalize mat over Z/p^k: L·mat·R = diag(p^e) with L invertible.

    Returns (exps, R, Rinv) where exps is the nondecreasing list of diagonal
    exponents (length min(m, n), k meaning zero mod p^k) and R, Rinv are the
    mutually inverse column transforms.  L is not returned: row span, hence
    quotient structure, does not need it.  Pivot rule: globally minimal
    valuation, ties broken by (row, col).
    """
    a = [[x % pk for x in row] for row in mat]
    m = len(a)
    n = len(a[0]) if m else 0
    r_mat = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    rinv = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    exps = []
    t = 0
    dim = min(m, n)
    while t < dim:
        best = None
        for i in range(t, m):
            row = a[i]
            for j in range(t, n):
                x = row[j]
                if x:
                    v = _val(x, p, k)
                    if best is None or v < best[0]:
                        best = (v, i, j)
                        if v == 0:
                            break
            if best is not None and best[0] == 0:
                break
        if best is None:
            break
        v, bi, bj = best
        if bi != t:
            a[t], a[bi] = a[bi], a[t]
        if bj != t:
            for row in a:
                row[t], row[bj] = row[bj], row[t]
            for row in r_mat:
                row[t], row[bj] = row[bj], row[t]
            rinv[t], rinv[bj] = rinv[bj], rinv[t]
        pv = p**v
        unit = (a[t][t] // pv) % pk
        inv = pow(unit, -1, pk)
        for i in range(m):
            if a[i][t]:
                a[i][t] = (a[i][t] * inv) % pk
        for i in range(n):
            if r_mat[i][t]:
                r_mat[i][t] = (r_mat[i][t] * inv) % pk
        rinv[t] = [(x * unit) % pk for x in rinv[t]]
        at = a[t]
        for i in range(t + 1, m):
            x = a[i][t]
            if x:
                q = x // pv
                a[i] = [(y - q * z) % pk for y, z in zip(a[i], at)]
        for j in range(t + 1, n):
            x = at[j]
            if x:
                q = x // pv
                for i in range(m):
                    if a[i][t]:
                        a[i][j] = (a[i][j] - q * a[i][t]) % pk
                for i in range(n):
                    if r_mat[i][t]:
                        r_mat[i][j] = (r_mat[i][j] - q * r_mat[i][t]) % pk
                rinv[t] = [(y + q * z) % pk for y, z in zip(rinv[t], rinv[j])]
        exps.append(v)
        t += 1
    while len(exps) < dim:
        exps.append(k)
    return exps, r_mat, rinv
