# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: int64 twins of the pure-Python reference loops.

Same exchange format (list-of-lists ints) and bit-identical results as
``eislab._kernels_py``.  Entries are held in int64 and products formed in
128-bit intermediates, so every function refuses a modulus at or above
2**62; the dispatcher ``eislab.kernels`` routes larger moduli to the pure
twin before they get here.
"""

from libc.stdlib cimport free, malloc, realloc

cdef extern from *:
    ctypedef long long i128 "__int128"

ctypedef long long i64

BACKEND = "cython"

cdef i64 _MOD_LIMIT = (<i64> 1) << 62


cdef inline i64* _alloc(Py_ssize_t count) except NULL:
    cdef i64* buf = <i64*> malloc((count if count > 0 else 1) * sizeof(i64))
    if buf == NULL:
        raise MemoryError()
    return buf


cdef inline int _check_mod(i64 mod) except -1:
    if mod <= 0 or mod >= _MOD_LIMIT:
        raise ValueError("modulus out of range for the compiled kernels")
    return 0


cdef int _load_rows(object rows, Py_ssize_t m, Py_ssize_t n, i64 mod,
                    i64* buf) except -1:
    cdef Py_ssize_t i, j
    cdef i64 x
    cdef object row
    for i in range(m):
        row = rows[i]
        for j in range(n):
            x = row[j]
            x = x % mod
            if x < 0:
                x += mod
            buf[i * n + j] = x
    return 0


cdef object _dump_rows(i64* buf, Py_ssize_t m, Py_ssize_t n):
    cdef Py_ssize_t i, j
    out = []
    for i in range(m):
        row = []
        for j in range(n):
            row.append(buf[i * n + j])
        out.append(row)
    return out


cdef inline i64 _val(i64 x, i64 p, i64 k):
    cdef i64 v = 0
    if x == 0:
        return k
    while x % p == 0:
        x = x // p
        v += 1
    return v


cdef inline i64 _ipow(i64 p, i64 e):
    cdef i64 r = 1
    while e > 0:
        r *= p
        e -= 1
    return r


cdef inline i64 _inv_mod(i64 a, i64 m):
    # extended Euclid; a must be a unit mod m (callers divide out p first)
    cdef i128 old_r = a % m
    cdef i128 r = m
    cdef i128 old_s = 1
    cdef i128 s = 0
    cdef i128 q, tmp
    while r != 0:
        q = old_r / r
        tmp = old_r - q * r
        old_r = r
        r = tmp
        tmp = old_s - q * s
        old_s = s
        s = tmp
    old_s = old_s % m
    if old_s < 0:
        old_s += m
    return <i64> old_s


def matmul_mod(a, b, mod):
    """(m x k) @ (k x n) with entries reduced mod `mod`."""
    cdef i64 md = mod
    _check_mod(md)
    cdef Py_ssize_t m = len(a)
    cdef Py_ssize_t kdim = len(b)
    cdef Py_ssize_t n = len(b[0]) if kdim else 0
    cdef Py_ssize_t i, j, t, cnt, nmax
    cdef i64 av
    cdef i64* ab = NULL
    cdef i64* bb = NULL
    cdef i64* brow
    cdef i128* acc = NULL
    cdef i128 denom, cap, mdd = md
    out = []
    try:
        ab = _alloc(m * kdim)
        bb = _alloc(kdim * n)
        _load_rows(a, m, kdim, md, ab)
        _load_rows(b, kdim, n, md, bb)
        acc = <i128*> malloc((n if n > 0 else 1) * sizeof(i128))
        if acc == NULL:
            raise MemoryError()
        # products stay below md**2; reduce the row accumulator often
        # enough that it never crosses 2**126
        denom = 1
        if md > 1:
            denom = (<i128> (md - 1)) * (md - 1)
        cap = ((<i128> 1) << 126) / denom
        if cap > (<i128> 1) << 60:
            cap = (<i128> 1) << 60
        nmax = <Py_ssize_t> (<i64> cap)
        if nmax < 1:
            nmax = 1
        for i in range(m):
            for j in range(n):
                acc[j] = 0
            cnt = 0
            for t in range(kdim):
                av = ab[i * kdim + t]
                if av:
                    brow = bb + t * n
                    for j in range(n):
                        acc[j] += (<i128> av) * brow[j]
                    cnt += 1
                    if cnt == nmax:
                        for j in range(n):
                            acc[j] = acc[j] % mdd
                        cnt = 0
            row = []
            for j in range(n):
                row.append(<i64> (acc[j] % mdd))
            out.append(row)
        return out
    finally:
        free(ab)
        free(bb)
        free(acc)


def howell_form(rows, width, p, k, pk):
    """Howell basis of the span of `rows` in (Z/p^k)^width.

    Same canonical output as the reference implementation: strictly
    increasing pivot columns, pivot entry exactly p^a, entries above a
    pivot reduced below it, and Howell closure.
    """
    cdef i64 P = p, K = k, PK = pk
    _check_mod(PK)
    cdef Py_ssize_t W = width
    cdef Py_ssize_t nrows = len(rows)
    cdef Py_ssize_t nb = 0, nw = 0, wcap = nrows + 4
    cdef Py_ssize_t i, j, t, c, slot, si, sj, start
    cdef i64 v, bv, pv, unit, inv, mult, q, aj, paj
    cdef i128 x128
    cdef bint nonzero
    cdef i64* bas = NULL
    cdef i64* bcol = NULL
    cdef i64* bexp = NULL
    cdef Py_ssize_t* slot_of = NULL
    cdef Py_ssize_t* order = NULL
    cdef i64* wbuf = NULL
    cdef i64* nbuf
    cdef i64* cur = NULL
    cdef i64* tmp = NULL
    cdef i64* tl = NULL
    cdef i64* brow
    cdef i64* rowi
    cdef i64* rowj
    try:
        bas = _alloc(W * W)
        bcol = _alloc(W)
        bexp = _alloc(W)
        cur = _alloc(W)
        tmp = _alloc(W)
        tl = _alloc(W)
        wbuf = _alloc(wcap * W)
        slot_of = <Py_ssize_t*> malloc((W if W > 0 else 1) * sizeof(Py_ssize_t))
        order = <Py_ssize_t*> malloc((W if W > 0 else 1) * sizeof(Py_ssize_t))
        if slot_of == NULL or order == NULL:
            raise MemoryError()
        for j in range(W):
            slot_of[j] = -1
        _load_rows(rows, nrows, W, PK, wbuf)
        nw = nrows
        while nw > 0:
            nw -= 1
            for j in range(W):
                cur[j] = wbuf[nw * W + j]
            start = 0
            while True:
                c = -1
                for j in range(start, W):
                    if cur[j]:
                        c = j
                        break
                if c < 0:
                    break
                start = c
                v = _val(cur[c], P, K)
                slot = slot_of[c]
                if slot < 0:
                    pv = _ipow(P, v)
                    unit = (cur[c] // pv) % PK
                    inv = _inv_mod(unit, PK)
                    for j in range(W):
                        cur[j] = <i64> (((<i128> cur[j]) * inv) % PK)
                    brow = bas + nb * W
                    for j in range(W):
                        brow[j] = cur[j]
                    bcol[nb] = c
                    bexp[nb] = v
                    slot_of[c] = nb
                    nb += 1
                    if v > 0:
                        mult = _ipow(P, K - v)
                        nonzero = False
                        for j in range(W):
                            tl[j] = <i64> (((<i128> cur[j]) * mult) % PK)
                            if tl[j]:
                                nonzero = True
                        if nonzero:
                            if nw == wcap:
                                wcap = wcap * 2
                                nbuf = <i64*> realloc(wbuf, wcap * W * sizeof(i64))
                                if nbuf == NULL:
                                    raise MemoryError()
                                wbuf = nbuf
                            for j in range(W):
                                wbuf[nw * W + j] = tl[j]
                            nw += 1
                    break
                bv = bexp[slot]
                if bv <= v:
                    q = cur[c] // _ipow(P, bv)
                    brow = bas + slot * W
                    for j in range(W):
                        x128 = (<i128> cur[j]) - (<i128> q) * brow[j]
                        x128 = x128 % PK
                        if x128 < 0:
                            x128 += PK
                        cur[j] = <i64> x128
                else:
                    pv = _ipow(P, v)
                    unit = (cur[c] // pv) % PK
                    inv = _inv_mod(unit, PK)
                    for j in range(W):
                        cur[j] = <i64> (((<i128> cur[j]) * inv) % PK)
                    brow = bas + slot * W
                    for j in range(W):
                        tmp[j] = brow[j]
                        brow[j] = cur[j]
                    bexp[slot] = v
                    if v > 0:
                        mult = _ipow(P, K - v)
                        nonzero = False
                        for j in range(W):
                            tl[j] = <i64> (((<i128> cur[j]) * mult) % PK)
                            if tl[j]:
                                nonzero = True
                        if nonzero:
                            if nw == wcap:
                                wcap = wcap * 2
                                nbuf = <i64*> realloc(wbuf, wcap * W * sizeof(i64))
                                if nbuf == NULL:
                                    raise MemoryError()
                                wbuf = nbuf
                            for j in range(W):
                                wbuf[nw * W + j] = tl[j]
                            nw += 1
                    if nw == wcap:
                        wcap = wcap * 2
                        nbuf = <i64*> realloc(wbuf, wcap * W * sizeof(i64))
                        if nbuf == NULL:
                            raise MemoryError()
                        wbuf = nbuf
                    for j in range(W):
                        wbuf[nw * W + j] = tmp[j]
                    nw += 1
                    break
        for i in range(nb):
            order[i] = i
        # insertion sort by pivot column (columns are distinct)
        for i in range(1, nb):
            si = order[i]
            j = i - 1
            while j >= 0 and bcol[order[j]] > bcol[si]:
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = si
        for j in range(nb):
            sj = order[j]
            aj = bexp[sj]
            paj = _ipow(P, aj)
            rowj = bas + sj * W
            for i in range(j):
                rowi = bas + order[i] * W
                q = rowi[bcol[sj]] // paj
                if q:
                    for t in range(W):
                        x128 = (<i128> rowi[t]) - (<i128> q) * rowj[t]
                        x128 = x128 % PK
                        if x128 < 0:
                            x128 += PK
                        rowi[t] = <i64> x128
        basis_out = []
        cols_out = []
        exps_out = []
        for j in range(nb):
            sj = order[j]
            rowj = bas + sj * W
            row = []
            for t in range(W):
                row.append(rowj[t])
            basis_out.append(row)
            cols_out.append(<object> (bcol[sj]))
            exps_out.append(<object> (bexp[sj]))
        return basis_out, cols_out, exps_out
    finally:
        free(bas)
        free(bcol)
        free(bexp)
        free(cur)
        free(tmp)
        free(tl)
        free(wbuf)
        free(slot_of)
        free(order)


def reduce_rows(rows, basis, pivot_cols, pivot_exps, p, k, pk):
    """Greedy remainders of `rows` against a Howell basis."""
    cdef i64 P = p, K = k, PK = pk
    _check_mod(PK)
    cdef Py_ssize_t nrows = len(rows)
    cdef Py_ssize_t nb = len(basis)
    cdef Py_ssize_t W = 0
    if nrows:
        W = len(rows[0])
    elif nb:
        W = len(basis[0])
    cdef Py_ssize_t i, j, s
    cdef i64 x, q
    cdef i128 x128
    cdef i64* bb = NULL
    cdef i64* cur = NULL
    cdef i64* ppow = NULL
    cdef i64* pcol = NULL
    cdef i64* brow
    out = []
    try:
        bb = _alloc(nb * W)
        cur = _alloc(W)
        ppow = _alloc(nb)
        pcol = _alloc(nb)
        _load_rows(basis, nb, W, PK, bb)
        for s in range(nb):
            ppow[s] = _ipow(P, pivot_exps[s])
            pcol[s] = pivot_cols[s]
        for i in range(nrows):
            row = rows[i]
            for j in range(W):
                x = row[j]
                x = x % PK
                if x < 0:
                    x += PK
                cur[j] = x
            for s in range(nb):
                x = cur[pcol[s]]
                if x == 0:
                    continue
                if x % ppow[s]:
                    continue
                q = x // ppow[s]
                brow = bb + s * W
                for j in range(W):
                    x128 = (<i128> cur[j]) - (<i128> q) * brow[j]
                    x128 = x128 % PK
                    if x128 < 0:
                        x128 += PK
                    cur[j] = <i64> x128
            rout = []
            for j in range(W):
                rout.append(cur[j])
            out.append(rout)
        return out
    finally:
        free(bb)
        free(cur)
        free(ppow)
        free(pcol)


def hecke_counts(mats, lookup, m_level, gen_pairs, ngens):
    """Image counts of each (u,v) in gen_pairs under the matrix family."""
    cdef i64 M = m_level
    cdef Py_ssize_t nm = len(mats)
    cdef Py_ssize_t npairs = len(gen_pairs)
    cdef Py_ssize_t NG = ngens
    cdef Py_ssize_t i, t, s
    cdef i64 u, vv, x, y, g
    cdef i64* mbuf = NULL
    cdef i64* lk = NULL
    cdef i64* counts = NULL
    out = []
    try:
        mbuf = _alloc(4 * nm)
        lk = _alloc(M * M)
        counts = _alloc(NG)
        for t in range(nm):
            quad = mats[t]
            mbuf[4 * t] = quad[0]
            mbuf[4 * t + 1] = quad[1]
            mbuf[4 * t + 2] = quad[2]
            mbuf[4 * t + 3] = quad[3]
        for i in range(M * M):
            lk[i] = lookup[i]
        for s in range(npairs):
            pair = gen_pairs[s]
            u = pair[0]
            vv = pair[1]
            for i in range(NG):
                counts[i] = 0
            for t in range(nm):
                x = <i64> (((<i128> u) * mbuf[4 * t]
                            + (<i128> vv) * mbuf[4 * t + 2]) % M)
                if x < 0:
                    x += M
                y = <i64> (((<i128> u) * mbuf[4 * t + 1]
                            + (<i128> vv) * mbuf[4 * t + 3]) % M)
                if y < 0:
                    y += M
                g = lk[x * M + y]
                if g >= 0:
                    counts[g] += 1
            crow = []
            for i in range(NG):
                crow.append(counts[i])
            out.append(crow)
        return out
    finally:
        free(mbuf)
        free(lk)
        free(counts)


def hecke_image_mod(mats, lookup, m_level, gen_pairs, ngens, vectors, mod):
    """Images of a stack of vectors under the counted family action.

    Scatter form of matmul_mod(vectors, hecke_counts(...), mod): the count
    matrix is never materialized.
    """
    cdef i64 md = mod
    _check_mod(md)
    cdef i64 M = m_level
    cdef Py_ssize_t nm = len(mats)
    cdef Py_ssize_t nsrc = len(gen_pairs)
    cdef Py_ssize_t NG = ngens
    cdef Py_ssize_t R = len(vectors)
    cdef Py_ssize_t g, t, r, j
    cdef i64 u, vv, x, y, gi, o
    cdef bint raw_ok
    cdef i64* mbuf = NULL
    cdef i64* lk = NULL
    cdef i64* pu = NULL
    cdef i64* pv = NULL
    cdef i64* VT = NULL
    cdef i64* outT = NULL
    cdef i64* nz = NULL
    cdef i64* vg
    cdef i64* ot
    out = []
    try:
        mbuf = _alloc(4 * nm)
        lk = _alloc(M * M)
        pu = _alloc(nsrc)
        pv = _alloc(nsrc)
        VT = _alloc(nsrc * R)
        outT = _alloc(NG * R)
        nz = _alloc(nsrc)
        for t in range(nm):
            quad = mats[t]
            mbuf[4 * t] = quad[0]
            mbuf[4 * t + 1] = quad[1]
            mbuf[4 * t + 2] = quad[2]
            mbuf[4 * t + 3] = quad[3]
        for j in range(M * M):
            lk[j] = lookup[j]
        for g in range(nsrc):
            pair = gen_pairs[g]
            pu[g] = pair[0]
            pv[g] = pair[1]
        for r in range(R):
            row = vectors[r]
            for g in range(nsrc):
                x = row[g]
                x = x % md
                if x < 0:
                    x += md
                VT[g * R + r] = x
        for j in range(NG * R):
            outT[j] = 0
        for g in range(nsrc):
            nz[g] = 0
            for r in range(R):
                if VT[g * R + r]:
                    nz[g] = 1
                    break
        # raw accumulation is safe when even nsrc*nm hits into one cell
        # cannot overflow int64; otherwise reduce as we add
        raw_ok = ((<i128> nsrc) * nm * (md - 1) + (md - 1)) < ((<i128> 1) << 62)
        for g in range(nsrc):
            if not nz[g]:
                continue
            u = pu[g]
            vv = pv[g]
            vg = VT + g * R
            for t in range(nm):
                x = <i64> (((<i128> u) * mbuf[4 * t]
                            + (<i128> vv) * mbuf[4 * t + 2]) % M)
                if x < 0:
                    x += M
                y = <i64> (((<i128> u) * mbuf[4 * t + 1]
                            + (<i128> vv) * mbuf[4 * t + 3]) % M)
                if y < 0:
                    y += M
                gi = lk[x * M + y]
                if gi >= 0:
                    ot = outT + gi * R
                    if raw_ok:
                        for r in range(R):
                            ot[r] += vg[r]
                    else:
                        for r in range(R):
                            o = ot[r] + vg[r]
                            if o >= md:
                                o -= md
                            ot[r] = o
        if raw_ok:
            for j in range(NG * R):
                outT[j] = outT[j] % md
        for r in range(R):
            row = []
            for t in range(NG):
                row.append(outT[t * R + r])
            out.append(row)
        return out
    finally:
        free(mbuf)
        free(lk)
        free(pu)
        free(pv)
        free(VT)
        free(outT)
        free(nz)


def snf_modpk_transforms(mat, p, k, pk):
    """Diagonalize mat over Z/p^k: returns (exps, R, Rinv).

    Same pivot rule and transform bookkeeping as the reference: globally
    minimal valuation, ties broken by (row, col).
    """
    cdef i64 P = p, K = k, PK = pk
    _check_mod(PK)
    cdef Py_ssize_t m = len(mat)
    cdef Py_ssize_t n = len(mat[0]) if m else 0
    cdef Py_ssize_t dim = m if m < n else n
    cdef Py_ssize_t t = 0
    cdef Py_ssize_t i, j, bi, bj, i2
    cdef bint have_best
    cdef i64 x, v, bv, pv, unit, inv, q, swp
    cdef i128 x128
    cdef i64* a = NULL
    cdef i64* r_mat = NULL
    cdef i64* rinv = NULL
    cdef i64* at
    cdef i64* arow
    exps = []
    try:
        a = _alloc(m * n)
        r_mat = _alloc(n * n)
        rinv = _alloc(n * n)
        _load_rows(mat, m, n, PK, a)
        for i in range(n):
            for j in range(n):
                r_mat[i * n + j] = 1 if i == j else 0
                rinv[i * n + j] = 1 if i == j else 0
        while t < dim:
            have_best = False
            bv = 0
            bi = 0
            bj = 0
            for i in range(t, m):
                arow = a + i * n
                for j in range(t, n):
                    x = arow[j]
                    if x:
                        v = _val(x, P, K)
                        if (not have_best) or v < bv:
                            have_best = True
                            bv = v
                            bi = i
                            bj = j
                            if v == 0:
                                break
                if have_best and bv == 0:
                    break
            if not have_best:
                break
            v = bv
            if bi != t:
                for j in range(n):
                    swp = a[t * n + j]
                    a[t * n + j] = a[bi * n + j]
                    a[bi * n + j] = swp
            if bj != t:
                for i in range(m):
                    swp = a[i * n + t]
                    a[i * n + t] = a[i * n + bj]
                    a[i * n + bj] = swp
                for i in range(n):
                    swp = r_mat[i * n + t]
                    r_mat[i * n + t] = r_mat[i * n + bj]
                    r_mat[i * n + bj] = swp
                for j in range(n):
                    swp = rinv[t * n + j]
                    rinv[t * n + j] = rinv[bj * n + j]
                    rinv[bj * n + j] = swp
            pv = _ipow(P, v)
            unit = (a[t * n + t] // pv) % PK
            inv = _inv_mod(unit, PK)
            for i in range(m):
                if a[i * n + t]:
                    a[i * n + t] = <i64> (((<i128> a[i * n + t]) * inv) % PK)
            for i in range(n):
                if r_mat[i * n + t]:
                    r_mat[i * n + t] = <i64> (
                        ((<i128> r_mat[i * n + t]) * inv) % PK
                    )
            for j in range(n):
                rinv[t * n + j] = <i64> (((<i128> rinv[t * n + j]) * unit) % PK)
            at = a + t * n
            for i in range(t + 1, m):
                x = a[i * n + t]
                if x:
                    q = x // pv
                    arow = a + i * n
                    for j in range(n):
                        x128 = (<i128> arow[j]) - (<i128> q) * at[j]
                        x128 = x128 % PK
                        if x128 < 0:
                            x128 += PK
                        arow[j] = <i64> x128
            for j in range(t + 1, n):
                x = at[j]
                if x:
                    q = x // pv
                    for i in range(m):
                        if a[i * n + t]:
                            x128 = (<i128> a[i * n + j]) - (
                                (<i128> q) * a[i * n + t]
                            )
                            x128 = x128 % PK
                            if x128 < 0:
                                x128 += PK
                            a[i * n + j] = <i64> x128
                    for i in range(n):
                        if r_mat[i * n + t]:
                            x128 = (<i128> r_mat[i * n + j]) - (
                                (<i128> q) * r_mat[i * n + t]
                            )
                            x128 = x128 % PK
                            if x128 < 0:
                                x128 += PK
                            r_mat[i * n + j] = <i64> x128
                    for i2 in range(n):
                        x128 = (<i128> rinv[t * n + i2]) + (
                            (<i128> q) * rinv[j * n + i2]
                        )
                        rinv[t * n + i2] = <i64> (x128 % PK)
            exps.append(<object> v)
            t += 1
        while len(exps) < dim:
            exps.append(<object> K)
        return exps, _dump_rows(r_mat, n, n), _dump_rows(rinv, n, n)
    finally:
        free(a)
        free(r_mat)
        free(rinv)
