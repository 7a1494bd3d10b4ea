"""Compiled vector kernels over GF(2^61 - 1).

Arrays hold canonical field elements as ``numpy.uint64``.  Products are
formed from 32-bit halves so that nothing overflows 64 bits:

    a*b = hi*2^64 + mid*2^32 + lo,   2^64 = 8 (mod q),   2^61 = 1 (mod q)

Everything here is deterministic and single-threaded.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
Q64 = np.uint64((1 << 61) - 1)
_M32 = np.uint64(0xFFFFFFFF)
_M29 = np.uint64((1 << 29) - 1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)

ADD, MUL, COPY, SUB = 0, 1, 2, 3


@njit(inline="always", cache=True)
def mulmod(a, b):
    al = a & _M32
    ah = a >> _S32
    bl = b & _M32
    bh = b >> _S32
    lo = al * bl
    mid = ah * bl + al * bh  # < 2^63
    hi = ah * bh  # < 2^58
    s = (hi << _S3) + (mid >> _S29) + ((mid & _M29) << _S32) + (lo >> _S61) + (lo & Q64)
    s = (s & Q64) + (s >> _S61)
    if s >= Q64:
        s -= Q64
    return s


@njit(inline="always", cache=True)
def addmod(a, b):
    s = a + b
    if s >= Q64:
        s -= Q64
    return s


@njit(inline="always", cache=True)
def submod(a, b):
    if a >= b:
        return a - b
    return a + Q64 - b


@njit(inline="always", cache=True)
def apply_op(op, x, y):
    if op == 0:
        return addmod(x, y)
    if op == 1:
        return mulmod(x, y)
    if op == 2:
        return x
    return submod(x, y)


# ---------------------------------------------------------------- elementwise


@njit(cache=True)
def vmul(a, b):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], b[i])
    return out


@njit(cache=True)
def vmul_scalar(a, s):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], s)
    return out


@njit(cache=True)
def vadd(a, b):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = addmod(a[i], b[i])
    return out


@njit(cache=True)
def vsub(a, b):
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        out[i] = submod(a[i], b[i])
    return out


@njit(cache=True)
def vsum(a):
    s = _ZERO
    for i in range(a.shape[0]):
        s = addmod(s, a[i])
    return s


@njit(cache=True)
def vdot(a, b):
    s = _ZERO
    for i in range(a.shape[0]):
        s = addmod(s, mulmod(a[i], b[i]))
    return s


@njit(cache=True)
def vpow(a, e):
    """Elementwise a^e for a fixed exponent e >= 0."""
    out = np.empty(a.shape[0], dtype=np.uint64)
    for i in range(a.shape[0]):
        r = _ONE
        base = a[i]
        k = e
        while k > 0:
            if k & 1:
                r = mulmod(r, base)
            base = mulmod(base, base)
            k >>= 1
        out[i] = r
    return out


# ---------------------------------------------------------------- table binds


@njit(cache=True)
def fold_high(t, r, out):
    """out[i] = (1-r)*t[i] + r*t[h+i], binding the most significant variable.

    ``out`` may alias ``t[:h]`` (in-place bind)."""
    h = t.shape[0] // 2
    for i in range(h):
        lo = t[i]
        out[i] = addmod(lo, mulmod(r, submod(t[h + i], lo)))
    return out


@njit(cache=True)
def fold_low(t, r, out):
    """out[i] = (1-r)*t[2i] + r*t[2i+1], binding the least significant variable.

    ``out`` may alias ``t[:h]`` (writes never overtake reads)."""
    h = t.shape[0] // 2
    for i in range(h):
        lo = t[2 * i]
        out[i] = addmod(lo, mulmod(r, submod(t[2 * i + 1], lo)))
    return out


@njit(cache=True)
def beta_table(z):
    """Table of beta(z, p) = chi_p(z) for all boolean p, p_1 most significant.

    Built by staged doubling: each stage splits every entry e into
    e*(1-z_j) and e*z_j.  Total writes 2 + 4 + ... + 2^v < 2^(v+1)."""
    v = z.shape[0]
    n = 1 << v
    out = np.empty(n, dtype=np.uint64)
    out[0] = _ONE
    size = 1
    for j in range(v):
        zj = z[j]
        for b in range(size - 1, -1, -1):
            e = out[b]
            hi = mulmod(e, zj)
            out[2 * b + 1] = hi
            out[2 * b] = submod(e, hi)
        size *= 2
    return out


@njit(cache=True)
def chi_accumulate(idx, vals, w):
    """sum_k vals[k] * chi_{idx[k]}(w) (indices read with bit 1 = MSB)."""
    v = w.shape[0]
    ow = np.empty(v, dtype=np.uint64)
    for j in range(v):
        ow[j] = submod(_ONE, w[j])
    s = _ZERO
    for k in range(idx.shape[0]):
        c = vals[k]
        x = idx[k]
        for j in range(v):
            bit = (x >> np.uint64(v - 1 - j)) & _ONE
            if bit:
                c = mulmod(c, w[j])
            else:
                c = mulmod(c, ow[j])
        s = addmod(s, c)
    return s


@njit(inline="always", cache=True)
def _chi_index(x, w, ow):
    v = w.shape[0]
    c = _ONE
    for j in range(v):
        if (x >> np.uint64(v - 1 - j)) & _ONE:
            c = mulmod(c, w[j])
        else:
            c = mulmod(c, ow[j])
    return c


@njit(cache=True)
def chi_accumulate_dense(vals, offset, w):
    """sum_k vals[k] * chi_{offset+k}(w): one streaming pass, O(v) space."""
    v = w.shape[0]
    ow = np.empty(v, dtype=np.uint64)
    for j in range(v):
        ow[j] = submod(_ONE, w[j])
    s = _ZERO
    for k in range(vals.shape[0]):
        if vals[k] != _ZERO:
            s = addmod(s, mulmod(vals[k], _chi_index(np.uint64(offset + k), w, ow)))
    return s


@njit(cache=True)
def chi_accumulate_dense2(a, b, offset, wa, wb):
    """Two accumulators over one pass through equally long chunks of a and b."""
    v = wa.shape[0]
    oa = np.empty(v, dtype=np.uint64)
    ob = np.empty(v, dtype=np.uint64)
    for j in range(v):
        oa[j] = submod(_ONE, wa[j])
        ob[j] = submod(_ONE, wb[j])
    sa = _ZERO
    sb = _ZERO
    for k in range(a.shape[0]):
        x = np.uint64(offset + k)
        if a[k] != _ZERO:
            sa = addmod(sa, mulmod(a[k], _chi_index(x, wa, oa)))
        if b[k] != _ZERO:
            sb = addmod(sb, mulmod(b[k], _chi_index(x, wb, ob)))
    return sa, sb


# ---------------------------------------------------------------- circuits


@njit(cache=True)
def eval_layer(prev, in1, in2, op):
    n = in1.shape[0]
    out = np.empty(n, dtype=np.uint64)
    for g in range(n):
        out[g] = apply_op(op[g], prev[in1[g]], prev[in2[g]])
    return out


# ---------------------------------------------------------------- sum-check rounds


@njit(cache=True)
def round_linear(t):
    """Evaluations at 0 and 1 of sum_b T(X, b) for a multilinear table."""
    h = t.shape[0] // 2
    s0 = _ZERO
    s1 = _ZERO
    for i in range(h):
        s0 = addmod(s0, t[i])
        s1 = addmod(s1, t[h + i])
    return s0, s1


@njit(cache=True)
def round_product2(a, b):
    """Evaluations at 0,1,2 of sum_x A(X,x)*B(X,x) for two multilinear tables."""
    h = a.shape[0] // 2
    s0 = _ZERO
    s1 = _ZERO
    s2 = _ZERO
    for i in range(h):
        a0 = a[i]
        a1 = a[h + i]
        b0 = b[i]
        b1 = b[h + i]
        s0 = addmod(s0, mulmod(a0, b0))
        s1 = addmod(s1, mulmod(a1, b1))
        a2 = submod(addmod(a1, a1), a0)
        b2 = submod(addmod(b1, b1), b0)
        s2 = addmod(s2, mulmod(a2, b2))
    return s0, s1, s2


@njit(cache=True)
def layer_round(acc, beta_lo, beta_hi, blo, bhi, use_lo, mask, mval,
                t1, stride1, w1, seg1, t2, stride2, w2, seg2, op):
    """One branch's contribution to a layer sum-check message.

    For every live suffix b (those agreeing with ``mval`` on ``mask``):
      beta(t, b) = blo[t]*beta_lo[b] + bhi[t]*beta_hi[b]
      V_k(t, b)  = sum_c w_k[t, c] * t_k[c*stride_k + idx_k(b)]
    and acc[t] += beta(t, b) * op(V_1, V_2).  idx_k(b) is assembled from
    bit segments (b_shift, t_shift, width_mask, neg_mask)."""
    L = beta_hi.shape[0]
    nt = acc.shape[0]
    n1 = w1.shape[1]
    n2 = w2.shape[1]
    ns1 = seg1.shape[0]
    ns2 = seg2.shape[0]
    for b in range(L):
        ub = np.uint64(b)
        if (ub & mask) != mval:
            continue
        idx1 = _ZERO
        for s in range(ns1):
            bits = ((ub >> seg1[s, 0]) & seg1[s, 2]) ^ seg1[s, 3]
            idx1 |= bits << seg1[s, 1]
        idx2 = _ZERO
        if op != 2:
            for s in range(ns2):
                bits = ((ub >> seg2[s, 0]) & seg2[s, 2]) ^ seg2[s, 3]
                idx2 |= bits << seg2[s, 1]
        bh = beta_hi[b]
        bl = beta_lo[b]
        for t in range(nt):
            if n1 == 1:
                v1 = t1[idx1]
            else:
                v1 = _ZERO
                for c in range(n1):
                    v1 = addmod(v1, mulmod(w1[t, c], t1[np.uint64(c) * stride1 + idx1]))
            v2 = _ZERO
            if op != 2:
                if n2 == 1:
                    v2 = t2[idx2]
                else:
                    for c in range(n2):
                        v2 = addmod(v2, mulmod(w2[t, c], t2[np.uint64(c) * stride2 + idx2]))
            f = apply_op(op, v1, v2)
            be = mulmod(bhi[t], bh)
            if use_lo:
                be = addmod(be, mulmod(blo[t], bl))
            acc[t] = addmod(acc[t], mulmod(be, f))
    return acc


# ---------------------------------------------------------------- data-parallel layers


@njit(cache=True)
def dp_round(acc, fac, op, ia0, ia1, ca0, ca1, ta, ib0, ib1, cb0, cb1, tb, beta2):
    """Per-gate round sum for B side-by-side copies.

    For gate g and node t the two in-neighbour rows are
      A_g(t) = ca0[t]*ta[ia0[g]] + ca1[t]*ta[ia1[g]]   (rows over the copies)
    and likewise B_g(t); acc[t] += fac[g, t] * sum_c beta2[c] * op(A_g(t)[c], B_g(t)[c])."""
    G = fac.shape[0]
    nt = acc.shape[0]
    nc = beta2.shape[0]
    for g in range(G):
        a0 = ia0[g]
        a1 = ia1[g]
        b0 = ib0[g]
        b1 = ib1[g]
        o = op[g]
        for t in range(nt):
            f = fac[g, t]
            if f == _ZERO:
                continue
            s = _ZERO
            for c in range(nc):
                x = addmod(mulmod(ca0[t], ta[a0, c]), mulmod(ca1[t], ta[a1, c]))
                y = addmod(mulmod(cb0[t], tb[b0, c]), mulmod(cb1[t], tb[b1, c]))
                s = addmod(s, mulmod(beta2[c], apply_op(o, x, y)))
            acc[t] = addmod(acc[t], mulmod(f, s))
    return acc


@njit(cache=True)
def fold_rows_high(t, r):
    """Bind the most significant row variable of a 2-D table (new array)."""
    h = t.shape[0] // 2
    c = t.shape[1]
    out = np.empty((h, c), dtype=np.uint64)
    for i in range(h):
        for k in range(c):
            lo = t[i, k]
            out[i, k] = addmod(lo, mulmod(r, submod(t[h + i, k], lo)))
    return out


@njit(cache=True)
def round_gate_mix(c, a, b, cadd, cmul, csub):
    """Evaluations at 0..3 of sum_x C(X,x)*(cadd*(A+B) + cmul*A*B + csub*(A-B))."""
    h = c.shape[0] // 2
    out = np.zeros(4, dtype=np.uint64)
    for i in range(h):
        c0 = c[i]
        c1 = c[h + i]
        a0 = a[i]
        a1 = a[h + i]
        b0 = b[i]
        b1 = b[h + i]
        dc = submod(c1, c0)
        da = submod(a1, a0)
        db = submod(b1, b0)
        ct = c0
        at = a0
        bt = b0
        for t in range(4):
            w = addmod(mulmod(cadd, addmod(at, bt)), mulmod(cmul, mulmod(at, bt)))
            w = addmod(w, mulmod(csub, submod(at, bt)))
            out[t] = addmod(out[t], mulmod(ct, w))
            ct = addmod(ct, dc)
            at = addmod(at, da)
            bt = addmod(bt, db)
    return out


# ---------------------------------------------------------------- pattern matching


@njit(cache=True)
def window_sum(bi, bk, t, carry, flip):
    """sum_{I,K} bi[I] * bk[K] * t[((I + K + carry) mod M) xor flip], M = len(t)."""
    mask = np.int64(t.shape[0] - 1)
    s = _ZERO
    for i in range(bi.shape[0]):
        x = bi[i]
        if x == _ZERO:
            continue
        inner = _ZERO
        for k in range(bk.shape[0]):
            inner = addmod(inner, mulmod(bk[k], t[((i + k + carry) & mask) ^ flip]))
        s = addmod(s, mulmod(x, inner))
    return s


# ---------------------------------------------------------------- matrices


@njit(cache=True)
def vec_mat(x, m):
    """x^T M for an (r x c) matrix."""
    r, c = m.shape
    out = np.zeros(c, dtype=np.uint64)
    for i in range(r):
        xi = x[i]
        if xi == 0:
            continue
        for k in range(c):
            out[k] = addmod(out[k], mulmod(xi, m[i, k]))
    return out


@njit(cache=True)
def mat_vec(m, x):
    """M x for an (r x c) matrix."""
    r, c = m.shape
    out = np.zeros(r, dtype=np.uint64)
    for i in range(r):
        s = _ZERO
        for k in range(c):
            s = addmod(s, mulmod(m[i, k], x[k]))
        out[i] = s
    return out


@njit(cache=True)
def naive_matmul(a, b):
    """Schoolbook O(n^3) product over the field."""
    n, kk = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.uint64)
    for i in range(n):
        for k in range(kk):
            aik = a[i, k]
            for j in range(m):
                out[i, j] = addmod(out[i, j], mulmod(aik, b[k, j]))
    return out


@njit(cache=True)
def blocked_matmul(a, b, block):
    """Schoolbook product with loops tiled into block x block tiles."""
    n, kk = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.uint64)
    for i0 in range(0, n, block):
        for k0 in range(0, kk, block):
            for j0 in range(0, m, block):
                for i in range(i0, min(i0 + block, n)):
                    for k in range(k0, min(k0 + block, kk)):
                        aik = a[i, k]
                        for j in range(j0, min(j0 + block, m)):
                            out[i, j] = addmod(out[i, j], mulmod(aik, b[k, j]))
    return out


@njit(cache=True)
def fold_rows_inplace(m, r, rows):
    """Bind the top row-index variable of the first ``rows`` rows of m."""
    h = rows // 2
    c = m.shape[1]
    for i in range(h):
        for k in range(c):
            lo = m[i, k]
            m[i, k] = addmod(lo, mulmod(r, submod(m[h + i, k], lo)))


@njit(cache=True)
def fold_cols_inplace(m, r, cols):
    """Bind the top column-index variable of the first ``cols`` columns of m."""
    h = cols // 2
    n = m.shape[0]
    for i in range(n):
        for k in range(h):
            lo = m[i, k]
            m[i, k] = addmod(lo, mulmod(r, submod(m[i, h + k], lo)))


@njit(cache=True)
def scatter_add(acc, idx, vals):
    """acc[idx[k]] += vals[k] for every k (frequency-vector aggregation)."""
    for k in range(idx.shape[0]):
        acc[idx[k]] = addmod(acc[idx[k]], vals[k])
