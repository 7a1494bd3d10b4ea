"""Special-purpose matrix-multiplication protocol.

The prover opens the claimed product D* (computed by any algorithm).  The
verifier picks r1, r2 and evaluates D̃*(r1, r2) in one streaming pass; the
claim is then reduced by a single log n-variable sum-check on

    g(p3) = Ã(r1, p3) * B̃(p3, r2),

since D̃(r1, r2) = sum over boolean p3 of g(p3) for D = AB.  The prover's
extra work is O(n^2): one row restriction of A, one column restriction of B
and a linear-time product sum-check.  Chaining the same step k times checks
M^(2^k) while transmitting only the final matrix.
"""

from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .mle import WorkCounter, build_chi_table, eval_mle_table, log2_exact, point_array
from .sumcheck import sumcheck_verify
from .transcript import CLAIMS, LINE, OUTPUT, ROUND, Channel, Message, Reject, Verdict, run_protocol

PROTOCOL_MATMUL = 3
PROTOCOL_MATPOW = 4
ROW_CHUNK_ELEMENTS = 1 << 16


def as_matrix(m) -> np.ndarray:
    """Square uint64 matrix of canonical field elements with a power-of-two side."""
    arr = np.asarray(m)
    if arr.dtype != np.uint64:
        arr = np.asarray([[F.encode_signed(int(x)) for x in row] for row in m], dtype=np.uint64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square matrix")
    log2_exact(arr.shape[0])
    return arr


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return K.naive_matmul(as_matrix(a), as_matrix(b))


def blocked_matmul(a: np.ndarray, b: np.ndarray, block: int = 64) -> np.ndarray:
    return K.blocked_matmul(as_matrix(a), as_matrix(b), block)


def matrix_mle(m: np.ndarray, r1: Sequence[int], r2: Sequence[int]) -> int:
    """M̃(r1, r2) from the dense table (rows are the high-order variables)."""
    return eval_mle_table(m.reshape(-1), list(r1) + list(r2))


def _row_chunks(n: int) -> int:
    return max(1, ROW_CHUNK_ELEMENTS // n)


def stream_matrix_mle(m: np.ndarray, r1: Sequence[int], r2: Sequence[int]) -> int:
    """M̃(r1, r2) in one pass over the entries, holding only the point."""
    n = m.shape[0]
    w = point_array(list(r1) + list(r2))
    step = _row_chunks(n)
    total = 0
    for i0 in range(0, n, step):
        chunk = np.ascontiguousarray(m[i0:i0 + step]).reshape(-1)
        total = F.add(total, int(K.chi_accumulate_dense(chunk, i0 * n, w)))
    return total


def stream_matrix_mle_pair(a: np.ndarray, b: np.ndarray, pa: Sequence[int], pb: Sequence[int]) -> tuple[int, int]:
    """Ã(pa) and B̃(pb) with one joint pass over A and B."""
    n = a.shape[0]
    wa, wb = point_array(pa), point_array(pb)
    step = _row_chunks(n)
    sa = sb = 0
    for i0 in range(0, n, step):
        ca = np.ascontiguousarray(a[i0:i0 + step]).reshape(-1)
        cb = np.ascontiguousarray(b[i0:i0 + step]).reshape(-1)
        x, y = K.chi_accumulate_dense2(ca, cb, i0 * n, wa, wb)
        sa, sb = F.add(sa, int(x)), F.add(sb, int(y))
    return sa, sb


# ---------------------------------------------------------------- prover


def restrict_tables(a: np.ndarray, b: np.ndarray, r1: Sequence[int], r2: Sequence[int],
                    in_place: bool = False, counter: WorkCounter | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(Ã(r1, .), B̃(., r2)) as length-n tables.

    With ``in_place`` the rows of A and the columns of B are folded inside
    the caller's arrays (destroying them) so no n-sized buffer is allocated;
    the returned tables are views into A's first row and B's first column."""
    n = a.shape[0]
    if in_place:
        rows = n
        for r in r1:
            K.fold_rows_inplace(a, np.uint64(r), rows)
            if counter is not None:
                counter.add(rows // 2 * n)
            rows //= 2
        cols = n
        for r in r2:
            K.fold_cols_inplace(b, np.uint64(r), cols)
            if counter is not None:
                counter.add(cols // 2 * n)
            cols //= 2
        return a[0], b[:, 0]
    ca = build_chi_table(r1, counter).entries
    cb = build_chi_table(r2, counter).entries
    if counter is not None:
        counter.add(2 * n * n)
    return K.vec_mat(ca, a), K.mat_vec(b, cb)


def product_sumcheck_prover(ta: np.ndarray, tb: np.ndarray, in_place: bool = False,
                            counter: WorkCounter | None = None):
    """Rounds of the sum-check for sum_x Ã(x) B̃(x) over two multilinear tables."""
    r: list[int] = []
    while len(ta) > 1:
        s0, s1, s2 = K.round_product2(ta, tb)
        reply = yield Message(ROUND, (int(s0), int(s1), int(s2)))
        x = np.uint64(reply[0])
        h = len(ta) // 2
        if counter is not None:
            counter.add(3 * h + 2 * h)
        if in_place:
            ta = K.fold_high(ta, x, ta[:h])
            tb = K.fold_high(tb, x, tb[:h])
        else:
            ta = K.fold_high(ta, x, np.empty(h, dtype=np.uint64))
            tb = K.fold_high(tb, x, np.empty(h, dtype=np.uint64))
        r.append(reply[0])
    return r, int(ta[0]), int(tb[0])


def prove_matmul(a, b, d=None, algorithm: str = "naive", in_place: bool = False,
                 counter: WorkCounter | None = None):
    """Honest prover generator.  ``d`` is the claimed product (computed if None).

    ``counter`` tallies field multiplications performed beyond computing D*."""
    a, b = as_matrix(a), as_matrix(b)
    if d is None:
        d = blocked_matmul(a, b) if algorithm == "blocked" else naive_matmul(a, b)
    reply = yield Message(OUTPUT, np.ascontiguousarray(d, dtype=np.uint64).reshape(-1))
    L = log2_exact(a.shape[0])
    r1, r2 = list(reply[:L]), list(reply[L:])
    ta, tb = restrict_tables(a, b, r1, r2, in_place, counter)
    yield from product_sumcheck_prover(ta, tb, in_place, counter)
    return d


def verify_matmul(a, b, prover, seed: int = 0) -> Verdict:
    """Verifier: one streaming pass over D*, the sum-check, one joint pass over A and B."""
    a, b = as_matrix(a), as_matrix(b)
    n = a.shape[0]
    L = log2_exact(n)

    def verifier(chan: Channel):
        d = np.asarray(chan.receive(OUTPUT, n * n), dtype=np.uint64).reshape(n, n)
        r1 = chan.challenges(L)
        r2 = chan.challenges(L)
        claim = stream_matrix_mle(d, r1, r2)
        r3, final = sumcheck_verify(chan, [2] * L, claim)
        fa, fb = stream_matrix_mle_pair(a, b, r1 + r3, r3 + r2)
        if F.mul(fa, fb) != final:
            raise Reject("final check")
        return d

    return run_protocol(prover, verifier, seed, PROTOCOL_MATMUL, [n])


def run_matmul(a, b, d=None, seed: int = 0, algorithm: str = "naive", in_place: bool = False) -> Verdict:
    a, b = as_matrix(a), as_matrix(b)
    pa, pb = (a.copy(), b.copy()) if in_place else (a, b)
    return verify_matmul(a, b, prove_matmul(pa, pb, d, algorithm, in_place), seed)


def freivalds(a, b, d, rng: random.Random) -> bool:
    """Accept iff A(Bx) = D*x for a random x (one-sided error 1/q)."""
    a, b, d = as_matrix(a), as_matrix(b), as_matrix(d)
    x = np.asarray([F.random_element(rng) for _ in range(a.shape[0])], dtype=np.uint64)
    return bool(np.array_equal(K.mat_vec(a, K.mat_vec(b, x)), K.mat_vec(d, x)))


# ---------------------------------------------------------------- matrix powers


def matrix_powers(m: np.ndarray, k: int) -> list[np.ndarray]:
    """[M, M^2, M^4, ..., M^(2^k)] by repeated squaring."""
    out = [as_matrix(m)]
    for _ in range(k):
        out.append(naive_matmul(out[-1], out[-1]))
    return out


def _line(a: Sequence[int], b: Sequence[int], t: int) -> list[int]:
    return [F.add(x, F.mul(t, F.sub(y, x))) for x, y in zip(a, b)]


def _line_degree(L: int) -> int:
    # M̃ restricted to a line through 2L coordinates; at least 1 so both endpoints are sent
    return max(1, 2 * L)


def prove_matrix_power(m, k: int, powers: list[np.ndarray] | None = None):
    """Prover for M^(2^k); ``powers`` may be supplied (e.g. a corrupted chain)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if powers is None:
        powers = matrix_powers(m, k)
    n = powers[0].shape[0]
    L = log2_exact(n)
    reply = yield Message(OUTPUT, np.array(powers[k], dtype=np.uint64).reshape(-1))
    r1, r2 = list(reply[:L]), list(reply[L:])
    for it in range(1, k + 1):
        a = powers[k - it]
        ta, tb = restrict_tables(a, a, r1, r2)
        r3, va, vb = yield from product_sumcheck_prover(ta, tb)
        reply = yield Message(CLAIMS, (va, vb))
        if it == k:
            break
        p, q = r1 + r3, r3 + r2
        flat = a.reshape(-1)
        h = [eval_mle_table(flat, _line(p, q, t)) for t in range(_line_degree(L) + 1)]
        reply = yield Message(LINE, tuple(h))
        pt = _line(p, q, reply[0])
        r1, r2 = pt[:L], pt[L:]
    return powers[k]


def verify_matrix_power(m, k: int, prover, seed: int = 0) -> Verdict:
    m = as_matrix(m)
    n = m.shape[0]
    L = log2_exact(n)

    def verifier(chan: Channel):
        d = np.asarray(chan.receive(OUTPUT, n * n), dtype=np.uint64).reshape(n, n)
        r1 = chan.challenges(L)
        r2 = chan.challenges(L)
        claim = stream_matrix_mle(d, r1, r2)
        for it in range(1, k + 1):
            r3, final = sumcheck_verify(chan, [2] * L, claim)
            va, vb = chan.receive(CLAIMS, 2)
            if F.mul(va, vb) != final:
                raise Reject("final check")
            p, q = r1 + r3, r3 + r2
            if it == k:
                fa, fb = stream_matrix_mle_pair(m, m, p, q)
                if (fa, fb) != (va, vb):
                    raise Reject("input check")
                break
            h = chan.receive(LINE, _line_degree(L) + 1)
            if h[0] != va or h[1] != vb:
                raise Reject("line endpoints")
            t = chan.challenge()
            claim = F.interpolate_at(h, t)
            pt = _line(p, q, t)
            r1, r2 = pt[:L], pt[L:]
        return d

    return run_protocol(prover, verifier, seed, PROTOCOL_MATPOW, [n, k])


def run_matrix_power(m, k: int, seed: int = 0) -> Verdict:
    return verify_matrix_power(m, k, prove_matrix_power(m, k), seed)


def accounting(n: int) -> tuple[int, int]:
    """(prover messages, non-answer field elements) for one product check."""
    L = log2_exact(n)
    return 1 + L, 3 * L
