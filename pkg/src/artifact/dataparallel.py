"""Data-parallel circuits: B side-by-side copies of an arbitrary base circuit.

Copies never interact, so the wiring predicates of the super-circuit are
those of the base circuit C.  Labels of layer i are (g, c) with the base gate
g in the high-order bits and the copy index c in the low-order b = log B
bits, i.e. value index g*B + c.  For a claim Ṽ*_i(z) the parties run a
sum-check over (p1, ω1, γ1, p2) on

    beta(z, (p1, p2)) * sum_op op~_i(p1, ω1, γ1) * op(Ṽ*_{i+1}(ω1, p2), Ṽ*_{i+1}(γ1, p2)).

In the first s_i + 2 s_{i+1} rounds each base gate contributes one term
(vectorised over the B copies); in the last b rounds the wiring predicates
are scalars and the prover works with dense tables over the copy index.
The verifier only ever evaluates the base circuit's wiring predicates, so
its preprocessing cost does not depend on B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .circuit import ADD, MUL, SUB, Layer, LayeredCircuit
from .gkr import prove_addition_tree, sumcheck_addition_tree
from .mle import (WorkCounter, as_array, beta_eval, eval_mle_stream, eval_mle_table, log2_exact,
                  point_array)
from .sumcheck import sumcheck_verify
from .transcript import CLAIMS, LINE, OUTPUT, ROUND, Channel, Message, Reject, Verdict, run_protocol

PROTOCOL_DATAPARALLEL = 7
DP_OPS = (ADD, MUL, SUB)


@dataclass
class SuperCircuit:
    base: LayeredCircuit
    copies: int

    def __post_init__(self):
        log2_exact(self.copies)
        for layer in self.base.layers:
            if not set(np.unique(layer.op).tolist()) <= set(DP_OPS):
                raise ValueError("base circuit gates must be add, mul or sub")

    @property
    def b(self) -> int:
        return self.copies.bit_length() - 1

    @property
    def depth(self) -> int:
        return self.base.depth

    def size_bits(self, i: int) -> int:
        return self.base.size_bits(i) + self.b

    def size(self) -> int:
        return self.base.size() * self.copies

    def evaluate(self, inputs) -> list[np.ndarray]:
        """Per-layer values as (gates, copies) arrays; index 0 = outputs.

        ``inputs`` is a (n, B) array or a flat vector in g*B + c order."""
        B = self.copies
        n = self.base.input_size
        x = as_array(np.asarray(inputs).reshape(-1))
        if len(x) != n * B:
            raise ValueError(f"expected {n * B} inputs, got {len(x)}")
        cur = x
        values = [cur.reshape(n, B)]
        lane = np.arange(B, dtype=np.int64)
        for layer in reversed(self.base.layers):
            in1 = (layer.in1[:, None] * B + lane).reshape(-1)
            in2 = (layer.in2[:, None] * B + lane).reshape(-1)
            op = np.repeat(layer.op, B)
            cur = K.eval_layer(cur, in1, in2, op)
            values.append(cur.reshape(layer.size, B))
        values.reverse()
        return values


def copy_major_to_interleaved(data, copies: int) -> np.ndarray:
    """File layout (copy c's n inputs contiguous) -> value index x*B + c."""
    arr = as_array(np.asarray(data).reshape(-1))
    return np.ascontiguousarray(arr.reshape(copies, -1).T).reshape(-1)


def copy_major_stream(data, copies: int) -> tuple[np.ndarray, np.ndarray]:
    """(index, value) stream over a copy-major input vector."""
    arr = as_array(np.asarray(data).reshape(-1))
    n = len(arr) // copies
    c = np.repeat(np.arange(copies, dtype=np.uint64), n)
    x = np.tile(np.arange(n, dtype=np.uint64), copies)
    return x * np.uint64(copies) + c, arr


# ---------------------------------------------------------------- verifier predicates


def layer_predicates(layer: Layer, s_next: int, point: Sequence[int],
                     counter: WorkCounter | None = None) -> tuple[int, int, int]:
    """(add~, mult~, sub~) of one base layer at (p1, ω1, γ1); O(S_i) gate visits."""
    s = layer.size_bits
    if len(point) != s + 2 * s_next:
        raise ValueError("point has the wrong dimension")
    labels = np.arange(layer.size, dtype=np.uint64)
    idx = (labels << np.uint64(2 * s_next)) | (layer.in1.astype(np.uint64) << np.uint64(s_next)) \
        | layer.in2.astype(np.uint64)
    w = point_array(point)
    out = []
    for op in DP_OPS:
        sel = layer.op == op
        out.append(int(K.chi_accumulate(idx[sel], np.ones(int(sel.sum()), dtype=np.uint64), w)))
    if counter is not None:
        counter.add(layer.size)
    return out[0], out[1], out[2]


def preprocess_verifier(base: LayeredCircuit, points: Sequence[Sequence[int]],
                        counter: WorkCounter | None = None) -> list[tuple[int, int, int]]:
    """Wiring-predicate values of every base layer at the given points."""
    return [layer_predicates(base.layers[i], base.size_bits(i + 1), points[i], counter)
            for i in range(len(base.layers))]


def _mix(preds: Sequence[int], a: int, b: int) -> int:
    add, mul, sub = preds
    out = F.mul(add, F.add(a, b))
    out = F.add(out, F.mul(mul, F.mul(a, b)))
    return F.add(out, F.mul(sub, F.sub(a, b)))


def layer_degrees(s: int, s_next: int, b: int) -> list[int]:
    return [2] * (s + 2 * s_next) + [3] * b


def layer_polynomial_dp(layer: Layer, s_next: int, b: int, v_next: np.ndarray, z: Sequence[int]):
    """Point oracle for the data-parallel layer polynomial (testing)."""
    s = layer.size_bits
    flat = as_array(v_next.reshape(-1))

    def g(x):
        x = list(x)
        p1, om, ga, p2 = x[:s], x[s:s + s_next], x[s + s_next:s + 2 * s_next], x[s + 2 * s_next:]
        preds = layer_predicates(layer, s_next, p1 + om + ga)
        va = eval_mle_table(flat, om + p2)
        vb = eval_mle_table(flat, ga + p2)
        return F.mul(beta_eval(z, p1 + p2), _mix(preds, va, vb))

    return g


# ---------------------------------------------------------------- prover


def _chi_cols(bits: np.ndarray, nt: int) -> list[np.ndarray]:
    """chi_{bit}(t) per gate for t = 0..nt-1."""
    one = bits.astype(np.uint64)
    out = []
    for t in range(nt):
        tt = np.uint64(t)
        lo = np.uint64(F.sub(1, t))
        out.append(np.where(one == 1, tt, lo).astype(np.uint64))
    return out


def prove_dp_layer(layer: Layer, s_next: int, b: int, v_next: np.ndarray, z: Sequence[int],
                   counter: WorkCounter | None = None):
    """Honest prover for one data-parallel layer; returns the next-layer point."""
    s = layer.size_bits
    G = layer.size
    nt = 3
    z = [int(x) for x in z]
    z1, z2 = z[:s], z[s:]
    beta2 = K.beta_table(point_array(z2))
    glab = np.arange(G, dtype=np.int64)
    win = layer.in1.astype(np.int64)
    gin = layer.in2.astype(np.int64)
    ops = layer.op.astype(np.uint8)
    cb = np.ones(G, dtype=np.uint64)
    beta_pre = 1
    ta = np.ascontiguousarray(v_next)
    tb = ta
    B = ta.shape[1]
    one3 = np.ones(nt, dtype=np.uint64)
    zero3 = np.zeros(nt, dtype=np.uint64)
    lin0 = np.asarray([F.sub(1, t) for t in range(nt)], dtype=np.uint64)
    lin1 = np.arange(nt, dtype=np.uint64)
    r_all: list[int] = []

    def run_round(fac_cols, ia0, ia1, ca0, ca1, ib0, ib1, cb0, cb1):
        fac = np.ascontiguousarray(np.stack(fac_cols, axis=1))
        acc = np.zeros(nt, dtype=np.uint64)
        K.dp_round(acc, fac, ops, ia0, ia1, ca0, ca1, ta, ib0, ib1, cb0, cb1, tb, beta2)
        if counter is not None:
            counter.add(G * nt * B)
        return tuple(int(x) for x in acc)

    # p1 variables
    for j in range(s):
        shift = s - 1 - j
        bits = (glab >> shift) & 1
        suffix = glab & ((1 << shift) - 1)
        bsuf = K.beta_table(point_array(z1[j + 1:]))[suffix]
        chis = _chi_cols(bits, nt)
        base = K.vmul_scalar(K.vmul(cb, bsuf), np.uint64(beta_pre))
        cols = [K.vmul_scalar(K.vmul(base, chis[t]), np.uint64(_beta_factor(z1[j], t))) for t in range(nt)]
        reply = yield Message(ROUND, run_round(cols, win, win, one3, zero3, gin, gin, one3, zero3))
        r = reply[0]
        cb = K.vmul(cb, np.where(bits == 1, np.uint64(r), np.uint64(F.sub(1, r))).astype(np.uint64))
        beta_pre = F.mul(beta_pre, _beta_factor(z1[j], r))
        r_all.append(r)
    # ω1 variables
    for k in range(s_next):
        shift = s_next - 1 - k
        bits = (win >> shift) & 1
        suffix = win & ((1 << shift) - 1)
        chis = _chi_cols(bits, nt)
        base = K.vmul_scalar(cb, np.uint64(beta_pre))
        cols = [K.vmul(base, chis[t]) for t in range(nt)]
        reply = yield Message(ROUND, run_round(cols, suffix, suffix + (1 << shift), lin0, lin1,
                                               gin, gin, one3, zero3))
        r = reply[0]
        cb = K.vmul(cb, np.where(bits == 1, np.uint64(r), np.uint64(F.sub(1, r))).astype(np.uint64))
        ta = K.fold_rows_high(ta, np.uint64(r))
        if counter is not None:
            counter.add(ta.size)
        r_all.append(r)
    zeros = np.zeros(G, dtype=np.int64)
    # γ1 variables
    for k in range(s_next):
        shift = s_next - 1 - k
        bits = (gin >> shift) & 1
        suffix = gin & ((1 << shift) - 1)
        chis = _chi_cols(bits, nt)
        base = K.vmul_scalar(cb, np.uint64(beta_pre))
        cols = [K.vmul(base, chis[t]) for t in range(nt)]
        reply = yield Message(ROUND, run_round(cols, zeros, zeros, one3, zero3,
                                               suffix, suffix + (1 << shift), lin0, lin1))
        r = reply[0]
        cb = K.vmul(cb, np.where(bits == 1, np.uint64(r), np.uint64(F.sub(1, r))).astype(np.uint64))
        tb = K.fold_rows_high(tb, np.uint64(r))
        if counter is not None:
            counter.add(tb.size)
        r_all.append(r)
    # p2 variables: predicates are now scalars
    coef = [int(K.vsum(cb[ops == op])) if np.any(ops == op) else 0 for op in DP_OPS]
    C = K.vmul_scalar(beta2, np.uint64(beta_pre))
    A = np.ascontiguousarray(ta[0])
    Bv = np.ascontiguousarray(tb[0])
    for _ in range(b):
        ev = K.round_gate_mix(C, A, Bv, np.uint64(coef[0]), np.uint64(coef[1]), np.uint64(coef[2]))
        reply = yield Message(ROUND, tuple(int(x) for x in ev))
        r = np.uint64(reply[0])
        h = len(C) // 2
        C = K.fold_high(C, r, np.empty(h, dtype=np.uint64))
        A = K.fold_high(A, r, np.empty(h, dtype=np.uint64))
        Bv = K.fold_high(Bv, r, np.empty(h, dtype=np.uint64))
        if counter is not None:
            counter.add(10 * h)
        r_all.append(reply[0])
    va, vb = int(A[0]), int(Bv[0])
    yield Message(CLAIMS, (va, vb))
    r_om = r_all[s:s + s_next]
    r_ga = r_all[s + s_next:s + 2 * s_next]
    r_p2 = r_all[s + 2 * s_next:]
    flat = np.ascontiguousarray(v_next).reshape(-1)
    h_vals = [eval_mle_table(flat, _line(r_om, r_ga, t) + r_p2) for t in range(s_next + 1)]
    if counter is not None:
        counter.add((s_next + 1) * 2 * flat.size)
    reply = yield Message(LINE, tuple(h_vals))
    return _line(r_om, r_ga, reply[0]) + r_p2


def _beta_factor(zj: int, x: int) -> int:
    return F.add(F.mul(x, zj), F.mul(F.sub(1, x), F.sub(1, zj)))


def _line(a: Sequence[int], b: Sequence[int], t: int) -> list[int]:
    return [F.add(x, F.mul(t, F.sub(y, x))) for x, y in zip(a, b)]


def verify_dp_layer(chan: Channel, layer: Layer, s_next: int, b: int, z: Sequence[int], value: int,
                    counter: WorkCounter | None = None) -> tuple[list[int], int]:
    s = layer.size_bits
    r, final = sumcheck_verify(chan, layer_degrees(s, s_next, b), value)
    p1, om, ga, p2 = r[:s], r[s:s + s_next], r[s + s_next:s + 2 * s_next], r[s + 2 * s_next:]
    va, vb = chan.receive(CLAIMS, 2)
    preds = layer_predicates(layer, s_next, p1 + om + ga, counter)
    if F.mul(beta_eval(z, p1 + p2), _mix(preds, va, vb)) != final:
        raise Reject("layer check")
    h = chan.receive(LINE, s_next + 1)
    if F.interpolate_at(h, 0) != va or F.interpolate_at(h, 1) != vb:
        raise Reject("line endpoints")
    t = chan.challenge()
    return _line(om, ga, t) + p2, F.interpolate_at(h, t)


# ---------------------------------------------------------------- whole protocol


def prove_dataparallel(sc: SuperCircuit, values: list[np.ndarray], z: Sequence[int],
                       counter: WorkCounter | None = None):
    """Layer-by-layer prover for a claim Ṽ*_0(z); returns the input point."""
    point = list(z)
    for i, layer in enumerate(sc.base.layers):
        point = yield from prove_dp_layer(layer, sc.base.size_bits(i + 1), sc.b, values[i + 1], point, counter)
    return point


def verify_dataparallel(chan: Channel, sc: SuperCircuit, inputs, claim: tuple[Sequence[int], int],
                        counter: WorkCounter | None = None, copy_major: bool = False) -> None:
    """Check Ṽ*_0(z) = v down to the inputs.

    ``inputs`` is a flat vector in g*B + c order, or copy-major with
    ``copy_major``; the final check is a streaming pass over it."""
    z, v = list(claim[0]), claim[1]
    for i, layer in enumerate(sc.base.layers):
        chan.mark_layer(i)
        z, v = verify_dp_layer(chan, layer, sc.base.size_bits(i + 1), sc.b, z, v, counter)
    chan.mark_layer(len(sc.base.layers))
    if copy_major:
        stream = copy_major_stream(inputs, sc.copies)
    else:
        arr = as_array(np.asarray(inputs).reshape(-1))
        stream = (np.arange(len(arr), dtype=np.uint64), arr)
    if eval_mle_stream(stream, z) != v:
        raise Reject("input check")


def run_dataparallel(sc: SuperCircuit, inputs, seed: int = 0, prover=None,
                     counter: WorkCounter | None = None) -> Verdict:
    """Full opening of all B * S_0 outputs, then the layer protocol."""
    flat_in = as_array(np.asarray(inputs).reshape(-1))
    values = sc.evaluate(flat_in)
    s0 = sc.size_bits(0)

    def honest():
        reply = yield Message(OUTPUT, np.ascontiguousarray(values[0]).reshape(-1).copy())
        yield from prove_dataparallel(sc, values, reply, counter)

    def verifier(chan: Channel):
        out = chan.receive(OUTPUT, 1 << s0)
        z = chan.challenges(s0)
        verify_dataparallel(chan, sc, flat_in, (z, eval_mle_table(out, z)))
        return out

    return run_protocol(prover or honest(), verifier, seed, PROTOCOL_DATAPARALLEL,
                        [sc.copies, sc.base.input_size, 0])


# ---------------------------------------------------------------- counting queries


def and4_circuit() -> LayeredCircuit:
    """Predicate x0 AND x1 AND x2 AND x3 on 0/1 inputs (two multiplication layers)."""
    l1 = Layer(1, np.array([0, 2]), np.array([1, 3]), np.array([MUL, MUL], dtype=np.uint8), None, "and-pairs")
    l0 = Layer(0, np.array([0]), np.array([1]), np.array([MUL], dtype=np.uint8), None, "and-top")
    return LayeredCircuit([l0, l1], 2, name="and4")


def count_query_prover(sc: SuperCircuit, values: list[np.ndarray], counter: WorkCounter | None = None):
    """Honest prover: the count, the addition-tree sum-check over copies, then the layers."""
    leaves = np.ascontiguousarray(values[0]).reshape(-1)
    yield Message(OUTPUT, (int(K.vsum(leaves)),))
    point = yield from prove_addition_tree(leaves, [], counter=counter)
    yield from prove_dataparallel(sc, values, point, counter)


def verify_count_query(sc: SuperCircuit, inputs, prover, seed: int = 0, copy_major: bool = True,
                       counter: WorkCounter | None = None) -> Verdict:
    """Verifier for sum over copies of the (single-output) base predicate."""
    if sc.base.size_bits(0) != 0:
        raise ValueError("counting queries need a single-output base circuit")

    def verifier(chan: Channel):
        (count,) = chan.receive(OUTPUT, 1)
        chan.mark_layer(0)
        point, value = sumcheck_addition_tree(chan, [], count, sc.b)
        verify_dataparallel(chan, sc, inputs, (point, value), counter, copy_major)
        return count

    return run_protocol(prover, verifier, seed, PROTOCOL_DATAPARALLEL,
                        [sc.copies, sc.base.input_size, 1])


def run_count_query(sc: SuperCircuit, inputs_copy_major, seed: int = 0,
                    counter: WorkCounter | None = None) -> Verdict:
    flat = copy_major_to_interleaved(inputs_copy_major, sc.copies)
    values = sc.evaluate(flat)
    return verify_count_query(sc, inputs_copy_major, count_query_prover(sc, values, counter), seed,
                              copy_major=True)
