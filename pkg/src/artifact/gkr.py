"""Circuit-evaluation protocol with a linear-time prover.

For a layer with claim Ṽ_i(z) = v the parties run a sum-check on

    g_z(p) = beta(z, p) * W(p),
    W(p)   = sum over branches rho of I_rho(p) * op_rho(Ṽ_{i+1}(in1_rho(p)), Ṽ_{i+1}(in2_rho(p)))

where every ``in_k_rho`` is a map whose output bits are constants or
(negated) copies of single variables of ``p``.  The prover keeps

* the beta table C (one entry per live suffix), bound with
  C <- C[(1, .)] * z_j^{-1} * (r z_j + (1 - r)(1 - z_j)), and
* per distinct in-neighbour map a copy of layer i+1's values with the
  constant bits selected and the remaining axes sorted by the variable that
  drives them, bound as that variable's challenge arrives,

so round j touches O(2^(s_i - j)) live terms and all rounds together cost
O(S_i + S_{i+1}).  After the sum-check the prover reports Ṽ_{i+1} at the
distinct in-neighbour points; two points that differ in a few coordinates
are merged with a line restriction, otherwise the claims are carried to the
next layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .circuit import ADD, COPY, MUL, Bit, LayeredCircuit, RegularWiring, apply_map, evaluate
from .mle import (WorkCounter, as_array, beta_eval, dense_stream, eval_mle_stream, eval_mle_table,
                  point_array)
from .sumcheck import SumcheckInstance, prover_round_naive, sumcheck_verify
from .transcript import CLAIMS, LINE, OUTPUT, ROUND, Channel, Message, Reject, Verdict, run_protocol

MAX_CLAIMS = 1 << 8
PROTOCOL_GKR = 8


@dataclass
class LayerClaim:
    layer: int
    point: list[int]
    value: int


def field_op(op: int, a: int, b: int) -> int:
    if op == ADD:
        return F.add(a, b)
    if op == MUL:
        return F.mul(a, b)
    if op == COPY:
        return a
    return F.sub(a, b)


# ---------------------------------------------------------------- point oracles


def wiring_polynomial(w: RegularWiring, point: Sequence[int], values: dict) -> int:
    """W(point) given Ṽ_{i+1} at every in-neighbour map (``values[map]``)."""
    total = 0
    for br in w.branches:
        ind = w.indicator(br, point)
        if ind == 0:
            continue
        a = values[br.in1]
        b = values[br.in2] if br.in2 is not None else 0
        total = F.add(total, F.mul(ind, field_op(br.op, a, b)))
    return total


def layer_polynomial_general(w: RegularWiring, v_next, z: Sequence[int]):
    """Point oracle for g_z(p) = beta(z, p) W(p), evaluating Ṽ_{i+1} densely."""
    v_next = as_array(v_next)

    def g(p):
        vals = {m: eval_mle_table(v_next, apply_map(m, p)) for m in w.maps()}
        return F.mul(beta_eval(z, p), wiring_polynomial(w, p, vals))

    return g


def layer_polynomial_bintree(op: int, v_next, z: Sequence[int]):
    """g_z(p) = beta(z,p) * (Ṽ(p,0) op Ṽ(p,1)) written out directly."""
    v_next = as_array(v_next)

    def g(p):
        a = eval_mle_table(v_next, list(p) + [0])
        b = eval_mle_table(v_next, list(p) + [1])
        return F.mul(beta_eval(z, p), field_op(op, a, b))

    return g


def layer_polynomial_distinct(kind: str, v_next, z: Sequence[int]):
    """Closed forms for the Fermat sub-circuit layers.

    ``product``: (1-p_s) Ṽ(p_-,0)^2 + p_s Ṽ(p_-,1) Ṽ(p_-,0)
    ``start``:   (1-p_s) Ṽ(p_-)^2 + p_s Ṽ(p_-)
    ``square``:  Ṽ(p)^2
    each multiplied by beta(z, p)."""
    v_next = as_array(v_next)

    def g(p):
        p = list(p)
        head, last = p[:-1], p[-1]
        if kind == "product":
            a = eval_mle_table(v_next, head + [0])
            b = eval_mle_table(v_next, head + [1])
            w = F.add(F.mul(F.sub(1, last), F.mul(a, a)), F.mul(last, F.mul(b, a)))
        elif kind == "start":
            a = eval_mle_table(v_next, head)
            w = F.add(F.mul(F.sub(1, last), F.mul(a, a)), F.mul(last, a))
        elif kind == "square":
            a = eval_mle_table(v_next, p)
            w = F.mul(a, a)
        else:
            raise ValueError(kind)
        return F.mul(beta_eval(z, p), w)

    return g


# ---------------------------------------------------------------- fast prover


class _Table:
    """Layer-(i+1) values seen through one in-neighbour map."""

    __slots__ = ("arr", "dims")

    def __init__(self, v_next: np.ndarray, m: tuple[Bit, ...], s_next: int, counter: WorkCounter | None):
        if s_next == 0:
            self.arr = v_next.copy()
            self.dims: list[tuple[int, bool]] = []
            return
        cube = v_next.reshape((2,) * s_next)
        index = tuple(b.const if b.is_const else slice(None) for b in m)
        sub = cube[index]
        free = [(b.src, b.neg) for b in m if not b.is_const]
        order = sorted(range(len(free)), key=lambda d: (free[d][0], d))
        if order != list(range(len(free))):
            sub = np.transpose(sub, order)
        self.arr = np.ascontiguousarray(sub).reshape(-1)
        self.dims = [free[d] for d in order]
        if counter is not None:
            counter.add(len(self.arr))

    def leading(self, j: int) -> int:
        e = 0
        while e < len(self.dims) and self.dims[e][0] == j:
            e += 1
        return e


@lru_cache(maxsize=4096)
def _chi_weights(negs: tuple[bool, ...], nt: int) -> np.ndarray:
    """w[t, c] = prod_l chi_{c_l}(u_l(t)), u_l(t) = t or 1 - t."""
    e = len(negs)
    out = np.empty((nt, 1 << e), dtype=np.uint64)
    for t in range(nt):
        for c in range(1 << e):
            acc = 1
            for l, neg in enumerate(negs):
                u = F.sub(1, t % F.Q) if neg else t % F.Q
                bit = (c >> (e - 1 - l)) & 1
                acc = F.mul(acc, u if bit else F.sub(1, u))
            out[t, c] = acc
    return out


@lru_cache(maxsize=4096)
def _segments(dims: tuple[tuple[int, bool], ...], s: int) -> np.ndarray:
    """Bit segments turning a live-suffix index b into a table index."""
    n = len(dims)
    segs = []
    d = 0
    while d < n:
        e = d
        while e + 1 < n and dims[e + 1][0] == dims[e][0] + 1 and dims[e + 1][1] == dims[d][1]:
            e += 1
        width = e - d + 1
        src_last = dims[e][0]
        bshift = s - 1 - src_last
        tshift = n - 1 - e
        wmask = (1 << width) - 1
        segs.append((bshift, tshift, wmask, wmask if dims[d][1] else 0))
        d = e + 1
    if not segs:
        return np.zeros((0, 4), dtype=np.uint64)
    return np.asarray(segs, dtype=np.uint64)


class RegularLayerProver:
    """Round messages for g_z(p) = beta(z, p) W(p) in O(S_i + S_{i+1}) total work."""

    def __init__(self, w: RegularWiring, v_next, z: Sequence[int], counter: WorkCounter | None = None):
        self.w = w
        self.s = w.s_in
        self.z = [int(x) for x in z]
        self.counter = counter
        v_next = as_array(v_next)
        self.maps = w.maps()
        self.tables = {m: _Table(v_next, m, w.s_next, counter) for m in self.maps}
        self.degrees = w.degrees()
        self.C = K.beta_table(point_array(self.z))
        self.c_scale = 1  # C holds beta values up to this common factor
        if counter is not None:
            counter.add(2 * len(self.C))
        self.ind = [1] * len(w.branches)
        self._zinv_j, self._zinv_v = -1, 0

    def _zinv(self, j: int) -> int:
        if self._zinv_j != j:
            self._zinv_j, self._zinv_v = j, F.inv(self.z[j])
        return self._zinv_v

    def message(self, j: int) -> list[int]:
        s, w = self.s, self.w
        nt = self.degrees[j] + 1
        L = len(self.C) // 2
        zj = self.z[j]
        lo, hi = self.C[:L], self.C[L:]
        if zj:
            zinv = self._zinv(j)
            bhi = np.asarray([F.mul(zinv, _beta_factor(zj, t)) for t in range(nt)], dtype=np.uint64)
            blo = np.zeros(nt, dtype=np.uint64)
            use_lo = False
        else:
            bhi = np.asarray([t % F.Q for t in range(nt)], dtype=np.uint64)
            blo = np.asarray([F.sub(1, t) for t in range(nt)], dtype=np.uint64)
            use_lo = True
        total = [0] * nt
        for bi, br in enumerate(w.branches):
            ind_t = []
            mask = mval = 0
            for sv, rb in zip(w.select, br.rho):
                if sv > j:
                    pos = s - 1 - sv
                    mask |= 1 << pos
                    mval |= rb << pos
            for t in range(nt):
                x = self.ind[bi]
                if j in w.select:
                    rb = br.rho[w.select.index(j)]
                    x = F.mul(x, t % F.Q if rb else F.sub(1, t))
                ind_t.append(x)
            if not any(ind_t):
                continue
            t1, st1, w1, sg1 = self._view(br.in1, j, nt)
            if br.in2 is None:
                t2, st2, w2, sg2 = t1, st1, w1, sg1
            else:
                t2, st2, w2, sg2 = self._view(br.in2, j, nt)
            acc = np.zeros(nt, dtype=np.uint64)
            K.layer_round(acc, lo, hi, blo, bhi, use_lo, np.uint64(mask), np.uint64(mval),
                          t1, st1, w1, sg1, t2, st2, w2, sg2, br.op)
            if self.counter is not None:
                self.counter.add(L >> bin(mask).count("1"))
            for t in range(nt):
                total[t] = F.add(total[t], F.mul(int(acc[t]), ind_t[t]))
        return [F.mul(x, self.c_scale) for x in total]

    def _view(self, m, j, nt):
        tab = self.tables[m]
        e = tab.leading(j)
        rest = len(tab.dims) - e
        negs = [tab.dims[l][1] for l in range(e)]
        weights = _chi_weights(tuple(negs), nt) if e else np.ones((nt, 1), dtype=np.uint64)
        segs = _segments(tuple(tab.dims[e:]), self.s)
        return tab.arr, np.uint64(1 << rest), weights, segs

    def bind(self, j: int, r: int) -> None:
        zj = self.z[j]
        L = len(self.C) // 2
        if zj:
            # the high half, rescaled lazily: no pass over C
            self.c_scale = F.mul(self.c_scale, F.mul(self._zinv(j), _beta_factor(zj, r)))
            self.C = self.C[L:]
        else:
            self.C = K.fold_high(self.C, np.uint64(r), np.empty(L, dtype=np.uint64))
        if self.counter is not None:
            self.counter.add(L)
        for tab in self.tables.values():
            e = tab.leading(j)
            for l in range(e):
                u = F.sub(1, r) if tab.dims[l][1] else r
                h = len(tab.arr) // 2
                tab.arr = K.fold_high(tab.arr, np.uint64(u), np.empty(h, dtype=np.uint64))
                if self.counter is not None:
                    self.counter.add(h)
            tab.dims = tab.dims[e:]
        if j in self.w.select:
            for bi, br in enumerate(self.w.branches):
                rb = br.rho[self.w.select.index(j)]
                self.ind[bi] = F.mul(self.ind[bi], r if rb else F.sub(1, r))

    def final_values(self) -> list[int]:
        out = []
        for m in self.maps:
            tab = self.tables[m]
            assert len(tab.arr) == 1 and not tab.dims
            out.append(int(tab.arr[0]))
        return out


def _beta_factor(zj: int, x: int) -> int:
    x %= F.Q
    return F.add(F.mul(x, zj), F.mul(F.sub(1, x), F.sub(1, zj)))


def fast_layer_prover(w: RegularWiring, v_next, z: Sequence[int], challenges: Sequence[int],
                      counter: WorkCounter | None = None) -> list[list[int]]:
    """All round messages for the given challenge sequence (testing helper)."""
    lp = RegularLayerProver(w, v_next, z, counter)
    msgs = []
    for j in range(w.s_in):
        msgs.append(lp.message(j))
        lp.bind(j, challenges[j])
    return msgs


# ---------------------------------------------------------------- reduce to one point


def line_point(a: Sequence[int], b: Sequence[int], t: int) -> list[int]:
    """ℓ(t) for the line with ℓ(0) = a and ℓ(1) = b."""
    return [F.add(x, F.mul(t, F.sub(y, x))) for x, y in zip(a, b)]


def line_degree(m1: Sequence[Bit], m2: Sequence[Bit]) -> int:
    return sum(1 for a, b in zip(m1, m2) if a != b)


def line_values(v_next, a: Sequence[int], b: Sequence[int], degree: int) -> list[int]:
    """h(t) = Ṽ(ℓ(t)) for t = 0..degree (prover side)."""
    v_next = as_array(v_next)
    return [eval_mle_table(v_next, line_point(a, b, t)) for t in range(degree + 1)]


def reduce_to_one_point(chan: Channel, a: Sequence[int], b: Sequence[int], va: int, vb: int,
                        degree: int) -> tuple[list[int], int]:
    """Verifier side: merge claims Ṽ(a) = va and Ṽ(b) = vb into one claim.

    Used when the line restriction has degree >= 2; for degree 1 it is fixed
    by the two claims and the caller interpolates directly."""
    h = chan.receive(LINE, degree + 1)
    if h[0] != va or h[1] != vb:
        raise Reject("line endpoints")
    r = chan.challenge(nonzero=True)
    return line_point(a, b, r), F.interpolate_at(h, r)


# ---------------------------------------------------------------- layer protocol


def layer_plan(w: RegularWiring) -> tuple[str, int]:
    """How claims leave the layer: ('single'|'line'|'carry', line degree)."""
    maps = w.maps()
    if len(maps) == 1:
        return "single", 0
    if len(maps) == 2 and w.similar:
        return "line", line_degree(maps[0], maps[1])
    return "carry", 0


def prove_layer(w: RegularWiring, v_next: np.ndarray, z: Sequence[int], naive: bool = False,
                counter: WorkCounter | None = None):
    """Prover for one claim on a regular layer; returns the next-layer points."""
    s = w.s_in
    r: list[int] = []
    if naive:
        inst = SumcheckInstance(s, w.degrees(), 0, layer_polynomial_general(w, v_next, z))
        for j in range(s):
            reply = yield Message(ROUND, tuple(prover_round_naive(inst, r, j)))
            r.append(reply[0])
        vals = [eval_mle_table(v_next, apply_map(m, r)) for m in w.maps()]
    else:
        lp = RegularLayerProver(w, v_next, z, counter)
        for j in range(s):
            reply = yield Message(ROUND, tuple(lp.message(j)))
            lp.bind(j, reply[0])
            r.append(reply[0])
        vals = lp.final_values()
        del lp
    reply = yield Message(CLAIMS, tuple(vals))
    points = [apply_map(m, r) for m in w.maps()]
    plan, deg = layer_plan(w)
    if plan == "single":
        return points
    if plan == "line":
        a, b = points
        if deg == 1:
            return [line_point(a, b, reply[0])]
        h = line_values(v_next, a, b, deg)
        reply = yield Message(LINE, tuple(h))
        return [line_point(a, b, reply[0])]
    return points


def verify_layer(chan: Channel, w: RegularWiring, claims: list[tuple[list[int], int]]):
    """Verifier for one regular layer; returns the claims on the next layer."""
    maps = w.maps()
    plan, deg = layer_plan(w)
    out = []
    for z, v in claims:
        r, final = sumcheck_verify(chan, w.degrees(), v, nonzero=True)
        vals = chan.receive(CLAIMS, len(maps))
        by_map = dict(zip(maps, vals))
        if F.mul(beta_eval(z, r), wiring_polynomial(w, r, by_map)) != final:
            raise Reject("layer check")
        points = [apply_map(m, r) for m in maps]
        if plan == "single":
            out.append((points[0], vals[0]))
        elif plan == "line":
            a, b = points
            if deg == 1:
                t = chan.challenge(nonzero=True)
                out.append((line_point(a, b, t), F.add(vals[0], F.mul(t, F.sub(vals[1], vals[0])))))
            else:
                out.append(reduce_to_one_point(chan, a, b, vals[0], vals[1], deg))
        else:
            out.extend(zip(points, vals))
    if len(out) > MAX_CLAIMS:
        raise Reject("too many pending claims")
    return out


# ---------------------------------------------------------------- addition-tree shortcut


def prove_addition_tree(leaves: np.ndarray, z: Sequence[int], naive: bool = False,
                        counter: WorkCounter | None = None):
    """Reduce a claim about the tree's outputs at z to one claim about the leaves.

    g(p) = Ṽ_leaves(z, p) is multilinear, so every round message has two
    entries.  Returns the leaf point (z, r)."""
    leaves = as_array(leaves)
    d = len(leaves).bit_length() - 1 - len(z)
    r: list[int] = []
    if naive:
        inst = SumcheckInstance(d, [1] * d, 0, lambda p: eval_mle_table(leaves, list(z) + list(p)))
        for j in range(d):
            reply = yield Message(ROUND, tuple(prover_round_naive(inst, r, j)))
            r.append(reply[0])
        final = eval_mle_table(leaves, list(z) + r)
    else:
        cur = leaves
        for x in z:
            cur = K.fold_high(cur, np.uint64(x), np.empty(len(cur) // 2, dtype=np.uint64))
            if counter is not None:
                counter.add(len(cur))
        for j in range(d):
            s0, s1 = K.round_linear(cur)
            reply = yield Message(ROUND, (int(s0), int(s1)))
            r.append(reply[0])
            cur = K.fold_high(cur, np.uint64(reply[0]), np.empty(len(cur) // 2, dtype=np.uint64))
            if counter is not None:
                counter.add(2 * len(cur))
        final = int(cur[0])
    yield Message(CLAIMS, (final,))
    return list(z) + r


def sumcheck_addition_tree(chan: Channel, z: Sequence[int], value: int, depth: int):
    """Verifier side of the addition-tree shortcut."""
    r, final = sumcheck_verify(chan, [1] * depth, value, nonzero=True)
    (claim,) = chan.receive(CLAIMS, 1)
    if claim != final:
        raise Reject("tree claim")
    return list(z) + r, claim


# ---------------------------------------------------------------- whole circuits


def _check_regular(c: LayeredCircuit, start: int, stop: int) -> None:
    for i in range(start, stop):
        if c.layers[i].wiring is None:
            raise ValueError(f"layer {i} has no regular-wiring descriptor")


def claim_profile(c: LayeredCircuit, use_tree: bool = True, stop: int | None = None) -> list[int]:
    """Number of pending claims entering each layer (build-time cap check)."""
    stop = len(c.layers) if stop is None else stop
    counts = [1]
    i = c.tree_top if use_tree and c.tree_top else 0
    counts += [1] * i
    k = 1
    while i < stop:
        plan, _ = layer_plan(c.layers[i].wiring)
        if plan == "carry":
            k *= len(c.layers[i].wiring.maps())
        counts.append(k)
        if k > MAX_CLAIMS:
            raise ValueError("circuit would carry more than 256 simultaneous claims")
        i += 1
    return counts


def prove_circuit(c: LayeredCircuit, values: list[np.ndarray], use_tree: bool = True,
                  stop: int | None = None, naive: bool = False, counter: WorkCounter | None = None):
    """Honest prover generator; returns the pending points on layer ``stop``."""
    stop = len(c.layers) if stop is None else stop
    outputs = values[0]
    reply = yield Message(OUTPUT, np.array(outputs, dtype=np.uint64))
    z = list(reply)
    points = [z]
    i = 0
    if use_tree and c.tree_top:
        i = c.tree_top
        pt = yield from prove_addition_tree(values[i], z, naive, counter)
        points = [pt]
    while i < stop:
        w = c.layers[i].wiring
        nxt = []
        for pt in points:
            nxt += yield from prove_layer(w, values[i + 1], pt, naive, counter)
        points = nxt
        i += 1
    return points


def verify_layers(chan: Channel, c: LayeredCircuit, use_tree: bool = True, stop: int | None = None):
    """Verifier down to layer ``stop``; returns (outputs, claims on that layer)."""
    stop = len(c.layers) if stop is None else stop
    _check_regular(c, c.tree_top if use_tree else 0, stop)
    s0 = c.size_bits(0)
    outputs = chan.receive(OUTPUT, 1 << s0)
    z = chan.challenges(s0, nonzero=True)
    claims = [(z, eval_mle_table(outputs, z))]
    i = 0
    if use_tree and c.tree_top:
        chan.mark_layer(0)
        claims = [sumcheck_addition_tree(chan, z, claims[0][1], c.tree_top)]
        i = c.tree_top
    while i < stop:
        chan.mark_layer(i)
        claims = verify_layer(chan, c.layers[i].wiring, claims)
        i += 1
    return outputs, claims


def check_input_claims(claims, inputs, method: str = "stream") -> None:
    """Final check of pending claims against the input (streaming by default)."""
    for point, value in claims:
        if method == "stream":
            got = eval_mle_stream(inputs, point)
        else:
            got = eval_mle_table(inputs, point)
        if got != value:
            raise Reject("input check")


def verify_circuit(c: LayeredCircuit, inputs, prover, seed: int = 0, use_tree: bool = True,
                   method: str = "stream", protocol: int = PROTOCOL_GKR, meta=()) -> Verdict:
    """Run the verifier against ``prover``; ``inputs`` is a dense vector or a stream."""
    claim_profile(c, use_tree)
    if method == "stream" and isinstance(inputs, np.ndarray) and inputs.dtype == np.uint64:
        source = dense_stream(inputs)
    elif method == "stream" and isinstance(inputs, (list,)) and inputs and isinstance(inputs[0], int):
        source = dense_stream(inputs)
    else:
        source = inputs

    def verifier(chan: Channel):
        outputs, claims = verify_layers(chan, c, use_tree)
        chan.mark_layer(len(c.layers))
        check_input_claims(claims, source, method)
        return outputs

    return run_protocol(prover, verifier, seed, protocol, meta)


def run_gkr(c: LayeredCircuit, inputs, seed: int = 0, use_tree: bool = True, naive: bool = False,
            values: list[np.ndarray] | None = None, protocol: int = PROTOCOL_GKR, meta=()) -> Verdict:
    """Evaluate, prove and verify in one call (honest prover)."""
    if values is None:
        values = evaluate(c, inputs)
    prover = prove_circuit(c, values, use_tree, naive=naive)
    return verify_circuit(c, values[-1], prover, seed, use_tree, protocol=protocol, meta=meta)


def gkr_accounting(c: LayeredCircuit, use_tree: bool = True) -> tuple[int, int]:
    """Predicted (prover messages, field elements excluding the answer)."""
    rounds, elements = 1, 0
    claims = 1
    i = 0
    if use_tree and c.tree_top:
        rounds += c.tree_top + 1
        elements += 2 * c.tree_top + 1
        i = c.tree_top
    while i < len(c.layers):
        w = c.layers[i].wiring
        degs = w.degrees()
        plan, deg = layer_plan(w)
        per = len(degs) + 1
        el = sum(d + 1 for d in degs) + len(w.maps())
        if plan == "line" and deg >= 2:
            per += 1
            el += deg + 1
        rounds += claims * per
        elements += claims * el
        if plan == "carry":
            claims *= len(w.maps())
        i += 1
    return rounds, elements
