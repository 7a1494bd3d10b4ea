"""Pattern matching: counting the windows of a text that equal a pattern.

The circuit (see :func:`artifact.circuit.build_patternmatch_layers`) has a
bottom layer whose gate (i, k) computes T'[(i + k) mod N] - P[k].  Its wiring
is not regular (the text index is a sum), so that layer gets its own
sum-check over auxiliary carry bits c:

    Ṽ(z) = sum_{i, k, c} beta(z, (i, k)) * Phi(i, k, c) * (T̃'(gamma(i, k, c)) - P̃(k)),
    Phi(i, k, c) = prod_j phi(i_j, k_j, c_{j-1}, c_j),

where phi forces c_j to be the carry out of bit j of i + k and
gamma_j = i_j xor k_j xor c_{j-1} is bit j of the sum.  Bits are numbered
from the least significant (j = 1), c_0 = 0 and k_j = 0 for j > log m.
Variables are bound in triples (i_j, k_j, c_j), least significant first.
Everything above that layer is handled by the regular-layer protocol.

The text is padded to length N (a power of two, N > len(T)) with a sentinel
value that differs from every pattern symbol, so the wrap-around windows
never match and the number of occurrences is N - M for the circuit output M.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .circuit import LayeredCircuit, build_patternmatch_layers, evaluate
from .gkr import prove_circuit, verify_layers
from .mle import WorkCounter, as_array, beta_eval, eval_mle_stream, eval_mle_table, log2_exact, point_array
from .sumcheck import SumcheckInstance, prover_round_naive, sumcheck_verify
from .transcript import CLAIMS, ROUND, Channel, Message, Reject, Verdict, run_protocol

PROTOCOL_PATTERN = 6


# ---------------------------------------------------------------- carry polynomials


def _xor(x: int, y: int) -> int:
    return F.sub(F.add(x, y), F.mul(2, F.mul(x, y)))


def gamma_eval(i1: int, k1: int, c1: int) -> int:
    """Multilinear extension of i1 xor k1 xor c1."""
    return _xor(_xor(i1, k1), c1)


def majority_eval(a: int, b: int, c: int) -> int:
    """Multilinear extension of the carry of a + b + c."""
    ab, ac, bc = F.mul(a, b), F.mul(a, c), F.mul(b, c)
    return F.sub(F.add(F.add(ab, ac), bc), F.mul(2, F.mul(ab, c)))


def phi_eval(i1: int, k1: int, c0: int, c1: int) -> int:
    """Multilinear extension of [c1 == carry(i1 + k1 + c0)]."""
    m = majority_eval(i1, k1, c0)
    return F.add(F.mul(c1, m), F.mul(F.sub(1, c1), F.sub(1, m)))


def phi_table() -> list[int]:
    return [int(d == (a + b + c >= 2)) for a, b, c, d in itertools.product((0, 1), repeat=4)]


def gamma_table() -> list[int]:
    return [a ^ b ^ c for a, b, c in itertools.product((0, 1), repeat=3)]


def Phi_eval(i: Sequence[int], k: Sequence[int], c: Sequence[int]) -> int:
    """prod_j phi(i_j, k_j, c_{j-1}, c_j) with LSB-first coordinate lists.

    ``k`` may be shorter than ``i``; missing bits are 0.  c_0 = 0."""
    out = 1
    prev = 0
    for j in range(len(i)):
        kj = k[j] if j < len(k) else 0
        out = F.mul(out, phi_eval(i[j], kj, prev, c[j]))
        prev = c[j]
    return out


def sum_bits(i: Sequence[int], k: Sequence[int], c: Sequence[int]) -> list[int]:
    """(gamma(i_j, k_j, c_{j-1}))_j, LSB first."""
    out = []
    prev = 0
    for j in range(len(i)):
        kj = k[j] if j < len(k) else 0
        out.append(gamma_eval(i[j], kj, prev))
        prev = c[j]
    return out


# ---------------------------------------------------------------- layer polynomial


class PatternLayer:
    """Shape bookkeeping for the (i, k, c) sum-check."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self.L = log2_exact(n)
        self.Lm = log2_exact(m)
        if self.Lm > self.L:
            raise ValueError("pattern longer than text")
        self.order: list[tuple[str, int]] = []
        for j in range(1, self.L + 1):
            self.order.append(("i", j))
            if j <= self.Lm:
                self.order.append(("k", j))
            self.order.append(("c", j))

    @property
    def num_vars(self) -> int:
        return len(self.order)

    def degrees(self) -> list[int]:
        return [1 if (v == "c" and j == self.L) else 3 for v, j in self.order]

    def split(self, point: Sequence[int]) -> tuple[list[int], list[int], list[int]]:
        """Sum-check point -> (i, k, c), each LSB first."""
        i, k, c = [], [], []
        for (v, _), x in zip(self.order, point):
            {"i": i, "k": k, "c": c}[v].append(x)
        return i, k, c

    def beta_point(self, i: Sequence[int], k: Sequence[int]) -> list[int]:
        """The gate label point (i MSB first, then k MSB first)."""
        return list(reversed(i)) + list(reversed(k))

    def evaluate_point(self, z: Sequence[int], point: Sequence[int], t_vals: np.ndarray, p_vals: np.ndarray) -> int:
        i, k, c = self.split(point)
        u = sum_bits(i, k, c)
        tv = eval_mle_table(t_vals, list(reversed(u)))
        pv = eval_mle_table(p_vals, list(reversed(k)))
        return F.mul(F.mul(beta_eval(z, self.beta_point(i, k)), Phi_eval(i, k, c)), F.sub(tv, pv))

    def final_value(self, z: Sequence[int], point: Sequence[int], t_claim: int, p_claim: int) -> int:
        i, k, c = self.split(point)
        return F.mul(F.mul(beta_eval(z, self.beta_point(i, k)), Phi_eval(i, k, c)), F.sub(t_claim, p_claim))

    def claim_points(self, point: Sequence[int]) -> tuple[list[int], list[int]]:
        """Points (MSB first) at which T̃' and P̃ are opened after the sum-check."""
        i, k, c = self.split(point)
        return list(reversed(sum_bits(i, k, c))), list(reversed(k))


def layer_oracle(pl: PatternLayer, z: Sequence[int], t_vals, p_vals):
    t_vals, p_vals = as_array(t_vals), as_array(p_vals)
    return lambda point: pl.evaluate_point(z, point, t_vals, p_vals)


# ---------------------------------------------------------------- fast prover


def _bf(zj: int, x: int) -> int:
    return F.add(F.mul(x, zj), F.mul(F.sub(1, x), F.sub(1, zj)))


def _chi(b: int, x: int) -> int:
    return x if b else F.sub(1, x)


def prove_pattern_layer(t_vals, p_vals, z: Sequence[int], counter: WorkCounter | None = None):
    """Honest prover for the (i, k, c) sum-check; returns the bound point.

    Only carry-consistent terms are enumerated: for every setting of the
    unbound high bits (I', K') and carry-in a, the high carries are forced."""
    T = as_array(t_vals).copy()
    P = as_array(p_vals).copy()
    pl = PatternLayer(len(T), len(P))
    L, Lm = pl.L, pl.Lm
    z = [int(x) for x in z]
    scal = 1
    rho = 0
    point: list[int] = []
    for j in range(1, L + 1):
        has_k = j <= Lm
        zi = z[L - j]
        zk = z[L + Lm - j] if has_k else None
        bi_up = K.beta_table(point_array(z[0:L - j]))
        bk_up = K.beta_table(point_array(z[L:L + Lm - j])) if j < Lm else np.ones(1, dtype=np.uint64)
        M = len(T) // 2
        top = j == L
        even = np.ascontiguousarray(T[0::2])
        odd = np.ascontiguousarray(T[1::2])
        S = [[int(K.window_sum(bi_up, bk_up, tab, cin, 0)) for cin in (0, 1)] for tab in (even, odd)]
        if counter is not None:
            counter.add(4 * len(bi_up) * len(bk_up))
        if has_k:
            pe = np.ascontiguousarray(P[0::2])
            po = np.ascontiguousarray(P[1::2])
            Pk = [int(K.vdot(bk_up, pe)), int(K.vdot(bk_up, po))]
        else:
            Pk = [int(P[0]), int(P[0])]

        def p_term(xk):
            return F.add(F.mul(F.sub(1, xk), Pk[0]), F.mul(xk, Pk[1]))

        def boolean_carry_sum(xi, xk):
            """sum over c_j in {0,1} of phi_j * (U_T(c_j) - P-term)."""
            y = gamma_eval(xi, xk, rho)
            total = 0
            for cj in (0, 1):
                u = F.add(F.mul(F.sub(1, y), S[0][cj]), F.mul(y, S[1][cj]))
                total = F.add(total, F.mul(phi_eval(xi, xk, rho, cj), F.sub(u, p_term(xk))))
            return total

        # round i_j
        msg = []
        for t in range(4):
            acc = 0
            for xk in ((0, 1) if has_k else (0,)):
                w = F.mul(_bf(zi, t), _bf(zk, xk) if has_k else 1)
                acc = F.add(acc, F.mul(w, boolean_carry_sum(t, xk)))
            msg.append(F.mul(scal, acc))
        reply = yield Message(ROUND, tuple(msg))
        ri = reply[0]
        point.append(ri)
        scal = F.mul(scal, _bf(zi, ri))
        rk = 0
        # round k_j
        if has_k:
            msg = [F.mul(scal, F.mul(_bf(zk, t), boolean_carry_sum(ri, t))) for t in range(4)]
            reply = yield Message(ROUND, tuple(msg))
            rk = reply[0]
            point.append(rk)
            scal = F.mul(scal, _bf(zk, rk))
        # round c_j
        ystar = gamma_eval(ri, rk, rho)
        T = K.fold_low(T, np.uint64(ystar), np.empty(M, dtype=np.uint64))
        if top:
            R = None
            tv = int(T[0])
        else:
            R = {(a, b): int(K.window_sum(bi_up, bk_up, T, a, a ^ b)) for a in (0, 1) for b in (0, 1)}
            if counter is not None:
                counter.add(4 * len(bi_up) * len(bk_up))
        pv = p_term(rk)
        nt = 2 if top else 4
        msg = []
        for t in range(nt):
            if top:
                u = tv
            else:
                u = 0
                for (a, b), val in R.items():
                    u = F.add(u, F.mul(F.mul(_chi(a, t), _chi(b, t)), val))
            msg.append(F.mul(scal, F.mul(phi_eval(ri, rk, rho, t), F.sub(u, pv))))
        reply = yield Message(ROUND, tuple(msg))
        rc = reply[0]
        point.append(rc)
        scal = F.mul(scal, phi_eval(ri, rk, rho, rc))
        if has_k:
            P = K.fold_low(P, np.uint64(rk), np.empty(len(P) // 2, dtype=np.uint64))
        rho = rc
    yield Message(CLAIMS, (int(T[0]), int(P[0])))
    return point


def prove_pattern_layer_naive(t_vals, p_vals, z: Sequence[int]):
    """Brute-force prover over all 2 log n + log m variables (cross-checking)."""
    t_vals, p_vals = as_array(t_vals), as_array(p_vals)
    pl = PatternLayer(len(t_vals), len(p_vals))
    inst = SumcheckInstance(pl.num_vars, pl.degrees(), 0, layer_oracle(pl, z, t_vals, p_vals))
    point: list[int] = []
    for j in range(pl.num_vars):
        reply = yield Message(ROUND, tuple(prover_round_naive(inst, point, j)))
        point.append(reply[0])
    tp, pp = pl.claim_points(point)
    yield Message(CLAIMS, (eval_mle_table(t_vals, tp), eval_mle_table(p_vals, pp)))
    return point


def verify_pattern_layer(chan: Channel, n: int, m: int, z: Sequence[int], value: int):
    """Returns the points and claimed values for T̃' and P̃."""
    pl = PatternLayer(n, m)
    point, final = sumcheck_verify(chan, pl.degrees(), value, nonzero=True)
    t_claim, p_claim = chan.receive(CLAIMS, 2)
    if pl.final_value(z, point, t_claim, p_claim) != final:
        raise Reject("pattern layer check")
    tp, pp = pl.claim_points(point)
    return (tp, t_claim), (pp, p_claim)


# ---------------------------------------------------------------- whole protocol


def pad_text(text: Sequence[int], pattern: Sequence[int]) -> tuple[np.ndarray, int]:
    """(T' padded with the sentinel to N = next power of two > len(T), sentinel)."""
    if len(pattern) == 0 or len(pattern) & (len(pattern) - 1):
        raise ValueError("pattern length must be a power of two")
    if len(pattern) > len(text):
        raise ValueError("pattern longer than text")
    sentinel = max(int(x) for x in pattern) + 1
    N = 1
    while N < len(text) + 1:
        N *= 2
    vals = [F.encode_signed(int(x)) for x in text] + [F.encode_signed(sentinel)] * (N - len(text))
    return np.asarray(vals, dtype=np.uint64), sentinel


def naive_count(text: Sequence[int], pattern: Sequence[int]) -> int:
    m = len(pattern)
    return sum(1 for i in range(len(text) - m + 1) if list(text[i:i + m]) == list(pattern))


class PatternInstance:
    def __init__(self, text: Sequence[int], pattern: Sequence[int]):
        self.text = [int(x) for x in text]
        self.pattern = [int(x) for x in pattern]
        self.t_vals, self.sentinel = pad_text(self.text, self.pattern)
        self.p_vals = np.asarray([F.encode_signed(x) for x in self.pattern], dtype=np.uint64)
        self.N = len(self.t_vals)
        self.m = len(self.pattern)
        self.circuit: LayeredCircuit = build_patternmatch_layers(self.N, self.m)

    def inputs(self) -> np.ndarray:
        inp = np.zeros(2 * self.N, dtype=np.uint64)
        inp[:self.N] = self.t_vals
        inp[self.N:self.N + self.m] = self.p_vals
        return inp

    @property
    def pattern_layer(self) -> int:
        return len(self.circuit.layers) - 1


def prove_patternmatch(inst: PatternInstance, naive: bool = False, values=None,
                       counter: WorkCounter | None = None):
    if values is None:
        values = evaluate(inst.circuit, inst.inputs())
    points = yield from prove_circuit(inst.circuit, values, stop=inst.pattern_layer, counter=counter)
    (z,) = points
    if naive:
        yield from prove_pattern_layer_naive(inst.t_vals, inst.p_vals, z)
    else:
        yield from prove_pattern_layer(inst.t_vals, inst.p_vals, z, counter)


def verify_patternmatch(text: Sequence[int], pattern: Sequence[int], prover, seed: int = 0) -> Verdict:
    """Verdict.answer is the number of occurrences of the pattern in the text."""
    inst = PatternInstance(text, pattern)
    c = inst.circuit

    def verifier(chan: Channel):
        outputs, claims = verify_layers(chan, c, stop=inst.pattern_layer)
        (z, v), = claims
        chan.mark_layer(inst.pattern_layer)
        (tp, tc), (pp, pc) = verify_pattern_layer(chan, inst.N, inst.m, z, v)
        chan.mark_layer(len(c.layers))
        if eval_mle_stream(_text_stream(inst), tp) != tc:
            raise Reject("text check")
        if eval_mle_stream(((k, x) for k, x in enumerate(inst.pattern)), pp) != pc:
            raise Reject("pattern check")
        return inst.N - int(outputs[0])

    return run_protocol(prover, verifier, seed, PROTOCOL_PATTERN, [inst.N, inst.m, len(inst.text)])


def _text_stream(inst: PatternInstance):
    for i, x in enumerate(inst.text):
        yield i, x
    for i in range(len(inst.text), inst.N):
        yield i, inst.sentinel


def run_patternmatch(text: Sequence[int], pattern: Sequence[int], seed: int = 0, naive: bool = False) -> Verdict:
    inst = PatternInstance(text, pattern)
    return verify_patternmatch(text, pattern, prove_patternmatch(inst, naive), seed)
