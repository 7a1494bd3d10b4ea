import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import field as F
from artifact.circuit import evaluate
from artifact.mle import WorkCounter, eval_mle_table
from artifact.patternmatch import (PatternInstance, PatternLayer, Phi_eval, gamma_eval, gamma_table, layer_oracle,
                                   naive_count, pad_text, phi_eval, phi_table, prove_pattern_layer,
                                   prove_pattern_layer_naive, prove_patternmatch, run_patternmatch, sum_bits,
                                   verify_patternmatch)
from artifact.sumcheck import brute_force_sum
from artifact.sumcheck import SumcheckInstance
from artifact.transcript import CLAIMS, OUTPUT, ROUND, Message, tamper

from conftest import challenge_feed, drive, rand_point, rand_vec


def bits_lsb(x: int, width: int) -> list[int]:
    return [(x >> j) & 1 for j in range(width)]


def carry_chain(i: int, k: int, width: int) -> list[int]:
    out, c = [], 0
    for j in range(width):
        c = int(((i >> j) & 1) + ((k >> j) & 1) + c >= 2)
        out.append(c)
    return out


# ---------------------------------------------------------------- carry polynomials


def test_phi_and_gamma_examples():
    assert phi_eval(1, 1, 0, 1) == 1
    assert phi_eval(1, 0, 0, 1) == 0
    assert gamma_eval(1, 0, 0) == 1
    assert gamma_eval(1, 1, 0) == 0
    assert phi_table()[0b1101] == 1 and gamma_table()[0b100] == 1


def test_phi_gamma_match_interpolation_oracle(rng):
    for _ in range(200):
        p = rand_point(rng, 4)
        assert phi_eval(*p) == eval_mle_table(np.asarray(phi_table(), dtype=np.uint64), p)
        assert gamma_eval(*p[:3]) == eval_mle_table(np.asarray(gamma_table(), dtype=np.uint64), p[:3])
    for bits in itertools.product((0, 1), repeat=4):
        assert phi_eval(*bits) == phi_table()[int("".join(map(str, bits)), 2)]


def test_Phi_examples(rng):
    i, k = bits_lsb(1, 2), bits_lsb(1, 2)
    for c in itertools.product((0, 1), repeat=2):
        assert Phi_eval(i, k, list(c)) == int(list(c) == [1, 0])
    assert Phi_eval([0, 0], [0, 0], [0, 0]) == 1
    for _ in range(50):
        L = rng.randint(1, 4)
        i, c = rand_point(rng, L), rand_point(rng, L)
        k = rand_point(rng, rng.randint(0, L))
        expected, prev = 1, 0
        for j in range(L):
            expected = F.mul(expected, phi_eval(i[j], k[j] if j < len(k) else 0, prev, c[j]))
            prev = c[j]
        assert Phi_eval(i, k, c) == expected


def test_carry_collapse_exhaustive(rng):
    L = 3
    x = [F.random_element(rng) for _ in range(1 << L)]
    for i in range(1 << L):
        for k in range(1 << L):
            total = 0
            for c in range(1 << L):
                total = F.add(total, F.mul(Phi_eval(bits_lsb(i, L), bits_lsb(k, L), bits_lsb(c, L)), x[c]))
            correct = carry_chain(i, k, L)
            assert total == x[sum(b << j for j, b in enumerate(correct))]


def test_gamma_composition_exhaustive():
    L = 3
    for i in range(1 << L):
        for k in range(1 << L):
            got = sum_bits(bits_lsb(i, L), bits_lsb(k, L), carry_chain(i, k, L))
            assert got == bits_lsb((i + k) % (1 << L), L)


# ---------------------------------------------------------------- layer polynomial


def layer_table(t_vals, p_vals) -> np.ndarray:
    n, m = len(t_vals), len(p_vals)
    return np.asarray([F.sub(int(t_vals[(i + k) % n]), int(p_vals[k])) for i in range(n) for k in range(m)],
                      dtype=np.uint64)


def test_layer_sum_recovers_layer_mle(rng):
    for n, m in ((4, 2), (4, 1), (8, 4), (4, 4)):
        pl = PatternLayer(n, m)
        t, p = rand_vec(rng, n), rand_vec(rng, m)
        z = rand_point(rng, pl.L + pl.Lm)
        inst = SumcheckInstance(pl.num_vars, pl.degrees(), 0, layer_oracle(pl, z, t, p))
        assert brute_force_sum(inst) == eval_mle_table(layer_table(t, p), z)


def test_layer_table_matches_circuit_evaluation(rng):
    inst = PatternInstance([3, 1, 4, 1, 5, 9, 2], [1, 5])
    values = evaluate(inst.circuit, inst.inputs())
    assert np.array_equal(values[inst.pattern_layer], layer_table(inst.t_vals, inst.p_vals))


def test_boolean_z_gives_gate_value(rng):
    n, m = 8, 2
    pl = PatternLayer(n, m)
    t, p = rand_vec(rng, n), rand_vec(rng, m)
    for i in range(n):
        for k in range(m):
            z = [(i >> (pl.L - 1 - j)) & 1 for j in range(pl.L)] + [(k >> (pl.Lm - 1 - j)) & 1 for j in range(pl.Lm)]
            inst = SumcheckInstance(pl.num_vars, pl.degrees(), 0, layer_oracle(pl, z, t, p))
            assert brute_force_sum(inst) == F.sub(int(t[(i + k) % n]), int(p[k]))


def test_degree_bounds_hold(rng):
    # raising one variable's evaluation count must not change the interpolated round polynomial
    pl = PatternLayer(4, 2)
    t, p = rand_vec(rng, 4), rand_vec(rng, 2)
    g = layer_oracle(pl, rand_point(rng, 3), t, p)
    for j, d in enumerate(pl.degrees()):
        base = rand_point(rng, pl.num_vars)
        evals = [g(base[:j] + [x] + base[j + 1:]) for x in range(d + 2)]
        assert F.interpolate_at(evals[:d + 1], d + 1) == evals[d + 1]


def _naive_vs_fast(r: random.Random, n: int, m: int):
    t, p = rand_vec(r, n), rand_vec(r, m)
    pl = PatternLayer(n, m)
    z = rand_point(r, pl.L + pl.Lm)
    ch = rand_point(r, pl.num_vars)
    fast, fp = drive(prove_pattern_layer(t, p, z), challenge_feed(ch))
    slow, sp = drive(prove_pattern_layer_naive(t, p, z), challenge_feed(ch))
    return fast, slow, fp, sp


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_fast_prover_matches_naive_n4_m2(seed):
    fast, slow, fp, sp = _naive_vs_fast(random.Random(seed), 4, 2)
    assert [tuple(m.values) for m in fast] == [tuple(m.values) for m in slow]
    assert fp == sp


@pytest.mark.parametrize("n,m", [(2, 1), (2, 2), (4, 1), (4, 4), (8, 2), (8, 4), (16, 2)])
def test_fast_prover_matches_naive_other_shapes(n, m, rng):
    for _ in range(3):
        fast, slow, _, _ = _naive_vs_fast(rng, n, m)
        assert [m_.kind for m_ in fast] == [m_.kind for m_ in slow]
        assert [tuple(m_.values) for m_ in fast] == [tuple(m_.values) for m_ in slow]


def test_live_terms_shrink_geometrically(rng):
    class Recorder(WorkCounter):
        def __init__(self):
            super().__init__()
            self.log = []

        def add(self, k):
            super().add(k)
            self.log.append(int(k))

    for n, m in ((64, 8), (256, 16), (128, 128)):
        pl = PatternLayer(n, m)
        rec = Recorder()
        drive(prove_pattern_layer(rand_vec(rng, n), rand_vec(rng, m), rand_point(rng, pl.L + pl.Lm), rec),
              challenge_feed(rand_point(rng, pl.num_vars)))
        assert len(rec.log) == 2 * pl.L - 1
        for idx, live in enumerate(rec.log):
            j = idx // 2 + 1
            assert live <= 2 ** (pl.L + pl.Lm - j + 2)
        assert rec.count <= 16 * n * m


# ---------------------------------------------------------------- whole protocol


def test_abab_example():
    text = [ord(ch) for ch in "abab"]
    v = run_patternmatch(text, [ord("a"), ord("b")], seed=1)
    assert v.accepted and v.answer == 2 == naive_count(text, [ord("a"), ord("b")])


def test_absent_pattern_counts_zero():
    v = run_patternmatch([1, 2, 3, 4, 5, 6], [7, 8], seed=2)
    assert v.accepted and v.answer == 0


def test_counts_match_naive_scan(rng):
    for _ in range(30):
        m = rng.choice([1, 2, 4])
        n = rng.randint(m, 20)
        alpha = rng.randint(1, 3)
        text = [rng.randrange(alpha) for _ in range(n)]
        pattern = [rng.randrange(alpha) for _ in range(m)]
        naive = rng.random() < 0.2
        v = run_patternmatch(text, pattern, seed=rng.getrandbits(64), naive=naive)
        assert v.accepted, v.reason
        assert v.answer == naive_count(text, pattern)


def test_negative_symbols(rng):
    text = [-1, 0, -1, 0, -1]
    v = run_patternmatch(text, [-1, 0], seed=3)
    assert v.accepted and v.answer == 2


def test_padding_rules():
    t, sentinel = pad_text([5, 6, 7, 8], [6, 7])
    assert len(t) == 8 and sentinel == 8 and [int(x) for x in t[4:]] == [8] * 4
    with pytest.raises(ValueError):
        pad_text([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        pad_text([1], [1, 2])


def test_corrupted_count_rejected():
    text = [ord(ch) for ch in "abracadabra"]
    pattern = [ord("a"), ord("b")]
    inst = PatternInstance(text, pattern)
    values = evaluate(inst.circuit, inst.inputs())
    rejected = 0
    for t in range(200):
        r = random.Random(t)
        delta = 1 + r.randrange(5)

        def edit(k, msg):
            if msg.kind == OUTPUT:
                return Message(OUTPUT, (F.add(int(msg.values[0]), delta),))
            return msg

        rejected += not verify_patternmatch(text, pattern, tamper(prove_patternmatch(inst, values=values), edit),
                                            t).accepted
    assert rejected == 200


def test_corrupted_pattern_layer_claims_rejected():
    text, pattern = [1, 2, 1, 2, 1], [1, 2]
    inst = PatternInstance(text, pattern)
    rejected = 0
    for t in range(50):
        def edit(k, msg):
            if msg.kind == CLAIMS and len(msg.values) == 2 and k == last[0]:
                return Message(CLAIMS, (F.add(msg.values[0], 1), msg.values[1]))
            return msg
        honest = run_patternmatch(text, pattern, seed=t)
        last = [honest.transcript.rounds - 1]
        rejected += not verify_patternmatch(text, pattern, tamper(prove_patternmatch(inst), edit), t).accepted
    assert rejected == 50


def test_round_messages_are_bounded_degree():
    v = run_patternmatch(list(range(10)), [3, 4], seed=4)
    assert v.accepted
    assert all(len(r.values) <= 4 for r in v.transcript.messages() if r.kind == ROUND)
