import random

import pytest
from hypothesis import given, settings, strategies as st

from artifact import field as F
from artifact.sumcheck import (SumcheckInstance, brute_force_sum, naive_prover, prover_round_naive,
                               run_sumcheck, verifier_check_round)
from artifact.transcript import ROUND, Message, tamper


def product_instance(claim=None):
    g = lambda x: F.mul(x[0], x[1])
    return SumcheckInstance(2, [1, 1], 1 if claim is None else claim, g)


def random_poly(rng: random.Random, v: int, max_deg: int):
    """Random polynomial as {exponent tuple: coefficient}, degree <= max_deg per variable."""
    terms = {}
    for _ in range(6):
        exps = tuple(rng.randrange(max_deg + 1) for _ in range(v))
        terms[exps] = F.random_element(rng)

    def g(x):
        total = 0
        for exps, c in terms.items():
            t = c
            for xi, e in zip(x, exps):
                t = F.mul(t, F.power(xi, e))
            total = F.add(total, t)
        return total

    return terms, g


def test_round_examples():
    inst = product_instance()
    assert prover_round_naive(inst, [], 0) == [0, 1]
    const = SumcheckInstance(3, [0, 0, 0], 0, lambda x: 9)
    assert prover_round_naive(const, [], 0) == [36]
    assert prover_round_naive(const, [5], 1) == [18]
    assert prover_round_naive(const, [5, 6], 2) == [9]


def test_round_matches_symbolic_expansion():
    # g = x1^2 x2 + 3 x2 x3 + 5 ; round 1 sums x2, x3 over {0,1}: g1(X) = 2 X^2 + 3 + 20
    g = lambda x: F.add(F.add(F.mul(F.mul(x[0], x[0]), x[1]), F.mul(3, F.mul(x[1], x[2]))), 5)
    inst = SumcheckInstance(3, [2, 1, 1], 0, g)
    assert prover_round_naive(inst, [], 0) == [23, 25, 31]
    # round 2 with x1 = 4: g2(X) = 2*16 X + 3 X + 3*... -> (16 X + 3 X x3 + 5) summed over x3
    assert prover_round_naive(inst, [4], 1) == [10, 10 + 32 + 3]


def test_check_round():
    assert verifier_check_round(1, [0, 1], None, 1)
    assert not verifier_check_round(1, [0, 1, 2], None, 1)
    assert not verifier_check_round(2, [0, 1], None, 1)
    assert verifier_check_round([0, 1], [3, 4], 7, 1)


def test_honest_product():
    res = run_sumcheck(product_instance(), rng=1)
    assert res.accepted
    assert res.transcript.sumcheck_rounds == 2


def test_wrong_claim_rejected():
    res = run_sumcheck(product_instance(claim=2), rng=1)
    assert not res.accepted and res.reason == "round check"


def test_wrong_length_rejected():
    inst = product_instance()
    bad = tamper(naive_prover(inst), lambda k, m: Message(ROUND, tuple(m.values) + (0,)) if k == 0 else m)
    res = run_sumcheck(inst, bad, rng=1)
    assert not res.accepted and res.reason == "degree"


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_naive_prover_accepts_and_sums(seed):
    r = random.Random(seed)
    _, g = random_poly(r, 4, 3)
    inst = SumcheckInstance(4, [3] * 4, 0, g)
    inst.claimed_sum = brute_force_sum(inst)
    inst.calls = 0
    res = run_sumcheck(inst, rng=r)
    assert res.accepted
    # naive prover: (deg+1) * 2^(v-j-1) calls in round j, plus one final check
    assert inst.calls <= 4 * (1 << 4)


def test_claim_off_by_one():
    rng = random.Random(8)
    _, g = random_poly(rng, 3, 2)
    inst = SumcheckInstance(3, [2] * 3, 0, g)
    inst.claimed_sum = F.add(brute_force_sum(inst), 1)
    assert not run_sumcheck(inst, rng=3).accepted


def _perturb_eval(rng):
    def edit(k, msg, target=rng.randrange(4), pos=rng.randrange(4)):
        if k != target:
            return msg
        vals = list(msg.values)
        vals[pos] = F.add(vals[pos], 1)
        return Message(msg.kind, tuple(vals))
    return edit


def test_perturbed_eval_always_rejected():
    rng = random.Random(9)
    _, g = random_poly(rng, 4, 3)
    inst = SumcheckInstance(4, [3] * 4, 0, g)
    inst.claimed_sum = brute_force_sum(inst)
    for trial in range(500):
        res = run_sumcheck(inst, tamper(naive_prover(inst), _perturb_eval(rng)), rng=trial)
        assert not res.accepted


def test_replayed_round_rejected():
    rng = random.Random(10)
    _, g = random_poly(rng, 4, 2)
    inst = SumcheckInstance(4, [2] * 4, 0, g)
    inst.claimed_sum = brute_force_sum(inst)
    for trial in range(500):
        seen = []

        def edit(k, msg):
            seen.append(msg)
            return seen[k - 1] if k == 2 else msg

        res = run_sumcheck(inst, tamper(naive_prover(inst), edit), rng=trial)
        assert not res.accepted


def test_terminal_claim_delegation():
    inst = product_instance()
    res = run_sumcheck(inst, rng=4, check_final=False)
    assert res.accepted and res.value == F.mul(res.point[0], res.point[1])


def test_nonzero_draw_mode():
    res = run_sumcheck(product_instance(), rng=4, nonzero=True)
    assert res.accepted and all(r != 0 for r in res.point)
    with pytest.raises(ValueError):
        SumcheckInstance(2, [1], 0, lambda x: 0)
