"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary (see
conftest.py) so they appear in a plain ``pytest -v`` log.
"""

import itertools
import random
import time

import numpy as np

from artifact import field as F
from artifact import kernels as K
from artifact.circuit import (ADD, MUL, build_binary_tree, build_distinct_circuit, build_matmult_circuit,
                              build_patternmatch_layers, random_irregular_circuit, random_wiring)
from artifact.dataparallel import (DP_OPS, SuperCircuit, layer_degrees, layer_polynomial_dp, prove_dp_layer)
from artifact.gkr import fast_layer_prover, layer_polynomial_general, prove_addition_tree
from artifact.harness import KB, MUTATIONS, TASKS, fuzz_soundness, make_task, run_task
from artifact.matmul_special import matrix_mle, naive_matmul, prove_matmul
from artifact.mle import WorkCounter, build_chi_table, eval_mle_stream, eval_mle_table
from artifact.patternmatch import PatternLayer, prove_pattern_layer, prove_pattern_layer_naive
from artifact.sumcheck import SumcheckInstance, prover_round_naive
from artifact.transcript import ROUND

from conftest import challenge_feed, drive, rand_point, rand_vec

RESULTS: dict[int, str] = {}


def report(k: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {k} ({title}): {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def naive_rounds(nv, degrees, oracle, ch):
    inst = SumcheckInstance(nv, degrees, 0, oracle)
    return [prover_round_naive(inst, ch[:j], j) for j in range(nv)]


# ---------------------------------------------------------------- 1. oracle equivalence

SEEDS = 50


def _gkr_layer_wirings():
    ws = [lay.wiring for lay in build_binary_tree(32, MUL).layers]
    ws += [lay.wiring for lay in build_binary_tree(16, ADD).layers]
    ws += [lay.wiring for lay in build_distinct_circuit(8).layers]
    ws += [lay.wiring for lay in build_matmult_circuit(4).layers]
    ws += [lay.wiring for lay in build_patternmatch_layers(8, 2).layers if lay.wiring is not None]
    return [w for w in ws if w.s_in <= 6]


def _eq_gkr_layers(r):
    ok = True
    for w in _gkr_layer_wirings():
        v_next = rand_vec(r, 1 << w.s_next)
        z = [F.random_nonzero(r) for _ in range(w.s_in)]
        ch = rand_point(r, w.s_in)
        ok &= fast_layer_prover(w, v_next, z, ch) == naive_rounds(
            w.s_in, w.degrees(), layer_polynomial_general(w, v_next, z), ch)
    return ok


def _eq_general_wiring(r):
    w = random_wiring(r, r.randint(1, 4), r.randint(1, 4), max_select=2)
    v_next = rand_vec(r, 1 << w.s_next)
    z = [F.random_nonzero(r) for _ in range(w.s_in)]
    ch = rand_point(r, w.s_in)
    return fast_layer_prover(w, v_next, z, ch) == naive_rounds(
        w.s_in, w.degrees(), layer_polynomial_general(w, v_next, z), ch)


def _eq_addition_tree(r):
    k = r.randint(1, 8)
    top = r.randint(0, k - 1)
    leaves = rand_vec(r, 1 << k)
    z = rand_point(r, top)
    ch = rand_point(r, k)
    fast = drive(prove_addition_tree(leaves, z), challenge_feed(ch))
    slow = drive(prove_addition_tree(leaves, z, naive=True), challenge_feed(ch))
    return fast == slow


def _eq_dataparallel(r):
    b = r.randint(0, 3)
    base = random_irregular_circuit(r, 2, max_bits=3, ops=DP_OPS)
    sc = SuperCircuit(base, 1 << b)
    if sc.size() > 1 << 10:
        return True
    values = sc.evaluate(rand_vec(r, base.input_size << b))
    i = r.randrange(len(base.layers))
    layer, s_next = base.layers[i], base.size_bits(i + 1)
    z = rand_point(r, layer.size_bits + b)
    nv = layer.size_bits + 2 * s_next + b
    ch = rand_point(r, nv + 1)
    msgs, _ = drive(prove_dp_layer(layer, s_next, b, values[i + 1], z), challenge_feed(ch))
    return [list(m.values) for m in msgs if m.kind == ROUND] == naive_rounds(
        nv, layer_degrees(layer.size_bits, s_next, b), layer_polynomial_dp(layer, s_next, b, values[i + 1], z), ch)


def _eq_matmul(r):
    n = r.choice([2, 4, 8])
    L = n.bit_length() - 1
    a = np.asarray([[F.random_element(r) for _ in range(n)] for _ in range(n)], dtype=np.uint64)
    b = np.asarray([[F.random_element(r) for _ in range(n)] for _ in range(n)], dtype=np.uint64)
    r12 = rand_point(r, 2 * L)
    ch = rand_point(r, L)
    feed = iter(ch)
    msgs, _ = drive(prove_matmul(a, b), lambda m: r12 if m.kind != ROUND else [next(feed)])
    r1, r2 = r12[:L], r12[L:]
    return [list(m.values) for m in msgs if m.kind == ROUND] == naive_rounds(
        L, [2] * L, lambda p3: F.mul(matrix_mle(a, r1, p3), matrix_mle(b, p3, r2)), ch)


def _eq_pattern(r):
    t, p = rand_vec(r, 4), rand_vec(r, 2)
    pl = PatternLayer(4, 2)
    z = rand_point(r, pl.L + pl.Lm)
    ch = rand_point(r, pl.num_vars)
    fast = drive(prove_pattern_layer(t, p, z), challenge_feed(ch))
    slow = drive(prove_pattern_layer_naive(t, p, z), challenge_feed(ch))
    return fast[0] == slow[0] and fast[1] == slow[1]


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    checks = {"gkr-layers": _eq_gkr_layers, "general-wiring": _eq_general_wiring,
              "addition-tree": _eq_addition_tree, "data-parallel": _eq_dataparallel,
              "matmul-special": _eq_matmul, "pattern-layer": _eq_pattern}
    failures = {}
    for name, check in checks.items():
        bad = [seed for seed in range(SEEDS) if not check(random.Random(1000 + seed))]
        if bad:
            failures[name] = bad
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300
    report(1, "oracle equivalence", ok,
           f"{len(checks)} provers x {SEEDS} seeds, mismatches {failures or 'none'}, {elapsed:.1f}s")


# ---------------------------------------------------------------- 2. completeness

RUNS = 200


def _random_task(name: str, r: random.Random):
    iseed = r.getrandbits(32)
    if name in ("matmul-gkr", "matmul-tree"):
        return make_task(name, n=r.choice([2, 4, 8]), iseed=iseed)
    if name == "matmul-special":
        return make_task(name, n=r.choice([1, 2, 4, 8, 16, 32]), iseed=iseed, in_place=r.random() < 0.5,
                         algorithm=r.choice(["naive", "blocked"]))
    if name == "matpow":
        return make_task(name, n=r.choice([1, 2, 4, 8]), k=r.randint(1, 3), iseed=iseed)
    if name == "distinct":
        return make_task(name, n=r.choice([2, 4, 8, 16, 32]), iseed=iseed, updates=r.randint(0, 40))
    if name == "pattern":
        m = r.choice([1, 2, 4])
        return make_task(name, n=r.randint(m, 24), m=m, iseed=iseed)
    if name == "dataparallel":
        return make_task(name, copies=r.choice([1, 2, 4, 8, 16, 64]), iseed=iseed)
    if name == "gkr-generic":
        return make_task(name, n=r.choice([2, 4, 8, 16, 64, 256]), iseed=iseed)
    return make_task(name, n=r.choice([2, 4, 8, 16]), iseed=iseed)


def _same(a, b) -> bool:
    if isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), b)
    return a == b


def test_criterion_2_completeness():
    r = random.Random(2)
    rejected = {}
    wrong = {}
    for name in TASKS:
        for _ in range(RUNS):
            task = _random_task(name, r)
            run = run_task(task, r.getrandbits(64))
            if not run.verdict.accepted:
                rejected[name] = rejected.get(name, 0) + 1
            elif task.expected is not None and not _same(run.answer, task.expected()):
                wrong[name] = wrong.get(name, 0) + 1
    ok = not rejected and not wrong
    report(2, "completeness", ok,
           f"{len(TASKS)} protocols x {RUNS} honest runs, rejections {rejected or 0}, wrong answers {wrong or 0}")


# ---------------------------------------------------------------- 3. soundness fuzz

TRIALS = 500


def test_criterion_3_soundness_fuzz():
    bad = []
    total = 0
    for name in TASKS:
        control = fuzz_soundness(name, "none", TRIALS)
        if control.rejections:
            bad.append(f"{name}/none rejected {control.rejections}")
        for mutation in MUTATIONS[1:]:
            stats = fuzz_soundness(name, mutation, TRIALS, seed=3)
            total += stats.trials
            if stats.rejections != stats.trials:
                bad.append(f"{name}/{mutation} {stats.rejections}/{stats.trials}")
    report(3, "soundness fuzz", not bad,
           f"{total} tampered runs over {len(TASKS)} protocols x {len(MUTATIONS) - 1} mutations"
           f" ({TRIALS} each); failures {bad or 'none'}")


# ---------------------------------------------------------------- 4. round counts


def test_criterion_4_matmul_special_rounds():
    got = {}
    for n, want in ((1 << 10, 11), (1 << 11, 12)):
        rng = np.random.default_rng(n)
        a = rng.integers(0, 1 << 10, size=(n, n), dtype=np.int64)
        b = rng.integers(0, 1 << 10, size=(n, n), dtype=np.int64)
        # entries < 2^10 keep the integer product below 2^31: any exact algorithm may supply D*
        mats = [a.astype(np.uint64), b.astype(np.uint64)]
        task = make_task("matmul-special", n=n, iseed=n, mats=mats, in_place=True)
        run = run_task(task, 1)
        got[n] = (run.verdict.accepted, run.transcript.rounds, want)
    ok = all(acc and rounds == want for acc, rounds, want in got.values())
    report(4, "matmul-special rounds", ok,
           ", ".join(f"n={n}: {r} rounds (want {w}, {'accept' if a else 'reject'})" for n, (a, r, w) in got.items()))


# ---------------------------------------------------------------- 5. rounds and communication


def test_criterion_5_rounds_and_communication():
    rows = []
    ok = True

    def check(name, n, rounds_ok, kb_target, label):
        nonlocal ok
        run = run_task(make_task(name, n=n), 1)
        tr = run.transcript
        kb = tr.communication_bytes / KB
        good = run.verdict.accepted and rounds_ok(tr.rounds) and abs(kb - kb_target) <= 0.10 * kb_target
        ok &= good
        rows.append(f"{label}: {tr.rounds} rounds, {kb:.2f} KB{'' if good else ' (out of band)'}")

    check("matmul-gkr", 256, lambda x: abs(x - 190) <= 2, 4.4, "MATMULT n=256")
    check("matmul-tree", 256, lambda x: x == 35, 0.76, "MATMULT tree n=256")
    check("distinct", 1 << 20, lambda x: abs(x - 1361) <= 0.05 * 1361, 40.76, "DISTINCT n=2^20")
    report(5, "rounds/communication", ok, "; ".join(rows))


# ---------------------------------------------------------------- 6. overhead ratio


def test_criterion_6_overhead_ratio():
    n = 1 << 10
    rng = np.random.default_rng(6)
    a = rng.integers(0, F.Q, size=(n, n), dtype=np.uint64)
    b = rng.integers(0, F.Q, size=(n, n), dtype=np.uint64)
    naive_matmul(a[:2, :2].copy(), b[:2, :2].copy())
    t = time.perf_counter()
    d = naive_matmul(a, b)
    matmul_s = time.perf_counter() - t
    task = make_task("matmul-special", n=n, mats=[a, b], in_place=True)
    proofgen = min(run_task(task, s, state=d).report.proofgen_ms for s in range(3)) / 1e3
    wc = WorkCounter()
    drive(prove_matmul(a.copy(), b.copy(), d, in_place=True, counter=wc),
          lambda m: [5] * 20 if m.kind != ROUND else [7])
    ratio = proofgen / matmul_s
    ok = ratio <= 0.10 and wc.count <= 24 * n * n
    report(6, "matmul-special overhead", ok,
           f"proof generation {proofgen * 1e3:.1f} ms vs naive matmul {matmul_s * 1e3:.0f} ms"
           f" (ratio {ratio:.4f}); extra multiplications {wc.count} = {wc.count / (n * n):.2f} n^2")


# ---------------------------------------------------------------- 7. asymptotic sanity


def test_criterion_7_matmult_growth():
    times = {}
    for n in (64, 128, 256):
        task = make_task("matmul-gkr", n=n)
        state = task.compute()
        times[n] = min(run_task(task, s, state=state).report.proofgen_ms for s in range(3))
    ratios = [times[128] / times[64], times[256] / times[128]]
    ok = all(6 <= x <= 11 for x in ratios)
    report(7, "MATMULT proof-generation growth", ok,
           ", ".join(f"n={n}: {t:.0f} ms" for n, t in times.items())
           + f"; ratios {ratios[0]:.2f}, {ratios[1]:.2f} (band [6, 11])")


# ---------------------------------------------------------------- 8. MLE identities


def test_criterion_8_streaming_vs_table():
    r = random.Random(8)
    mismatches = 0
    worst = 0.0
    for k in range(200):
        v = r.randint(0, 16) if k >= 10 else 16 - k
        n = 1 << v
        vals = np.asarray(np.random.default_rng(k).integers(0, F.Q, size=n, dtype=np.uint64))
        w = rand_point(r, v)
        wc = WorkCounter()
        table = build_chi_table(w, wc)
        memo = int(K.vdot(vals, table.entries))
        stream = eval_mle_stream((np.arange(n, dtype=np.uint64), vals), w)
        mismatches += memo != stream or memo != eval_mle_table(vals, w)
        worst = max(worst, wc.count / n)
    ok = mismatches == 0 and worst <= 4
    report(8, "streaming vs memoized MLE", ok,
           f"200 instances up to n=2^16, mismatches {mismatches}, max build work {worst:.2f} n")


# ---------------------------------------------------------------- 9. product and MLE identities


def _mle_by_definition(table, point):
    """sum_w f(w) prod_i chi_{w_i}(x_i), straight from the definition."""
    v = len(point)
    total = 0
    for idx, bits in enumerate(itertools.product((0, 1), repeat=v)):
        term = int(table[idx])
        for b, x in zip(bits, point):
            term = F.mul(term, x if b else F.sub(1, x))
        total = F.add(total, term)
    return total


def test_criterion_9_exhaustive_identities():
    r = random.Random(9)
    bad_mle = bad_prod = 0
    for _ in range(300):
        v = r.randint(0, 4)
        f = rand_vec(r, 1 << v)
        x = rand_point(r, v)
        bad_mle += _mle_by_definition(f, x) != eval_mle_table(f, x)
        # and the extension agrees with f on the hypercube
        bits = [r.randint(0, 1) for _ in range(v)]
        bad_mle += _mle_by_definition(f, bits) != int(f[int("".join(map(str, bits)) or "0", 2)])
    for _ in range(300):
        n = r.choice([2, 4])
        L = n.bit_length() - 1
        a = np.asarray([[F.random_element(r) for _ in range(n)] for _ in range(n)], dtype=np.uint64)
        b = np.asarray([[F.random_element(r) for _ in range(n)] for _ in range(n)], dtype=np.uint64)
        d = [[0] * n for _ in range(n)]
        for i, j, k in itertools.product(range(n), repeat=3):
            d[i][j] = F.add(d[i][j], F.mul(int(a[i][k]), int(b[k][j])))
        r1, r2 = rand_point(r, L), rand_point(r, L)
        lhs = 0
        for p3 in itertools.product((0, 1), repeat=L):
            lhs = F.add(lhs, F.mul(_mle_by_definition(a.reshape(-1), r1 + list(p3)),
                                   _mle_by_definition(b.reshape(-1), list(p3) + r2)))
        bad_prod += lhs != _mle_by_definition(np.asarray(d, dtype=np.uint64).reshape(-1), r1 + r2)
    ok = bad_mle == 0 and bad_prod == 0
    report(9, "product and extension identities", ok,
           f"300 draws each at <= 4 variables; extension mismatches {bad_mle}, product mismatches {bad_prod}")
