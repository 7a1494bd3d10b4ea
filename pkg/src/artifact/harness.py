"""Operational surface: task registry, timing, benchmark tables, soundness
fuzzing, input files and offline transcript re-verification.

A *task* bundles an instance (inputs fixed by an instance seed or read from
a file), the honest computation, an honest prover and the verifier.  Every
transcript produced through this module carries the instance seed as its
last meta value (or ``INPUT_FROM_FILE``), which is what lets
``verify_transcript`` rebuild the instance and re-run the verifier.
"""

from __future__ import annotations

import random
import struct
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .circuit import MUL, build_binary_tree, build_distinct_circuit, build_matmult_circuit, evaluate
from .dataparallel import (PROTOCOL_DATAPARALLEL, SuperCircuit, and4_circuit, copy_major_to_interleaved, count_query_prover,
                           verify_count_query)
from .gkr import PROTOCOL_GKR, prove_circuit, verify_circuit
from .matmul_special import (PROTOCOL_MATMUL, PROTOCOL_MATPOW, blocked_matmul, matrix_powers, naive_matmul, prove_matmul,
                             prove_matrix_power, verify_matmul, verify_matrix_power)
from .mle import eval_mle_table, log2_exact
from .patternmatch import PROTOCOL_PATTERN, PatternInstance, naive_count, prove_patternmatch, verify_patternmatch
from .sumcheck import PROTOCOL_SUMCHECK, SumcheckInstance, naive_prover, sumcheck_verify
from .transcript import (CLAIMS, LINE, OUTPUT, ROUND, Channel, Message, ProofTranscript, Reject,
                         TranscriptError, Verdict, replay_prover, run_protocol, tamper)

PROTOCOL_MATMUL_GKR = 1
PROTOCOL_MATMUL_TREE = 2
PROTOCOL_DISTINCT = 5
PROTOCOL_GKR_GENERIC = PROTOCOL_GKR

INPUT_FROM_FILE = (1 << 64) - 1
KB = 1024

# Largest instance sizes accepted when rebuilding from transcript metadata.
_META_LIMITS = {
    PROTOCOL_MATMUL_GKR: 512, PROTOCOL_MATMUL_TREE: 512, PROTOCOL_MATMUL: 4096, PROTOCOL_MATPOW: 1024,
    PROTOCOL_DISTINCT: 1 << 22, PROTOCOL_PATTERN: 1 << 12, PROTOCOL_DATAPARALLEL: 1 << 20,
    PROTOCOL_GKR_GENERIC: 1 << 22, PROTOCOL_SUMCHECK: 1 << 12,
}


class InputError(ValueError):
    """Malformed user input (bad file, bad size); the CLI exits with status 2."""


# ---------------------------------------------------------------- input files


def _encode_signed_array(raw: np.ndarray) -> np.ndarray:
    """int64 values -> canonical field elements (negative values wrap)."""
    return np.mod(raw.astype(np.int64), np.int64(F.Q)).astype(np.uint64)


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def read_matrix_file(path, blocks: int = 2) -> list[np.ndarray]:
    """{n: u32} then ``blocks`` row-major n x n blocks of 8-byte signed entries."""
    data = _read(path)
    if len(data) < 4:
        raise InputError("matrix file is missing its header")
    (n,) = struct.unpack_from("<I", data, 0)
    if n == 0:
        raise InputError("matrix dimension must be positive")
    need = 4 + blocks * n * n * 8
    if len(data) != need:
        raise InputError(f"matrix file should hold {need} bytes for n={n}, found {len(data)}")
    raw = np.frombuffer(data, dtype="<i8", offset=4)
    return [_encode_signed_array(raw[b * n * n:(b + 1) * n * n]).reshape(n, n) for b in range(blocks)]


def write_matrix_file(path, *mats) -> None:
    n = len(mats[0])
    out = bytearray(struct.pack("<I", n))
    for m in mats:
        out += np.asarray(m, dtype=np.int64).astype("<i8").tobytes()
    Path(path).write_bytes(bytes(out))


def read_stream_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Repeated {i: u64, delta: i64} records -> (indices, signed deltas)."""
    data = _read(path)
    if len(data) % 16:
        raise InputError("stream file length is not a multiple of 16 bytes")
    rec = np.frombuffer(data, dtype=np.dtype([("i", "<u8"), ("d", "<i8")]))
    return rec["i"].astype(np.uint64), rec["d"].astype(np.int64)


def write_stream_file(path, updates) -> None:
    out = bytearray()
    for i, d in updates:
        out += struct.pack("<Qq", int(i), int(d))
    Path(path).write_bytes(bytes(out))


def read_int_file(path) -> list[int]:
    """A sequence of 8-byte little-endian signed integers."""
    data = _read(path)
    if len(data) % 8:
        raise InputError("integer file length is not a multiple of 8 bytes")
    return np.frombuffer(data, dtype="<i8").astype(np.int64).tolist()


def write_int_file(path, values) -> None:
    Path(path).write_bytes(np.asarray(list(values), dtype="<i8").tobytes())


def read_copies_file(path) -> tuple[int, int, np.ndarray]:
    """{B: u64, n: u64} then B*n 8-byte elements, copy by copy."""
    data = _read(path)
    if len(data) < 16:
        raise InputError("copies file is missing its header")
    B, n = struct.unpack_from("<QQ", data, 0)
    if B == 0 or n == 0 or len(data) != 16 + 8 * B * n:
        raise InputError(f"copies file does not hold B*n = {B}*{n} elements")
    raw = np.frombuffer(data, dtype="<i8", offset=16)
    return int(B), int(n), _encode_signed_array(raw)


def write_copies_file(path, rows: Sequence[Sequence[int]]) -> None:
    B, n = len(rows), len(rows[0])
    out = bytearray(struct.pack("<QQ", B, n))
    out += np.asarray(rows, dtype=np.int64).astype("<i8").tobytes()
    Path(path).write_bytes(bytes(out))


def next_pow2(x: int, minimum: int = 1) -> int:
    n = minimum
    while n < x:
        n *= 2
    return n


def pad_matrix(m: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.uint64)
    out[:m.shape[0], :m.shape[1]] = m
    return out


def aggregate_stream(idx: np.ndarray, delta: np.ndarray, n: int) -> np.ndarray:
    """Dense frequency vector over F from a stream of (index, signed delta)."""
    if len(idx) and int(idx.max()) >= n:
        raise InputError("stream index out of range")
    acc = np.zeros(n, dtype=np.uint64)
    K.scatter_add(acc, idx.astype(np.int64), _encode_signed_array(delta))
    return acc


# ---------------------------------------------------------------- tasks


@dataclass
class Task:
    """One protocol instance: honest computation, prover factory and verifier."""

    name: str
    protocol: int
    size: int
    iseed: int
    compute: Callable[[], object]
    prover: Callable[[object], object]
    verify: Callable[[object, int], Verdict]
    answer: Callable[[object], object] = lambda out: out
    expected: Callable[[], object] | None = None
    notes: dict = dc_field(default_factory=dict)

    def run(self, seed: int = 0, edit: Callable[[int, Message], Message] | None = None,
            state=None) -> "TaskRun":
        return run_task(self, seed, edit, state)


def _rng(iseed: int) -> np.random.Generator:
    return np.random.default_rng(iseed)


def _check_pow2(n: int, what: str = "n") -> int:
    try:
        return log2_exact(int(n))
    except ValueError:
        raise InputError(f"{what} must be a power of two, got {n}") from None


def _small_matrix(rng: np.random.Generator, n: int, bound: int) -> np.ndarray:
    return rng.integers(0, bound, size=(n, n), dtype=np.int64).astype(np.uint64)


def _matrix_task(name: str, protocol: int, n: int, iseed: int, mats, naive: bool,
                 algorithm: str = "naive", in_place: bool = False) -> Task:
    _check_pow2(n)
    if mats is None:
        rng = _rng(iseed)
        a, b = _small_matrix(rng, n, 1 << 10), _small_matrix(rng, n, 1 << 10)
    else:
        a, b = mats
    if protocol == PROTOCOL_MATMUL:
        def compute():
            return blocked_matmul(a, b) if algorithm == "blocked" else naive_matmul(a, b)

        def prover(d):
            pa, pb = (a.copy(), b.copy()) if in_place else (a, b)
            return prove_matmul(pa, pb, d, algorithm, in_place)

        def verify(p, seed):
            return verify_matmul(a, b, p, seed)

        return Task(name, protocol, n, iseed, compute, prover, verify,
                    answer=lambda out: np.asarray(out, dtype=np.uint64),
                    expected=lambda: naive_matmul(a, b), notes={"a": a, "b": b})

    use_tree = protocol == PROTOCOL_MATMUL_TREE
    c = build_matmult_circuit(n)
    inputs = np.concatenate([a.reshape(-1), b.reshape(-1)])

    def compute():
        return evaluate(c, inputs)

    def prover(values):
        return prove_circuit(c, values, use_tree, naive=naive)

    def verify(p, seed):
        return verify_circuit(c, inputs, p, seed, use_tree, protocol=protocol, meta=[n])

    return Task(name, protocol, n, iseed, compute, prover, verify,
                answer=lambda out: np.asarray(out, dtype=np.uint64).reshape(n, n),
                expected=lambda: naive_matmul(a, b), notes={"a": a, "b": b, "circuit": c})


def matmul_gkr_task(n: int = 16, iseed: int = 1, mats=None, naive: bool = False) -> Task:
    return _matrix_task("matmul-gkr", PROTOCOL_MATMUL_GKR, n, iseed, mats, naive)


def matmul_tree_task(n: int = 16, iseed: int = 1, mats=None, naive: bool = False) -> Task:
    return _matrix_task("matmul-tree", PROTOCOL_MATMUL_TREE, n, iseed, mats, naive)


def matmul_special_task(n: int = 16, iseed: int = 1, mats=None, algorithm: str = "naive",
                        in_place: bool = False) -> Task:
    return _matrix_task("matmul-special", PROTOCOL_MATMUL, n, iseed, mats, False, algorithm, in_place)


def matpow_task(n: int = 8, k: int = 2, iseed: int = 1, matrix=None) -> Task:
    _check_pow2(n)
    if k < 1:
        raise InputError("k must be at least 1")
    m = _small_matrix(_rng(iseed), n, 4) if matrix is None else matrix

    def compute():
        return matrix_powers(m, k)

    return Task("matpow", PROTOCOL_MATPOW, n, iseed, compute,
                lambda powers: prove_matrix_power(m, k, powers),
                lambda p, seed: verify_matrix_power(m, k, p, seed),
                answer=lambda out: np.asarray(out, dtype=np.uint64),
                expected=lambda: matrix_powers(m, k)[-1], notes={"m": m, "k": k})


def random_stream(n: int, length: int, iseed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = _rng(iseed)
    idx = rng.integers(0, n, size=length, dtype=np.int64).astype(np.uint64)
    delta = rng.choice(np.asarray([-2, -1, 1, 2, 3], dtype=np.int64), size=length)
    return idx, delta


def distinct_task(n: int = 16, iseed: int = 1, stream=None, updates: int | None = None,
                  naive: bool = False) -> Task:
    _check_pow2(n)
    if n < 2:
        raise InputError("the universe must have at least 2 elements")
    if stream is None:
        stream = random_stream(n, n if updates is None else updates, iseed)
    idx, delta = stream
    c = build_distinct_circuit(n)
    freq = aggregate_stream(idx, delta, n)

    def compute():
        return evaluate(c, freq)

    def prover(values):
        return prove_circuit(c, values, True, naive=naive)

    def verify(p, seed):
        return verify_circuit(c, (idx, delta), p, seed, True, protocol=PROTOCOL_DISTINCT,
                              meta=[n, len(idx)])

    return Task("distinct", PROTOCOL_DISTINCT, n, iseed, compute, prover, verify,
                answer=lambda out: int(out[0]), expected=lambda: int(np.count_nonzero(freq)),
                notes={"circuit": c, "stream": stream})


def pattern_task(n: int = 15, m: int = 4, iseed: int = 1, text=None, pattern=None,
                 naive: bool = False) -> Task:
    """``n`` is the text length; the pattern is cut from the text when random."""
    if text is None:
        rng = _rng(iseed)
        text = rng.integers(0, 3, size=n).tolist()
        if pattern is None:
            start = int(rng.integers(0, n - m + 1)) if n >= m else 0
            pattern = text[start:start + m]
    if len(pattern) == 0 or len(pattern) & (len(pattern) - 1):
        raise InputError("pattern length must be a power of two")
    if len(pattern) > len(text):
        raise InputError("pattern longer than text")
    inst = PatternInstance(text, pattern)

    def compute():
        return evaluate(inst.circuit, inst.inputs())

    return Task("pattern", PROTOCOL_PATTERN, len(text), iseed, compute,
                lambda values: prove_patternmatch(inst, naive, values),
                lambda p, seed: verify_patternmatch(text, pattern, p, seed),
                answer=int, expected=lambda: naive_count(text, pattern),
                notes={"text": list(text), "pattern": list(pattern), "instance": inst})


def dataparallel_task(copies: int = 16, iseed: int = 1, data=None) -> Task:
    """Counting query: number of copies whose 4 bits are all set."""
    base = and4_circuit()
    _check_pow2(copies, "number of copies")
    if data is None:
        rng = _rng(iseed)
        data = (rng.random(copies * base.input_size) < 0.7).astype(np.uint64)
    data = np.asarray(data, dtype=np.uint64).reshape(-1)
    sc = SuperCircuit(base, copies)
    flat = copy_major_to_interleaved(data, copies)

    def compute():
        return sc.evaluate(flat)

    def expected():
        rows = data.reshape(copies, base.input_size)
        return int(sum(1 for row in rows if all(int(x) == 1 for x in row)))

    return Task("dataparallel", PROTOCOL_DATAPARALLEL, copies, iseed, compute,
                lambda values: count_query_prover(sc, values),
                lambda p, seed: verify_count_query(sc, data, p, seed, copy_major=True),
                answer=int, expected=expected, notes={"data": data, "circuit": sc})


def gkr_generic_task(n: int = 64, iseed: int = 1, leaves=None, naive: bool = False) -> Task:
    """Product of n field elements through a binary multiplication tree."""
    _check_pow2(n)
    if leaves is None:
        rng = random.Random(iseed)
        leaves = np.asarray([F.random_element(rng) for _ in range(n)], dtype=np.uint64)
    c = build_binary_tree(n, MUL)

    def expected():
        out = 1
        for x in leaves:
            out = F.mul(out, int(x))
        return out

    return Task("gkr-generic", PROTOCOL_GKR_GENERIC, n, iseed, lambda: evaluate(c, leaves),
                lambda values: prove_circuit(c, values, naive=naive),
                lambda p, seed: verify_circuit(c, leaves, p, seed, protocol=PROTOCOL_GKR_GENERIC, meta=[n]),
                answer=lambda out: int(out[0]), expected=expected, notes={"circuit": c})


def sumcheck_task(n: int = 64, iseed: int = 1) -> Task:
    """Sum over the hypercube of the product of three multilinear tables."""
    v = _check_pow2(n)
    if v < 1:
        raise InputError("the sum-check task needs at least one variable")
    rng = random.Random(iseed)
    tables = [np.asarray([F.random_element(rng) for _ in range(n)], dtype=np.uint64) for _ in range(3)]

    def oracle(point):
        out = 1
        for t in tables:
            out = F.mul(out, eval_mle_table(t, point))
        return out

    def compute():
        return int(K.vdot(K.vmul(tables[0], tables[1]), tables[2]))

    def prover(total):
        inst = SumcheckInstance(v, [3] * v, total, oracle)
        yield Message(OUTPUT, (total,))
        return (yield from naive_prover(inst))

    def verify(p, seed):
        def verifier(chan: Channel):
            (claim,) = chan.receive(OUTPUT, 1)
            point, value = sumcheck_verify(chan, [3] * v, claim)
            if oracle(point) != value:
                raise Reject("final evaluation")
            return claim

        return run_protocol(p, verifier, seed, PROTOCOL_SUMCHECK, [n])

    return Task("sumcheck", PROTOCOL_SUMCHECK, n, iseed, compute, prover, verify,
                answer=int, expected=compute, notes={"tables": tables})


TASKS: dict[str, tuple[int, Callable[..., Task]]] = {
    "matmul-gkr": (PROTOCOL_MATMUL_GKR, matmul_gkr_task),
    "matmul-tree": (PROTOCOL_MATMUL_TREE, matmul_tree_task),
    "matmul-special": (PROTOCOL_MATMUL, matmul_special_task),
    "matpow": (PROTOCOL_MATPOW, matpow_task),
    "distinct": (PROTOCOL_DISTINCT, distinct_task),
    "pattern": (PROTOCOL_PATTERN, pattern_task),
    "dataparallel": (PROTOCOL_DATAPARALLEL, dataparallel_task),
    "gkr-generic": (PROTOCOL_GKR_GENERIC, gkr_generic_task),
    "sumcheck": (PROTOCOL_SUMCHECK, sumcheck_task),
}
PROTOCOL_NAMES = {pid: name for name, (pid, _) in TASKS.items()}


def make_task(name: str, **kwargs) -> Task:
    if name not in TASKS:
        raise InputError(f"unknown protocol {name!r}")
    return TASKS[name][1](**kwargs)


# Small instances used by the soundness fuzzer.
FUZZ_SIZES: dict[str, dict] = {
    "matmul-gkr": {"n": 4},
    "matmul-tree": {"n": 4},
    "matmul-special": {"n": 16},
    "matpow": {"n": 4, "k": 2},
    "distinct": {"n": 4},
    "pattern": {"n": 3, "m": 2},
    "dataparallel": {"copies": 8},
    "gkr-generic": {"n": 64},
    "sumcheck": {"n": 16},
}


# ---------------------------------------------------------------- timing and reports


class Stopwatch:
    def __init__(self):
        self.elapsed = 0.0


def timed_prover(gen, watch: Stopwatch):
    """Forward a prover generator, charging the time spent inside it to ``watch``."""
    reply = None
    first = True
    try:
        while True:
            t = time.perf_counter()
            try:
                msg = next(gen) if first else gen.send(reply)
            except StopIteration as stop:
                watch.elapsed += time.perf_counter() - t
                return stop.value
            watch.elapsed += time.perf_counter() - t
            first = False
            reply = yield msg
    finally:
        gen.close()


@dataclass
class BenchReport:
    protocol: str
    protocol_id: int
    size: int
    rounds: int
    bytes: int
    eval_ms: float
    proofgen_ms: float
    verifier_ms: float
    accepted: bool
    answer_elements: int = 0

    @property
    def prover_ms(self) -> float:
        return self.eval_ms + self.proofgen_ms

    @property
    def verdict(self) -> str:
        return "accept" if self.accepted else "reject"

    @property
    def kilobytes(self) -> float:
        return self.bytes / KB

    @classmethod
    def from_transcript(cls, name: str, size: int, tr: ProofTranscript, eval_s: float,
                        proofgen_s: float, verifier_s: float, accepted: bool) -> "BenchReport":
        return cls(name, tr.protocol, size, tr.rounds, tr.communication_bytes, 1e3 * eval_s,
                   1e3 * proofgen_s, 1e3 * verifier_s, accepted, tr.answer_elements)

    def line(self) -> str:
        """Machine-readable, tab-separated."""
        return "\t".join([self.protocol, str(self.size), str(self.rounds), str(self.bytes),
                          f"{self.prover_ms:.3f}", f"{self.proofgen_ms:.3f}", f"{self.verifier_ms:.3f}",
                          self.verdict])


REPORT_HEADER = "\t".join(["protocol", "size", "rounds", "bytes", "prover_ms", "proofgen_ms",
                           "verifier_ms", "verdict"])


def format_table(reports: Sequence[BenchReport]) -> str:
    head = (f"{'protocol':<15}{'size':>9}{'rounds':>8}{'comm':>11}{'eval s':>10}{'proofgen s':>12}"
            f"{'gen/eval':>10}{'verifier s':>12}  verdict")
    rows = [head, "-" * len(head)]
    for r in reports:
        ratio = f"{r.proofgen_ms / r.eval_ms:.3f}" if r.eval_ms > 0 else "-"
        rows.append(f"{r.protocol:<15}{r.size:>9}{r.rounds:>8}{r.kilobytes:>8.2f} KB"
                    f"{r.eval_ms / 1e3:>10.3f}{r.proofgen_ms / 1e3:>12.3f}{ratio:>10}"
                    f"{r.verifier_ms / 1e3:>12.3f}  {r.verdict}")
    return "\n".join(rows)


@dataclass
class TaskRun:
    task: Task
    verdict: Verdict
    report: BenchReport
    state: object = None

    @property
    def transcript(self) -> ProofTranscript:
        return self.verdict.transcript

    @property
    def answer(self):
        return self.task.answer(self.verdict.answer) if self.verdict.accepted else None


def run_task(task: Task, seed: int = 0, edit: Callable[[int, Message], Message] | None = None,
             state=None) -> TaskRun:
    """Compute honestly (timed), then run the prover against the verifier.

    ``state`` reuses an earlier honest computation; ``edit`` tampers with the
    prover's messages."""
    t0 = time.perf_counter()
    if state is None:
        state = task.compute()
    eval_s = time.perf_counter() - t0
    watch = Stopwatch()
    prover = timed_prover(task.prover(state), watch)
    if edit is not None:
        prover = tamper(prover, edit)
    t1 = time.perf_counter()
    verdict = task.verify(prover, seed)
    total = time.perf_counter() - t1
    verdict.transcript.meta.append(task.iseed)
    report = BenchReport.from_transcript(task.name, task.size, verdict.transcript, eval_s, watch.elapsed,
                                         total - watch.elapsed, verdict.accepted)
    return TaskRun(task, verdict, report, state)


BENCH_CONFIGS: dict[str, list[tuple[str, dict]]] = {
    "quick": [
        ("matmul-gkr", {"n": 32}),
        ("matmul-tree", {"n": 32}),
        ("distinct", {"n": 1 << 12}),
        ("pattern", {"n": 255, "m": 8}),
        ("dataparallel", {"copies": 1 << 10}),
        ("matmul-special", {"n": 128, "in_place": True}),
        ("matpow", {"n": 32, "k": 3}),
        ("gkr-generic", {"n": 1 << 10}),
        ("sumcheck", {"n": 64}),
    ],
    "full": [
        ("matmul-gkr", {"n": 256}),
        ("matmul-tree", {"n": 256}),
        ("distinct", {"n": 1 << 20}),
        ("pattern", {"n": 1023, "m": 8}),
        ("dataparallel", {"copies": 1 << 16}),
        ("matmul-special", {"n": 1 << 10, "in_place": True}),
        ("matmul-special", {"n": 1 << 11, "in_place": True}),
        ("matpow", {"n": 256, "k": 4}),
    ],
}


def bench_suite(config: str | list = "quick", seed: int = 0, iseed: int = 1,
                progress: Callable[[BenchReport], None] | None = None) -> list[BenchReport]:
    """Run every row of a configuration and return one report per row."""
    rows = BENCH_CONFIGS[config] if isinstance(config, str) else config
    out = []
    for name, kwargs in rows:
        task = make_task(name, iseed=iseed, **kwargs)
        rep = run_task(task, seed).report
        out.append(rep)
        if progress is not None:
            progress(rep)
    return out


# ---------------------------------------------------------------- soundness fuzzing

MUTATIONS = ("none", "flip-output", "flip-eval", "truncate", "replay", "corrupt-line")


def _bump(values, pos: int) -> tuple:
    vals = [int(x) for x in values]
    vals[pos] = F.add(vals[pos], 1)
    return tuple(vals)


def _select_mutation(kinds: Sequence[int], messages: Sequence[Message], mutation: str,
                     rng: random.Random) -> Callable[[int, Message], Message]:
    """Build the edit function for one trial from the honest message shape."""
    rounds = [k for k, kind in enumerate(kinds) if kind == ROUND]

    def at(index: int, change: Callable[[Message], Message]):
        def edit(k, msg):
            return change(msg) if k == index else msg
        return edit

    if mutation == "none":
        return lambda k, msg: msg
    if mutation == "flip-output":
        k = kinds.index(OUTPUT)
        pos = rng.randrange(len(messages[k].values))
        return at(k, lambda msg: Message(msg.kind, _bump(msg.values, pos)))
    if mutation == "flip-eval":
        k = rng.choice(rounds)
        pos = rng.randrange(len(messages[k].values))
        return at(k, lambda msg: Message(msg.kind, _bump(msg.values, pos)))
    if mutation == "truncate":
        k = rng.choice([j for j, kind in enumerate(kinds) if kind != OUTPUT])
        return at(k, lambda msg: Message(msg.kind, tuple(int(x) for x in msg.values[:-1])))
    if mutation == "replay":
        later = [j for j in rounds if j != rounds[0]]
        if not later:
            raise ValueError("replay needs at least two sum-check rounds")
        k = rng.choice(later)
        earlier = [j for j in rounds if j < k]
        same = [j for j in earlier if len(messages[j].values) == len(messages[k].values)]
        src = rng.choice(same or earlier)
        seen: dict[int, tuple] = {}

        def edit(j, msg):
            seen[j] = tuple(int(x) for x in msg.values)
            if j != k:
                return msg
            replayed = seen[src]
            if replayed == seen[j]:
                replayed = _bump(replayed, 0)
            return Message(msg.kind, replayed)

        return edit
    if mutation == "corrupt-line":
        for kind in (LINE, CLAIMS):
            cand = [j for j, kd in enumerate(kinds) if kd == kind]
            if cand:
                k = rng.choice(cand)
                pos = rng.randrange(min(2, len(messages[k].values)))
                return at(k, lambda msg: Message(msg.kind, _bump(msg.values, pos)))
        k = rounds[-1]
        return at(k, lambda msg: Message(msg.kind, _bump(msg.values, 0)))
    raise ValueError(f"unknown mutation {mutation!r}")


@dataclass
class FuzzStats:
    protocol: str
    mutation: str
    trials: int
    rejections: int
    reasons: dict = dc_field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.rejections / self.trials if self.trials else 0.0

    def line(self) -> str:
        return f"{self.protocol}\t{self.mutation}\t{self.rejections}/{self.trials}"


def _honest_messages(task: Task, state, seed: int) -> list[Message]:
    seen: list[Message] = []

    def record(k, msg):
        seen.append(msg)
        return msg

    run = run_task(task, seed, record, state)
    if not run.verdict.accepted:
        raise RuntimeError(f"honest {task.name} run rejected: {run.verdict.reason}")
    return seen


def fuzz_soundness(protocol: str, mutation: str = "flip-eval", trials: int = 500, seed: int = 0,
                   task: Task | None = None) -> FuzzStats:
    """Run ``trials`` tampered executions (fresh verifier seed each) and count rejections."""
    if task is None:
        task = make_task(protocol, **FUZZ_SIZES[protocol])
    state = task.compute()
    rng = random.Random(seed)
    messages = _honest_messages(task, state, seed)
    kinds = [m.kind for m in messages]
    stats = FuzzStats(task.name, mutation, trials, 0)
    for t in range(trials):
        edit = _select_mutation(kinds, messages, mutation, rng)
        run = run_task(task, rng.getrandbits(64), edit, state)
        if not run.verdict.accepted:
            stats.rejections += 1
            stats.reasons[run.verdict.reason] = stats.reasons.get(run.verdict.reason, 0) + 1
    return stats


# ---------------------------------------------------------------- offline re-verification


@dataclass
class FileInputs:
    """Inputs supplied on the command line when a transcript used file data."""

    input: str | None = None
    stream: str | None = None
    text: str | None = None
    pattern: str | None = None


def task_from_meta(protocol: int, meta: Sequence[int], files: FileInputs | None = None,
                   naive: bool = False) -> Task:
    """Rebuild the instance a transcript was produced for."""
    if protocol not in PROTOCOL_NAMES:
        raise TranscriptError(f"unknown protocol id {protocol}")
    if not meta:
        raise TranscriptError("transcript carries no instance metadata")
    files = files or FileInputs()
    *sizes, iseed = meta
    limit = _META_LIMITS[protocol]
    if any(s > limit for s in sizes[:1]):
        raise TranscriptError("instance size in the header is out of range")
    from_file = iseed == INPUT_FROM_FILE

    def need(path, what):
        if path is None:
            raise InputError(f"this transcript was made from a file; pass {what}")
        return path

    if protocol in (PROTOCOL_MATMUL_GKR, PROTOCOL_MATMUL_TREE, PROTOCOL_MATMUL):
        (n,) = sizes
        mats = load_matrices(need(files.input, "--input")) if from_file else None
        name = PROTOCOL_NAMES[protocol]
        kwargs = {} if protocol == PROTOCOL_MATMUL else {"naive": naive}
        task = make_task(name, n=n, iseed=iseed, mats=mats, **kwargs)
    elif protocol == PROTOCOL_MATPOW:
        n, k = sizes
        if k > 16:
            raise TranscriptError("matrix power out of range")
        m = load_matrices(need(files.input, "--input"), blocks=1)[0] if from_file else None
        task = matpow_task(n, k, iseed, m)
    elif protocol == PROTOCOL_DISTINCT:
        n, length = sizes
        if from_file:
            task = distinct_task(n, iseed, load_stream(need(files.stream, "--stream"), n)[0], naive=naive)
        else:
            if length > limit:
                raise TranscriptError("stream length out of range")
            task = distinct_task(n, iseed, updates=length, naive=naive)
    elif protocol == PROTOCOL_PATTERN:
        N, m, length = sizes
        if from_file:
            text = read_int_file(need(files.text, "--text"))
            pattern = read_int_file(need(files.pattern, "--pattern"))
            task = pattern_task(iseed=iseed, text=text, pattern=pattern, naive=naive)
        else:
            task = pattern_task(length, m, iseed, naive=naive)
    elif protocol == PROTOCOL_DATAPARALLEL:
        B = sizes[0]
        data = load_copies(need(files.input, "--input"))[0] if from_file else None
        task = dataparallel_task(B, iseed, data)
    elif protocol == PROTOCOL_GKR_GENERIC:
        task = gkr_generic_task(sizes[0], iseed, naive=naive)
    else:
        task = sumcheck_task(sizes[0], iseed)
    return task


def load_matrices(path, blocks: int = 2) -> list[np.ndarray]:
    """Matrices from a file, zero-padded to a power-of-two side."""
    mats = read_matrix_file(path, blocks)
    n = next_pow2(mats[0].shape[0])
    return [pad_matrix(m, n) for m in mats]


def load_stream(path, n: int | None = None) -> tuple[tuple[np.ndarray, np.ndarray], int]:
    """(stream, universe size); the universe is padded to a power of two >= 2."""
    idx, delta = read_stream_file(path)
    need = int(idx.max()) + 1 if len(idx) else 1
    if n is None:
        n = next_pow2(need, 2)
    elif need > n:
        raise InputError("stream index exceeds the universe size")
    return (idx, delta), n


def load_copies(path) -> tuple[np.ndarray, int]:
    """Copy-major data for the 4-input base circuit, padded with all-zero copies."""
    B, n, data = read_copies_file(path)
    if n != and4_circuit().input_size:
        raise InputError(f"each copy must have {and4_circuit().input_size} inputs, found {n}")
    B2 = next_pow2(B)
    out = np.zeros(B2 * n, dtype=np.uint64)
    out[:B * n] = data
    return out, B2


@dataclass
class TranscriptCheck:
    ok: bool
    reason: str
    verdict: Verdict | None = None
    task: Task | None = None


def verify_transcript(data: bytes, files: FileInputs | None = None) -> TranscriptCheck:
    """Re-run the verifier on a stored transcript.

    Accepts iff the transcript parses, the verifier accepts the replayed
    messages with the recorded seed, and the regenerated transcript equals
    the stored bytes exactly (so the challenges were honestly derived)."""
    try:
        tr = ProofTranscript.from_bytes(data)
        task = task_from_meta(tr.protocol, tr.meta, files)
    except (TranscriptError, InputError, ValueError) as exc:
        return TranscriptCheck(False, str(exc))
    verdict = task.verify(replay_prover(tr), tr.seed)
    verdict.transcript.meta.append(task.iseed)
    if not verdict.accepted:
        return TranscriptCheck(False, verdict.reason, verdict, task)
    if verdict.transcript.to_bytes() != data:
        return TranscriptCheck(False, "transcript does not match the regenerated run", verdict, task)
    return TranscriptCheck(True, "", verdict, task)
