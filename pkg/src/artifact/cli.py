"""Command-line interface.

Exit status: 0 when the verifier accepts, 1 when it rejects (or a stored
transcript does not re-verify), 2 on malformed input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import field as F
from .harness import (BENCH_CONFIGS, INPUT_FROM_FILE, MUTATIONS, REPORT_HEADER, TASKS,
                      FileInputs, InputError, bench_suite, format_table, fuzz_soundness, load_copies,
                      load_matrices, load_stream, make_task, read_int_file, run_task, verify_transcript)
from .transcript import TranscriptError

OVERFLOW_BITS = 26
OVERFLOW_MIN_N = 512


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="verifier challenge seed (recorded in the transcript)")
    p.add_argument("--input-seed", type=int, default=1, help="seed for randomly generated instances")
    p.add_argument("--transcript", help="write the proof transcript to this file")
    p.add_argument("--report", help="append the machine-readable report line to this file")
    p.add_argument("--quiet", action="store_true", help="print only the answer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description="Interactive proofs for circuit evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("matmul-gkr", "matrix product through the layered-circuit protocol"),
                            ("matmul-tree", "as matmul-gkr, collapsing the summation layers")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=int, default=16)
        p.add_argument("--input", help="matrix file (A then B)")
        p.add_argument("--naive", action="store_true", help="brute-force prover messages")
        _add_common(p)

    p = sub.add_parser("matmul-special", aliases=["matmul"], help="special-purpose matrix product check")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--input", help="matrix file (A then B)")
    p.add_argument("--algorithm", choices=["naive", "blocked"], default="naive")
    p.add_argument("--in-place", action="store_true", help="fold A and B in place while proving")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--prove", action="store_true", help="run the protocol and store the transcript")
    mode.add_argument("--verify", action="store_true", help="re-verify a stored transcript")
    _add_common(p)

    p = sub.add_parser("matpow", help="check M^(2^k) by chained product checks")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--input", help="matrix file holding M")
    _add_common(p)

    p = sub.add_parser("distinct", help="number of distinct items in an update stream")
    p.add_argument("--n", type=int, help="universe size (default: from the stream, else 1024)")
    p.add_argument("--stream", help="stream file of (index, delta) records")
    p.add_argument("--updates", type=int, help="length of the random stream")
    p.add_argument("--naive", action="store_true")
    _add_common(p)

    p = sub.add_parser("pattern", help="number of occurrences of a pattern in a text")
    p.add_argument("--text", help="text file of 8-byte integers")
    p.add_argument("--pattern", help="pattern file of 8-byte integers (power-of-two length)")
    p.add_argument("--n", type=int, default=63, help="random text length")
    p.add_argument("--m", type=int, default=4, help="random pattern length")
    p.add_argument("--naive", action="store_true")
    _add_common(p)

    p = sub.add_parser("dataparallel", help="counting query over B copies of a 4-input AND")
    p.add_argument("--input", help="copies file {B, n} then B*n elements")
    p.add_argument("--copies", type=int, default=64)
    _add_common(p)

    p = sub.add_parser("bench", help="benchmark table")
    p.add_argument("--config", choices=sorted(BENCH_CONFIGS), default="quick")
    p.add_argument("--only", nargs="*", help="restrict to these protocols")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-seed", type=int, default=1)
    p.add_argument("--report", help="write machine-readable lines to this file")

    p = sub.add_parser("fuzz", help="soundness fuzzing with tampered provers")
    p.add_argument("--protocol", choices=sorted(TASKS), nargs="*", help="default: all")
    p.add_argument("--mutation", choices=MUTATIONS, nargs="*", help="default: all")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify-transcript", help="re-verify a stored transcript offline")
    p.add_argument("transcript", nargs="?")
    p.add_argument("--transcript", dest="transcript_opt")
    p.add_argument("--input")
    p.add_argument("--stream")
    p.add_argument("--text")
    p.add_argument("--pattern")
    return parser


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _check_overflow(mats) -> None:
    n = mats[0].shape[0]
    if n < OVERFLOW_MIN_N:
        return
    limit = 1 << OVERFLOW_BITS
    for m in mats:
        mags = np.minimum(m, np.uint64(F.Q) - m)
        if int(mags.max()) > limit:
            _warn(f"entries exceed 2^{OVERFLOW_BITS} at n={n}: products may wrap modulo 2^61-1 "
                  "and differ from the integer result")
            return


def _task_from_args(args):
    cmd = args.command
    iseed = args.input_seed
    if cmd in ("matmul-gkr", "matmul-tree", "matmul-special", "matmul"):
        if args.input:
            mats = load_matrices(args.input)
            n, iseed = mats[0].shape[0], INPUT_FROM_FILE
        else:
            mats, n = None, args.n
        if cmd in ("matmul-special", "matmul"):
            task = make_task("matmul-special", n=n, iseed=iseed, mats=mats, algorithm=args.algorithm,
                             in_place=args.in_place)
        else:
            task = make_task(cmd, n=n, iseed=iseed, mats=mats, naive=args.naive)
        _check_overflow([task.notes["a"], task.notes["b"]])
        return task
    if cmd == "matpow":
        m = None
        n = args.n
        if args.input:
            m = load_matrices(args.input, blocks=1)[0]
            n, iseed = m.shape[0], INPUT_FROM_FILE
        return make_task("matpow", n=n, k=args.k, iseed=iseed, matrix=m)
    if cmd == "distinct":
        if args.stream:
            stream, n = load_stream(args.stream, args.n)
            return make_task("distinct", n=n, iseed=INPUT_FROM_FILE, stream=stream, naive=args.naive)
        return make_task("distinct", n=args.n or 1024, iseed=iseed, updates=args.updates, naive=args.naive)
    if cmd == "pattern":
        if bool(args.text) != bool(args.pattern):
            raise InputError("--text and --pattern must be given together")
        if args.text:
            return make_task("pattern", iseed=INPUT_FROM_FILE, text=read_int_file(args.text),
                             pattern=read_int_file(args.pattern), naive=args.naive)
        if args.n < 1 or args.m < 1:
            raise InputError("text and pattern lengths must be positive")
        return make_task("pattern", n=args.n, m=args.m, iseed=iseed, naive=args.naive)
    if cmd == "dataparallel":
        if args.input:
            data, B = load_copies(args.input)
            return make_task("dataparallel", copies=B, iseed=INPUT_FROM_FILE, data=data)
        return make_task("dataparallel", copies=args.copies, iseed=iseed)
    raise InputError(f"unknown command {cmd}")


def _describe(task, answer) -> str:
    if answer is None:
        return "rejected"
    if isinstance(answer, np.ndarray):
        n = answer.shape[0]
        return f"{n}x{n} matrix, first row: {' '.join(str(int(x)) for x in answer[0][:8])}" + \
            (" ..." if n > 8 else "")
    return str(answer)


def _append_report(path, line: str) -> None:
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with p.open("a") as fh:
        if new:
            fh.write(REPORT_HEADER + "\n")
        fh.write(line + "\n")


def _run_protocol(args) -> int:
    if getattr(args, "verify", False):
        if not args.transcript:
            raise InputError("--verify needs --transcript")
        files = FileInputs(input=args.input)
        return _verify_file(args.transcript, files)
    task = _task_from_args(args)
    run = run_task(task, args.seed)
    rep = run.report
    if args.transcript:
        Path(args.transcript).write_bytes(run.transcript.to_bytes())
    if args.report:
        _append_report(args.report, rep.line())
    answer = run.answer
    if args.quiet:
        if answer is not None:
            print(_describe(task, answer))
    else:
        print(_describe(task, answer))
        print(format_table([rep]))
        print(REPORT_HEADER)
        print(rep.line())
        if not run.verdict.accepted:
            print(f"rejected: {run.verdict.reason}")
    return 0 if run.verdict.accepted else 1


def _verify_file(path, files: FileInputs) -> int:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    check = verify_transcript(data, files)
    if check.ok:
        answer = check.task.answer(check.verdict.answer)
        print(_describe(check.task, answer))
        print("transcript verified")
        return 0
    print(f"transcript rejected: {check.reason}")
    return 1


def _bench(args) -> int:
    rows = BENCH_CONFIGS[args.config]
    if args.only:
        rows = [r for r in rows if r[0] in args.only]
    reports = bench_suite(rows, args.seed, args.input_seed,
                          progress=lambda r: print(f"  {r.protocol} n={r.size}: {r.verdict}", file=sys.stderr))
    print(format_table(reports))
    print()
    print(REPORT_HEADER)
    for r in reports:
        print(r.line())
    if args.report:
        Path(args.report).write_text(REPORT_HEADER + "\n" + "".join(r.line() + "\n" for r in reports))
    return 0 if all(r.accepted for r in reports) else 1


def _fuzz(args) -> int:
    protocols = args.protocol or list(TASKS)
    mutations = args.mutation or list(MUTATIONS)
    ok = True
    print("protocol\tmutation\trejected/trials")
    for name in protocols:
        for m in mutations:
            stats = fuzz_soundness(name, m, args.trials, args.seed)
            expected = 0 if m == "none" else stats.trials
            good = stats.rejections == expected
            ok &= good
            print(stats.line() + ("" if good else "\tFAIL"))
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            return _bench(args)
        if args.command == "fuzz":
            return _fuzz(args)
        if args.command == "verify-transcript":
            path = args.transcript or args.transcript_opt
            if not path:
                raise InputError("verify-transcript needs a transcript file")
            return _verify_file(path, FileInputs(args.input, args.stream, args.text, args.pattern))
        return _run_protocol(args)
    except (InputError, TranscriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
