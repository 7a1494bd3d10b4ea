"""Streaming interactive proofs over the Mersenne field GF(2^61 - 1)."""

from .circuit import (LayeredCircuit, build_binary_tree, build_distinct_circuit, build_matmult_circuit,
                      build_patternmatch_layers, evaluate)
from .dataparallel import SuperCircuit, run_count_query, run_dataparallel
from .field import Q
from .gkr import prove_circuit, run_gkr, verify_circuit
from .harness import BenchReport, bench_suite, fuzz_soundness, make_task, run_task, verify_transcript
from .matmul_special import freivalds, run_matmul, run_matrix_power
from .patternmatch import run_patternmatch
from .sumcheck import SumcheckInstance, run_sumcheck
from .transcript import ProofTranscript, Verdict

__all__ = [
    "Q", "LayeredCircuit", "build_binary_tree", "build_distinct_circuit", "build_matmult_circuit",
    "build_patternmatch_layers", "evaluate", "SuperCircuit", "run_count_query", "run_dataparallel",
    "prove_circuit", "run_gkr", "verify_circuit", "BenchReport", "bench_suite", "fuzz_soundness",
    "make_task", "run_task", "verify_transcript", "freivalds", "run_matmul", "run_matrix_power",
    "run_patternmatch", "SumcheckInstance", "run_sumcheck", "ProofTranscript", "Verdict",
]
