"""Generic sum-check engine.

The prover's round-j message is the list g_j(0), g_j(1), ..., g_j(deg_j) of a
univariate polynomial; the verifier checks g_j(0) + g_j(1) against the
previous round's polynomial at the previous challenge.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from . import field as F
from .field import interpolate_at
from .transcript import (ROUND, Channel, Message, ProofTranscript, Reject, Verdict,
                         run_protocol)

__all__ = [
    "SumcheckInstance", "prover_round_naive", "verifier_check_round", "interpolate_at",
    "sumcheck_verify", "naive_prover", "run_sumcheck", "ProofTranscript", "brute_force_sum",
]

PROTOCOL_SUMCHECK = 9


@dataclass
class SumcheckInstance:
    """Claim that sum over {0,1}^v of g equals H, with per-variable degree bounds."""

    num_vars: int
    degrees: Sequence[int]
    claimed_sum: int
    oracle: Callable[[list[int]], int]
    calls: int = 0

    def __post_init__(self):
        if len(self.degrees) != self.num_vars:
            raise ValueError("one degree bound per variable is required")
        if any(d < 0 for d in self.degrees):
            raise ValueError("degree bounds must be non-negative")

    def __call__(self, point: list[int]) -> int:
        self.calls += 1
        return self.oracle(point)


def prover_round_naive(inst: SumcheckInstance, bound: Sequence[int], j: int | None = None) -> list[int]:
    """g_j(t) = sum over boolean suffixes of g(bound, t, suffix), t = 0..deg_j."""
    if j is None:
        j = len(bound)
    if j != len(bound) or j >= inst.num_vars:
        raise ValueError("round index does not match the bound prefix")
    rest = inst.num_vars - j - 1
    prefix = list(bound)
    evals = []
    for t in range(inst.degrees[j] + 1):
        total = 0
        for suffix in itertools.product((0, 1), repeat=rest):
            total = F.add(total, inst(prefix + [t] + list(suffix)))
        evals.append(total)
    return evals


def verifier_check_round(prev, msg: Sequence[int], r_prev: int | None, degree: int) -> bool:
    """Check one round.  ``prev`` is the claimed sum H in round one, else the
    previous round's evaluations (interpolated at ``r_prev``)."""
    if len(msg) != degree + 1:
        return False
    expected = prev if isinstance(prev, int) else interpolate_at(prev, r_prev)
    return F.add(msg[0], msg[1] if len(msg) > 1 else msg[0]) == expected


def sumcheck_verify(chan: Channel, degrees: Sequence[int], claim: int,
                    nonzero: bool = False) -> tuple[list[int], int]:
    """Verifier side of len(degrees) rounds.

    Returns the random point and the value the final polynomial takes there;
    the caller is responsible for checking that value against g(point)."""
    point = []
    current = claim
    for deg in degrees:
        msg = chan.receive(ROUND, deg + 1)
        if not verifier_check_round(current, msg, None, deg):
            raise Reject("round check")
        r = chan.challenge(nonzero)
        point.append(r)
        current = interpolate_at(msg, r)
    return point, current


def naive_prover(inst: SumcheckInstance):
    """Prover generator that answers every round by brute force."""
    bound: list[int] = []
    for j in range(inst.num_vars):
        reply = yield Message(ROUND, tuple(prover_round_naive(inst, bound, j)))
        bound.append(reply[0])
    return bound


def brute_force_sum(inst: SumcheckInstance) -> int:
    total = 0
    for p in itertools.product((0, 1), repeat=inst.num_vars):
        total = F.add(total, inst.oracle(list(p)))
    return total


@dataclass
class SumcheckResult:
    accepted: bool
    point: list[int]
    value: int | None
    transcript: ProofTranscript
    reason: str = ""


def run_sumcheck(inst: SumcheckInstance, prover=None, rng: random.Random | int | None = None,
                 check_final: bool = True, nonzero: bool = False) -> SumcheckResult:
    """Drive a full sum-check for ``inst``.

    With ``check_final`` the verifier evaluates the oracle at the random point
    itself; otherwise the terminal claim is returned for the caller."""
    if prover is None:
        prover = naive_prover(inst)
    if isinstance(rng, random.Random):
        seed = rng.getrandbits(64)
    else:
        seed = 0 if rng is None else int(rng)
    out: dict = {}

    def verifier(chan: Channel):
        point, value = sumcheck_verify(chan, inst.degrees, inst.claimed_sum, nonzero)
        out["point"], out["value"] = point, value
        if check_final and inst.oracle(point) != value:
            raise Reject("final evaluation")
        return value

    verdict: Verdict = run_protocol(prover, verifier, seed, PROTOCOL_SUMCHECK, [inst.num_vars])
    return SumcheckResult(verdict.accepted, out.get("point", []), out.get("value"),
                          verdict.transcript, verdict.reason)
