import random
import struct

import numpy as np
import pytest

from artifact import field as F
from artifact.circuit import build_binary_tree
from artifact.gkr import run_gkr, verify_circuit
from artifact.transcript import (CLAIMS, LINE, OUTPUT, ROUND, Channel, Message, ProofTranscript,
                                 TranscriptError, replay_prover, run_protocol)

from conftest import rand_vec


def sample_transcript(seed=5):
    c = build_binary_tree(16)
    x = rand_vec(random.Random(seed), 16)
    v = run_gkr(c, x, seed)
    assert v.accepted
    return c, x, v.transcript


def test_round_trip_is_exact():
    _, _, tr = sample_transcript()
    tr.meta = [16, 3]
    data = tr.to_bytes()
    back = ProofTranscript.from_bytes(data)
    assert back.to_bytes() == data
    assert (back.protocol, back.seed, back.meta) == (tr.protocol, tr.seed, [16, 3])
    assert [(r.kind, r.values, r.challenges) for r in back.records] == \
        [(r.kind, r.values, r.challenges) for r in tr.records]


def test_header_layout():
    _, _, tr = sample_transcript(seed=77)
    data = tr.to_bytes()
    protocol, rounds, seed = struct.unpack_from("<BHQ", data, 0)
    assert protocol == tr.protocol and seed == 77 and rounds == tr.sumcheck_rounds


def test_layer_separators_recorded():
    c, _, tr = sample_transcript()
    layers = [r.layer for r in tr.records if r.is_separator]
    assert layers == sorted(layers) and len(layers) >= len(c.layers)


def test_replayed_transcript_reverifies():
    c, x, tr = sample_transcript(seed=9)
    parsed = ProofTranscript.from_bytes(tr.to_bytes())
    v = verify_circuit(c, x, replay_prover(parsed), 9)
    assert v.accepted and v.transcript.to_bytes() == tr.to_bytes()
    # a different seed draws different challenges, so the stale messages fail
    assert not verify_circuit(c, x, replay_prover(parsed), 10).accepted


def _first_element_offset(data: bytes) -> int:
    (nmeta,) = struct.unpack_from("<B", data, 11)
    return 12 + 8 * nmeta + 6


def test_non_canonical_element_rejected():
    _, _, tr = sample_transcript()
    data = bytearray(tr.to_bytes())
    off = _first_element_offset(bytes(data))
    data[off:off + 8] = struct.pack("<Q", F.Q)
    with pytest.raises(TranscriptError):
        ProofTranscript.from_bytes(bytes(data))


def test_truncation_rejected():
    _, _, tr = sample_transcript()
    data = tr.to_bytes()
    for cut in (1, 5, 9, len(data) // 2, len(data) - 1):
        with pytest.raises(TranscriptError):
            ProofTranscript.from_bytes(data[:cut])


def test_unknown_tag_and_kind_rejected():
    _, _, tr = sample_transcript()
    data = tr.to_bytes()
    with pytest.raises(TranscriptError):
        ProofTranscript.from_bytes(data + b"\x07")
    bad = bytearray(data)
    bad[_first_element_offset(data) - 5] = 9
    with pytest.raises(TranscriptError):
        ProofTranscript.from_bytes(bytes(bad))


def test_header_round_count_must_match():
    _, _, tr = sample_transcript()
    data = bytearray(tr.to_bytes())
    struct.pack_into("<H", data, 1, tr.sumcheck_rounds + 1)
    with pytest.raises(TranscriptError):
        ProofTranscript.from_bytes(bytes(data))


def test_accounting_properties():
    _, _, tr = sample_transcript()
    msgs = tr.messages()
    assert tr.rounds == len(msgs)
    assert tr.answer_elements == sum(len(r.values) for r in msgs if r.kind == OUTPUT)
    assert tr.elements == sum(len(r.values) for r in msgs if r.kind != OUTPUT)
    assert tr.communication_bytes == 8 * tr.elements


# ---------------------------------------------------------------- channel behaviour


def _run(messages, expect):
    def prover():
        for m in messages:
            yield m

    def verifier(chan):
        for kind, length in expect:
            chan.receive(kind, length)
            chan.challenge()
        return "ok"

    return run_protocol(prover(), verifier, 1)


def test_channel_checks():
    assert _run([Message(ROUND, (1, 2))], [(ROUND, 2)]).accepted
    assert _run([Message(ROUND, (1, 2))], [(CLAIMS, 2)]).reason.startswith("expected")
    assert _run([Message(ROUND, (1, 2, 3))], [(ROUND, 2)]).reason == "degree"
    assert _run([Message(ROUND, (1,))], [(ROUND, 2)]).reason == "length"
    assert _run([Message(ROUND, (1, F.Q))], [(ROUND, 2)]).reason == "non-canonical field element"
    assert _run([Message(ROUND, (1, -1))], [(ROUND, 2)]).reason == "non-canonical field element"
    assert _run([Message(ROUND, np.array([1, F.Q], dtype=np.uint64))], [(ROUND, 2)]).reason == \
        "non-canonical field element"
    assert _run([Message(ROUND, np.array([1, 2], dtype=np.int64))], [(ROUND, 2)]).reason == \
        "non-canonical field element"
    assert _run([], [(ROUND, 2)]).reason == "prover stopped early"
    assert _run([Message(LINE, (1, 2)), "junk"], [(LINE, 2), (LINE, 2)]).reason.startswith("expected")


def test_challenges_follow_messages():
    chan = Channel(iter(()), random.Random(0))
    with pytest.raises(RuntimeError):
        chan.challenge()


def test_challenges_are_deterministic_in_seed():
    def prover():
        yield Message(OUTPUT, (1,))

    def verifier(chan):
        chan.receive(OUTPUT, 1)
        return chan.challenges(3)

    a = run_protocol(prover(), verifier, 42).answer
    b = run_protocol(prover(), verifier, 42).answer
    c = run_protocol(prover(), verifier, 43).answer
    assert a == b != c
