"""Message passing between prover and verifier, and the transcript record.

A prover is a generator.  It yields :class:`Message` objects and receives,
as the value of each ``yield``, the list of verifier challenges issued after
that message.  The verifier pulls messages through a :class:`Channel`, which
validates them, records them and draws challenges from a seeded generator.

Binary layout (all integers little-endian)::

    header   protocol id (1 byte) | v = number of sum-check rounds (2 bytes)
             | seed (8 bytes) | meta count (1 byte) | meta values (8 bytes each)
    record   tag 0: kind (1) | count (4) | elements (8 each)
                    | challenge count (2) | challenges (8 each)
             tag 1: layer separator | layer index (2)
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field as dc_field
from typing import Callable, Generator, Iterable, NamedTuple

import numpy as np

from . import field as F

OUTPUT, ROUND, CLAIMS, LINE = 0, 1, 2, 3
KIND_NAMES = {OUTPUT: "output", ROUND: "round", CLAIMS: "claims", LINE: "line"}

_TAG_MESSAGE = 0
_TAG_LAYER = 1


class Reject(Exception):
    """Raised by a verifier the moment a check fails."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TranscriptError(ValueError):
    """A byte string that does not parse as a transcript."""


class Message(NamedTuple):
    kind: int
    values: tuple


@dataclass
class Record:
    kind: int
    values: list[int]
    challenges: list[int] = dc_field(default_factory=list)
    layer: int | None = None  # set only for layer separators

    @property
    def is_separator(self) -> bool:
        return self.layer is not None


@dataclass
class ProofTranscript:
    protocol: int
    seed: int
    meta: list[int] = dc_field(default_factory=list)
    records: list[Record] = dc_field(default_factory=list)

    # ---------------------------------------------------------- accounting
    def messages(self) -> list[Record]:
        return [r for r in self.records if not r.is_separator]

    @property
    def sumcheck_rounds(self) -> int:
        return sum(1 for r in self.records if not r.is_separator and r.kind == ROUND)

    @property
    def rounds(self) -> int:
        """Prover messages sent, including the opening of the answer."""
        return len(self.messages())

    @property
    def elements(self) -> int:
        """Field elements sent by the prover, not counting the answer itself."""
        return sum(len(r.values) for r in self.messages() if r.kind != OUTPUT)

    @property
    def answer_elements(self) -> int:
        return sum(len(r.values) for r in self.messages() if r.kind == OUTPUT)

    @property
    def communication_bytes(self) -> int:
        return F.ELEMENT_BYTES * self.elements

    # ---------------------------------------------------------- serialization
    def to_bytes(self) -> bytes:
        if len(self.meta) > 255:
            raise ValueError("too many meta values")
        out = bytearray()
        out += struct.pack("<BHQ", self.protocol, self.sumcheck_rounds & 0xFFFF, self.seed)
        out += struct.pack("<B", len(self.meta))
        for m in self.meta:
            out += struct.pack("<Q", m)
        for rec in self.records:
            if rec.is_separator:
                out += struct.pack("<BH", _TAG_LAYER, rec.layer)
                continue
            out += struct.pack("<BBI", _TAG_MESSAGE, rec.kind, len(rec.values))
            out += np.asarray(rec.values, dtype="<u8").tobytes()
            out += struct.pack("<H", len(rec.challenges))
            out += b"".join(F.to_bytes(c) for c in rec.challenges)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProofTranscript":
        reader = _Reader(data)
        protocol, v, seed = reader.unpack("<BHQ")
        (nmeta,) = reader.unpack("<B")
        meta = [reader.unpack("<Q")[0] for _ in range(nmeta)]
        tr = cls(protocol, seed, meta)
        while not reader.done():
            (tag,) = reader.unpack("<B")
            if tag == _TAG_LAYER:
                (layer,) = reader.unpack("<H")
                tr.records.append(Record(-1, [], [], layer))
            elif tag == _TAG_MESSAGE:
                kind, count = reader.unpack("<BI")
                if kind not in KIND_NAMES:
                    raise TranscriptError(f"unknown message kind {kind}")
                if count * F.ELEMENT_BYTES > reader.remaining():
                    raise TranscriptError("truncated message")
                values = reader.elements(count)
                (nchal,) = reader.unpack("<H")
                chals = [reader.element() for _ in range(nchal)]
                tr.records.append(Record(kind, values, chals))
            else:
                raise TranscriptError(f"unknown record tag {tag}")
        if tr.sumcheck_rounds & 0xFFFF != v:
            raise TranscriptError("round count in header does not match the body")
        return tr


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def done(self) -> bool:
        return self.pos >= len(self.data)

    def unpack(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise TranscriptError("truncated transcript")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def elements(self, count: int) -> list[int]:
        if self.pos + 8 * count > len(self.data):
            raise TranscriptError("truncated transcript")
        arr = np.frombuffer(self.data, dtype="<u8", count=count, offset=self.pos)
        if count and int(arr.max()) >= F.Q:
            raise TranscriptError("non-canonical field element")
        self.pos += 8 * count
        return arr.tolist()

    def element(self) -> int:
        if self.pos + 8 > len(self.data):
            raise TranscriptError("truncated transcript")
        try:
            x = F.from_bytes(self.data[self.pos:self.pos + 8])
        except ValueError as exc:
            raise TranscriptError(str(exc)) from None
        self.pos += 8
        return x


ProverGen = Generator[Message, list, object]


class Channel:
    """Verifier-side endpoint: pulls prover messages and issues challenges."""

    def __init__(self, prover: ProverGen, rng: random.Random, transcript: ProofTranscript | None = None):
        self._prover = prover
        self._started = False
        self._pending: list[int] = []
        self._finished = False
        self.rng = rng
        self.transcript = transcript
        self._last: Record | None = None
        self.prover_result = None

    def receive(self, kind: int, length: int | None = None, max_length: int | None = None) -> list[int]:
        if self._finished:
            raise Reject("prover already finished")
        try:
            if not self._started:
                self._started = True
                msg = next(self._prover)
            else:
                msg = self._prover.send(self._pending)
        except StopIteration as stop:
            self._finished = True
            self.prover_result = stop.value
            raise Reject("prover stopped early") from None
        self._pending = []
        if not isinstance(msg, Message) or msg.kind != kind:
            raise Reject(f"expected a {KIND_NAMES.get(kind, kind)} message")
        raw = msg.values
        if length is not None and len(raw) != length:
            raise Reject("degree" if len(raw) > length else "length")
        if max_length is not None and len(raw) > max_length:
            raise Reject("degree")
        if isinstance(raw, np.ndarray):
            if raw.dtype != np.uint64 or raw.ndim != 1 or (len(raw) and int(raw.max()) >= F.Q):
                raise Reject("non-canonical field element")
            values = raw.tolist()
        else:
            values = list(raw)
            for x in values:
                if not F.is_canonical(x):
                    raise Reject("non-canonical field element")
        rec = Record(kind, values)
        if self.transcript is not None:
            self.transcript.records.append(rec)
        self._last = rec
        return values

    def challenge(self, nonzero: bool = False) -> int:
        if self._last is None:
            raise RuntimeError("challenges must follow a prover message")
        r = F.random_nonzero(self.rng) if nonzero else F.random_element(self.rng)
        self._pending.append(r)
        self._last.challenges.append(r)
        return r

    def challenges(self, count: int, nonzero: bool = False) -> list[int]:
        return [self.challenge(nonzero) for _ in range(count)]

    def mark_layer(self, layer: int) -> None:
        if self.transcript is not None:
            self.transcript.records.append(Record(-1, [], [], layer))

    def close(self) -> None:
        """Deliver outstanding challenges and shut the prover down."""
        if not self._finished and self._started:
            try:
                self._prover.send(self._pending)
            except StopIteration as stop:
                self.prover_result = stop.value
            except Exception:
                pass
            self._finished = True
        self._prover.close()


@dataclass
class Verdict:
    accepted: bool
    answer: object = None
    reason: str = ""
    transcript: ProofTranscript | None = None

    def __bool__(self) -> bool:
        return self.accepted


def run_protocol(prover: ProverGen, verifier: Callable[[Channel], object], seed: int,
                 protocol: int = 0, meta: Iterable[int] = ()) -> Verdict:
    """Run prover and verifier to completion with a seeded challenge source."""
    tr = ProofTranscript(protocol, seed & 0xFFFFFFFFFFFFFFFF, list(meta))
    chan = Channel(prover, random.Random(tr.seed), tr)
    try:
        answer = verifier(chan)
    except Reject as exc:
        chan.close()
        return Verdict(False, None, exc.reason, tr)
    chan.close()
    return Verdict(True, answer, "", tr)


def replay_prover(transcript: ProofTranscript) -> ProverGen:
    """A prover that repeats the messages stored in a transcript."""
    for rec in transcript.messages():
        yield Message(rec.kind, tuple(rec.values))


def tamper(prover: ProverGen, edit: Callable[[int, Message], Message]) -> ProverGen:
    """Wrap a prover, passing every outgoing message through ``edit(index, msg)``."""
    k = 0
    try:
        msg = next(prover)
    except StopIteration as stop:
        return stop.value
    while True:
        reply = yield edit(k, msg)
        k += 1
        try:
            msg = prover.send(reply)
        except StopIteration as stop:
            return stop.value
