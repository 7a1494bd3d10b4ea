import sys
import random

import numpy as np
import pytest

from artifact import field as F
from artifact.transcript import LINE, ROUND


def rand_vec(rng: random.Random, n: int) -> np.ndarray:
    return np.asarray([F.random_element(rng) for _ in range(n)], dtype=np.uint64)


def rand_point(rng: random.Random, v: int) -> list[int]:
    return [F.random_element(rng) for _ in range(v)]


@pytest.fixture
def rng():
    return random.Random(20240601)


def drive(gen, reply):
    """Run a prover generator to completion outside any verifier.

    ``reply(msg)`` supplies the verifier's answer to each message; returns
    (messages, generator return value)."""
    msgs = []
    try:
        msg = next(gen)
        while True:
            msgs.append(msg)
            msg = gen.send(reply(msg))
    except StopIteration as stop:
        return msgs, stop.value


def challenge_feed(values):
    """reply() handing out one value per ROUND/LINE message, nothing otherwise."""
    it = iter(values)

    def reply(msg):
        return [next(it)] if msg.kind in (ROUND, LINE) else []
    return reply


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
