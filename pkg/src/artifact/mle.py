"""Multilinear extensions, the equality polynomial beta, and bindable tables.

Convention used throughout the package: a point ``(x_1, ..., x_v)`` addresses
the boolean label whose most significant bit is ``x_1``.  A table of length
2^v therefore stores the value at label ``b`` in entry ``b``, and binding
"the next variable" always binds the current most significant one.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import field as F
from . import kernels as K

STREAM_CHUNK = 1 << 16


def as_array(values) -> np.ndarray:
    """Coerce a sequence of canonical field elements to a uint64 array."""
    if isinstance(values, np.ndarray) and values.dtype == np.uint64:
        return values
    return np.asarray([int(v) % F.Q for v in values], dtype=np.uint64)


def point_array(w: Sequence[int]) -> np.ndarray:
    return np.asarray([int(x) for x in w], dtype=np.uint64)


def log2_exact(n: int) -> int:
    if n <= 0 or n & (n - 1):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


class EvalTable:
    """Dense table of 2^v field elements that shrinks by half on each bind."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        arr = as_array(entries)
        log2_exact(len(arr))
        self.entries = arr

    @property
    def vars_remaining(self) -> int:
        return len(self.entries).bit_length() - 1

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> int:
        return int(self.entries[i])

    def tolist(self) -> list[int]:
        return [int(x) for x in self.entries]

    def copy(self) -> "EvalTable":
        return EvalTable(self.entries.copy())


def chi(b: int, x: int) -> int:
    """chi_b(x): 1 - x for b = 0 and x for b = 1."""
    return x if b else F.sub(1, x)


def beta_eval(z: Sequence[int], p: Sequence[int]) -> int:
    """prod_j ((1 - z_j)(1 - p_j) + z_j p_j)."""
    if len(z) != len(p):
        raise ValueError("dimension mismatch")
    out = 1
    for zj, pj in zip(z, p):
        term = F.add(F.mul(F.sub(1, zj), F.sub(1, pj)), F.mul(zj, pj))
        out = F.mul(out, term)
    return out


def bits_of(label: int, v: int) -> list[int]:
    """Bits of ``label`` as a length-v point, most significant first."""
    return [(label >> (v - 1 - j)) & 1 for j in range(v)]


def label_of(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | (b & 1)
    return out


class WorkCounter:
    """Tally of elementary table operations, used by complexity tests."""

    def __init__(self):
        self.count = 0

    def add(self, k: int) -> None:
        self.count += int(k)


def build_chi_table(w: Sequence[int], counter: WorkCounter | None = None) -> EvalTable:
    """All chi_b(w) for boolean b, by the doubling recurrence (O(2^v) work)."""
    table = K.beta_table(point_array(w))
    if counter is not None:
        counter.add(2 * len(table) - 2)
    return EvalTable(table)


def build_beta_table(z: Sequence[int], counter: WorkCounter | None = None) -> EvalTable:
    """C^(0): entry p holds beta(z, p) for all boolean p."""
    return build_chi_table(z, counter)


def eval_mle_table(values, w: Sequence[int]) -> int:
    """V~(w) = sum_b V(b) chi_b(w) using the memoized chi table."""
    arr = as_array(values)
    if len(arr) != 1 << len(w):
        raise ValueError("length mismatch between table and point")
    return int(K.vdot(arr, K.beta_table(point_array(w))))


def eval_mle_fold(values, w: Sequence[int]) -> int:
    """V~(w) by binding the variables one at a time (same O(n) cost)."""
    arr = as_array(values)
    if len(arr) != 1 << len(w):
        raise ValueError("length mismatch between table and point")
    cur = arr
    for r in w:
        cur = K.fold_high(cur, np.uint64(r), np.empty(len(cur) // 2, dtype=np.uint64))
    return int(cur[0])


def _stream_chunks(updates) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Yield (indices, encoded deltas) in bounded-size chunks."""
    if isinstance(updates, tuple) and len(updates) == 2 and isinstance(updates[0], np.ndarray):
        idx, delta = updates
        for s in range(0, len(idx), STREAM_CHUNK):
            yield _chunk_arrays(idx[s:s + STREAM_CHUNK], delta[s:s + STREAM_CHUNK])
        return
    if isinstance(updates, np.ndarray) and updates.dtype.names:
        for s in range(0, len(updates), STREAM_CHUNK):
            part = updates[s:s + STREAM_CHUNK]
            yield _chunk_arrays(part["i"], part["d"])
        return
    buf_i: list[int] = []
    buf_d: list[int] = []
    for i, d in updates:
        buf_i.append(int(i))
        buf_d.append(F.encode_signed(int(d)))
        if len(buf_i) == STREAM_CHUNK:
            yield np.asarray(buf_i, dtype=np.uint64), np.asarray(buf_d, dtype=np.uint64)
            buf_i, buf_d = [], []
    if buf_i:
        yield np.asarray(buf_i, dtype=np.uint64), np.asarray(buf_d, dtype=np.uint64)


def _chunk_arrays(idx: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if delta.dtype == np.uint64:
        enc = delta
    else:
        d = delta.astype(np.int64)
        enc = np.where(d < 0, (d + np.int64(F.Q)), d).astype(np.uint64)
    return idx.astype(np.uint64), enc


def eval_mle_stream(updates, w: Sequence[int]) -> int:
    """Ṽ(w) of the frequency vector defined by a stream of (i, delta) updates.

    Each update contributes delta * chi_i(w); the order of updates and
    repeated indices do not matter.  Memory is one chunk of updates plus the
    point.  ``updates`` may be an iterable of pairs, a structured array with
    fields ``i``/``d``, or a pair of arrays ``(indices, deltas)``; in the
    array forms uint64 deltas are taken as already-encoded field elements.
    """
    v = len(w)
    wa = point_array(w)
    limit = 1 << v
    total = 0
    for idx, enc in _stream_chunks(updates):
        if len(idx) and int(idx.max()) >= limit:
            raise IndexError("stream index out of range")
        total = F.add(total, int(K.chi_accumulate(idx, enc, wa)))
    return total


def dense_stream(values) -> tuple[np.ndarray, np.ndarray]:
    """View a dense vector as a stream of (i, V[i]) updates."""
    arr = as_array(values)
    return np.arange(len(arr), dtype=np.uint64), arr


def bind_variable_values(t: EvalTable, r: int, in_place: bool = False) -> EvalTable:
    """Bind the most significant variable: p' -> (1-r) t[(0,p')] + r t[(1,p')]."""
    arr = t.entries
    if len(arr) < 2:
        raise ValueError("cannot bind a variable of an empty table")
    h = len(arr) // 2
    out = arr[:h] if in_place else np.empty(h, dtype=np.uint64)
    K.fold_high(arr, np.uint64(r), out)
    if in_place:
        t.entries = out
        return t
    return EvalTable(out)


def beta_factor(z_j: int, x: int) -> int:
    """(x z_j + (1 - x)(1 - z_j)), the one-coordinate equality factor."""
    return F.add(F.mul(x, z_j), F.mul(F.sub(1, x), F.sub(1, z_j)))


def bind_variable_beta(t: EvalTable, z_j: int, r_j: int) -> EvalTable:
    """Halving step of a beta table: C[(1,.)] * z_j^{-1} * (r z_j + (1-r)(1-z_j))."""
    if z_j % F.Q == 0:
        raise ZeroDivisionError("bind_variable_beta needs z_j != 0")
    arr = t.entries
    if len(arr) < 2:
        raise ValueError("cannot bind a variable of an empty table")
    h = len(arr) // 2
    scale = F.mul(F.inv(z_j), beta_factor(z_j, r_j))
    return EvalTable(K.vmul_scalar(arr[h:], np.uint64(scale)))


def eval_bound_beta(t: EvalTable, z_j: int, t_val: int, suffix: Sequence[int]) -> int:
    """beta(z, (r_1..r_{j-1}, t_val, suffix)) read off the current C table."""
    if z_j % F.Q == 0:
        raise ZeroDivisionError("eval_bound_beta needs z_j != 0")
    h = len(t.entries) // 2
    hi = int(t.entries[h + label_of(suffix)])
    return F.mul(F.mul(hi, F.inv(z_j)), beta_factor(z_j, t_val))
