"""Layered arithmetic circuits with regular-wiring descriptors.

Layers are indexed from the top: ``circuit.layers[0]`` is the output layer
and layer ``i`` reads from layer ``i + 1``; the input layer sits below the
last gate layer and has index ``circuit.depth - 1``.  Gate labels are
integers whose most significant bit is variable 1 of the label's point.

A :class:`RegularWiring` describes a layer symbolically.  A small set ``S`` of
label variables selects a *branch*; inside a branch every bit of the two
in-neighbour labels is a constant, a copy of one label variable, or the
negation of one.  That is what lets the prover run in time linear in the
layer size.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np

from . import field as F
from . import kernels as K
from .mle import as_array, log2_exact, point_array

ADD, MUL, COPY, SUB = K.ADD, K.MUL, K.COPY, K.SUB
OP_NAMES = {ADD: "add", MUL: "mul", COPY: "copy", SUB: "sub"}

MAX_SELECT_BITS = 8
MAX_BIT_FANOUT = 4
FLT_BITS = 61  # q - 1 = 2^61 - 2
FLT_PRODUCT_LAYERS = FLT_BITS - 2


# ---------------------------------------------------------------- descriptors


@dataclass(frozen=True)
class Bit:
    """One output bit of an in-neighbour map: a constant or (negated) variable."""

    src: int = -1
    neg: bool = False
    const: int = 0

    @property
    def is_const(self) -> bool:
        return self.src < 0

    def value(self, point: Sequence[int]) -> int:
        if self.src < 0:
            return self.const
        x = point[self.src]
        return F.sub(1, x) if self.neg else x


def var(k: int) -> Bit:
    return Bit(k, False)


def nvar(k: int) -> Bit:
    return Bit(k, True)


def const(c: int) -> Bit:
    return Bit(-1, False, c & 1)


def vars_(ks: Iterable[int]) -> tuple[Bit, ...]:
    return tuple(var(k) for k in ks)


@dataclass(frozen=True)
class Branch:
    rho: tuple[int, ...]
    op: int
    in1: tuple[Bit, ...]
    in2: tuple[Bit, ...] | None = None


@dataclass(frozen=True)
class RegularWiring:
    s_in: int
    s_next: int
    select: tuple[int, ...]
    branches: tuple[Branch, ...]
    similar: bool = True

    def __post_init__(self):
        if len(self.select) > MAX_SELECT_BITS:
            raise ValueError("at most 8 selector bits are supported")
        if len(set(self.select)) != len(self.select):
            raise ValueError("duplicate selector bit")
        for s in self.select:
            if not 0 <= s < self.s_in:
                raise ValueError("selector bit out of range")
        seen = set()
        for br in self.branches:
            if len(br.rho) != len(self.select) or any(b not in (0, 1) for b in br.rho):
                raise ValueError("branch selector has the wrong shape")
            if br.rho in seen:
                raise ValueError("duplicate branch")
            seen.add(br.rho)
            if br.op == COPY:
                if br.in2 is not None:
                    raise ValueError("fan-in-1 branch must not have a second input")
            elif br.in2 is None:
                raise ValueError("fan-in-2 branch needs a second input")
            for m in (br.in1, br.in2):
                if m is None:
                    continue
                if len(m) != self.s_next:
                    raise ValueError("in-neighbour map has the wrong width")
                fanout: dict[int, int] = {}
                for bit in m:
                    if bit.is_const:
                        continue
                    if not 0 <= bit.src < self.s_in or bit.src in self.select:
                        raise ValueError("output bit depends on an invalid variable")
                    fanout[bit.src] = fanout.get(bit.src, 0) + 1
                if any(c > MAX_BIT_FANOUT for c in fanout.values()):
                    raise ValueError("an input bit affects too many output bits")
        if len(seen) != 1 << len(self.select):
            raise ValueError("branches must cover every selector value")
        if self.similar and len(self.differing_bits()) > MAX_SELECT_BITS:
            raise ValueError("layer marked similar but in1/in2 differ in too many bits")

    # ------------------------------------------------------------------
    def differing_bits(self) -> tuple[int, ...]:
        """Output bit positions where in1 and in2 differ in some branch."""
        out = set()
        for br in self.branches:
            if br.in2 is None:
                continue
            for o, (a, b) in enumerate(zip(br.in1, br.in2)):
                if a != b:
                    out.add(o)
        return tuple(sorted(out))

    def maps(self) -> list[tuple[Bit, ...]]:
        """Distinct in-neighbour maps, in order of first appearance."""
        out: list[tuple[Bit, ...]] = []
        for br in self.branches:
            for m in (br.in1, br.in2):
                if m is not None and m not in out:
                    out.append(m)
        return out

    def degrees(self) -> list[int]:
        """Per-variable degree of beta(z, p) * W(p)."""
        degs = []
        for j in range(self.s_in):
            best = 0
            for br in self.branches:
                c1 = sum(1 for b in br.in1 if b.src == j)
                if br.op == COPY:
                    d = c1
                else:
                    c2 = sum(1 for b in br.in2 if b.src == j)
                    d = c1 + c2 if br.op == MUL else max(c1, c2)
                if j in self.select:
                    d += 1
                best = max(best, d)
            degs.append(1 + best)
        return degs

    def indicator(self, br: Branch, point: Sequence[int]) -> int:
        out = 1
        for s, b in zip(self.select, br.rho):
            x = point[s]
            out = F.mul(out, x if b else F.sub(1, x))
        return out

    def gate_arrays(self, labels: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(in1, in2, op) for the given labels (default: all), from the descriptor."""
        if labels is None:
            labels = np.arange(1 << self.s_in, dtype=np.int64)
        labels = labels.astype(np.int64)
        in1 = np.zeros(len(labels), dtype=np.int64)
        in2 = np.zeros(len(labels), dtype=np.int64)
        op = np.zeros(len(labels), dtype=np.uint8)
        for br in self.branches:
            sel = np.ones(len(labels), dtype=bool)
            for s, b in zip(self.select, br.rho):
                sel &= ((labels >> (self.s_in - 1 - s)) & 1) == b
            g = labels[sel]
            a = _map_labels(br.in1, g, self.s_in, self.s_next)
            in1[sel] = a
            in2[sel] = a if br.in2 is None else _map_labels(br.in2, g, self.s_in, self.s_next)
            op[sel] = br.op
        return in1, in2, op


def _map_labels(m: Sequence[Bit], g: np.ndarray, s_in: int, s_next: int) -> np.ndarray:
    out = np.zeros(len(g), dtype=np.int64)
    for o, bit in enumerate(m):
        pos = s_next - 1 - o
        if bit.is_const:
            v = np.full(len(g), bit.const, dtype=np.int64)
        else:
            v = (g >> (s_in - 1 - bit.src)) & 1
            if bit.neg:
                v = 1 - v
        out |= v << pos
    return out


def apply_map(m: Sequence[Bit], point: Sequence[int]) -> list[int]:
    """Evaluate the multilinear extension of an in-neighbour map at a point."""
    return [b.value(point) for b in m]


# ---------------------------------------------------------------- circuits


@dataclass
class Layer:
    size_bits: int
    in1: np.ndarray
    in2: np.ndarray
    op: np.ndarray
    wiring: RegularWiring | None = None
    name: str = ""

    @property
    def size(self) -> int:
        return 1 << self.size_bits


@dataclass
class LayeredCircuit:
    layers: list[Layer]
    input_bits: int
    tree_top: int = 0  # top layers forming a pure binary addition tree
    name: str = ""
    meta: dict = dc_field(default_factory=dict)

    @property
    def depth(self) -> int:
        """Number of layers including the input layer."""
        return len(self.layers) + 1

    @property
    def input_size(self) -> int:
        return 1 << self.input_bits

    def size_bits(self, i: int) -> int:
        return self.layers[i].size_bits if i < len(self.layers) else self.input_bits

    def size(self) -> int:
        """Total number of gates, input layer included."""
        return sum(layer.size for layer in self.layers) + self.input_size

    def validate(self, exhaustive_limit: int = 1 << 16, rng: random.Random | None = None) -> None:
        for i, layer in enumerate(self.layers):
            n_next = 1 << self.size_bits(i + 1)
            if len(layer.in1) != layer.size:
                raise ValueError(f"layer {i}: gate count is not 2^{layer.size_bits}")
            if len(layer.in1) and (int(layer.in1.max()) >= n_next or int(layer.in2.max()) >= n_next):
                raise ValueError(f"layer {i}: wire leaves the adjacent layer")
            if layer.wiring is not None:
                if layer.wiring.s_in != layer.size_bits or layer.wiring.s_next != self.size_bits(i + 1):
                    raise ValueError(f"layer {i}: descriptor dimensions disagree with the layer")
                check_wiring(layer, exhaustive_limit, rng)
        for i in range(self.tree_top):
            w = self.layers[i].wiring
            if w is None or w != bintree_wiring(self.layers[i].size_bits, ADD):
                raise ValueError("tree_top layers must be binary addition trees")


def check_wiring(layer: Layer, exhaustive_limit: int = 1 << 16, rng: random.Random | None = None) -> None:
    """Compare the descriptor with the explicit gate list (exhaustive or sampled)."""
    w = layer.wiring
    if layer.size <= exhaustive_limit:
        labels = np.arange(layer.size, dtype=np.int64)
    else:
        rng = rng or random.Random(0)
        labels = np.asarray([rng.randrange(layer.size) for _ in range(4096)], dtype=np.int64)
    in1, in2, op = w.gate_arrays(labels)
    if not np.array_equal(in1, layer.in1[labels]):
        raise ValueError(f"descriptor in1 disagrees with gate list ({layer.name})")
    if not np.array_equal(op, layer.op[labels]):
        raise ValueError(f"descriptor gate types disagree with gate list ({layer.name})")
    if not np.array_equal(in2, layer.in2[labels]):
        raise ValueError(f"descriptor in2 disagrees with gate list ({layer.name})")


def evaluate(c: LayeredCircuit, inputs) -> list[np.ndarray]:
    """Bottom-up evaluation; returns values per layer, index 0 = outputs."""
    x = as_array(inputs)
    if len(x) != c.input_size:
        raise ValueError(f"expected {c.input_size} inputs, got {len(x)}")
    values = [x]
    cur = x
    for layer in reversed(c.layers):
        cur = K.eval_layer(cur, layer.in1, layer.in2, layer.op)
        values.append(cur)
    values.reverse()
    return values


def wiring_predicate_eval(c: LayeredCircuit, i: int, point: Sequence[int]) -> tuple[int, int]:
    """(add~_i, mult~_i) at a point of F^(s_i + 2 s_{i+1})."""
    layer = c.layers[i]
    s, s2 = layer.size_bits, c.size_bits(i + 1)
    if len(point) != s + 2 * s2:
        raise ValueError("point has the wrong dimension")
    return gate_predicates(layer, s2, point)


def gate_predicates(layer: Layer, s_next: int, point: Sequence[int]) -> tuple[int, int]:
    labels = np.arange(layer.size, dtype=np.uint64)
    idx = (labels << np.uint64(2 * s_next)) | (layer.in1.astype(np.uint64) << np.uint64(s_next)) \
        | layer.in2.astype(np.uint64)
    w = point_array(point)
    out = []
    for op in (ADD, MUL):
        sel = layer.op == op
        ones = np.ones(int(sel.sum()), dtype=np.uint64)
        out.append(int(K.chi_accumulate(idx[sel], ones, w)))
    return out[0], out[1]


# ---------------------------------------------------------------- layer builders


def bintree_wiring(s: int, op: int) -> RegularWiring:
    """Gate p reads (p, 0) and (p, 1)."""
    body = vars_(range(s))
    return RegularWiring(s, s + 1, (), (Branch((), op, body + (const(0),), body + (const(1),)),), True)


def bintree_layer(s: int, op: int) -> Layer:
    p = np.arange(1 << s, dtype=np.int64)
    return Layer(s, 2 * p, 2 * p + 1, np.full(len(p), op, dtype=np.uint8), bintree_wiring(s, op),
                 f"{OP_NAMES[op]}-tree-{s}")


def tree_layers(top_bits: int, bottom_bits: int, op: int) -> list[Layer]:
    """Binary-tree layers reducing 2^bottom_bits values to 2^top_bits, top first."""
    return [bintree_layer(s, op) for s in range(top_bits, bottom_bits)]


def squaring_layer(s: int) -> Layer:
    """Gate p squares gate p of the next layer."""
    p = np.arange(1 << s, dtype=np.int64)
    w = RegularWiring(s, s, (), (Branch((), MUL, vars_(range(s)), vars_(range(s))),), True)
    return Layer(s, p, p.copy(), np.full(len(p), MUL, dtype=np.uint8), w, f"square-{s}")


def flt_start_layer(s: int) -> Layer:
    """2^(s+1) gates over 2^s: even gate squares gate p/2, odd gate copies it."""
    p = np.arange(1 << (s + 1), dtype=np.int64)
    half = p >> 1
    op = np.where(p & 1, COPY, MUL).astype(np.uint8)
    body = vars_(range(s))
    w = RegularWiring(s + 1, s, (s,), (
        Branch((0,), MUL, body, body),
        Branch((1,), COPY, body),
    ), True)
    return Layer(s + 1, half, half.copy(), op, w, f"flt-start-{s}")


def flt_product_layer(s: int) -> Layer:
    """Even gate p squares gate p; odd gate p multiplies gates p and p - 1."""
    p = np.arange(1 << (s + 1), dtype=np.int64)
    in2 = p & ~np.int64(1)
    body = vars_(range(s))
    w = RegularWiring(s + 1, s + 1, (s,), (
        Branch((0,), MUL, body + (const(0),), body + (const(0),)),
        Branch((1,), MUL, body + (const(1),), body + (const(0),)),
    ), True)
    return Layer(s + 1, p, in2, np.full(len(p), MUL, dtype=np.uint8), w, f"flt-product-{s}")


def selection_layer(s: int) -> Layer:
    """Gate p copies gate (p, 1) = 2p + 1 of the next layer."""
    p = np.arange(1 << s, dtype=np.int64)
    src = 2 * p + 1
    w = RegularWiring(s, s + 1, (), (Branch((), COPY, vars_(range(s)) + (const(1),)),), True)
    return Layer(s, src, src.copy(), np.full(len(p), COPY, dtype=np.uint8), w, f"select-{s}")


def flt_layers(s: int) -> list[Layer]:
    """Map 2^s values a_i to a_i^(q-1) in 2^s consecutive gates, top first.

    Squaring layer, a start layer holding (a^4, a^2) pairs, then q-1's
    exponent chain in 59 product layers: after t of them the even gate holds
    a^(2^(t+2)) and the odd gate a^(2^(t+2) - 2).  The selection layer picks
    the odd gates, which at the top hold a^(2^61 - 2) = a^(q-1)."""
    product = flt_product_layer(s)  # wiring identical in every product layer
    layers = [selection_layer(s)]
    layers += [product] * FLT_PRODUCT_LAYERS
    layers += [flt_start_layer(s), squaring_layer(s)]
    return layers


# ---------------------------------------------------------------- circuit builders


def build_binary_tree(n: int, op: int = MUL) -> LayeredCircuit:
    k = log2_exact(n)
    layers = tree_layers(0, k, op)
    return LayeredCircuit(layers, k, tree_top=k if op == ADD else 0, name=f"{OP_NAMES[op]}-tree-{n}")


def build_distinct_circuit(n: int) -> LayeredCircuit:
    """Counts the nonzero entries of a length-n frequency vector."""
    s = log2_exact(n)
    layers = tree_layers(0, s, ADD) + flt_layers(s)
    return LayeredCircuit(layers, s, tree_top=s, name=f"distinct-{n}", meta={"n": n})


def build_matmult_circuit(n: int) -> LayeredCircuit:
    """Input (0,i,j) -> A_ij, (1,i,j) -> B_ij; gate (i,j,k) = A_ik * B_kj; sum over k.

    The log n summation layers form an addition tree; provers may either run
    them layer by layer or collapse them with the tree shortcut."""
    L = log2_exact(n)
    i = np.arange(n, dtype=np.int64)
    ii, jj, kk = np.meshgrid(i, i, i, indexing="ij")
    in1 = ((ii << L) | kk).ravel()
    in2 = ((1 << (2 * L)) | (kk << L) | jj).ravel()
    w = RegularWiring(3 * L, 2 * L + 1, (), (Branch(
        (), MUL,
        (const(0),) + vars_(range(0, L)) + vars_(range(2 * L, 3 * L)),
        (const(1),) + vars_(range(2 * L, 3 * L)) + vars_(range(L, 2 * L)),
    ),), similar=False)
    mul_layer = Layer(3 * L, in1, in2, np.full(n ** 3, MUL, dtype=np.uint8), w, "matmult-products")
    layers = tree_layers(2 * L, 3 * L, ADD) + [mul_layer]
    return LayeredCircuit(layers, 2 * L + 1, tree_top=L, name=f"matmult-{n}", meta={"n": n})


def build_patternmatch_layers(n: int, m: int) -> LayeredCircuit:
    """Mismatch counter for a length-n text and a length-m pattern (n >= m).

    Inputs: text at labels (0, i), pattern at (1, k) (zero padded).  Layer
    gate (i, k) computes t_{(i+k) mod n} - p_k, gets squared and summed over
    k, and the per-window sums pass through the Fermat sub-circuit and an
    addition tree.  The single output is the number M of windows that do
    not match; the number of occurrences is n - M."""
    LN = log2_exact(n)
    Lm = log2_exact(m)
    if m > n:
        raise ValueError("pattern longer than text")
    i = np.arange(n, dtype=np.int64)
    k = np.arange(m, dtype=np.int64)
    ii, kk = np.meshgrid(i, k, indexing="ij")
    in1 = ((ii + kk) % n).ravel()
    in2 = (n + kk).ravel()
    diff = Layer(LN + Lm, in1, in2, np.full(n * m, SUB, dtype=np.uint8), None, "pattern-diff")
    layers = tree_layers(0, LN, ADD) + flt_layers(LN) + tree_layers(LN, LN + Lm, ADD)
    layers += [squaring_layer(LN + Lm), diff]
    return LayeredCircuit(layers, LN + 1, tree_top=LN, name=f"pattern-{n}-{m}", meta={"n": n, "m": m})


# ---------------------------------------------------------------- streams


def ingest_stream(updates, n: int) -> np.ndarray:
    """Aggregate (i, delta) updates into a dense frequency vector over F."""
    acc = [0] * n
    for i, d in updates:
        if not 0 <= i < n:
            raise IndexError(f"stream index {i} out of range")
        acc[i] = F.add(acc[i], F.encode_signed(int(d)))
    return np.asarray(acc, dtype=np.uint64)


# ---------------------------------------------------------------- random circuits


def random_wiring(rng: random.Random, s_in: int, s_next: int, max_select: int = 2,
                  ops: Sequence[int] = (ADD, MUL, COPY, SUB)) -> RegularWiring:
    """A random regular descriptor (used to exercise the general prover)."""
    nsel = rng.randint(0, min(max_select, s_in))
    select = tuple(sorted(rng.sample(range(s_in), nsel)))
    free = [v for v in range(s_in) if v not in select]

    def rand_map() -> tuple[Bit, ...]:
        bits = []
        fan: dict[int, int] = {}
        for _ in range(s_next):
            choice = rng.random()
            usable = [v for v in free if fan.get(v, 0) < 2]
            if usable and choice < 0.75:
                v = rng.choice(usable)
                fan[v] = fan.get(v, 0) + 1
                bits.append(Bit(v, rng.random() < 0.3))
            else:
                bits.append(const(rng.randint(0, 1)))
        return tuple(bits)

    branches = []
    for r in range(1 << nsel):
        rho = tuple((r >> (nsel - 1 - t)) & 1 for t in range(nsel))
        op = rng.choice(list(ops))
        in1 = rand_map()
        in2 = None if op == COPY else (in1 if rng.random() < 0.2 else rand_map())
        branches.append(Branch(rho, op, in1, in2))
    w = RegularWiring(s_in, s_next, select, tuple(branches), similar=False)
    if len(w.differing_bits()) <= MAX_SELECT_BITS:
        w = RegularWiring(s_in, s_next, select, tuple(branches), similar=True)
    return w


def random_regular_circuit(rng: random.Random, depth: int, max_bits: int = 4,
                           ops: Sequence[int] = (ADD, MUL, COPY, SUB),
                           max_select: int = 1) -> LayeredCircuit:
    """Random layered circuit whose every layer has a random regular descriptor."""
    sizes = [rng.randint(0, max_bits) for _ in range(depth)]
    sizes.append(rng.randint(1, max_bits))
    layers = []
    for i in range(depth):
        w = random_wiring(rng, sizes[i], sizes[i + 1], max_select=max_select, ops=ops)
        in1, in2, op = w.gate_arrays()
        layers.append(Layer(sizes[i], in1, in2, op, w, f"random-{i}"))
    return LayeredCircuit(layers, sizes[-1], name="random")


def random_irregular_circuit(rng: random.Random, depth: int, max_bits: int = 3,
                             ops: Sequence[int] = (ADD, MUL), min_bits: int = 0) -> LayeredCircuit:
    """Random layered circuit with arbitrary wiring and no descriptors."""
    sizes = [rng.randint(min_bits, max_bits) for _ in range(depth)]
    sizes.append(rng.randint(max(1, min_bits), max_bits))
    layers = []
    for i in range(depth):
        g = 1 << sizes[i]
        nxt = 1 << sizes[i + 1]
        in1 = np.asarray([rng.randrange(nxt) for _ in range(g)], dtype=np.int64)
        in2 = np.asarray([rng.randrange(nxt) for _ in range(g)], dtype=np.int64)
        op = np.asarray([rng.choice(list(ops)) for _ in range(g)], dtype=np.uint8)
        layers.append(Layer(sizes[i], in1, in2, op, None, f"irregular-{i}"))
    return LayeredCircuit(layers, sizes[-1], name="irregular")
