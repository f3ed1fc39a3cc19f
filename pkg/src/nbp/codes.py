"""GF(2) linear-code machinery: alist I/O, encoding, syndromes, BCH automorphisms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class AlistError(ValueError):
    """Malformed alist input. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def as_binary_matrix(m) -> np.ndarray:
    """Validate and return ``m`` as a 2-D uint8 array with entries in {0, 1}."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("matrix entries must be 0 or 1")
    return arr.astype(np.uint8)


def _as_bits(v, name="vector") -> np.ndarray:
    arr = np.asarray(v)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 entries")
    return arr.astype(np.uint8)


# ---------------------------------------------------------------------------
# alist


def parse_alist(text: str) -> np.ndarray:
    raw = text.splitlines()
    lines = [(i + 1, ln.split()) for i, ln in enumerate(raw)]
    lines = [(no, toks) for no, toks in lines if toks]
    pos = 0

    def next_ints(expected: int | None, what: str):
        nonlocal pos
        if pos >= len(lines):
            raise AlistError(f"unexpected end of input while reading {what}", len(raw) + 1)
        no, toks = lines[pos]
        pos += 1
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"non-integer token in {what}", no) from None
        if expected is not None and len(vals) != expected:
            raise AlistError(f"{what}: expected {expected} integers, got {len(vals)}", no)
        return no, vals

    no, (n, m) = next_ints(2, "header 'n m'")
    if n < 1 or m < 1:
        raise AlistError("n and m must be positive", no)
    no, (max_col, max_row) = next_ints(2, "max degree line")
    no_c, col_deg = next_ints(n, "column degrees")
    no_r, row_deg = next_ints(m, "row degrees")
    if any(d < 0 or d > max_col for d in col_deg):
        raise AlistError("degree mismatch: column degree exceeds declared maximum", no_c)
    if any(d < 0 or d > max_row for d in row_deg):
        raise AlistError("degree mismatch: row degree exceeds declared maximum", no_r)

    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        no, idx = next_ints(None, f"column {j + 1} entries")
        nz = [i for i in idx if i != 0]
        if len(idx) > max(max_col, col_deg[j]) or len(nz) != col_deg[j]:
            raise AlistError(
                f"degree mismatch: column {j + 1} lists {len(nz)} checks, declared {col_deg[j]}", no
            )
        for i in nz:
            if not 1 <= i <= m:
                raise AlistError(f"check index {i} out of range 1..{m}", no)
            if h[i - 1, j]:
                raise AlistError(f"duplicate check index {i} in column {j + 1}", no)
            h[i - 1, j] = 1

    for i in range(m):
        no, idx = next_ints(None, f"row {i + 1} entries")
        nz = [j for j in idx if j != 0]
        if len(idx) > max(max_row, row_deg[i]) or len(nz) != row_deg[i]:
            raise AlistError(
                f"degree mismatch: row {i + 1} lists {len(nz)} variables, declared {row_deg[i]}", no
            )
        for j in nz:
            if not 1 <= j <= n:
                raise AlistError(f"variable index {j} out of range 1..{n}", no)
        if sorted(nz) != sorted(np.flatnonzero(h[i]) + 1):
            raise AlistError(f"row {i + 1} disagrees with column lists", no)
    return h


def write_alist(m) -> str:
    h = as_binary_matrix(m)
    rows, n = h.shape
    col_deg = h.sum(axis=0).astype(int)
    row_deg = h.sum(axis=1).astype(int)
    max_col, max_row = int(col_deg.max()), int(row_deg.max())
    out = [f"{n} {rows}", f"{max_col} {max_row}"]
    out.append(" ".join(map(str, col_deg)))
    out.append(" ".join(map(str, row_deg)))
    for j in range(n):
        idx = list(np.flatnonzero(h[:, j]) + 1)
        out.append(" ".join(map(str, idx + [0] * (max_col - len(idx)))))
    for i in range(rows):
        idx = list(np.flatnonzero(h[i]) + 1)
        out.append(" ".join(map(str, idx + [0] * (max_row - len(idx)))))
    return "\n".join(out) + "\n"


def load_alist(path) -> np.ndarray:
    return parse_alist(Path(path).read_text())


# ---------------------------------------------------------------------------
# GF(2) linear algebra


def gf2_rref(m) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (matrix, pivot columns).

    Pivots are chosen as the first available row in each column.
    """
    a = np.array(m, dtype=np.uint8) % 2
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(a[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_rank(m) -> int:
    return len(gf2_rref(m)[1])


def systematic_generator(h) -> tuple[np.ndarray, "Permutation"]:
    """Generator ``[I | P]`` for the code with parity-check matrix ``h``.

    Returns ``(g, perm)`` such that ``g`` generates the null space of ``h``
    after its columns have been permuted by ``perm`` (``perm.apply`` on rows
    of ``h`` gives ``h'`` with ``g @ h'.T == 0``). Dependent rows of ``h``
    are dropped. Codewords of the original code are ``perm.invert().apply(c)``.
    """
    h = as_binary_matrix(h)
    if not h.any():
        raise ValueError("parity-check matrix is all zero")
    n = h.shape[1]
    red, pivots = gf2_rref(h)
    rank = len(pivots)
    red = red[:rank]
    free = [c for c in range(n) if c not in set(pivots)]
    k = n - rank
    # Column order of h': free columns first (message positions), then pivots.
    order = free + pivots
    # h' = [A | I] with A = red[:, free]; then g = [I | A^T].
    a = red[:, free]
    g = np.concatenate([np.eye(k, dtype=np.uint8), a.T.astype(np.uint8)], axis=1)
    # position order[i] of h moves to position i of h'
    mapping = np.empty(n, dtype=np.int64)
    mapping[np.asarray(order, dtype=np.int64)] = np.arange(n)
    return g, Permutation(mapping)


def encode(g, message) -> np.ndarray:
    g = np.asarray(g, dtype=np.uint8)
    msg = _as_bits(message, "message")
    if msg.shape[-1] != g.shape[0]:
        raise ValueError(f"message length {msg.shape[-1]} does not match k={g.shape[0]}")
    return (msg.astype(np.int64) @ g % 2).astype(np.uint8)


def syndrome(h, word) -> np.ndarray:
    """``h @ word`` over GF(2). Works on a single word or a batch of rows."""
    h = np.asarray(h, dtype=np.uint8)
    w = _as_bits(word, "word")
    if w.shape[-1] != h.shape[1]:
        raise ValueError(f"word length {w.shape[-1]} does not match n={h.shape[1]}")
    return (w.astype(np.int64) @ h.T.astype(np.int64) % 2).astype(np.uint8)


@dataclass(frozen=True)
class LinearCode:
    h: np.ndarray
    g: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "h", as_binary_matrix(self.h))
        if self.g is not None:
            g = as_binary_matrix(self.g)
            if g.shape[1] != self.n:
                raise ValueError("generator width differs from block length")
            if (g.astype(np.int64) @ self.h.T % 2).any():
                raise ValueError("g @ h.T != 0 over GF(2)")
            object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @cached_property
    def k(self) -> int:
        return self.n - gf2_rank(self.h)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @classmethod
    def from_alist(cls, path, name: str | None = None) -> "LinearCode":
        path = Path(path)
        return cls(load_alist(path), name=name or path.stem)

    def generator(self) -> np.ndarray:
        """Generator matrix in original column order (computed on demand)."""
        if self.g is not None:
            return self.g
        g, perm = systematic_generator(self.h)
        return perm.invert().apply(g)

    def is_codeword(self, word) -> np.ndarray | bool:
        s = syndrome(self.h, word)
        return ~s.any(axis=-1)


# ---------------------------------------------------------------------------
# permutations


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``{0..n-1}``. Applying it moves the entry at ``i`` to ``map[i]``."""

    map: np.ndarray

    def __post_init__(self):
        mp = np.asarray(self.map, dtype=np.int64)
        if mp.ndim != 1 or not np.array_equal(np.sort(mp), np.arange(mp.size)):
            raise ValueError("map is not a bijection on 0..n-1")
        mp.setflags(write=False)
        object.__setattr__(self, "map", mp)

    @property
    def n(self) -> int:
        return self.map.size

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.map, other.map)

    def __hash__(self):
        return hash(self.map.tobytes())

    def apply(self, v) -> np.ndarray:
        """Permute the last axis of ``v``; values are untouched."""
        v = np.asarray(v)
        if v.shape[-1] != self.n:
            raise ValueError(f"vector length {v.shape[-1]} does not match permutation size {self.n}")
        out = np.empty_like(v)
        out[..., self.map] = v
        return out

    def invert(self) -> "Permutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.n)
        return Permutation(inv)

    def compose(self, other: "Permutation") -> "Permutation":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        if other.n != self.n:
            raise ValueError("permutation sizes differ")
        return Permutation(self.map[other.map])

    __matmul__ = compose


def apply_permutation(p: Permutation, v) -> np.ndarray:
    return p.apply(v)


def compose(p: Permutation, q: Permutation) -> Permutation:
    return p.compose(q)


def invert(p: Permutation) -> Permutation:
    return p.invert()


def _bch_order(n: int) -> int:
    m = (n + 1).bit_length() - 1
    if n < 1 or (1 << m) - 1 != n:
        raise ValueError(f"n={n} is not of the form 2^m - 1")
    return m


def bch_automorphism(n: int, shift: int, frobenius_power: int) -> Permutation:
    """The automorphism ``i -> (2**frobenius_power * i + shift) mod n`` of a primitive BCH code."""
    m = _bch_order(n)
    if not 0 <= shift < n:
        raise ValueError(f"shift must lie in [0, {n})")
    if not 0 <= frobenius_power < m:
        raise ValueError(f"frobenius_power must lie in [0, {m})")
    i = np.arange(n, dtype=np.int64)
    return Permutation((pow(2, frobenius_power, n) * i + shift) % n)


def random_automorphism(n: int, rng: np.random.Generator) -> Permutation:
    m = _bch_order(n)
    shift = int(rng.integers(n))
    power = int(rng.integers(m))
    return bch_automorphism(n, shift, power)
