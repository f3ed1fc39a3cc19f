"""Regenerate the BCH parity-check matrices shipped in src/nbp/data.

Regular matrices: the n-k cyclic shifts of the reversed parity polynomial
h(x) = (x^n - 1) / g(x). Cycle-reduced matrices: greedy row additions over
the same row space that lower the 4-cycle count (ties broken by density).

Run from the repository root:  python3 scripts/make_bch_matrices.py
"""

from pathlib import Path

import numpy as np

from nbp.codes import gf2_rank, write_alist

OUT = Path(__file__).resolve().parents[1] / "src" / "nbp" / "data"

PRIMITIVE = {3: 0b1011, 4: 0b10011, 6: 0b1000011, 7: 0b10001001}


def poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_divmod(a: int, b: int):
    q = 0
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        s = a.bit_length() - 1 - db
        q ^= 1 << s
        a ^= b << s
    return q, a


def minimal_poly(m: int, power: int) -> int:
    """Minimal polynomial of alpha**power over GF(2), alpha primitive in GF(2^m)."""
    prim, n = PRIMITIVE[m], (1 << m) - 1
    exp = [1]
    for _ in range(n - 1):
        x = exp[-1] << 1
        if x >> m:
            x ^= prim
        exp.append(x)
    conj = sorted({(power * 2**j) % n for j in range(m)})
    # product of (x + alpha^c) with coefficients in GF(2^m), as exponent lists
    log = {v: i for i, v in enumerate(exp)}

    def fmul(a, b):
        return 0 if a == 0 or b == 0 else exp[(log[a] + log[b]) % n]

    coeffs = [1]
    for c in conj:
        root = exp[c]
        new = [0] * (len(coeffs) + 1)
        for i, a in enumerate(coeffs):
            new[i + 1] ^= a
            new[i] ^= fmul(a, root)
        coeffs = new
    assert all(a in (0, 1) for a in coeffs)
    return sum(a << i for i, a in enumerate(coeffs))


def bch_generator(m: int, t: int) -> int:
    n = (1 << m) - 1
    g, seen = 1, set()
    for p in range(1, 2 * t, 2):
        mp = minimal_poly(m, p)
        if mp not in seen:
            seen.add(mp)
            g = poly_mul(g, mp)
    assert poly_divmod((1 << n) | 1, g)[1] == 0
    return g


def cyclic_h(n: int, g: int) -> np.ndarray:
    h_poly, rem = poly_divmod((1 << n) | 1, g)
    assert rem == 0
    k = h_poly.bit_length() - 1
    rev = [(h_poly >> (k - i)) & 1 for i in range(k + 1)]
    h = np.zeros((n - k, n), dtype=np.uint8)
    for r in range(n - k):
        h[r, r : r + k + 1] = rev
    gen = np.zeros((k, n), dtype=np.uint8)
    gbits = [(g >> i) & 1 for i in range(n - k + 1)]
    for r in range(k):
        gen[r, r : r + n - k + 1] = gbits
    assert not (gen.astype(int) @ h.T.astype(int) % 2).any()
    return h


def four_cycles(h: np.ndarray) -> int:
    ov = h.astype(np.int64) @ h.T.astype(np.int64)
    np.fill_diagonal(ov, 0)
    return int((ov * (ov - 1) // 2).sum() // 2)


def cycle_reduce(h: np.ndarray, max_rounds: int = 10_000) -> np.ndarray:
    h = h.copy()
    rank = gf2_rank(h)
    best = (four_cycles(h), int(h.sum()))
    for _ in range(max_rounds):
        improved = False
        for i in range(h.shape[0]):
            for j in range(h.shape[0]):
                if i == j:
                    continue
                old = h[i].copy()
                h[i] ^= h[j]
                score = (four_cycles(h), int(h.sum()))
                if score < best:
                    best, improved = score, True
                else:
                    h[i] = old
        if not improved:
            break
    assert gf2_rank(h) == rank
    return h


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    specs = {
        "bch7_4": (3, 1),
        "bch15_7": (4, 2),
        "bch63_45": (6, 3),
        "bch63_36": (6, 5),
    }
    for name, (m, t) in specs.items():
        n = (1 << m) - 1
        h = cyclic_h(n, bch_generator(m, t))
        (OUT / f"{name}.alist").write_text(write_alist(h))
        print(name, h.shape, "ones", int(h.sum()), "4-cycles", four_cycles(h))
        if n == 63:
            hr = cycle_reduce(h)
            (OUT / f"{name}_cr.alist").write_text(write_alist(hr))
            print(name + "_cr", hr.shape, "ones", int(hr.sum()), "4-cycles", four_cycles(hr))


if __name__ == "__main__":
    main()
