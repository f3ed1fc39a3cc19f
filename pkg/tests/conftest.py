import itertools
from pathlib import Path

import numpy as np
import pytest

from nbp.codes import LinearCode
from nbp.tanner import build

DATA = Path(__file__).resolve().parents[1] / "src" / "nbp" / "data"

HAMMING_H = np.array(
    [[1, 0, 1, 0, 1, 0, 1],
     [0, 1, 1, 0, 0, 1, 1],
     [0, 0, 0, 1, 1, 1, 1]], dtype=np.uint8)


def load_code(name: str) -> LinearCode:
    return LinearCode.from_alist(DATA / f"{name}.alist")


def all_codewords(h) -> np.ndarray:
    """Brute-force null space of h over GF(2) by enumerating all 2^n words."""
    h = np.asarray(h, dtype=np.int64)
    n = h.shape[1]
    words = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    return words[~(words @ h.T % 2).any(axis=1)].astype(np.uint8)


def random_h(rng, rows, cols, ones=None, density=0.4):
    """Random binary matrix without empty rows or columns."""
    while True:
        if ones is not None:
            h = np.zeros((rows, cols), dtype=np.uint8)
            h.flat[rng.choice(rows * cols, ones, replace=False)] = 1
        else:
            h = (rng.random((rows, cols)) < density).astype(np.uint8)
        if h.any(axis=0).all() and h.any(axis=1).all():
            return h


def random_forest(rng, n_vars):
    """Parity-check matrix whose Tanner graph is a forest."""
    rows = []
    seen = [0]
    nxt = 1
    while nxt < n_vars:
        if rng.random() < 0.2:
            anchor = nxt  # start a new component
            seen.append(nxt)
            nxt += 1
            if nxt >= n_vars:
                break
        else:
            anchor = int(rng.choice(seen))
        k = int(min(rng.integers(1, 4), n_vars - nxt))
        row = np.zeros(n_vars, dtype=np.uint8)
        row[anchor] = 1
        row[nxt:nxt + k] = 1
        seen.extend(range(nxt, nxt + k))
        nxt += k
        rows.append(row)
    h = np.array(rows)
    return h[:, h.any(axis=0)]


def exact_posterior_llr(h, llr):
    words = all_codewords(h).astype(float)
    logp = words @ llr
    out = np.empty(h.shape[1])
    for v in range(h.shape[1]):
        one, zero = logp[words[:, v] == 1], logp[words[:, v] == 0]
        out[v] = np.logaddexp.reduce(one) - np.logaddexp.reduce(zero)
    return out


@pytest.fixture(scope="session")
def hamming():
    return LinearCode(HAMMING_H)


@pytest.fixture(scope="session")
def hamming_graph():
    return build(HAMMING_H)


@pytest.fixture(scope="session")
def bch63_36():
    return load_code("bch63_36")


@pytest.fixture(scope="session")
def bch63_36_graph(bch63_36):
    return build(bch63_36.h)


def fd_max_rel_error(graph, llr, y, weights, T, multiloss, step=1e-4, floor=1e-6):
    """Largest relative error between backprop and central differences over every parameter."""
    from nbp.neural_bp import forward
    from nbp.training import backward, trace_loss

    def loss(w):
        return trace_loss(forward(graph, llr, w, T, multiloss_outputs=multiloss), y, multiloss)

    grads = backward(graph, forward(graph, llr, weights, T, multiloss_outputs=multiloss), y, multiloss).params()
    worst = 0.0
    for name, arr in weights.params().items():
        for idx in np.ndindex(arr.shape):
            wp, wm = weights.copy(), weights.copy()
            wp.params()[name][idx] += step
            wm.params()[name][idx] -= step
            fd = (loss(wp) - loss(wm)) / (2 * step)
            g = grads[name][idx]
            worst = max(worst, abs(g - fd) / max(abs(g), abs(fd), floor))
    return worst


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per numbered criterion


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): numbered acceptance criterion checked by a test")
    config.stash[_CRITERIA] = {}


_CRITERIA = pytest.StashKey[dict]()


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (rep.when == "call" or rep.failed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed and rep.when != "call":
            detail = f"{rep.when} error"
        item.config.stash[_CRITERIA][marker.args[0]] = ("PASS" if rep.passed else "FAIL", detail)
    return rep


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")


# ---------------------------------------------------------------------------
# trained weights, cached across runs and keyed by the package source


def _source_digest() -> str:
    import hashlib

    import nbp

    h = hashlib.sha256()
    for path in sorted(Path(nbp.__file__).parent.rglob("*")):
        if path.suffix in (".py", ".alist"):
            h.update(path.name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def trained(request):
    """``trained(name)`` -> (code, graph, weights) after 10^4 steps of BP-RNN training."""
    from nbp.neural_bp import load_weights, save_weights
    from nbp.training import TrainConfig, train

    cache = request.config.cache.mkdir("nbp-trained")
    digest = _source_digest()
    memo = {}

    def get(name):
        if name not in memo:
            code = load_code(name)
            graph = build(code.h)
            cfg = TrainConfig.preset("n63", steps=10_000, seed=0, log_every=500)
            path = cache / f"{name}-{digest}.nbp"
            if not path.exists():
                res = train(code, graph, cfg, log_path=cache / f"{name}-{digest}.log")
                save_weights(path, res.weights, graph)
            memo[name] = (code, graph, load_weights(path, graph))
        return memo[name]

    return get
