import csv
import io
import json

import numpy as np
import pytest

from nbp.cli import main
from nbp.neural_bp import load_weights
from nbp.tanner import build

from conftest import DATA, load_code


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def weights(tmp_path_factory):
    out = tmp_path_factory.mktemp("w") / "w.nbp"
    assert main(["train", "--alist", str(DATA / "bch15_7.alist"), "--preset", "n63", "--steps", "4",
                 "--batch-size", "8", "--log-every", "2", "--out", str(out)]) == 0
    return out


def test_train_writes_loadable_weights(weights):
    g = build(load_code("bch15_7").h)
    w = load_weights(weights, g)
    assert w.variant == "rnn" and w.unfold == 5
    lines = weights.with_suffix(".log").read_text().splitlines()
    assert [int(x.split(",")[0]) for x in lines] == [2, 4]


def test_evaluate_trained(capsys, weights):
    code, out, _ = run(capsys, "evaluate", "--alist", "bch15_7", "--decoder", "rnn", "--weights", str(weights),
                       "--snr", "3:4:1", "--max-frames", "50")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["snr_db"]) for r in rows] == [3.0, 4.0]


def test_evaluate_eight_rows(capsys, tmp_path):
    target = tmp_path / "bp.csv"
    code, _, _ = run(capsys, "evaluate", "--alist", "bch63_36", "--decoder", "bp", "--snr", "1:8:1",
                     "--max-frames", "20", "--out", str(target))
    assert code == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "snr_db,frames,bit_errors,frame_errors,ber,fer,avg_bp_iterations"
    assert len(lines) == 9


def test_checksum_mismatch(capsys, weights):
    code, _, err = run(capsys, "evaluate", "--alist", "bch7_4", "--decoder", "rnn", "--weights", str(weights),
                       "--snr", "3", "--max-frames", "5")
    assert code == 2 and "edge_order_checksum" in err


def test_missing_files(capsys, tmp_path):
    code, _, err = run(capsys, "info", "--alist", str(tmp_path / "nope.alist"))
    assert code == 2 and "not found" in err
    code, _, err = run(capsys, "evaluate", "--alist", "bch7_4", "--decoder", "rnn", "--snr", "3")
    assert code == 2 and "--weights" in err
    code, _, err = run(capsys, "evaluate", "--alist", "bch7_4", "--decoder", "rnn",
                       "--weights", str(tmp_path / "w.nbp"), "--snr", "3")
    assert code == 2 and "not found" in err


def test_bad_alist(capsys, tmp_path):
    bad = tmp_path / "bad.alist"
    bad.write_text("3 2\n2 2\n1 2 1\n")
    code, _, err = run(capsys, "info", "--alist", str(bad))
    assert code == 2 and "line" in err


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--alist", "bch7_4", "--frobnicate"])
    assert exc.value.code == 2


def test_bad_clip(capsys):
    code, _, err = run(capsys, "evaluate", "--alist", "bch7_4", "--clip", "12", "--snr", "3")
    assert code == 2 and "clip" in err


def test_info(capsys):
    code, out, _ = run(capsys, "info", "--alist", "bch63_36_cr")
    assert code == 0
    assert "n=63 k=36" in out and "edge_order_checksum=" in out and "bch63_45_cr" in out
    code, out, _ = run(capsys, "info")
    assert code == 0 and "100 bit errors" in out


def test_decode_one_llr(capsys):
    llr = ",".join(["-4"] * 7)
    code, out, _ = run(capsys, "decode-one", "--alist", "bch7_4", f"--llr={llr}")
    res = json.loads(out)
    assert code == 0 and res["hard"] == [0] * 7 and res["converged"] and res["iterations_used"] == 1
    code, _, err = run(capsys, "decode-one", "--alist", "bch7_4", "--llr", "1,2")
    assert code == 2 and "7" in err


def test_decode_one_mrrd(capsys):
    code, out, _ = run(capsys, "decode-one", "--alist", "bch63_36", "--decoder", "mrrd", "--m", "3",
                       "--c", "30", "--block-iters", "2", "--snr", "4", "--seed", "1")
    res = json.loads(out)
    assert code == 0 and len(res["per_branch"]) == 3 and "bit_errors" in res


def test_mrrd_subcommand(capsys):
    code, out, _ = run(capsys, "mrrd", "--alist", "bch63_36", "--m", "3", "--c", "30", "--block-iters", "2",
                       "--snr", "4", "--max-frames", "10")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert 6 <= float(rows[0]["avg_bp_iterations"]) <= 3 * 30 * 2


def test_seed_env_fallback(capsys, monkeypatch):
    args = ["decode-one", "--alist", "bch63_36", "--snr", "2"]
    monkeypatch.setenv("NBP_SEED", "5")
    a = run(capsys, *args)[1]
    b = run(capsys, *args, "--seed", "5")[1]
    c = run(capsys, *args, "--seed", "6")[1]
    assert a == b and a != c
    monkeypatch.setenv("NBP_SEED", "x")
    assert run(capsys, *args)[0] == 2
