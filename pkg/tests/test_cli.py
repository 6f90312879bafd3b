import json

import pytest

from delconf.cli import main
from delconf.corpus import read_corpus


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def sim_corpus(tmp_path):
    path = tmp_path / "sim.jsonl"
    cfg = {"seed": 5, "n_utts": 60, "vocab_size": 50}
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(cfg))
    assert run("simulate", "--config", str(cfg_path), "--out", str(path)) == 0
    return path


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("simulate", "--preset", "matched", "--seed", "3", "--out", str(a)) == 0
    assert run("simulate", "--preset", "matched", "--seed", "3", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.jsonl"
    assert run("simulate", "--preset", "matched", "--seed", "4", "--out", str(c)) == 0
    assert a.read_bytes() != c.read_bytes()


def test_align_and_summary(sim_corpus, tmp_path):
    out = tmp_path / "ali.jsonl"
    summary = tmp_path / "counts.csv"
    assert run("align", "--in", str(sim_corpus), "--out", str(out),
               "--summary", str(summary)) == 0
    utts = read_corpus(out)
    assert all(lu.targets is not None for lu in utts)
    lines = summary.read_text().splitlines()
    assert lines[0] == "id,cor,sub,del,ins,wer"
    assert len(lines) == len(utts) + 1


def test_missing_targets_exit_code(sim_corpus, tmp_path):
    assert run("train-calib", "--in", str(sim_corpus),
               "--out", str(tmp_path / "m.json")) == 1


def test_missing_input_file_exit_code(tmp_path):
    assert run("align", "--in", str(tmp_path / "nope.jsonl"),
               "--out", str(tmp_path / "o.jsonl")) == 2


def test_full_pipeline_byte_identical(sim_corpus, tmp_path):
    ali = tmp_path / "ali.jsonl"
    assert run("align", "--in", str(sim_corpus), "--out", str(ali)) == 0

    def pipeline_run(tag):
        cal = tmp_path / f"cal{tag}.json"
        model = tmp_path / f"model{tag}.json"
        pred = tmp_path / f"pred{tag}.jsonl"
        report = tmp_path / f"report{tag}.json"
        curve = tmp_path / f"curve{tag}.csv"
        ranked = tmp_path / f"ranked{tag}.txt"
        assert run("train-calib", "--in", str(ali), "--out", str(cal),
                   "--bins", "10") == 0
        assert run("train-birnn", "--in", str(ali), "--out", str(model),
                   "--calib", str(cal), "--hidden", "4", "--epochs", "2",
                   "--emb-dim", "8", "--seed", "1") == 0
        assert run("predict", "--in", str(ali), "--model", str(model),
                   "--out", str(pred)) == 0
        assert run("evaluate", "--in", str(pred), "--out", str(report)) == 0
        assert run("select", "--in", str(pred), "--scheme", "confidence",
                   "--out", str(curve), "--ranked-out", str(ranked)) == 0
        return b"".join(p.read_bytes()
                        for p in (cal, model, pred, report, curve, ranked))

    assert pipeline_run("1") == pipeline_run("2")
    report = json.loads((tmp_path / "report1.json").read_text())
    assert set(report) >= {"confidence", "next_deletion", "start_deletion"}
    assert report["n_utterances"] == 60


def test_predict_baseline_and_fitters(sim_corpus, tmp_path):
    ali = tmp_path / "ali.jsonl"
    pred = tmp_path / "pred.jsonl"
    assert run("align", "--in", str(sim_corpus), "--out", str(ali)) == 0
    assert run("predict", "--in", str(ali), "--out", str(pred)) == 0
    utts = read_corpus(pred)
    assert all(lu.predictions is not None for lu in utts)
    # raw-posterior baseline: c equals the stored posteriors
    assert utts[0].predictions.c == [w.raw_posterior
                                     for w in utts[0].utterance.words]

    th_path = tmp_path / "th.json"
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"theta_c": [0.5], "theta_d": [0.9],
                                "theta_s": [0.9], "theta_p": [0.5, 1.0]}))
    assert run("fit-thresholds", "--in", str(pred), "--out", str(th_path),
               "--grid", str(grid)) == 0
    th = json.loads(th_path.read_text())
    assert set(th) == {"theta_c", "theta_d", "theta_s", "theta_p"}

    disc_path = tmp_path / "disc.json"
    dgrid = tmp_path / "dgrid.json"
    dgrid.write_text(json.dumps({"theta_d": [0.0, 1.0], "theta_s": [0.0]}))
    assert run("fit-discount", "--in", str(pred), "--out", str(disc_path),
               "--grid", str(dgrid)) == 0

    curve = tmp_path / "curve.csv"
    assert run("select", "--in", str(pred), "--scheme", "threshold",
               "--params", str(th_path), "--out", str(curve)) == 0
    header = curve.read_text().splitlines()[0]
    assert header == "data_pct,est_wer,true_sub,true_del,true_ins,true_tot"
    assert run("select", "--in", str(pred), "--scheme", "discount",
               "--params", str(disc_path), "--out", str(curve)) == 0


def test_select_missing_params_exit_code(sim_corpus, tmp_path):
    ali = tmp_path / "ali.jsonl"
    pred = tmp_path / "pred.jsonl"
    assert run("align", "--in", str(sim_corpus), "--out", str(ali)) == 0
    assert run("predict", "--in", str(ali), "--out", str(pred)) == 0
    assert run("select", "--in", str(pred), "--scheme", "discount",
               "--out", str(tmp_path / "c.csv")) == 1


def test_grad_check_exit_codes():
    assert run("grad-check", "--hidden", "3", "--seed", "0") == 0
    assert run("grad-check", "--cell", "vanilla", "--seed", "1") == 0


def test_no_partial_output_on_failure(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "u1"\n')
    out = tmp_path / "out.jsonl"
    assert run("align", "--in", str(bad), "--out", str(out)) == 1
    assert not out.exists()
    assert list(tmp_path.glob("*.tmp")) == []
