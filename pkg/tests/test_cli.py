import csv
import json

import numpy as np
import pytest

from groupfact import cli
from groupfact.classify import read_predictions
from groupfact.data import IngestSchema, load_group
from groupfact.errors import NumericalError


def _config(path, text):
    path.write_text(text)
    return str(path)


def _run(*argv):
    return cli.main([str(a) for a in argv])


SAMPLE = """
[sample]
L = 3
M = 24
N = 60

[fit]
seed = 7
"""


def test_sample_writes_ingestible_files(tmp_path):
    cfg = _config(tmp_path / "s.ini", SAMPLE)
    assert _run("sample", "--config", cfg, "--out", tmp_path / "a") == 0
    for l in range(1, 4):
        rows = (tmp_path / "a" / f"subject{l}.txt").read_text().splitlines()
        assert len(rows) == 60 and all(len(r.split()) == 24 for r in rows)
    paths = [tmp_path / "a" / f"subject{l}.txt" for l in range(1, 4)]
    data = load_group(paths, IngestSchema(feature_count=24), tmp_path / "a" / "labels.csv")
    manifest = json.loads((tmp_path / "a" / "sample_manifest.json").read_text())
    assert data.summary(3) == manifest["summary"]
    latent = (tmp_path / "a" / "latent.csv").read_text().splitlines()
    assert latent[0] == "factor,i1,i2,i3,value" and len(latent) == 1 + 24 * 3 + 3 * 24 + 3 * 60


def test_sample_is_deterministic(tmp_path):
    cfg = _config(tmp_path / "s.ini", SAMPLE)
    _run("sample", "--config", cfg, "--out", tmp_path / "a")
    _run("sample", "--config", cfg, "--out", tmp_path / "b")
    for name in ("subject1.txt", "subject3.txt", "labels.csv", "latent.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    _run("sample", "--config", cfg, "--out", tmp_path / "c", "--seed", 8)
    assert (tmp_path / "a" / "subject1.txt").read_bytes() != (tmp_path / "c" / "subject1.txt").read_bytes()


def _fit_config(tmp_path, extra="", family="prior", M=24, N=60, K=3):
    text = f"""
[model]
K = {K}

[sample]
L = 3
M = {M}
N = {N}
family = {family}

[data]
subjects = out/subject1.txt, out/subject2.txt, out/subject3.txt
labels = out/labels.csv
feature_count = {M}

[output]
dir = out
{extra}
"""
    cfg = _config(tmp_path / "run.ini", text)
    assert _run("sample", "--config", cfg) == 0
    return cfg


def _trace(path):
    with open(path) as fh:
        return [(int(r["iter"]), float(r["elbo"])) for r in csv.DictReader(fh)]


def test_fit_outputs(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 40\n")
    assert _run("fit", "--config", cfg) == 0
    out = tmp_path / "out"
    e = np.array([v for _, v in _trace(out / "trace.csv")])
    assert np.all(e[1:] >= e[:-1] - 1e-8 * np.abs(e[:-1]))
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "fit" and m["iterations"] == len(e) - 1 and m["wall_time_s"] > 0
    assert m["config"]["model"] == {"a": 0.1, "b": 0.1, "c": [0.1, 0.1, 0.1], "K": 3, "J": 1}
    assert (out / "posterior.csv").exists()
    # 24 features do not fit the default 8 x 12 layout: one channel of 24 bins
    rows = (out / "bases.csv").read_text().splitlines()
    assert len(rows) == 1 + 24 * 3 + 3 * 24


def test_fit_single_iteration(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 1\n")
    assert _run("fit", "--config", cfg) == 0
    assert [i for i, _ in _trace(tmp_path / "out" / "trace.csv")] == [0, 1]


def test_fit_huge_tolerance_stops_at_min_iters(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nrel_tol = 1e9\nmin_iters = 3\n")
    assert _run("fit", "--config", cfg) == 0
    assert [i for i, _ in _trace(tmp_path / "out" / "trace.csv")] == [0, 1, 2, 3]


def test_predict_eval_on_separated_fit(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 100\n", family="separated", M=48, N=80)
    assert _run("fit", "--config", cfg) == 0
    assert _run("predict", "--config", cfg) == 0
    assert _run("eval", "--config", cfg) == 0
    rep = json.loads((tmp_path / "out" / "eval.json").read_text())
    assert rep["pooled"] >= 0.9
    assert np.sum(rep["confusion"]) == 240
    head = (tmp_path / "out" / "predictions.csv").read_text().splitlines()[0]
    assert head == "subject,frame,label,d1,d2,d3"


def test_eval_truth_shorter_than_predictions(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 5\n")
    assert _run("fit", "--config", cfg) == 0
    assert _run("predict", "--config", cfg) == 0
    lines = (tmp_path / "out" / "labels.csv").read_text().splitlines()
    (tmp_path / "short.csv").write_text("\n".join(lines[:-1]) + "\n")
    with open(tmp_path / "run.ini", "a") as fh:
        fh.write("\n[eval]\ntruth = short.csv\n")
    assert _run("eval", "--config", cfg) == cli.EXIT_DATA


def test_argmax_flag_flips_two_class_decisions(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 10\n", K=2)
    assert _run("fit", "--config", cfg) == 0
    assert _run("predict", "--config", cfg, "--out", tmp_path / "out") == 0
    a, _ = read_predictions(tmp_path / "out" / "predictions.csv")
    assert _run("predict", "--config", cfg, "--rule", "argmax") == 0
    b, _ = read_predictions(tmp_path / "out" / "predictions.csv")
    assert all(np.all(u != v) for u, v in zip(a.labels, b.labels))


def test_learning_curve_command(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 15\n\n[learning_curve]\nfractions = 0.5, 1.0\n",
                      family="separated")
    assert _run("learning-curve", "--config", cfg, "--out", tmp_path / "a") == 0
    assert _run("learning-curve", "--config", cfg, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "learning_curve.csv").read_bytes()
    assert a == (tmp_path / "b" / "learning_curve.csv").read_bytes()
    rows = a.decode().splitlines()
    assert rows[0] == "fraction,subject,pooled,accuracy,n_train,n_test"
    assert len(rows) - 1 == 2 * (3 + 1)


def test_learning_curve_single_fraction_matches_fit_eval(tmp_path):
    from groupfact.classify import evaluate, predict, split_suffix
    from groupfact.inference import FitOptions, fit
    from groupfact.model import Hyperparams

    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 15\n\n[learning_curve]\nfractions = 1.0\n")
    assert _run("learning-curve", "--config", cfg) == 0
    with open(tmp_path / "out" / "learning_curve.csv") as fh:
        rows = list(csv.DictReader(fh))
    data = load_group([tmp_path / "out" / f"subject{l}.txt" for l in (1, 2, 3)], IngestSchema(feature_count=24),
                      tmp_path / "out" / "labels.csv")
    pool, test = split_suffix(data, 0.3)
    post, _ = fit(pool, Hyperparams(), FitOptions(max_iters=15))
    rep = evaluate(predict(test, post), test.Y, 3)
    assert [float(r["accuracy"]) for r in rows] == rep.per_subject + [rep.pooled]


def test_export_bases_command(tmp_path):
    cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 3\n\n[layout]\nchannels = 4\nbins_per_channel = 6\n"
                                "\n[predict]\nposterior = out/posterior.csv\n")
    assert _run("fit", "--config", cfg) == 0
    assert _run("export-bases", "--config", cfg, "--out", tmp_path / "exp") == 0
    assert (tmp_path / "exp" / "bases.csv").read_bytes() == (tmp_path / "out" / "bases.csv").read_bytes()


@pytest.mark.parametrize("text", ["[model]\nbogus = 1\n", "[nosuch]\nx = 1\n", "[model]\nK = three\n",
                                  "[model]\na = -1\n", "[fit]\nmax_iters = 2\nmin_iters = 5\n",
                                  "[data]\ndelimiter = tab\n", "[predict]\nrule = vote\n", "not an ini"])
def test_config_errors_exit_2(tmp_path, text, capsys):
    cfg = _config(tmp_path / "bad.ini", text)
    assert _run("fit", "--config", cfg) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_data_exit_3(tmp_path):
    cfg = _config(tmp_path / "c.ini", "[data]\nsubjects = nope.txt\n")
    assert _run("fit", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_DATA


def test_numerical_failure_exit_4(tmp_path, monkeypatch):
    cfg = _fit_config(tmp_path)

    def boom(*a, **k):
        raise NumericalError("non-finite bound at subject 1, feature 1, frame 1")

    monkeypatch.setattr(cli, "fit", boom)
    assert _run("fit", "--config", cfg) == cli.EXIT_NUMERICAL


def test_flags_override_config(tmp_path):
    raw = cli.read_config_file(_config(tmp_path / "c.ini", "[fit]\nseed = 1\nthreads = 2\n[predict]\nrule = scaled\n"))
    args = cli.build_parser().parse_args(["fit", "--seed", "9", "--rule", "argmax", "--out", "x"])
    cfg = cli.build_config(raw, args)
    assert cfg.fit.seed == 9 and cfg.rule == "argmax" and cfg.threads == 2 and str(cfg.out) == "x"


def test_relative_paths_follow_config_file(tmp_path):
    sub = tmp_path / "conf"
    sub.mkdir()
    raw = cli.read_config_file(_config(sub / "c.ini", "[data]\nsubjects = a.txt, b.txt\n"))
    assert raw["data"]["subjects"] == (sub / "a.txt", sub / "b.txt")


def test_log_env(tmp_path, monkeypatch, capsys):
    import logging

    monkeypatch.setenv("GROUPFACT_LOG", "debug")
    root = logging.getLogger()
    saved = root.handlers[:], root.level
    try:
        root.handlers = []
        cfg = _fit_config(tmp_path, "[fit]\nmax_iters = 2\n")
        assert _run("fit", "--config", cfg) == 0
    finally:
        root.handlers, _ = saved
        root.setLevel(saved[1])
    assert "iter 1 elbo" in capsys.readouterr().err
