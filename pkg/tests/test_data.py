import locale

import numpy as np
import pytest

from groupfact.data import (BCI_LABEL_MAP, FeatureLayout, IngestSchema, export_bases, load_group, load_subject,
                            read_bases, read_labels, write_labels, write_subject)
from groupfact.errors import ConfigError, DataError
from groupfact.inference import init_posterior, sweep
from groupfact.model import Hyperparams, sample_dataset

BCI = IngestSchema(label_column="last", label_map=BCI_LABEL_MAP)


def _row(vals, label=None):
    out = " ".join(repr(float(v)) for v in vals)
    return out + (f" {label}" if label is not None else "")


def test_bci_style_rows(tmp_path):
    p = tmp_path / "s.txt"
    vals = np.arange(1.0, 97.0)
    p.write_text(_row(vals, 7) + "\n" + _row(vals[::-1], 7) + "\n")
    X, Y = load_subject(p, BCI)
    assert X.shape == (96, 2)
    assert list(Y) == [3, 3]
    assert np.array_equal(X[:, 0], vals)


def test_float_raw_labels_and_comma_delimiter(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("1.0,2.0,3.0,2.000000e+00\n0.5, 0.25 ,1e-3,3\n")
    X, Y = load_subject(p, IngestSchema("comma", 3, "last", BCI_LABEL_MAP))
    assert list(Y) == [1, 2]
    assert X[1, 1] == 0.25


def test_label_first_column(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("2 1.0 2.0\n1 3.0 4.0\n")
    X, Y = load_subject(p, IngestSchema(feature_count=2, label_column="first"))
    assert list(Y) == [2, 1] and X.tolist() == [[1.0, 3.0], [2.0, 4.0]]


def test_transposed_file(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1 2 3\n4 5 6\n")
    X, Y = load_subject(p, IngestSchema(feature_count=2, transpose=True))
    assert X.tolist() == [[1, 2, 3], [4, 5, 6]] and Y is None


def test_empty_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("\n# comment only\n")
    with pytest.raises(DataError, match="no frames"):
        load_subject(p)


def test_negative_cell_is_named(tmp_path):
    p = tmp_path / "n.txt"
    p.write_text("1 2 3\n1 -2 3\n")
    with pytest.raises(DataError, match="row 2, column 2: negative"):
        load_subject(p, IngestSchema(feature_count=3))


def test_nonfinite_cell(tmp_path):
    p = tmp_path / "n.txt"
    p.write_text("1 nan 3\n")
    with pytest.raises(DataError, match="row 1, column 2: non-finite"):
        load_subject(p, IngestSchema(feature_count=3))


def test_parse_failure_reports_row_and_column(tmp_path):
    p = tmp_path / "b.txt"
    p.write_text("1 2 3\n1 2,5 3\n")
    with pytest.raises(DataError, match="row 2, column 2: cannot parse"):
        load_subject(p, IngestSchema(feature_count=3))


def test_wrong_width(tmp_path):
    p = tmp_path / "w.txt"
    p.write_text("1 2 3\n")
    with pytest.raises(DataError, match="expected 4 feature values, found 3"):
        load_subject(p, IngestSchema(feature_count=4))


def test_unknown_raw_label(tmp_path):
    p = tmp_path / "u.txt"
    p.write_text("1 2 5\n")
    with pytest.raises(DataError, match="unknown raw label"):
        load_subject(p, IngestSchema(feature_count=2, label_column="last", label_map=BCI_LABEL_MAP))


def test_schema_validation():
    with pytest.raises(ConfigError):
        IngestSchema(delimiter="tab")
    with pytest.raises(ConfigError):
        IngestSchema(label_column="middle")
    with pytest.raises(ConfigError):
        IngestSchema(feature_count=0)
    with pytest.raises(ConfigError):
        IngestSchema(label_column="last", label_map={2: 1, 3: 1})
    with pytest.raises(ConfigError):
        IngestSchema(label_column="last", transpose=True)
    with pytest.raises(ConfigError):
        FeatureLayout(2, 3, ("a",))


def _write_group(tmp_path, widths, n=4):
    rng = np.random.default_rng(0)
    paths = []
    for i, w in enumerate(widths):
        p = tmp_path / f"subj{i + 1}.txt"
        X = rng.gamma(1.0, size=(w, n + i))
        Y = np.arange(n + i) % 3 + 1
        write_subject(p, X, Y, BCI.with_feature_count(w))
        paths.append(p)
    return paths


def test_load_group_three_subjects(tmp_path):
    paths = _write_group(tmp_path, [96, 96, 96])
    d = load_group(paths, BCI)
    assert d.L == 3 and d.M == 96 and d.n_frames == [4, 5, 6]
    assert d.names == ("subj1", "subj2", "subj3")
    s = d.summary(3)
    assert s["class_histogram"] == np.bincount(np.concatenate(d.Y) - 1, minlength=3).tolist()


def test_load_group_single_subject(tmp_path):
    d = load_group(_write_group(tmp_path, [96]), BCI)
    assert d.L == 1


def test_width_mismatch_names_both(tmp_path):
    paths = _write_group(tmp_path, [96, 95])
    with pytest.raises(DataError, match=r"subject 2 \(.*subj2.txt\) has 95 .* subject 1 \(.*subj1.txt\) has 96"):
        load_group(paths, BCI)


def test_schema_width_enforced(tmp_path):
    with pytest.raises(DataError, match="expects 96"):
        load_group(_write_group(tmp_path, [10]), BCI)


def test_roundtrip_idempotent(tmp_path):
    d1 = load_group(_write_group(tmp_path, [96, 96]), BCI)
    out = tmp_path / "again"
    out.mkdir()
    paths = []
    for l in range(d1.L):
        p = out / f"{d1.names[l]}.txt"
        write_subject(p, d1.X[l], d1.Y[l], BCI)
        paths.append(p)
    d2 = load_group(paths, BCI)
    assert d2.names == d1.names
    for a, b in zip(d1.X + d1.Y, d2.X + d2.Y):
        assert np.array_equal(a, b)


def test_labels_file(tmp_path):
    d, _ = sample_dataset(Hyperparams(), 2, 3, [4, 2], seed=1)
    write_labels(d, tmp_path / "labels.csv")
    back = read_labels(tmp_path / "labels.csv", ["subject1", "subject2"], [4, 2])
    assert all(np.array_equal(a, b) for a, b in zip(back, d.Y))
    with pytest.raises(DataError, match="4 labels for 5 frames"):
        read_labels(tmp_path / "labels.csv", ["subject1"], [5])
    with pytest.raises(DataError, match="no labels"):
        read_labels(tmp_path / "labels.csv", ["other"])


def test_group_with_labels_file(tmp_path):
    d, _ = sample_dataset(Hyperparams(), 2, 5, 6, seed=2)
    paths = []
    for l in range(2):
        p = tmp_path / f"subject{l + 1}.txt"
        write_subject(p, d.X[l], schema=IngestSchema(feature_count=5))
        paths.append(p)
    write_labels(d.Y, tmp_path / "labels.csv")
    back = load_group(paths, IngestSchema(feature_count=5), tmp_path / "labels.csv")
    assert all(np.array_equal(a, b) for a, b in zip(back.Y, d.Y))
    assert all(np.array_equal(a, b) for a, b in zip(back.X, d.X))


def test_locale_independent_parsing(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("0.5 1.25\n")
    prev = locale.setlocale(locale.LC_NUMERIC)
    for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
        try:
            locale.setlocale(locale.LC_NUMERIC, name)
            break
        except locale.Error:
            continue
    try:
        X, _ = load_subject(p, IngestSchema(feature_count=2))
    finally:
        locale.setlocale(locale.LC_NUMERIC, prev)
    assert X[:, 0].tolist() == [0.5, 1.25]


# -- basis export ---------------------------------------------------------------

def _posterior(M, K, J, L=2):
    h = Hyperparams(K=K, J=J)
    d, _ = sample_dataset(h, L, M, 6, seed=0, label_pattern="cyclic")
    return sweep(init_posterior(h, d), d, h)


def test_export_row_count_and_roundtrip(tmp_path):
    post = _posterior(96, 3, 1, L=3)
    layout = FeatureLayout(channel_names=("C3", "Cz", "C4", "CP1", "CP2", "P3", "Pz", "P4"))
    n = export_bases(post, layout, tmp_path / "b.csv")
    assert n == 96 * 3 + 3 * 96 * 1
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "basis,channel,bin,value" and len(lines) == n + 1
    back = read_bases(tmp_path / "b.csv", layout)
    for k in range(3):
        assert np.array_equal(back[f"C{k + 1}"], post.ac.e_x[:, k])
    for l in range(3):
        assert np.array_equal(back[f"I{l + 1}.1"], post.ai.e_x[l, :, 0])


def test_export_tiny_common_only(tmp_path):
    post = _posterior(2, 1, 1, L=1)
    export_bases(post, FeatureLayout(1, 2), tmp_path / "b.csv")
    rows = [r.split(",") for r in (tmp_path / "b.csv").read_text().splitlines()[1:]]
    common = [r for r in rows if r[0] == "C1"]
    assert len(common) == 2
    assert [float(r[3]) for r in common] == post.ac.e_x[:, 0].tolist()


def test_export_layout_mismatch(tmp_path):
    with pytest.raises(DataError, match="does not match"):
        export_bases(_posterior(10, 2, 1), FeatureLayout(), tmp_path / "b.csv")
