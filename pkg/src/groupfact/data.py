"""Reading precomputed feature files and writing plot-ready exports.

Input files are delimited text with one frame per row (or one feature per row
when ``transpose`` is set), optionally with a raw class label in the first or
last column. The defaults match the ASCII layout of the BCI Competition III
dataset V precomputed features: 96 whitespace-separated PSD values (8
channels x 12 bins) followed by a label in {2, 3, 7}.

Number parsing always uses Python's ``float``, so a decimal point is expected
regardless of the process locale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .inference import Posterior
from .model import GroupedDataset

DELIMITERS = ("whitespace", "comma")
LABEL_COLUMNS = ("none", "last", "first")

#: raw label -> class id for the public dataset (left hand, right hand, word)
BCI_LABEL_MAP = {2: 1, 3: 2, 7: 3}


@dataclass(frozen=True)
class IngestSchema:
    """How to parse one subject's feature file.

    ``feature_count=None`` infers the width from the first row.
    ``label_map`` sends raw label values to class ids ``1..K``; without one,
    raw labels must already be integers >= 1.
    """

    delimiter: str = "whitespace"
    feature_count: int | None = 96
    label_column: str = "none"
    label_map: Mapping[float, int] | None = None
    transpose: bool = False

    def __post_init__(self):
        if self.delimiter not in DELIMITERS:
            raise ConfigError(f"delimiter must be one of {DELIMITERS}, got {self.delimiter!r}")
        if self.label_column not in LABEL_COLUMNS:
            raise ConfigError(f"label_column must be one of {LABEL_COLUMNS}, got {self.label_column!r}")
        if self.feature_count is not None and int(self.feature_count) < 1:
            raise ConfigError(f"feature_count must be >= 1, got {self.feature_count}")
        if self.transpose and self.label_column != "none":
            raise ConfigError("labels in a column are only supported for rows-as-frames files")
        if self.label_map is not None:
            lm = {float(k): int(v) for k, v in dict(self.label_map).items()}
            ids = sorted(lm.values())
            if ids != list(range(1, len(ids) + 1)):
                raise ConfigError(f"label_map must be a bijection onto 1..K, got targets {ids}")
            object.__setattr__(self, "label_map", lm)

    @property
    def labeled(self) -> bool:
        return self.label_column != "none"

    def with_feature_count(self, n: int | None) -> "IngestSchema":
        return IngestSchema(self.delimiter, n, self.label_column, self.label_map, self.transpose)


@dataclass(frozen=True)
class FeatureLayout:
    """Feature index ``m = channel * bins_per_channel + bin`` (channel-major)."""

    channels: int = 8
    bins_per_channel: int = 12
    channel_names: tuple | None = None

    def __post_init__(self):
        if self.channels < 1 or self.bins_per_channel < 1:
            raise ConfigError("channels and bins_per_channel must be >= 1")
        if self.channel_names is not None:
            names = tuple(str(c) for c in self.channel_names)
            if len(names) != self.channels:
                raise ConfigError(f"{len(names)} channel names for {self.channels} channels")
            object.__setattr__(self, "channel_names", names)

    @property
    def feature_count(self) -> int:
        return self.channels * self.bins_per_channel

    def channel_label(self, c: int) -> str:
        return self.channel_names[c] if self.channel_names else str(c + 1)


def _split(line: str, delimiter: str) -> list[str]:
    if delimiter == "comma":
        return [tok.strip() for tok in line.split(",")]
    return line.split()


def _parse_label(tok: str, schema: IngestSchema, where: str) -> int:
    try:
        raw = float(tok)
    except ValueError:
        raise DataError(f"{where}: label {tok!r} is not a number") from None
    if schema.label_map is not None:
        if raw not in schema.label_map:
            raise DataError(f"{where}: unknown raw label {tok!r}; known {sorted(schema.label_map)}")
        return schema.label_map[raw]
    if raw != int(raw) or raw < 1:
        raise DataError(f"{where}: label {tok!r} must be an integer >= 1 (or supply a label_map)")
    return int(raw)


def load_subject(path, schema: IngestSchema = IngestSchema()):
    """Parse one subject file.

    Returns
    -------
    X : ndarray, shape (M, N)
        Columns are frames in file order.
    Y : ndarray of int or None
        Class ids when ``schema.label_column`` is not ``none``.
    """
    path = Path(path)
    rows, labels = [], []
    width = schema.feature_count
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            toks = _split(body, schema.delimiter)
            where = f"{path}: row {lineno}"
            if schema.label_column == "last":
                labels.append(_parse_label(toks[-1], schema, where))
                toks, col0 = toks[:-1], 1
            elif schema.label_column == "first":
                labels.append(_parse_label(toks[0], schema, where))
                toks, col0 = toks[1:], 2
            else:
                col0 = 1
            if width is None and not schema.transpose:
                width = len(toks)
            if not schema.transpose and len(toks) != width:
                raise DataError(f"{where}: expected {width} feature values, found {len(toks)}")
            vals = []
            for c, tok in enumerate(toks):
                try:
                    v = float(tok)
                except ValueError:
                    raise DataError(f"{where}, column {c + col0}: cannot parse {tok!r} as a number") from None
                if not math.isfinite(v) or v < 0:
                    kind = "negative" if v < 0 else "non-finite"
                    raise DataError(f"{where}, column {c + col0}: {kind} feature value {tok!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no frames")
    if schema.transpose:
        if schema.feature_count is not None and len(rows) != schema.feature_count:
            raise DataError(f"{path}: expected {schema.feature_count} feature rows, found {len(rows)}")
        n = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != n:
                raise DataError(f"{path}: feature row {i + 1} has {len(r)} frames, row 1 has {n}")
        X = np.array(rows, dtype=float)
    else:
        X = np.array(rows, dtype=float).T
    Y = np.array(labels, dtype=np.int64) if schema.labeled else None
    return X, Y


def load_group(paths: Sequence, schema: IngestSchema = IngestSchema(), labels=None,
               frame_ms: float | None = None) -> GroupedDataset:
    """Load one file per subject into a :class:`GroupedDataset`.

    Subject names are the file stems. Widths are compared across subjects
    first, so a mismatch names both offending files. ``labels`` optionally
    points to a labels CSV (see :func:`read_labels`) overriding any label
    column.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise DataError("need at least one subject file")
    loose = schema.with_feature_count(None)
    X, Y = [], []
    for l, p in enumerate(paths):
        x, y = load_subject(p, loose)
        if X and x.shape[0] != X[0].shape[0]:
            raise DataError(f"feature dimension mismatch: subject {l + 1} ({p}) has {x.shape[0]} features, "
                            f"subject 1 ({paths[0]}) has {X[0].shape[0]}")
        X.append(x)
        Y.append(y)
    if schema.feature_count is not None and X[0].shape[0] != schema.feature_count:
        raise DataError(f"{paths[0]}: {X[0].shape[0]} features per frame, schema expects {schema.feature_count}")
    names = _unique_names([p.stem for p in paths])
    if labels is not None:
        Y = read_labels(labels, names, [x.shape[1] for x in X])
    elif not schema.labeled:
        Y = None
    return GroupedDataset(X, Y, names, frame_ms)


def _unique_names(stems):
    if len(set(stems)) == len(stems):
        return stems
    return [f"{s}_{i + 1}" for i, s in enumerate(stems)]


# -- labels and feature files ------------------------------------------------

LABEL_HEADER = ["subject", "frame", "label"]


def write_labels(data_or_labels, path, names=None) -> None:
    """CSV ``subject,frame,label`` with 1-based frame indices."""
    if isinstance(data_or_labels, GroupedDataset):
        names = names or [data_or_labels.subject_name(l) for l in range(data_or_labels.L)]
        Y = data_or_labels.Y
    else:
        Y = data_or_labels
        names = names or [f"subject{l + 1}" for l in range(len(Y))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(LABEL_HEADER)
        for name, y in zip(names, Y):
            for n, v in enumerate(y):
                out.writerow([name, n + 1, int(v)])


def read_labels(path, names: Sequence[str] | None = None, n_frames: Sequence[int] | None = None) -> list:
    """Read a labels CSV.

    With ``names`` the vectors are returned in that order (each subject must be
    present); otherwise in file order. ``n_frames`` enforces exact lengths.
    """
    by_name: dict = {}
    order = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != LABEL_HEADER:
            raise DataError(f"{path}: expected header {LABEL_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name, frame, lab = row[0], int(row[1]), int(row[2])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed labels row {row}") from None
            if name not in by_name:
                by_name[name] = []
                order.append(name)
            if frame != len(by_name[name]) + 1:
                raise DataError(f"{path}:{lineno}: frames of {name} must be consecutive from 1")
            by_name[name].append(lab)
    names = list(names) if names is not None else order
    out = []
    for l, name in enumerate(names):
        if name not in by_name:
            raise DataError(f"{path}: no labels for subject {name!r}")
        y = np.asarray(by_name[name], dtype=np.int64)
        if n_frames is not None and y.size != n_frames[l]:
            raise DataError(f"{path}: subject {name!r} has {y.size} labels for {n_frames[l]} frames")
        out.append(y)
    return out


def write_subject(path, X: np.ndarray, Y=None, schema: IngestSchema = IngestSchema(), raw_labels=None) -> None:
    """Write one subject file that :func:`load_subject` reads back exactly.

    Values use ``repr`` so they round-trip bit for bit. ``raw_labels`` maps
    class ids back to raw values when the schema has a ``label_map``.
    """
    sep = "," if schema.delimiter == "comma" else " "
    X = np.asarray(X, dtype=float)
    if schema.transpose:
        lines = [sep.join(repr(float(v)) for v in row) for row in X]
    else:
        if schema.labeled and Y is None:
            raise DataError("schema has a label column but no labels were given")
        if raw_labels is None and schema.label_map is not None:
            raw_labels = {v: k for k, v in schema.label_map.items()}
        lines = []
        for n in range(X.shape[1]):
            vals = [repr(float(v)) for v in X[:, n]]
            if schema.labeled:
                lab = int(Y[n]) if raw_labels is None else raw_labels[int(Y[n])]
                lab = _fmt_label(lab)
                vals = vals + [lab] if schema.label_column == "last" else [lab] + vals
            lines.append(sep.join(vals))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt_label(v) -> str:
    v = float(v)
    return str(int(v)) if v == int(v) else repr(v)


# -- basis export ------------------------------------------------------------

BASES_HEADER = ["basis", "channel", "bin", "value"]


def export_bases(post: Posterior, layout: FeatureLayout, out) -> int:
    """Write posterior-mean bases as long-format CSV for heatmaps.

    Common bases are named ``C{k}``, individual bases ``I{l}.{j}``. Returns the
    number of value rows written.
    """
    if layout.feature_count != post.M:
        raise DataError(f"layout {layout.channels}x{layout.bins_per_channel} = {layout.feature_count} "
                        f"does not match {post.M} features")
    blocks = [(f"C{k + 1}", post.ac.e_x[:, k]) for k in range(post.K)]
    blocks += [(f"I{l + 1}.{j + 1}", post.ai.e_x[l, :, j]) for l in range(post.L) for j in range(post.J)]
    n = 0
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASES_HEADER)
        for name, vec in blocks:
            for c in range(layout.channels):
                for b in range(layout.bins_per_channel):
                    w.writerow([name, layout.channel_label(c), b + 1,
                                repr(float(vec[c * layout.bins_per_channel + b]))])
                    n += 1
    return n


def read_bases(path, layout: FeatureLayout) -> dict:
    """Inverse of :func:`export_bases`: basis name -> length-M vector."""
    labels = [layout.channel_label(c) for c in range(layout.channels)]
    out: dict = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != BASES_HEADER:
            raise DataError(f"{path}: expected header {BASES_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            try:
                name, ch, b, v = row[0], labels.index(row[1]), int(row[2]) - 1, float(row[3])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: malformed bases row {row}") from None
            vec = out.setdefault(name, np.full(layout.feature_count, np.nan))
            vec[ch * layout.bins_per_channel + b] = v
    return out
