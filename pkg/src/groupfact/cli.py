"""``groupfact`` command line: sample, fit, predict, eval, learning-curve, export-bases.

Runs are configured by one INI file (``--config``); a handful of flags
override it. Relative paths in the config are resolved against the config
file's directory. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .classify import (RULES, chance_baseline, evaluate, learning_curve, predict, read_predictions,
                       write_learning_curve, write_predictions)
from .data import FeatureLayout, IngestSchema, export_bases, load_group, read_labels, write_labels, write_subject
from .errors import ConfigError, DataError, DomainError, NumericalError
from .inference import FitOptions, fit, read_posterior, write_posterior, write_trace
from .model import Hyperparams, sample_dataset, sample_separated, write_latent

log = logging.getLogger("groupfact")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


# -- config ------------------------------------------------------------------

def _floats(s):
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s):
    return tuple(int(v) for v in s.replace(",", " ").split())


def _strs(s):
    return tuple(v.strip() for v in s.replace("\n", ",").split(",") if v.strip())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s.strip().lower() in ("", "auto", "none") else int(s)


def _label_map(s):
    out = {}
    for item in _strs(s):
        raw, _, cls = item.partition(":")
        if not _:
            raise ValueError(f"label_map entries look like raw:class, got {item!r}")
        out[float(raw)] = int(cls)
    return out


# section -> key -> parser; every accepted key is listed here
SCHEMA = {
    "model": {"a": float, "b": float, "c": _floats, "K": int, "J": int},
    "fit": {"max_iters": int, "rel_tol": float, "min_iters": int, "seed": int, "threads": int,
            "track_elbo_every": int},
    "data": {"subjects": _strs, "labels": str, "delimiter": str, "feature_count": _opt_int,
             "label_column": str, "label_map": _label_map, "transpose": _bool, "frame_ms": float},
    "layout": {"channels": int, "bins_per_channel": int, "channel_names": _strs},
    "sample": {"L": int, "M": int, "N": _ints, "family": str, "label_pattern": str, "boost": float,
               "individual_scale": float},
    "predict": {"rule": str, "posterior": str, "test": _strs, "test_labels": str},
    "eval": {"predictions": str, "truth": str},
    "learning_curve": {"fractions": _floats, "test_fraction": float},
    "output": {"dir": str},
}
PATH_KEYS = {("data", "subjects"), ("data", "labels"), ("predict", "posterior"), ("predict", "test"),
             ("predict", "test_labels"), ("eval", "predictions"), ("eval", "truth"), ("output", "dir")}


@dataclass
class RunConfig:
    """Fully validated settings for one command."""

    hyper: Hyperparams = field(default_factory=Hyperparams)
    fit: FitOptions = field(default_factory=FitOptions)
    threads: int | None = None
    schema: IngestSchema = field(default_factory=IngestSchema)
    layout: FeatureLayout | None = None
    subjects: tuple = ()
    labels: Path | None = None
    frame_ms: float | None = None
    sample: dict = field(default_factory=dict)
    rule: str = "argmin"
    posterior: Path | None = None
    test: tuple = ()
    test_labels: Path | None = None
    predictions: Path | None = None
    truth: Path | None = None
    fractions: tuple = (0.25, 0.5, 1.0)
    test_fraction: float = 0.3
    out: Path = Path("out")
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """JSON-friendly view used in manifests."""
        return {
            "model": asdict(self.hyper),
            "fit": asdict(self.fit),
            "threads": self.threads,
            "schema": {**asdict(self.schema),
                       "label_map": None if self.schema.label_map is None
                       else {repr(k): v for k, v in self.schema.label_map.items()}},
            "layout": None if self.layout is None else asdict(self.layout),
            "subjects": [str(p) for p in self.subjects],
            "labels": None if self.labels is None else str(self.labels),
            "sample": self.sample,
            "rule": self.rule,
            "fractions": list(self.fractions),
            "test_fraction": self.test_fraction,
            "out": str(self.out),
        }


def read_config_file(path) -> dict:
    """Parse and type-check an INI file into ``{section: {key: value}}``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep K, L, M, N as written
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    out: dict = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]; known: {', '.join(SCHEMA)}")
        out[sec] = {}
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; known: {', '.join(SCHEMA[sec])}")
            try:
                parsed = SCHEMA[sec][key](val)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {val!r}: {exc}") from None
            if (sec, key) in PATH_KEYS:
                parsed = tuple(base / p for p in parsed) if isinstance(parsed, tuple) else base / parsed
            out[sec][key] = parsed
    return out


def build_config(raw: dict, args=None) -> RunConfig:
    """Assemble a :class:`RunConfig`; command-line flags win over the file."""
    sec = {s: dict(raw.get(s, {})) for s in SCHEMA}
    if args is not None:
        if getattr(args, "seed", None) is not None:
            sec["fit"]["seed"] = args.seed
        if getattr(args, "threads", None) is not None:
            sec["fit"]["threads"] = args.threads
        if getattr(args, "rule", None) is not None:
            sec["predict"]["rule"] = args.rule
        if getattr(args, "out", None) is not None:
            sec["output"]["dir"] = Path(args.out)
    try:
        m = sec["model"]
        K = m.get("K", 3)
        c = m.get("c")
        if c is not None and len(c) == 1:
            c = c * K
        hyper = Hyperparams(m.get("a", 0.1), m.get("b", 0.1), c, K, m.get("J", 1))
        f = sec["fit"]
        threads = f.pop("threads", None)
        if threads is not None and threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}")
        fit_opts = FitOptions(**f)
        d = sec["data"]
        schema = IngestSchema(d.get("delimiter", "whitespace"), d.get("feature_count", 96),
                              d.get("label_column", "none"), d.get("label_map"), d.get("transpose", False))
        layout = FeatureLayout(**sec["layout"]) if sec["layout"] else None
        rule = sec["predict"].get("rule", "argmin")
        if rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {rule!r}")
        s = sec["sample"]
        if s.get("family", "prior") not in ("prior", "separated"):
            raise ConfigError(f"sample family must be 'prior' or 'separated', got {s['family']!r}")
        lc = sec["learning_curve"]
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        hyper=hyper, fit=fit_opts, threads=threads, schema=schema, layout=layout,
        subjects=d.get("subjects", ()), labels=d.get("labels"), frame_ms=d.get("frame_ms"),
        sample=s, rule=rule, posterior=sec["predict"].get("posterior"), test=sec["predict"].get("test", ()),
        test_labels=sec["predict"].get("test_labels"), predictions=sec["eval"].get("predictions"),
        truth=sec["eval"].get("truth"), fractions=lc.get("fractions", (0.25, 0.5, 1.0)),
        test_fraction=lc.get("test_fraction", 0.3), out=Path(sec["output"].get("dir", "out")), raw=raw)


# -- helpers -----------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {cfg.out}: {exc.strerror}") from None
    if not os.access(cfg.out, os.W_OK):
        raise DataError(f"output directory {cfg.out} is not writable")
    return cfg.out


def _training_data(cfg: RunConfig):
    if not cfg.subjects:
        raise ConfigError("[data] subjects is required")
    data = load_group(cfg.subjects, cfg.schema, cfg.labels, cfg.frame_ms)
    if not data.labeled:
        raise DataError("training needs labels: set [data] label_column or [data] labels")
    data.check_labels(cfg.hyper.K)
    return data


def _layout_for(cfg: RunConfig, M: int) -> FeatureLayout:
    if cfg.layout is not None:
        return cfg.layout
    default = FeatureLayout()
    return default if default.feature_count == M else FeatureLayout(1, M)


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(cfg: RunConfig, command: str, started: float, **extra) -> dict:
    return {
        "command": command,
        "version": __version__,
        "backend": _backend.current(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.echo(),
        "wall_time_s": round(time.perf_counter() - started, 6),
        **extra,
    }


# -- commands ----------------------------------------------------------------

def cmd_sample(cfg: RunConfig) -> dict:
    s = cfg.sample
    L, M = s.get("L", 3), s.get("M", 24)
    N = s.get("N", (60,))
    N = N[0] if len(N) == 1 else list(N)
    seed = cfg.fit.seed
    try:
        if s.get("family", "prior") == "separated":
            data, latent = sample_separated(L, M, N, cfg.hyper.K, cfg.hyper.J, seed=seed,
                                            boost=s.get("boost", 5.0),
                                            individual_scale=s.get("individual_scale", 0.02),
                                            label_pattern=s.get("label_pattern", "random"))
        else:
            data, latent = sample_dataset(cfg.hyper, L, M, N, seed=seed,
                                          label_pattern=s.get("label_pattern", "random"))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    out = _outdir(cfg)
    plain = IngestSchema(cfg.schema.delimiter, M, "none")
    files = []
    for l in range(data.L):
        p = out / f"subject{l + 1}.txt"
        write_subject(p, data.X[l], schema=plain)
        files.append(p.name)
    names = [f"subject{l + 1}" for l in range(data.L)]
    write_labels(data.Y, out / "labels.csv", names)
    write_latent(latent, out / "latent.csv")
    return {"files": files + ["labels.csv", "latent.csv"], "summary": data.summary(cfg.hyper.K)}


def cmd_fit(cfg: RunConfig) -> dict:
    data = _training_data(cfg)
    out = _outdir(cfg)
    post, trace = fit(data, cfg.hyper, cfg.fit)
    write_posterior(post, out / "posterior.csv")
    write_trace(trace, out / "trace.csv")
    n_rows = export_bases(post, _layout_for(cfg, post.M), out / "bases.csv")
    return {"iterations": trace[-1].iter, "final_elbo": trace[-1].elbo, "summary": data.summary(cfg.hyper.K),
            "subjects": list(data.names), "bases_rows": n_rows}


def _posterior_path(cfg: RunConfig) -> Path:
    return cfg.posterior or cfg.out / "posterior.csv"


def _load_posterior(cfg: RunConfig):
    p = _posterior_path(cfg)
    if not p.exists():
        raise DataError(f"posterior file {p} not found")
    return read_posterior(p)


def cmd_predict(cfg: RunConfig) -> dict:
    post = _load_posterior(cfg)
    paths = cfg.test or cfg.subjects
    if not paths:
        raise ConfigError("[predict] test or [data] subjects is required")
    test = load_group(paths, cfg.schema.with_feature_count(post.M), None, cfg.frame_ms)
    pred = predict(test, post, cfg.rule)
    out = _outdir(cfg)
    write_predictions(pred, out / "predictions.csv", list(test.names))
    return {"n_frames": sum(pred.n_frames), "rule": cfg.rule}


def _truth_for(cfg: RunConfig, names, n_frames):
    if cfg.truth is not None:
        return read_labels(cfg.truth, names)
    if cfg.test_labels is not None:
        return read_labels(cfg.test_labels, names)
    if cfg.test:
        if cfg.schema.labeled:
            return list(load_group(cfg.test, cfg.schema).Y)
        raise ConfigError("eval needs [eval] truth, [predict] test_labels or a label column in the test files")
    if cfg.labels is not None:
        return read_labels(cfg.labels, names)
    if cfg.subjects and cfg.schema.labeled:
        return list(load_group(cfg.subjects, cfg.schema).Y)
    raise ConfigError("eval needs [eval] truth or labeled data")


def cmd_eval(cfg: RunConfig) -> dict:
    pred_path = cfg.predictions or cfg.out / "predictions.csv"
    if not pred_path.exists():
        raise DataError(f"predictions file {pred_path} not found")
    pred, names = read_predictions(pred_path)
    truth = _truth_for(cfg, names, pred.n_frames)
    for name, p, t in zip(names, pred.labels, truth):
        if p.size != t.size:
            raise DataError(f"subject {name!r}: {p.size} predictions but {t.size} truth labels")
    report = evaluate(pred, truth, cfg.hyper.K, names)
    out = _outdir(cfg)
    report.write_json(out / "eval.json")
    chance = chance_baseline(truth, cfg.hyper.K, cfg.fit.seed).pooled
    return {"pooled_accuracy": report.pooled, "chance_accuracy": chance}


def cmd_learning_curve(cfg: RunConfig) -> dict:
    data = _training_data(cfg)
    out = _outdir(cfg)
    rows = learning_curve(data, cfg.hyper, cfg.fit, cfg.fractions, cfg.test_fraction, cfg.rule)
    write_learning_curve(rows, out / "learning_curve.csv")
    return {"rows": len(rows), "pooled": {repr(r.fraction): r.accuracy for r in rows if r.pooled}}


def cmd_export_bases(cfg: RunConfig) -> dict:
    post = _load_posterior(cfg)
    out = _outdir(cfg)
    n = export_bases(post, _layout_for(cfg, post.M), out / "bases.csv")
    return {"rows": n}


COMMANDS = {
    "sample": cmd_sample,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "learning-curve": cmd_learning_curve,
    "export-bases": cmd_export_bases,
}
MANIFEST_NAMES = {"fit": "manifest.json", "sample": "sample_manifest.json",
                  "learning-curve": "learning_curve_manifest.json"}
HELP = {
    "sample": "draw a synthetic dataset and write feature, label and latent files",
    "fit": "fit the model; write posterior, ELBO trace, bases and manifest",
    "predict": "label test frames with a fitted posterior",
    "eval": "score predictions against truth labels",
    "learning-curve": "held-out accuracy versus training fraction",
    "export-bases": "write posterior-mean bases as channel x bin CSV",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groupfact", description="Bayesian group NMF for multi-subject EEG features.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", metavar="PATH", help="INI run configuration")
        sp.add_argument("--seed", type=int, help="random seed (overrides [fit] seed)")
        sp.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
        sp.add_argument("--rule", choices=RULES, help="classification rule (overrides [predict] rule)")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    return p


def _setup_logging() -> None:
    level = os.environ.get("GROUPFACT_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = build_config(read_config_file(args.config), args)
        _backend.set_threads(cfg.threads)
        result = COMMANDS[args.command](cfg)
        if args.command in MANIFEST_NAMES:
            _write_json(cfg.out / MANIFEST_NAMES[args.command], _manifest(cfg, args.command, started, **result))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, DomainError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    log.info("%s finished in %.3f s", args.command, time.perf_counter() - started)
    print(json.dumps({"command": args.command, **{k: v for k, v in result.items() if k != "summary"}},
                     default=str))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
