"""Experiment orchestration: data bundles, training, evaluation, sweeps and reports.

All randomness flows from three explicit seeds (data, model, prediction).
Result CSVs contain no timings, so reruns with the same seeds are
byte-identical; wall-clock times live in the run-record JSON only.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import networks
from .bn import BayesianNetwork, from_json, parse_bif, to_json
from .encoding import OneHotLayout, build_layout
from .metrics import MetricsReport, OracleModel, evaluate_predictions, predict_testset
from .models import SYNTH_HIDDEN, ModelConfig, load_model, train
from .sampling import (Dataset, Hyperprior, ObservationPolicy, TestSet, build_test_set,
                       build_training_set, hyperprior_variance_report, load_dataset, load_testset,
                       save_dataset, save_testset, synth_markov_border)

DEFAULT_THRESHOLDS = (0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
TABLE_MODELS = ("rbm", "wgan", "cgan", "vae", "cvae", "ear", "eara")
CSV_HEADER = ("dataset", "model", "seed", "threshold", "n_units", "AD", "KL", "ACC", "dataset_hash")
SYNTH_PREFIX = "synth:"


class HarnessError(RuntimeError):
    pass


def derive_seed(*parts: int) -> int:
    """Independent 63-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass
class ExperimentConfig:
    """``network`` is a bundled name, a ``.bif`` path, or ``synth:A|B|C``."""

    network: str = "asia"
    seed_data: int = 0
    seed_model: int = 0
    seed_predict: int = 0
    models: tuple[str, ...] = ("ear",)
    model_overrides: dict = field(default_factory=dict)
    train_size: int = 10_000
    test_size: int = 1000
    sampler: str = "ancestral"
    val_fraction: float = 0.2
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    out_dir: str = "runs"

    def __post_init__(self):
        self.models = tuple(self.models)
        self.thresholds = tuple(float(t) for t in self.thresholds)
        if self.train_size < 1 or self.test_size < 1:
            raise ValueError("train_size and test_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if any(not 0.0 <= t <= 1.0 for t in self.thresholds):
            raise ValueError("thresholds must lie in [0, 1]")

    @property
    def is_synth(self) -> bool:
        return self.network.startswith(SYNTH_PREFIX)

    @property
    def dataset_name(self) -> str:
        if self.is_synth:
            return "synth_" + self.network[len(SYNTH_PREFIX):]
        return Path(self.network).stem if self.network.endswith(".bif") else self.network

    @property
    def bundle_dir(self) -> Path:
        return Path(self.out_dir) / self.dataset_name / f"data{self.seed_data}"

    def model_config(self, kind: str) -> ModelConfig:
        base = {"kind": kind, "seed": self.seed_model}
        if self.is_synth:
            base["hidden"] = SYNTH_HIDDEN
        # scalar entries apply to every kind; a dict under a kind name applies to that kind only
        base.update({k: v for k, v in self.model_overrides.items() if not isinstance(v, dict)})
        base.update(self.model_overrides.get(kind, {}))
        unknown = set(base) - set(ModelConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown model settings {sorted(unknown)}")
        return ModelConfig.from_dict(base)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["models"], d["thresholds"] = list(self.models), list(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)


# --------------------------------------------------------------------------- #
# Result rows


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    model: str
    seed: int
    threshold: float
    n_units: int
    ad: float | None
    kl: float | None
    acc: float | None
    dataset_hash: str

    @classmethod
    def from_report(cls, dataset: str, model: str, seed: int, report: MetricsReport, dataset_hash: str,
                    threshold: float = 0.0) -> "ResultRow":
        return cls(dataset, model, seed, threshold, report.n_units, report.ad, report.kl, report.acc, dataset_hash)

    def cells(self) -> list[str]:
        num = lambda x: "null" if x is None else repr(float(x))
        return [self.dataset, self.model, str(self.seed), repr(float(self.threshold)), str(self.n_units),
                num(self.ad), num(self.kl), num(self.acc), self.dataset_hash]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_cells(cls, cells: Sequence[str]) -> "ResultRow":
        num = lambda s: None if s == "null" else float(s)
        return cls(cells[0], cells[1], int(cells[2]), float(cells[3]), int(cells[4]),
                   num(cells[5]), num(cells[6]), num(cells[7]), cells[8])


def rows_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_rows(path) -> list[ResultRow]:
    lines = list(csv.reader(Path(path).read_text().splitlines()))
    return [ResultRow.from_cells(c) for c in lines[1:]]


def append_rows(path, rows: Sequence[ResultRow]) -> None:
    path = Path(path)
    existing = read_rows(path) if path.exists() else []
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_csv([*existing, *rows]))


@dataclass
class RunRecord:
    config: dict
    dataset_hashes: dict[str, str] = field(default_factory=dict)
    rows: list[ResultRow] = field(default_factory=list)
    times: dict[str, float] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "dataset_hashes": self.dataset_hashes,
                "rows": [r.to_dict() for r in self.rows], "times": self.times,
                "artifacts": self.artifacts, "extra": self.extra}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["config"], d.get("dataset_hashes", {}), [ResultRow(**r) for r in d.get("rows", [])],
                   d.get("times", {}), d.get("artifacts", []), d.get("extra", {}))

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def file_sha256(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


# --------------------------------------------------------------------------- #
# Data bundles


@dataclass
class Bundle:
    """A network plus its training set and validation / evaluation test sets."""

    name: str
    network: BayesianNetwork
    layout: OneHotLayout
    train: Dataset
    validation: TestSet
    test: TestSet
    train_policy: ObservationPolicy | None
    hash: str
    meta: dict


def resolve_network(cfg: ExperimentConfig) -> tuple[BayesianNetwork, dict]:
    if cfg.is_synth:
        synth = synth_markov_border(cfg.network[len(SYNTH_PREFIX):], derive_seed(cfg.seed_data, 0))
        return synth.network, synth.metadata()
    if cfg.network.endswith(".bif"):
        path = Path(cfg.network)
        return parse_bif(path.read_text(), name=path.stem), {}
    return networks.load(cfg.network), {}


def cmd_gen_data(cfg: ExperimentConfig) -> RunRecord:
    """Write network.json, train.{csv,json}, val.{csv,json}, test.{csv,json} and bundle.json."""
    t0 = time.perf_counter()
    net, synth_meta = resolve_network(cfg)
    out = cfg.bundle_dir
    out.mkdir(parents=True, exist_ok=True)
    train_ds = build_training_set(net, cfg.train_size, cfg.sampler, seed=derive_seed(cfg.seed_data, 1))
    if synth_meta:
        policy = ObservationPolicy.from_dict(synth_meta["policy"])
        full = build_test_set(net, cfg.test_size, seed=derive_seed(cfg.seed_data, 2), policy=policy,
                              targets=(synth_meta["target"],))
        # a handful of distinct evidence sets exist, so nothing is held out for validation
        val, test = full.split(0.0)
    else:
        full = build_test_set(net, cfg.test_size, seed=derive_seed(cfg.seed_data, 2))
        val, test = full.split(cfg.val_fraction)
    paths = [out / "network.json"]
    paths[0].write_text(to_json(net))
    paths += save_dataset(train_ds, net, out / "train")
    paths += save_testset(val, net, out / "val")
    paths += save_testset(test, net, out / "test")
    data_hash = file_sha256(*paths)
    meta = {"name": cfg.dataset_name, "seed_data": cfg.seed_data, "network_hash": net.sha256(),
            "data_hash": data_hash, "synth": synth_meta or None, "n_train": len(train_ds),
            "n_val": len(val), "n_test": len(test)}
    (out / "bundle.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    rec = RunRecord(cfg.to_dict(), {cfg.dataset_name: data_hash},
                    times={"gen_data": time.perf_counter() - t0},
                    artifacts=[str(p) for p in paths] + [str(out / "bundle.json")])
    return rec


def load_bundle(bundle_dir) -> Bundle:
    d = Path(bundle_dir)
    if not (d / "bundle.json").exists():
        raise HarnessError(f"no data bundle at {d}; run gen-data first")
    meta = json.loads((d / "bundle.json").read_text())
    net = from_json((d / "network.json").read_text())
    if net.sha256() != meta["network_hash"]:
        raise HarnessError("network file does not match bundle metadata")
    layout = build_layout(net)
    train_policy = None  # standard random masks over every variable
    return Bundle(meta["name"], net, layout, load_dataset(d / "train"), load_testset(d / "val", net),
                  load_testset(d / "test", net), train_policy, meta["data_hash"], meta)


def checkpoint_path(cfg: ExperimentConfig, kind: str) -> Path:
    return cfg.bundle_dir / "models" / f"{kind}_seed{cfg.seed_model}.json"


def cmd_train(cfg: ExperimentConfig, kind: str) -> tuple[Path, RunRecord]:
    t0 = time.perf_counter()
    b = load_bundle(cfg.bundle_dir)
    mc = cfg.model_config(kind)
    if kind == "nc" and mc.target is None:
        synth = b.meta.get("synth")
        if not synth:
            raise HarnessError("NC needs a target variable (model_overrides.nc.target)")
        mc = mc.replace(target=synth["target"])
    validation = b.validation if len(b.validation) else None
    model = train(b.train, mc, b.layout, policy=b.train_policy, validation=validation)
    path = checkpoint_path(cfg, kind)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save(path)
    rec = RunRecord(cfg.to_dict(), {b.name: b.hash}, times={f"train_{kind}": time.perf_counter() - t0},
                    artifacts=[str(path)])
    return path, rec


def _model_or_oracle(checkpoint, b: Bundle):
    if str(checkpoint) == "oracle":
        return OracleModel(b.network, b.layout), "oracle", 0
    model = load_model(checkpoint)
    if model.network_hash != b.network.sha256():
        raise HarnessError("checkpoint was trained on a different network")
    if tuple(model.layout.cards) != tuple(b.layout.cards):
        raise HarnessError("checkpoint layout does not match the test set")
    return model, model.kind, model.config.seed


def cmd_eval(cfg: ExperimentConfig, checkpoint, csv_path=None, *, thresholds: Sequence[float] = (0.0,),
             testset: str = "test", score_all: bool = False) -> RunRecord:
    """Score a checkpoint (or ``"oracle"``) on the bundle's test split, one row per threshold."""
    t0 = time.perf_counter()
    b = load_bundle(cfg.bundle_dir)
    ts = b.test if testset == "test" else b.validation
    model, kind, seed = _model_or_oracle(checkpoint, b)
    preds = predict_testset(model, ts, b.layout, cfg.seed_predict)
    rows = []
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise HarnessError(f"threshold {t} outside [0, 1]")
        rep = evaluate_predictions(preds, ts, b.layout, threshold=float(t), score_all=score_all)
        rows.append(ResultRow.from_report(b.name, kind, seed, rep, b.hash, float(t)))
    arts = []
    if csv_path is not None:
        append_rows(csv_path, rows)
        arts.append(str(csv_path))
    return RunRecord(cfg.to_dict(), {b.name: b.hash}, rows, {f"eval_{kind}": time.perf_counter() - t0}, arts)


def cmd_sweep_threshold(cfg: ExperimentConfig, checkpoint, csv_path=None,
                        grid: Sequence[float] | None = None, score_all: bool = False) -> RunRecord:
    rec = cmd_eval(cfg, checkpoint, csv_path, thresholds=grid if grid is not None else cfg.thresholds,
                   score_all=score_all)
    rec.extra["sweep"] = True
    return rec


def run_pipeline(cfg: ExperimentConfig, *, sweep: bool = False) -> RunRecord:
    """gen-data, then train and evaluate every configured model kind."""
    rec = cmd_gen_data(cfg)
    run_dir = cfg.bundle_dir
    csv_path = run_dir / ("sweep.csv" if sweep else "results.csv")
    if csv_path.exists():
        csv_path.unlink()
    for kind in cfg.models:
        path, trec = cmd_train(cfg, kind)
        erec = cmd_eval(cfg, path, csv_path, thresholds=cfg.thresholds if sweep else (0.0,))
        rec.rows += erec.rows
        rec.times.update(trec.times)
        rec.times.update(erec.times)
        rec.artifacts += trec.artifacts
    rec.artifacts.append(str(csv_path))
    rec.extra["sweep"] = sweep
    return rec


# --------------------------------------------------------------------------- #
# Markov-border study


def pooled_testset(parts: Sequence[TestSet]) -> TestSet:
    cases = [c for p in parts for c in p.cases]
    return TestSet("pooled", "pooled", cases, 0, parts[0].targets, parts[0].policy)


def markov_border_study(seeds: Sequence[int], models: Sequence[str] = TABLE_MODELS, *,
                        kinds: Sequence[str] = ("A", "B", "C"), replicates: int = 10, train_size: int = 10_000,
                        epochs: int = 30, overrides: dict | None = None) -> list[ResultRow]:
    """Train on ``replicates`` random networks per kind and seed; pool their test cases.

    Each replicate network has only a few distinct evidence sets, so every
    row aggregates the units of all replicates for one (kind, model, seed).
    Training uses fixed ``epochs`` without early stopping since there is no
    room for a validation split.
    """
    rows = []
    for seed in seeds:
        for ki, kind in enumerate(kinds):
            preds: dict[str, list] = {m: [] for m in models}
            tests, hashes = [], []
            for r in range(replicates):
                synth = synth_markov_border(kind, derive_seed(seed, ki, r, 0))
                net = synth.network
                layout = build_layout(net)
                ds = build_training_set(net, train_size, seed=derive_seed(seed, ki, r, 1))
                ts = build_test_set(net, 1000, seed=derive_seed(seed, ki, r, 2), policy=synth.policy,
                                    targets=(synth.target,))
                tests.append(ts)
                hashes.append(net.sha256())
                for m in models:
                    kw = {"kind": m, "hidden": SYNTH_HIDDEN, "epochs": epochs, "seed": derive_seed(seed, ki, r, 3)}
                    kw.update(overrides or {})
                    mc = ModelConfig.from_dict(kw)
                    if m == "nc":
                        mc = mc.replace(target=synth.target)
                    model = train(ds, mc, layout)
                    preds[m].append(predict_testset(model, ts, layout, derive_seed(seed, ki, r, 4)))
            pooled = pooled_testset(tests)
            h = hashlib.sha256("".join(hashes).encode()).hexdigest()
            for m in models:
                rep = evaluate_predictions(np.vstack(preds[m]), pooled, build_layout(net))
                rows.append(ResultRow.from_report(f"synth_{kind}", m, seed, rep, h))
    return rows


def cmd_markov_border(seeds: Sequence[int], out_dir, models: Sequence[str] = TABLE_MODELS, **kw) -> RunRecord:
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = markov_border_study(seeds, models, **kw)
    csv_path = out / "markov_border.csv"
    csv_path.write_text(rows_csv(rows))
    var = hyperprior_variance_report(Hyperprior("uniform", 0.0, 1.0), seed=0).to_dict()
    var_path = out / "variance_report.json"
    var_path.write_text(json.dumps(var, indent=2, sort_keys=True) + "\n")
    cfg = {"command": "markov-border", "seeds": list(seeds), "models": list(models), **kw}
    return RunRecord(cfg, {}, rows, {"markov_border": time.perf_counter() - t0},
                     [str(csv_path), str(var_path)], {"variance_report": var})


def cmd_compare_nc(seeds: Sequence[int], out_dir, **kw) -> RunRecord:
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = markov_border_study(seeds, ("ear", "nc"), **kw)
    csv_path = out / "compare_nc.csv"
    csv_path.write_text(rows_csv(rows))
    cfg = {"command": "compare-nc", "seeds": list(seeds), **kw}
    return RunRecord(cfg, {}, rows, {"compare_nc": time.perf_counter() - t0}, [str(csv_path)])


# --------------------------------------------------------------------------- #
# Reports


def median_rows(rows: Sequence[ResultRow]) -> dict[tuple[str, str, float], dict[str, float | None]]:
    """Per (dataset, model, threshold): median of each metric over seeds."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.dataset, r.model, r.threshold), []).append(r)
    out = {}
    for key, rs in sorted(groups.items()):
        med = {}
        for name in ("ad", "kl", "acc"):
            vals = [getattr(r, name) for r in rs if getattr(r, name) is not None]
            med[name] = float(np.median(vals)) if vals else None
        out[key] = med
    return out


def matrix_csv(rows: Sequence[ResultRow], threshold: float = 0.0) -> str:
    """Model-by-dataset table of seed-median AD, KL and ACC at one threshold."""
    med = median_rows([r for r in rows if r.threshold == threshold])
    datasets = sorted({k[0] for k in med})
    models = sorted({k[1] for k in med})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model"] + [f"{d}_{m}" for d in datasets for m in ("AD", "KL", "ACC")])
    for m in models:
        row = [m]
        for d in datasets:
            v = med.get((d, m, threshold))
            row += ["" if v is None or v[k] is None else f"{v[k]:.4f}" for k in ("ad", "kl", "acc")] \
                if v else ["", "", ""]
        w.writerow(row)
    return buf.getvalue()


def emit_report(records: Sequence[RunRecord], out_dir) -> dict[str, Path]:
    """Consolidated ``report.json``, ``report.csv``, ``matrix.csv`` and per-model threshold series."""
    for rec in records:
        missing = [a for a in rec.artifacts if not Path(a).exists()]
        if missing:
            raise HarnessError(f"run record references missing artifacts: {missing}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for rec in records for r in rec.rows]
    paths = {"json": out / "report.json", "csv": out / "report.csv", "matrix": out / "matrix.csv"}
    paths["json"].write_text(json.dumps({"records": [r.to_dict() for r in records]}, indent=2,
                                        sort_keys=True) + "\n")
    paths["csv"].write_text(rows_csv(rows))
    paths["matrix"].write_text(matrix_csv(rows))
    series: dict[tuple[str, str], list[ResultRow]] = {}
    for r in rows:
        series.setdefault((r.dataset, r.model), []).append(r)
    for (ds, m), rs in sorted(series.items()):
        if len({r.threshold for r in rs}) < 2:
            continue
        med = median_rows(rs)
        units = {}
        for r in rs:
            units.setdefault(r.threshold, []).append(r.n_units)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "AD", "KL", "ACC", "n_units"])
        for (_, _, t), v in sorted(med.items(), key=lambda kv: kv[0][2]):
            w.writerow([repr(t)] + ["null" if v[k] is None else repr(v[k]) for k in ("ad", "kl", "acc")]
                       + [int(np.median(units[t]))])
        p = out / f"series_{ds}_{m}.csv"
        p.write_text(buf.getvalue())
        paths[f"series_{ds}_{m}"] = p
    return paths
