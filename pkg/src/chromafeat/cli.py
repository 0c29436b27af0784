"""Command-line pipeline: ingest -> graph -> color -> fidelity -> encode -> train -> report.

Each command validates its inputs, derives a content digest from the relevant
config slice plus its input artifacts' digests, and skips work whose artifact
already exists, so commands are restartable and idempotent.  The resolved
config is embedded in every artifact manifest entry.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import coloring as coloring_mod
from . import dataset as dataset_mod
from . import encoders as encoders_mod
from . import fidelity as fidelity_mod
from . import graph as graph_mod
from . import linear as linear_mod
from . import synthetic as synthetic_mod
from .hashing import derive_seed

ENCODER_CHOICES = ("clsm", "clte", "clft", "ft", "ht")
COLORING_CHOICES = ("greedy", "uniform")
ORDER_CHOICES = ("data", "id", "degree")


class PipelineError(RuntimeError):
    pass


class MissingArtifactError(PipelineError):
    def __init__(self, name: str, producer: str):
        super().__init__(f"artifact {name!r} not found: run `chromafeat {producer}` first")


@dataclass
class PipelineConfig:
    out_dir: str = "artifacts"
    input: str | None = None
    string_features: bool = False
    synthetic: bool = False
    synth_groups: int = 64
    synth_features_per_group: int = 1563
    synth_n: int = 200_000
    synth_nnz: int = 10
    synth_zipf: float = 1.3
    synth_group_scale: float = 1.2
    synth_value_scale: float = 0.6
    synth_intercept: float = -0.3
    synth_flip_prob: float = 0.0
    train_fraction: float = 0.8
    train_count: int | None = None
    dense_threshold: float = 0.1
    k: int = 1
    graph_mode: str = "exact"
    bloom_fp_rate: float = 0.01
    workers: int = 1
    shard_factor: int = 1
    coloring: str = "greedy"
    order: str = "data"
    m: int | None = None
    steps: int | None = None
    encoder: str = "clsm"
    budget: int = 256
    policy: str = "popular"
    smoothing: float = 20.0
    double_dip: bool = False
    lr: float = 0.5
    epochs: int = 1
    l2: float = 0.0
    seed: int = 0
    k_list: tuple[int, ...] = (1, 2, 3)
    budgets: tuple[int, ...] = (64, 256)
    encoders: tuple[str, ...] = ("clsm", "ft", "ht")
    cc_colors: tuple[int, ...] = ()
    delta: float = 0.01

    def validate(self) -> None:
        if self.train_count is None and not (0.0 < self.train_fraction < 1.0):
            raise PipelineError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        if self.k < 1:
            raise PipelineError(f"k must be >= 1, got {self.k}")
        if self.graph_mode not in ("exact", "bloom"):
            raise PipelineError(f"graph_mode must be exact or bloom, got {self.graph_mode!r}")
        if self.workers < 1 or self.shard_factor < 1:
            raise PipelineError("workers and shard_factor must be >= 1")
        if self.coloring not in COLORING_CHOICES:
            raise PipelineError(f"coloring must be one of {COLORING_CHOICES}")
        if self.order not in ORDER_CHOICES:
            raise PipelineError(f"order must be one of {ORDER_CHOICES}")
        if self.encoder not in ENCODER_CHOICES:
            raise PipelineError(f"encoder must be one of {ENCODER_CHOICES}")
        if self.policy not in encoders_mod.POLICIES:
            raise PipelineError(f"policy must be one of {encoders_mod.POLICIES}")
        if self.budget < 1:
            raise PipelineError(f"budget must be >= 1, got {self.budget}")
        if self.epochs < 1:
            raise PipelineError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 < self.delta < 1.0):
            raise PipelineError(f"delta must be in (0,1), got {self.delta}")
        for enc in self.encoders:
            if enc not in ENCODER_CHOICES:
                raise PipelineError(f"unknown encoder {enc!r} in --encoders")


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:12]


class Workspace:
    """Artifact store: manifest.json maps logical names to digest-named files."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.dir / "manifest.json"
        self.manifest = {}
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text())

    def path_for(self, name: str, digest: str, ext: str) -> Path:
        return self.dir / f"{name}.{digest}.{ext}"

    def record(self, name: str, digest: str, files: dict, config_slice: dict) -> None:
        self.manifest[name] = {
            "digest": digest,
            "files": {k: str(v) for k, v in files.items()},
            "config": config_slice,
        }
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True))

    def lookup(self, name: str, producer: str) -> dict:
        entry = self.manifest.get(name)
        if entry is None:
            raise MissingArtifactError(name, producer)
        for p in entry["files"].values():
            if not Path(p).exists():
                raise MissingArtifactError(name, producer)
        return entry


# ---------------------------------------------------------------------------
# commands

def _ingest_slice(cfg: PipelineConfig) -> dict:
    s = {
        "train_fraction": cfg.train_fraction,
        "train_count": cfg.train_count,
        "dense_threshold": cfg.dense_threshold,
        "string_features": cfg.string_features,
        "seed": cfg.seed,
    }
    if cfg.synthetic:
        s["synthetic"] = {
            "groups": cfg.synth_groups,
            "features_per_group": cfg.synth_features_per_group,
            "n": cfg.synth_n,
            "nnz_max": cfg.synth_nnz,
            "zipf_exponent": cfg.synth_zipf,
            "group_effect_scale": cfg.synth_group_scale,
            "value_effect_scale": cfg.synth_value_scale,
            "intercept": cfg.synth_intercept,
            "flip_prob": cfg.synth_flip_prob,
        }
    else:
        s["input"] = _file_digest(Path(cfg.input))
    return s


def cmd_ingest(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    if not cfg.synthetic and not cfg.input:
        raise PipelineError("either --input or --synthetic is required")
    sl = _ingest_slice(cfg)
    digest = _digest(sl)
    train_path = ws.path_for("train", digest, "cache")
    test_path = ws.path_for("test", digest, "cache")
    summary_path = ws.path_for("dataset", digest, "json")
    if not (train_path.exists() and test_path.exists() and summary_path.exists()):
        if cfg.synthetic:
            ds = synthetic_mod.generate(
                synthetic_mod.SyntheticConfig(
                    groups=cfg.synth_groups,
                    features_per_group=cfg.synth_features_per_group,
                    n=cfg.synth_n,
                    nnz_max=cfg.synth_nnz,
                    zipf_exponent=cfg.synth_zipf,
                    group_effect_scale=cfg.synth_group_scale,
                    value_effect_scale=cfg.synth_value_scale,
                    intercept=cfg.synth_intercept,
                    flip_prob=cfg.synth_flip_prob,
                    seed=derive_seed(cfg.seed, 101),
                )
            )
        else:
            ds = dataset_mod.parse_libsvm(cfg.input, string_features=cfg.string_features)
            dense_ids, _ = dataset_mod.detect_dense(ds, cfg.dense_threshold)
            if dense_ids:
                # second pass routes dense values to the side vector
                ds = dataset_mod.parse_libsvm(
                    cfg.input, dense_ids=sorted(dense_ids), string_features=cfg.string_features
                )
        if cfg.train_count is not None:
            train, test = dataset_mod.split_at(ds, cfg.train_count)
        else:
            train, test = dataset_mod.chronological_split(ds, cfg.train_fraction)
        dataset_mod.save_cache(train, train_path)
        dataset_mod.save_cache(test, test_path)
        info = dataset_mod.summary(ds)
        info["train_n"] = train.n
        info["test_n"] = test.n
        summary_path.write_text(json.dumps(info, indent=2, sort_keys=True))
    ws.record("dataset", digest, {"train": train_path, "test": test_path, "summary": summary_path}, sl)
    return {"digest": digest, "train": train_path, "test": test_path}


def _load_split(ws: Workspace):
    entry = ws.lookup("dataset", "ingest")
    train = dataset_mod.load_cache(entry["files"]["train"])
    test = dataset_mod.load_cache(entry["files"]["test"])
    return entry, train, test


def cmd_graph(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    entry, train, _ = _load_split(ws)
    sl = {"dataset": entry["digest"], "k": cfg.k, "mode": cfg.graph_mode, "fp_rate": cfg.bloom_fp_rate}
    digest = _digest(sl)
    gpath = ws.path_for("graph", digest, "bin")
    spath = ws.path_for("graph", digest, "json")
    if not (gpath.exists() and spath.exists()):
        if cfg.k == 1:
            g, hist = graph_mod.build_cooccurrence(train, cfg.workers, cfg.shard_factor)
            hist_counts = {str(j): c for j, c in sorted(hist.counts.items())}
        else:
            g = graph_mod.build_thresholded(
                train, cfg.k, cfg.graph_mode, cfg.bloom_fp_rate,
                workers=cfg.workers, shard_factor=cfg.shard_factor,
            )
            hist_counts = None
        graph_mod.save_graph(g, gpath)
        extra = {"histogram": hist_counts} if hist_counts is not None else {}
        graph_mod.save_graph_stats(g, spath, **extra)
    ws.record("graph", digest, {"bin": gpath, "stats": spath}, sl)
    return {"digest": digest, "bin": gpath}


def cmd_color(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    gentry = ws.lookup("graph", "graph")
    dentry, train, _ = _load_split(ws)
    sl = {
        "graph": gentry["digest"],
        "mode": cfg.coloring,
        "order": cfg.order,
        "m": cfg.m,
        "steps": cfg.steps,
        "seed": cfg.seed,
    }
    digest = _digest(sl)
    cpath = ws.path_for("coloring", digest, "bin")
    jpath = ws.path_for("coloring", digest, "json")
    if not (cpath.exists() and jpath.exists()):
        g = graph_mod.load_graph(gentry["files"]["bin"])
        order = list(train.feature_freq.keys()) if cfg.order == "data" else cfg.order
        if cfg.coloring == "greedy":
            col = coloring_mod.greedy_color(g, order=order, popularity=train.feature_freq)
            meta = {"mode": "greedy", "order": cfg.order, "seed": cfg.seed, "steps": 0}
        else:
            fr = coloring_mod.filter_high_degree(g)
            sub = fr.filtered_graph
            m = cfg.m if cfg.m is not None else max(2 * fr.delta_f + 1, sub.max_degree + 2, 1)
            v = max(sub.vertex_count, 1)
            steps = cfg.steps if cfg.steps is not None else int(np.ceil(m * v * max(np.log(v), 1.0)))
            inner = coloring_mod.glauber_sample(sub, m, steps, derive_seed(cfg.seed, 202))
            col = coloring_mod.combine_filtered_coloring(fr, inner)
            col.popularity.update(train.feature_freq)
            meta = {"mode": "uniform", "order": cfg.order, "m_palette": m, "steps": steps,
                    "held_out": len(fr.held_out), "delta_f": fr.delta_f, "seed": cfg.seed}
        coloring_mod.save_coloring(col, cpath)
        coloring_mod.save_coloring_summary(col, jpath, **meta)
    ws.record("coloring", digest, {"bin": cpath, "summary": jpath}, sl)
    return {"digest": digest, "bin": cpath}


def cmd_fidelity(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    dentry, train, test = _load_split(ws)
    order = list(train.feature_freq.keys()) if cfg.order == "data" else cfg.order
    sl = {"dataset": dentry["digest"], "k_list": list(cfg.k_list), "delta": cfg.delta, "order": cfg.order}
    digest = _digest(sl)
    fpath = ws.path_for("fidelity", digest, "json")
    if not fpath.exists():
        report = fidelity_mod.build_fidelity_report(
            train, test, ks=cfg.k_list, delta=cfg.delta, coloring_order=order, workers=cfg.workers
        )
        report.save(fpath)
    ws.record("fidelity", digest, {"report": fpath}, sl)
    return {"digest": digest, "report": fpath}


def _build_encoder(cfg: PipelineConfig, train, coloring):
    """Construct the configured encoder plus the rows the model should fit on."""
    if cfg.encoder in ("clsm", "clte"):
        est, fit = dataset_mod.hash_split(train)
        if cfg.double_dip:
            est = fit
        stats = encoders_mod.collect_color_stats(coloring, est, cfg.policy)
        if cfg.encoder == "clsm":
            sol = encoders_mod.submodular_compress(stats, cfg.budget)
            return encoders_mod.encoder_from_solution(stats, sol), fit
        return encoders_mod.target_encode(stats, cfg.smoothing), fit
    if cfg.encoder == "clft":
        return encoders_mod.cl_frequency_truncate(coloring, train, cfg.budget, cfg.policy), train
    if cfg.encoder == "ft":
        return encoders_mod.frequency_truncate(train, cfg.budget), train
    if cfg.encoder == "ht":
        return encoders_mod.hashing_trick(cfg.budget, derive_seed(cfg.seed, 303)), train
    raise PipelineError(f"unknown encoder {cfg.encoder!r}")


def cmd_encode(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    dentry, train, test = _load_split(ws)
    needs_coloring = cfg.encoder in ("clsm", "clte", "clft")
    sl = {
        "dataset": dentry["digest"],
        "encoder": cfg.encoder,
        "budget": cfg.budget,
        "policy": cfg.policy,
        "smoothing": cfg.smoothing,
        "double_dip": cfg.double_dip,
        "seed": cfg.seed,
    }
    coloring = None
    if needs_coloring:
        centry = ws.lookup("coloring", "color")
        sl["coloring"] = centry["digest"]
        coloring = coloring_mod.load_coloring(centry["files"]["bin"], popularity=train.feature_freq)
    digest = _digest(sl)
    epath = ws.path_for("encoder", digest, "json")
    tr_path = ws.path_for("encoded_train", digest, "svm")
    te_path = ws.path_for("encoded_test", digest, "svm")
    if not (epath.exists() and tr_path.exists() and te_path.exists()):
        enc, fit_rows = _build_encoder(cfg, train, coloring)
        encoders_mod.save_encoder(enc, epath)
        encoders_mod.encode_dataset(enc, fit_rows).save_libsvm(tr_path)
        encoders_mod.encode_dataset(enc, test).save_libsvm(te_path)
    ws.record("encoder", digest, {"encoder": epath, "train": tr_path, "test": te_path}, sl)
    return {"digest": digest, "encoder": epath}


def cmd_train(cfg: PipelineConfig, ws: Workspace) -> dict:
    cfg.validate()
    eentry = ws.lookup("encoder", "encode")
    enc_info = json.loads(Path(eentry["files"]["encoder"]).read_text())
    dim = enc_info["output_dim"]
    sl = {"encoder": eentry["digest"], "lr": cfg.lr, "epochs": cfg.epochs, "l2": cfg.l2}
    digest = _digest(sl)
    mpath = ws.path_for("model", digest, "json")
    metrics_path = ws.dir / "metrics.jsonl"
    train_data = encoders_mod.EncodedDataset.load_libsvm(eentry["files"]["train"], dim)
    test_data = encoders_mod.EncodedDataset.load_libsvm(eentry["files"]["test"], dim)
    max_dim = max(
        (int(idx.max()) + 1 for idx, _ in train_data.rows + test_data.rows if idx.size),
        default=dim,
    )
    train_data.dim = test_data.dim = max(dim, max_dim)
    if not mpath.exists():
        model = linear_mod.train_logistic(train_data, cfg.epochs, cfg.lr, cfg.l2, cfg.seed)
        linear_mod.save_model(model, mpath)
    model = linear_mod.load_model(mpath)
    record = {
        "dataset": ws.lookup("dataset", "ingest")["digest"],
        "encoder": enc_info["variant"],
        "budget": enc_info["output_dim"],
        "seed": cfg.seed,
        "train_logloss": linear_mod.log_loss(model, train_data),
        "test_logloss": linear_mod.log_loss(model, test_data),
        "test_accuracy": linear_mod.accuracy(model, test_data),
    }
    linear_mod.append_metrics(metrics_path, record)
    ws.record("model", digest, {"model": mpath}, sl)
    return {"digest": digest, "model": mpath, "metrics": record}


def cmd_report(cfg: PipelineConfig, ws: Workspace) -> dict:
    """Loss-vs-budget sweeps, greedy-vs-sorting objectives, per-k fidelity,
    and optional uniform-coloring collision curves."""
    cfg.validate()
    dentry, train, test = _load_split(ws)
    order = list(train.feature_freq.keys()) if cfg.order == "data" else cfg.order
    g, hist = graph_mod.build_cooccurrence(train, cfg.workers, cfg.shard_factor)
    coloring = coloring_mod.greedy_color(g, order=order, popularity=train.feature_freq)
    est, fit = dataset_mod.hash_split(train)
    stats = encoders_mod.collect_color_stats(coloring, est, cfg.policy)

    loss_rows = []
    objective_rows = []
    for budget in cfg.budgets:
        for name in cfg.encoders:
            sub = PipelineConfig(**{**asdict(cfg), "encoder": name, "budget": budget})
            try:
                enc, fit_rows = _build_encoder(sub, train, coloring)
            except encoders_mod.BudgetError as exc:
                loss_rows.append({"encoder": name, "budget": budget, "error": str(exc)})
                continue
            tr = encoders_mod.encode_dataset(enc, fit_rows)
            te = encoders_mod.encode_dataset(enc, test)
            model = linear_mod.train_logistic(tr, cfg.epochs, cfg.lr, cfg.l2, cfg.seed)
            loss_rows.append(
                {
                    "encoder": name,
                    "budget": budget,
                    "output_dim": enc.output_dim,
                    "train_logloss": linear_mod.log_loss(model, tr),
                    "test_logloss": linear_mod.log_loss(model, te),
                    "test_accuracy": linear_mod.accuracy(model, te),
                }
            )
        if coloring.m <= budget:
            greedy_obj = encoders_mod.submodular_compress(stats, budget).objective
            sorting_obj = encoders_mod.sorting_heuristic_compress(stats, budget).objective
            objective_rows.append(
                {"budget": budget, "greedy_objective": greedy_obj, "sorting_objective": sorting_obj}
            )

    fid = fidelity_mod.build_fidelity_report(
        train, test, ks=cfg.k_list, delta=cfg.delta, coloring_order=order, workers=cfg.workers
    )

    cc_rows = []
    for m in cfg.cc_colors:
        fr = coloring_mod.filter_high_degree(g)
        if m < fr.filtered_graph.max_degree + 2:
            continue
        v = max(fr.filtered_graph.vertex_count, 1)
        steps = int(np.ceil(m * v * max(np.log(v), 1.0)))
        inner = coloring_mod.glauber_sample(fr.filtered_graph, m, steps, derive_seed(cfg.seed, 404))
        col = coloring_mod.combine_filtered_coloring(fr, inner)
        cc = sum(fidelity_mod.collision_count(col, ex) for ex in test.examples) / max(test.n, 1)
        cc_rows.append({"m": m, "total_colors": col.m, "avg_collisions": cc})

    sl = {
        "dataset": dentry["digest"],
        "budgets": list(cfg.budgets),
        "encoders": list(cfg.encoders),
        "k_list": list(cfg.k_list),
        "cc_colors": list(cfg.cc_colors),
        "seed": cfg.seed,
    }
    digest = _digest(sl)
    jpath = ws.path_for("report", digest, "json")
    payload = {
        "config": sl,
        "colors_used": coloring.m,
        "loss_vs_budget": loss_rows,
        "objective_comparison": objective_rows,
        "fidelity": json.loads(fid.to_json()),
        "uniform_cc": cc_rows,
    }
    jpath.write_text(json.dumps(payload, indent=2, sort_keys=True))

    cpath = ws.path_for("report", digest, "csv")
    with open(cpath, "wt", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(
            f, fieldnames=["encoder", "budget", "output_dim", "train_logloss", "test_logloss",
                           "test_accuracy", "error"]
        )
        writer.writeheader()
        for row in loss_rows:
            writer.writerow(row)
    ws.record("report", digest, {"json": jpath, "csv": cpath}, sl)
    return {"digest": digest, "json": jpath, "csv": cpath}


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON config file; flags override it")
    p.add_argument("--out-dir", type=str, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chromafeat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="parse or generate a dataset and split it")
    _add_common(sp)
    sp.add_argument("--input", type=str, default=None, help="libsvm text, optionally .gz")
    sp.add_argument("--string-features", action="store_true", default=None)
    sp.add_argument("--synthetic", action="store_true", default=None,
                    help="generate planted-structure data instead of reading --input")
    sp.add_argument("--synth-groups", type=int, default=None)
    sp.add_argument("--synth-features-per-group", type=int, default=None)
    sp.add_argument("--synth-n", type=int, default=None)
    sp.add_argument("--synth-nnz", type=int, default=None)
    sp.add_argument("--synth-zipf", type=float, default=None)
    sp.add_argument("--synth-flip-prob", type=float, default=None)
    sp.add_argument("--train-fraction", type=float, default=None)
    sp.add_argument("--train-count", type=int, default=None)
    sp.add_argument("--dense-threshold", type=float, default=None)

    sp = sub.add_parser("graph", help="build the co-occurrence graph")
    _add_common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--graph-mode", choices=("exact", "bloom"), default=None)
    sp.add_argument("--bloom-fp-rate", type=float, default=None)
    sp.add_argument("--shard-factor", type=int, default=None)

    sp = sub.add_parser("color", help="color the graph")
    _add_common(sp)
    sp.add_argument("--coloring", choices=COLORING_CHOICES, default=None)
    sp.add_argument("--order", choices=ORDER_CHOICES, default=None)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--steps", type=int, default=None)

    sp = sub.add_parser("fidelity", help="per-threshold fidelity report")
    _add_common(sp)
    sp.add_argument("--k-list", type=str, default=None, help="comma-separated thresholds")
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--order", choices=ORDER_CHOICES, default=None)

    sp = sub.add_parser("encode", help="fit an encoder and emit encoded splits")
    _add_common(sp)
    sp.add_argument("--encoder", choices=ENCODER_CHOICES, default=None)
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--policy", choices=encoders_mod.POLICIES, default=None)
    sp.add_argument("--smoothing", type=float, default=None)
    sp.add_argument("--double-dip", action="store_true", default=None,
                    help="estimate label statistics on the fitting half (leaky; for experiments)")

    sp = sub.add_parser("train", help="train the linear model on the encoded split")
    _add_common(sp)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--l2", type=float, default=None)

    sp = sub.add_parser("report", help="budget sweeps and figure-ready series")
    _add_common(sp)
    sp.add_argument("--budgets", type=str, default=None, help="comma-separated budgets")
    sp.add_argument("--encoders", type=str, default=None, help="comma-separated encoder names")
    sp.add_argument("--k-list", type=str, default=None)
    sp.add_argument("--cc-colors", type=str, default=None,
                    help="comma-separated color counts for uniform-coloring CC curves")
    sp.add_argument("--order", choices=ORDER_CHOICES, default=None)
    sp.add_argument("--policy", choices=encoders_mod.POLICIES, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--l2", type=float, default=None)
    sp.add_argument("--delta", type=float, default=None)
    return p


def _merge_config(args: argparse.Namespace) -> PipelineConfig:
    base: dict = {}
    if getattr(args, "config", None):
        base.update(json.loads(Path(args.config).read_text()))
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        base[key] = val
    for key in ("k_list", "budgets", "encoders", "cc_colors"):
        if key in base and isinstance(base[key], str):
            base[key] = tuple(int(x) if key != "encoders" else x for x in base[key].split(",") if x)
        elif key in base:
            base[key] = tuple(base[key])
    known = {f for f in PipelineConfig.__dataclass_fields__}
    unknown = set(base) - known
    if unknown:
        raise PipelineError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**base)


COMMANDS = {
    "ingest": cmd_ingest,
    "graph": cmd_graph,
    "color": cmd_color,
    "fidelity": cmd_fidelity,
    "encode": cmd_encode,
    "train": cmd_train,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        cfg.validate()
        ws = Workspace(cfg.out_dir)
        result = COMMANDS[args.command](cfg, ws)
    except (PipelineError, dataset_mod.DatasetError, graph_mod.GraphError,
            coloring_mod.ColoringError, encoders_mod.EncoderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    printable = {k: str(v) for k, v in result.items() if k != "metrics"}
    if "metrics" in result:
        printable["metrics"] = result["metrics"]
    print(json.dumps(printable, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
