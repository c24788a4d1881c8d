"""Command-line driver: ingest, inject, sample, train, eval, sweep."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_hash, load_config
from .detector import DynamicGraphAnomalyDetector, evaluate
from .errors import ConfigError, DataError, DygadError, NumericError
from .graph import (DatasetSplit, EdgeStreamSchema, SensorSchema,
                    TemporalGraph, chronological_split, inject_edge_anomalies,
                    load_edge_stream, load_multivariate_series)
from .sampler import sequence_stats
from .synthetic import (community_graph, inject_cross_community,
                        sensor_series, write_sensor_csv)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_dataset(cfg):
    ds = cfg["dataset"]
    kind = ds["kind"]
    comm = None
    if kind == "edge_stream":
        g = load_edge_stream(ds["path"], EdgeStreamSchema(**ds["schema"]))
    elif kind == "multivariate":
        g = load_multivariate_series(ds["path"], SensorSchema(**ds["schema"]),
                                     window=ds["window"], topk=ds["topk"])
    elif kind == "canonical":
        g = TemporalGraph.load(ds["path"])
    elif kind == "synthetic_community":
        g, comm = community_graph(n=ds["n"], m=ds["m"],
                                  communities=ds["communities"],
                                  p_intra=ds["p_intra"], seed=cfg["seed"])
    elif kind == "synthetic_sensors":
        table = sensor_series(n_sensors=ds["n_sensors"], steps=ds["steps"],
                              seed=cfg["seed"])
        tmp = Path(cfg["out_dir"]) / "sensors.csv"
        tmp.parent.mkdir(parents=True, exist_ok=True)
        write_sensor_csv(tmp, table)
        g = load_multivariate_series(tmp, SensorSchema(**ds["schema"]),
                                     window=ds["window"], topk=ds["topk"])
    else:  # pragma: no cover - guarded by validate_config
        raise ConfigError(f"unknown dataset kind {kind!r}")
    return g, comm


def _build_split(cfg, g, comm):
    split = chronological_split(g, cfg["split"]["train_frac"])
    if cfg["task"] == "edge":
        if cfg["inject"]["cross_community"] and comm is not None:
            split = inject_cross_community(split, cfg["inject"]["ratio"],
                                           cfg["inject"]["seed"], comm)
        else:
            split = inject_edge_anomalies(split, cfg["inject"]["ratio"],
                                          cfg["inject"]["seed"])
    return split


def _detector(cfg) -> DynamicGraphAnomalyDetector:
    return DynamicGraphAnomalyDetector(task=cfg["task"], **cfg["model"],
                                       **cfg["train"], seed=cfg["seed"])


class _Artifacts:
    """Write outputs atomically; remove partial files when a command fails."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.pending = []

    def write_text(self, name, text):
        tmp = self.out_dir / (name + ".part")
        tmp.write_text(text)
        self.pending.append((tmp, self.out_dir / name))
        return self.out_dir / name

    def stage(self, name):
        tmp = self.out_dir / (name + ".part")
        self.pending.append((tmp, self.out_dir / name))
        return tmp

    def commit(self):
        for tmp, final in self.pending:
            os.replace(tmp, final)
        self.pending.clear()

    def abort(self):
        for tmp, _ in self.pending:
            tmp.unlink(missing_ok=True)
        self.pending.clear()


def cmd_ingest(cfg, arts, h):
    g, _ = _build_dataset(cfg)
    path = arts.write_text(f"graph-{h}.json", g.to_json())
    arts.commit()
    print(f"wrote {path} (n={g.n}, m={g.m})")


def cmd_inject(cfg, arts, h):
    g, comm = _build_dataset(cfg)
    split = _build_split(cfg, g, comm)
    doc = json.dumps({"train": json.loads(split.train.to_json()),
                      "test": json.loads(split.test.to_json()),
                      "injection_ratio": split.injection_ratio,
                      "seed": split.seed},
                     sort_keys=True, separators=(",", ":"))
    path = arts.write_text(f"split-{h}.json", doc)
    arts.commit()
    n_anom = int(np.sum(split.test.edge_label == 1)) if cfg["task"] == "edge" else 0
    print(f"wrote {path} (train m={split.train.m}, test m={split.test.m}, "
          f"injected={n_anom})")


def cmd_sample(cfg, arts, h, count=3):
    from .graph import combined_stream
    from .model import event_seed
    from .sampler import build_sequence, khop_ego

    g, comm = _build_dataset(cfg)
    split = _build_split(cfg, g, comm)
    context, events = combined_stream(split)
    mdl = cfg["model"]
    dumps = []
    for ev in events[:count]:
        seed = event_seed(cfg["seed"], ev)
        sub = khop_ego(context, ev, mdl["k"], budget=mdl["hop_budget"],
                       seed=seed)
        seq = build_sequence(sub, time_sort=mdl["time_sort"],
                             include_markers=mdl["use_markers"], seed=seed)
        dumps.append({
            "center": {"kind": ev.kind, "ref": ev.ref, "t": ev.t,
                       "label": ev.label},
            "tokens": [{"kind": tok.kind, "gid": tok.gid, "hop": tok.hop,
                        "t": tok.t} for tok in seq.tokens],
            "stats": sequence_stats(seq),
        })
    path = arts.write_text(f"sequences-{h}.json",
                           json.dumps(dumps, indent=2, sort_keys=True))
    arts.commit()
    print(f"wrote {path} ({len(dumps)} sequences)")


def cmd_train(cfg, arts, h):
    g, comm = _build_dataset(cfg)
    split = _build_split(cfg, g, comm)
    det = _detector(cfg)
    log_tmp = arts.stage(f"train-{h}.jsonl")
    det.fit(split.train, log_path=log_tmp)
    ck_path = arts.stage(f"model-{h}.json")
    save_checkpoint(ck_path, det.model_, config_hash=h)
    arts.commit()
    print(f"wrote {arts.out_dir / f'model-{h}.json'} "
          f"(final mean_loss={det.train_log_[-1]['mean_loss']:.6f})")


def cmd_eval(cfg, arts, h):
    ck = arts.out_dir / f"model-{h}.json"
    if not ck.exists():
        raise DataError(f"checkpoint not found: {ck}")
    model, _, _ = load_checkpoint(ck)
    g, comm = _build_dataset(cfg)
    split = _build_split(cfg, g, comm)
    det = _detector(cfg)
    det.model_ = model
    report = evaluate(det, split, config_hash=h)
    rpath = arts.write_text(f"report-{h}.json", report.to_json())
    csv_tmp = arts.stage(f"scores-{h}.csv")
    report.dump_scores_csv(csv_tmp)
    arts.commit()
    print(f"wrote {rpath}")
    print(f"auc={report.auc:.4f} ap={report.ap:.4f} f1={report.f1:.4f} "
          f"threshold={report.threshold:.4f}")


def _sweep_cell(args):
    cfg, out_dir, kk, gd = args
    cell = json.loads(json.dumps(cfg))
    cell["model"]["k"] = kk
    cell["model"]["gnn_depth"] = gd
    cell["out_dir"] = out_dir
    h = config_hash(cell)
    arts = _Artifacts(out_dir)
    g, comm = _build_dataset(cell)
    split = _build_split(cell, g, comm)
    det = _detector(cell)
    det.fit(split.train)
    report = evaluate(det, split, config_hash=h)
    arts.write_text(f"report-k{kk}-K{gd}.json", report.to_json())
    arts.commit()
    return kk, gd, report.auc, report.ap


def cmd_sweep(cfg, arts, h, threads=1):
    grid = [(cfg, str(arts.out_dir / f"sweep-{h}"), kk, gd)
            for kk in cfg["sweep"]["k"] for gd in cfg["sweep"]["gnn_depth"]]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell, grid))
    else:
        results = [_sweep_cell(cell) for cell in grid]
    for kk, gd, auc, ap in results:
        print(f"k={kk} gnn_depth={gd}: auc={auc:.4f} ap={ap:.4f}")
    print(f"wrote {len(results)} reports under {arts.out_dir / f'sweep-{h}'}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dygad",
        description="Anomaly detection on continuous-time dynamic graphs")
    parser.add_argument("command",
                        choices=["ingest", "inject", "sample", "train",
                                 "eval", "sweep"])
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--seed", type=int, default=None, help="override seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel sweep cells (sweep only)")
    parser.add_argument("--count", type=int, default=3,
                        help="sequences to dump (sample only)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg["out_dir"] = args.out
        if args.seed is not None:
            cfg["seed"] = args.seed
            cfg["inject"]["seed"] = args.seed
        h = config_hash(cfg)
        arts = _Artifacts(cfg["out_dir"])
        try:
            if args.command == "ingest":
                cmd_ingest(cfg, arts, h)
            elif args.command == "inject":
                cmd_inject(cfg, arts, h)
            elif args.command == "sample":
                cmd_sample(cfg, arts, h, count=args.count)
            elif args.command == "train":
                cmd_train(cfg, arts, h)
            elif args.command == "eval":
                cmd_eval(cfg, arts, h)
            elif args.command == "sweep":
                cmd_sweep(cfg, arts, h, threads=args.threads)
            arts.commit()
        except BaseException:
            arts.abort()
            raise
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DygadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
