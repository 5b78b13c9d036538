"""Command-line interface wiring the library end to end.

Every command resolves its settings in three layers (built-in defaults, then
the --config key=value file, then explicit flags), validates them against a
strict per-command schema, seeds a single random generator, and writes a
manifest (resolved config, its hash, seed, library versions) next to its
artifacts. Output goes to --out, falling back to $GEDLEARN_OUT, then ./out.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from . import assignment, checkpoint, evalkit, explain as explain_mod, reporting
from .exact import (cost_config, gen_pair_labels, read_labels_csv, write_label_stats,
                    write_labels_csv)
from .graphs import make_graph, parse_graphs, pad_pair, serialize_graphs, synth_random
from .model import ModelParams, forward_learned, init_model_params
from .training import (HeadParams, init_head_params, train_cost_learning,
                       train_supervised_ged, train_unsupervised)

OUT_ENV_VAR = "GEDLEARN_OUT"


class ConfigError(ValueError):
    pass


# dest -> (type, default); None defaults mean "required" or "optional path"
_COMMON = {
    "seed": (int, 0),
    "workers": (int, os.cpu_count() or 1),
    "out": (str, None),
}

_SCHEMAS = {
    "synth": {
        "n": (int, 200), "min_nodes": (int, 3), "max_nodes": (int, 8),
        "labels": (int, 4), "p_min": (float, 0.2), "p_max": (float, 0.6),
        "task": (str, "none"), "task_label": (int, 1),
    },
    "labels": {
        "graphs": (str, None), "cost_conf": (int, 1), "max_nodes": (int, 16),
    },
    "gs-pretrain": {
        "frame_size": (int, 16), "samples": (int, 400), "epochs": (int, 8),
        "noise_scale": (float, 1.0), "heldout": (int, 1000),
    },
    "train-unsup": {
        "graphs": (str, None), "epochs": (int, 25), "batch_size": (int, 16),
        "lr": (float, 0.01), "d": (int, 32), "depth": (int, 3),
        "cost_conf": (int, 1), "frame_size": (int, 16), "gs": (str, ""),
        "labels": (str, ""), "eval_pairs": (int, 300),
        "learn_temperature": (bool, False),
    },
    "train-ged": {
        "graphs": (str, None), "labels": (str, None), "epochs": (int, 10),
        "batch_size": (int, 16), "lr": (float, 0.01), "d": (int, 32),
        "depth": (int, 3), "cost_conf": (int, 1), "frame_size": (int, 16),
        "gs": (str, ""),
    },
    "train-costs": {
        "graphs": (str, None), "task": (str, "regression"), "epochs": (int, 20),
        "batch_size": (int, 16), "lr": (float, 0.01), "d": (int, 32),
        "depth": (int, 3), "cost_conf": (int, 1), "frame_size": (int, 16),
        "gs": (str, ""), "lam": (float, 0.5), "keys": (int, 8),
        "t_c": (float, 1.0), "lam_task": (float, 1.0),
    },
    "eval": {
        "graphs": (str, None), "model": (str, None), "against": (str, None),
    },
    "embed": {
        "graphs": (str, None), "model": (str, None), "prototypes": (int, 16),
    },
    "explain": {
        "graphs": (str, None), "model": (str, None), "query": (str, None),
        "format": (str, "dot"),
    },
}

_REQUIRED = {
    "labels": ["graphs"],
    "train-unsup": ["graphs"],
    "train-ged": ["graphs", "labels"],
    "train-costs": ["graphs"],
    "eval": ["graphs", "model", "against"],
    "embed": ["graphs", "model"],
    "explain": ["graphs", "model", "query"],
}


def _parse_value(raw: str, typ):
    if typ is bool:
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    return typ(raw)


def load_config_file(path: str) -> dict:
    """Flat key = value lines; # starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, raw = line.split("=", 1)
            out[key.strip()] = raw.strip()
    return out


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    schema = dict(_COMMON)
    schema.update(_SCHEMAS[command])
    resolved = {k: default for k, (_t, default) in schema.items()}
    if args.config:
        raw = load_config_file(args.config)
        for key, value in raw.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for command {command!r}")
            resolved[key] = _parse_value(value, schema[key][0])
    for key in schema:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            resolved[key] = flag_val
    for key in _REQUIRED.get(command, []):
        if not resolved.get(key):
            raise ConfigError(f"missing required setting {key!r} for command {command!r}")
    if resolved["out"] is None:
        resolved["out"] = os.environ.get(OUT_ENV_VAR, "out")
    return resolved


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir: str, command: str, cfg: dict, path: str | None = None) -> str:
    import matplotlib
    import scipy

    manifest = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg.get("seed", 0),
        "versions": {
            "gedlearn": __version__,
            "python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }
    target = path or os.path.join(out_dir, "manifest.json")
    reporting.write_json(target, manifest)
    return target


def _alphabet_of(graphs) -> int:
    return max(max(g.node_labels) for g in graphs if g.n > 0)


def _conf_meta(conf) -> dict:
    return {"node_del": conf.node_del, "node_ins": conf.node_ins,
            "edge_del": conf.edge_del, "edge_ins": conf.edge_ins,
            "node_sub": conf.node_sub}


def _load_gs(cfg: dict) -> assignment.GSParams:
    gs = assignment.init_gs_params(frame_size=cfg["frame_size"])
    if cfg.get("gs"):
        arrays, meta = checkpoint.load_arrays(cfg["gs"], expect_kind="gs")
        gs.load_arrays(arrays)
        gs.frame_size = int(meta.get("frame_size", cfg["frame_size"]))
    gs.set_trainable(False)
    return gs


def save_model(path: str, params: ModelParams, gs: assignment.GSParams, cfg: dict,
               head: HeadParams | None = None, extra_meta: dict | None = None) -> None:
    arrays = params.to_arrays()
    arrays.update(gs.to_arrays())
    meta = {
        "alphabet": params.encoder.alphabet,
        "d": params.encoder.width,
        "depth": params.encoder.depth,
        "lam": params.lam,
        "lam_tau": params.lam_tau,
        "costs": _conf_meta(params.costs),
        "gs_frame_size": gs.frame_size,
        "config_hash": config_hash(cfg),
    }
    if head is not None:
        arrays.update(head.to_arrays())
        meta["head_hidden"] = head.w1.shape[1]
        meta["head_keys"] = head.w1.shape[0]
    if extra_meta:
        meta.update(extra_meta)
    checkpoint.save_arrays(path, "model", arrays, meta)


def load_model(path: str):
    from .exact import EditCostConfig

    arrays, meta = checkpoint.load_arrays(path, expect_kind="model")
    costs = EditCostConfig(**meta["costs"])
    params = init_model_params(meta["alphabet"], d=meta["d"], depth=meta["depth"],
                               seed=0, costs=costs, lam=meta["lam"],
                               lam_tau=meta["lam_tau"])
    params.load_arrays(arrays)
    gs = assignment.init_gs_params(frame_size=int(meta["gs_frame_size"]))
    gs.load_arrays(arrays)
    gs.set_trainable(False)
    head = None
    if "head.w1" in arrays:
        head = init_head_params(h=int(meta["head_keys"]), hidden=int(meta["head_hidden"]))
        head.load_arrays(arrays)
    return params, gs, head, meta


def _ensure_out(cfg: dict) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_synth(cfg: dict) -> int:
    out = _ensure_out(cfg)
    rng = np.random.default_rng(cfg["seed"])
    graphs = []
    for i in range(cfg["n"]):
        n = int(rng.integers(cfg["min_nodes"], cfg["max_nodes"] + 1))
        p = float(rng.uniform(cfg["p_min"], cfg["p_max"]))
        g = synth_random(n, p, cfg["labels"], seed=int(rng.integers(2**31)), gid=str(i))
        if cfg["task"] != "none":
            count = sum(1 for lab in g.node_labels if lab == cfg["task_label"])
            target = float(count) if cfg["task"] == "label-count" else int(count > 0)
            g = make_graph(g.id, g.node_labels, g.edges, target=target)
        graphs.append(g)
    serialize_graphs(graphs, os.path.join(out, "graphs.jsonl"))
    write_manifest(out, "synth", cfg)
    print(f"wrote {len(graphs)} graphs to {out}/graphs.jsonl")
    return 0


def cmd_labels(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    rows, stats = gen_pair_labels(graphs, cfg["cost_conf"], max_nodes=cfg["max_nodes"],
                                  workers=cfg["workers"])
    write_labels_csv(rows, os.path.join(out, "labels.csv"))
    write_label_stats(stats, os.path.join(out, "label_stats.json"))
    reporting.save_histogram([r[2] for r in rows], os.path.join(out, "ged_hist.png"))
    write_manifest(out, "labels", cfg)
    print(f"wrote {len(rows)} pair labels to {out}/labels.csv "
          f"(mean {stats['mean']:.3f}, max {stats['max']:.0f})")
    return 0


def cmd_gs_pretrain(cfg: dict) -> int:
    out = _ensure_out(cfg)
    params, history = assignment.pretrain_gs(
        frame_size=cfg["frame_size"], n_samples=cfg["samples"], epochs=cfg["epochs"],
        seed=cfg["seed"], noise_scale=cfg["noise_scale"])
    metrics = assignment.eval_gs(params, cfg["frame_size"], count=cfg["heldout"],
                                 seed=cfg["seed"] + 1)
    checkpoint.save_arrays(os.path.join(out, "gs.json"), "gs", params.to_arrays(),
                           meta={"frame_size": cfg["frame_size"],
                                 "config_hash": config_hash(cfg)})
    reporting.save_history_csv(os.path.join(out, "gs_history.csv"), history)
    reporting.save_curves(history, os.path.join(out, "gs_curve.png"), title="matcher pretraining")
    reporting.write_json(os.path.join(out, "gs_metrics.json"), metrics)
    write_manifest(out, "gs-pretrain", cfg)
    print(f"pretrained matcher: tau={metrics['tau']:.3f} rmse={metrics['rmse']:.3f} "
          f"r2={metrics['r2']:.3f}")
    return 0


def _eval_sample(label_rows, count: int, seed: int):
    rng = np.random.default_rng(seed)
    rows = [r for r in label_rows if r[0] != r[1]]
    if len(rows) <= count:
        return rows
    picked = rng.choice(len(rows), size=count, replace=False)
    return [rows[i] for i in picked]


def cmd_train_unsup(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    conf = cost_config(cfg["cost_conf"])
    params = init_model_params(_alphabet_of(graphs), d=cfg["d"], depth=cfg["depth"],
                               seed=cfg["seed"], costs=conf, lam=1.0)
    gs = _load_gs(cfg)
    eval_pairs = eval_truth = None
    if cfg.get("labels"):
        rows = _eval_sample(read_labels_csv(cfg["labels"]), cfg["eval_pairs"], cfg["seed"])
        eval_pairs = [(graphs[i], graphs[j]) for i, j, _y in rows]
        eval_truth = [y for _i, _j, y in rows]
    history = train_unsupervised(
        graphs, params, gs, epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        lr=cfg["lr"], seed=cfg["seed"], eval_pairs=eval_pairs, eval_truth=eval_truth,
        learn_temperature=cfg["learn_temperature"], edit_labels=_alphabet_of(graphs))
    save_model(os.path.join(out, "model.json"), params, gs, cfg)
    reporting.save_history_csv(os.path.join(out, "history.csv"), history)
    reporting.save_curves(history, os.path.join(out, "curves.png"), title="unsupervised training")
    write_manifest(out, "train-unsup", cfg)
    last = history[-1]
    extra = f" rmse={last['rmse']:.3f} rho={last['rho']:.3f}" if "rmse" in last else ""
    print(f"trained {cfg['epochs']} epochs: loss={last['loss']:.4f}{extra}")
    return 0


def cmd_train_ged(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    rows = read_labels_csv(cfg["labels"])
    conf = cost_config(cfg["cost_conf"])
    params = init_model_params(_alphabet_of(graphs), d=cfg["d"], depth=cfg["depth"],
                               seed=cfg["seed"], costs=conf, lam=0.0)
    gs = _load_gs(cfg)
    history = train_supervised_ged(graphs, rows, params, gs, epochs=cfg["epochs"],
                                   batch_size=cfg["batch_size"], lr=cfg["lr"],
                                   seed=cfg["seed"])
    save_model(os.path.join(out, "model.json"), params, gs, cfg)
    reporting.save_history_csv(os.path.join(out, "history.csv"), history)
    reporting.save_curves(history, os.path.join(out, "curves.png"), title="GED regression")
    write_manifest(out, "train-ged", cfg)
    print(f"trained {cfg['epochs']} epochs: val_rmse={history[-1]['val_rmse']:.3f}")
    return 0


def cmd_train_costs(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    if any(g.target is None for g in graphs):
        raise ConfigError("train-costs needs a target on every graph")
    conf = cost_config(cfg["cost_conf"])
    params = init_model_params(_alphabet_of(graphs), d=cfg["d"], depth=cfg["depth"],
                               seed=cfg["seed"], costs=conf, lam=cfg["lam"])
    gs = _load_gs(cfg)
    head = init_head_params(h=cfg["keys"], seed=cfg["seed"])
    history, best_epoch = train_cost_learning(
        graphs, params, head, gs, epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        lr=cfg["lr"], seed=cfg["seed"], task=cfg["task"], h=cfg["keys"],
        t_c=cfg["t_c"], lam_task=cfg["lam_task"], lam=cfg["lam"])
    save_model(os.path.join(out, "model.json"), params, gs, cfg, head=head,
               extra_meta={"task": cfg["task"], "best_epoch": best_epoch})
    reporting.save_history_csv(os.path.join(out, "history.csv"), history)
    reporting.save_curves(history, os.path.join(out, "curves.png"), title="cost learning")
    write_manifest(out, "train-costs", cfg)
    print(f"trained {cfg['epochs']} epochs, best validation at epoch {best_epoch}")
    return 0


def cmd_eval(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    params, gs, _head, _meta = load_model(cfg["model"])
    rows = read_labels_csv(cfg["against"])
    preds, truth = [], []
    for i, j, y in rows:
        res = forward_learned(pad_pair(graphs[i], graphs[j]), params=params, gs=gs)
        preds.append(res.score.item())
        truth.append(y)
    metrics = evalkit.rank_metrics(preds, truth)
    metrics["n_pairs"] = len(rows)
    reporting.write_json(os.path.join(out, "metrics.json"), metrics)
    reporting.write_csv(os.path.join(out, "predictions.csv"), ["i", "j", "pred", "truth"],
                        [[i, j, format(p, ".12g"), format(y, "g")]
                         for (i, j, y), p in zip(rows, preds)])
    reporting.save_scatter(preds, truth, os.path.join(out, "scatter.png"))
    write_manifest(out, "eval", cfg)
    print(f"rmse={metrics['rmse']:.4f} tau={metrics['tau']:.4f} rho={metrics['rho']:.4f}")
    return 0


def cmd_embed(cfg: dict) -> int:
    out = _ensure_out(cfg)
    graphs = parse_graphs(cfg["graphs"])
    params, gs, _head, _meta = load_model(cfg["model"])
    proto_idx = evalkit.select_prototypes(range(len(graphs)), count=cfg["prototypes"],
                                          seed=cfg["seed"])
    protos = [graphs[i] for i in proto_idx]
    emb = evalkit.embed(graphs, protos, params, gs)
    header = ["id"] + [f"p{k}" for k in range(len(protos))]
    reporting.write_csv(os.path.join(out, "embeddings.csv"), header,
                        [[g.id] + [format(x, ".12g") for x in emb[i]]
                         for i, g in enumerate(graphs)])
    reporting.write_json(os.path.join(out, "prototypes.json"),
                         {"ids": [graphs[i].id for i in proto_idx]})
    write_manifest(out, "embed", cfg)
    print(f"embedded {len(graphs)} graphs against {len(protos)} prototypes")
    return 0


def cmd_explain(cfg: dict) -> int:
    graphs = parse_graphs(cfg["graphs"])
    params, gs, _head, _meta = load_model(cfg["model"])
    by_id = {g.id: g for g in graphs}
    if cfg["query"] not in by_id:
        raise ConfigError(f"query id {cfg['query']!r} not found in {cfg['graphs']}")
    query = by_id[cfg["query"]]
    importance = explain_mod.node_importance(query, graphs, params, gs)
    out_path = cfg["out"]
    if os.path.isdir(out_path) or not os.path.splitext(out_path)[1]:
        os.makedirs(out_path, exist_ok=True)
        out_path = os.path.join(out_path, f"query_{cfg['query']}.{cfg['format']}")
    explain_mod.export_heatmap(query, importance, out_path, fmt=cfg["format"])
    write_manifest(os.path.dirname(out_path) or ".", "explain", cfg,
                   path=out_path + ".manifest.json")
    print(f"wrote {out_path}")
    return 0


_HANDLERS = {
    "synth": cmd_synth,
    "labels": cmd_labels,
    "gs-pretrain": cmd_gs_pretrain,
    "train-unsup": cmd_train_unsup,
    "train-ged": cmd_train_ged,
    "train-costs": cmd_train_costs,
    "eval": cmd_eval,
    "embed": cmd_embed,
    "explain": cmd_explain,
}

_FLAG_ALIASES = {
    "cost_conf": ["--cost-conf", "--conf"],
    "frame_size": ["--frame-size"],
    "lam": ["--lambda"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gedlearn",
        description="Learnable-cost graph edit distance toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _SCHEMAS.items():
        sp = sub.add_parser(command)
        sp.add_argument("--config", default=None, help="flat key = value settings file")
        for key, (typ, _default) in {**_COMMON, **schema}.items():
            flags = _FLAG_ALIASES.get(key, [f"--{key.replace('_', '-')}"])
            if typ is bool:
                sp.add_argument(*flags, dest=key, action="store_true", default=None)
            else:
                sp.add_argument(*flags, dest=key, type=typ, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return _HANDLERS[args.command](cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
