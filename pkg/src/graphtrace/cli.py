"""Command-line front end: ``graphtrace {gen,analyze,spectral,transition,scaling}``.

Settings resolve in three layers: built-in defaults, an optional TOML
config (top-level keys, overridden by a ``[<command>]`` table), then
explicit flags. Each run writes ``config.json`` (the resolved settings)
and ``manifest.json`` (sha256 of every produced file) into its output
directory. Exit codes: 0 success, 2 usage, 3 data or format, 4 numeric.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import plotting
from .dgp import DEFAULT_LABEL_POOL, DGPKind, PromptBatch, assign_labels, attach_labels, dumps_jsonl, loads_jsonl, make_batch
from .errors import DataError, GraphTraceError, NumericError
from .graphs import Graph, build, is_connected
from .metrics import accuracy_curve_from_predictions, load_predictions_jsonl, memorization_curves
from .pipeline import ENERGY_METRICS, log_lengths, oracle_curves, oracle_snapshots, table_energies, trace_oracle
from .representations import ingest_dump, mean_token_reprs, write_dump
from .spectral import (
    DegenerateEmbeddingWarning,
    construct_min_energy_matrix,
    cosine_to_spectral,
    energy_minimizers,
    energy_on_components,
    pca,
    zero_energy_basis,
)
from .transition import REFERENCE_EXPONENTS, coverage_transition, family_graph, fit_breakpoint, scaling_experiment

log = logging.getLogger("graphtrace")

TOPOLOGIES = ("ring", "square_grid", "grid", "hex")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them as strings
        return x if math.isfinite(x) else fmt(x)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Run:
    """Output directory that remembers what it wrote."""

    def __init__(self, out: str | Path):
        self.root = Path(out)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.root / name
        path.write_bytes(data)
        self.files.append(name)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
        return self.write_text(name, buf.getvalue())

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, dumps_json(obj))

    def figure(self, name: str, draw, *args, **kwargs) -> Path:
        path = self.root / name
        draw(*args, path=path, **kwargs)
        self.files.append(name)
        return path

    def finish(self) -> dict:
        entries = []
        for name in sorted(set(self.files)):
            data = (self.root / name).read_bytes()
            entries.append({"path": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        manifest = {"files": entries}
        (self.root / "manifest.json").write_text(dumps_json(manifest), encoding="utf-8")
        return manifest


# ------------------------------------------------------------ value parsing


def parse_int_list(value) -> list[int]:
    """``"0-19"``, ``"3,5,8"``, ``7`` or a list of ints."""
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    if isinstance(value, int):
        return [value]
    out: list[int] = []
    for part in str(value).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(x) for x in part.split("-", 1))
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(p) for p in str(value).split(",") if p.strip()]


def parse_seeds(value) -> list[int]:
    """A bare integer count means seeds ``0..count-1``; otherwise an explicit list."""
    if isinstance(value, int):
        return list(range(value))
    text = str(value)
    if isinstance(value, str) and text.isdigit():
        return list(range(int(text)))
    return parse_int_list(value)


# ---------------------------------------------------------------- settings

DEFAULTS: dict[str, dict[str, Any]] = {
    "gen": {
        "topology": "ring",
        "size": [10],
        "graph": None,
        "kind": "walk",
        "length": 300,
        "seed": 0,
        "labels": True,
        "emit_dump": False,
        "embed_dim": 3,
        "noise": 0.05,
        "out": None,
    },
    "analyze": {
        "topology": "ring",
        "size": [10],
        "graph": None,
        "kind": "walk",
        "lengths": None,
        "length_range": [10, 1000, 15],
        "seeds": "20",
        "source": "oracle",
        "dump": None,
        "contexts": None,
        "predictions": None,
        "layer": 0,
        "window": 200,
        "pc_dims": None,
        "embed_dim": 3,
        "noise": 0.05,
        "jobs": 1,
        "out": None,
    },
    "spectral": {
        "topology": "ring",
        "size": [10],
        "graph": None,
        "k": 3,
        "method": "lapack",
        "epsilons": [4.0, 3.0, 2.0, 1.0],
        "dim": 16,
        "seed": 0,
        "out": None,
    },
    "transition": {
        "family": "ring",
        "sizes": [10],
        "kind": "walk",
        "metric": "accuracy_knot",
        "seeds": "20",
        "threshold": 1.0,
        "criterion": "largest_component",
        "curve": None,
        "curve_metric": "accuracy",
        "predictions": None,
        "graph": None,
        "lengths_per_size": 20,
        "jobs": 1,
        "out": None,
    },
    "scaling": {
        "family": "square_grid",
        "sizes": "3-8",
        "kind": "walk",
        "metric": "accuracy_knot",
        "seeds": "20",
        "threshold": 1.0,
        "lengths_per_size": 20,
        "jobs": 1,
        "out": None,
    },
}

PATH_KEYS = ("graph", "dump", "contexts", "predictions", "curve")


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{path}: invalid TOML: {exc}") from exc


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        raw = load_config(args.config)
        section = raw.get(command, {})
        flat = {k: v for k, v in raw.items() if not isinstance(v, dict)}
        for src in (flat, section):
            for key, value in src.items():
                key = key.replace("-", "_")
                if key not in cfg:
                    raise UsageError(f"unknown config key {key!r} for {command}")
                cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if not cfg.get("out"):
        raise UsageError("an output directory is required (--out or config key 'out')")
    for key in PATH_KEYS:
        if cfg.get(key) and not Path(cfg[key]).exists():
            raise UsageError(f"{key} path does not exist: {cfg[key]}")
    if "topology" in cfg and cfg["topology"] not in TOPOLOGIES:
        raise UsageError(f"unknown topology {cfg['topology']!r}; choose from {', '.join(TOPOLOGIES)}")
    if "family" in cfg and cfg["family"] not in TOPOLOGIES:
        raise UsageError(f"unknown family {cfg['family']!r}; choose from {', '.join(TOPOLOGIES)}")
    if "kind" in cfg and cfg["kind"] not in ("walk", "pairs"):
        raise UsageError(f"unknown dgp kind {cfg['kind']!r}")
    if "seeds" in cfg:
        cfg["seeds"] = parse_seeds(cfg["seeds"])
        if not cfg["seeds"]:
            raise UsageError("seeds must be nonempty")
    for key in ("size", "sizes"):
        if key in cfg:
            cfg[key] = parse_int_list(cfg[key])
    return cfg


def snapshot(cfg: dict) -> dict:
    # the output directory is not part of the experiment
    return {k: v for k, v in sorted(cfg.items()) if k != "out"}


def graph_from(cfg: dict) -> Graph:
    if cfg.get("graph"):
        path = Path(cfg["graph"])
        try:
            return Graph.from_json(path.read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: not a graph file: {exc}") from exc
    return build(cfg["topology"], *cfg["size"])


def node_labels(g: Graph, seed: int = 0) -> list[str]:
    if g.n <= len(DEFAULT_LABEL_POOL):
        return list(assign_labels(g, DEFAULT_LABEL_POOL, seed).labels)
    return [str(v) for v in range(g.n)]


# ----------------------------------------------------------------- commands


def cmd_gen(cfg: dict) -> Run:
    g = graph_from(cfg)
    run = Run(cfg["out"])
    batch = make_batch(g, int(cfg["length"]), cfg["kind"], int(cfg["seed"]))
    vocab = assign_labels(g, DEFAULT_LABEL_POOL, int(cfg["seed"])) if cfg["labels"] else None
    if vocab is not None:
        batch = attach_labels(batch, vocab)
        run.write_json("vocab.json", vocab.to_dict())
    run.write_text("graph.json", g.to_json() + "\n")
    run.write_text("contexts.jsonl", dumps_jsonl(batch))
    if cfg["emit_dump"]:
        trace = trace_oracle(g, batch, (), int(cfg["embed_dim"]), float(cfg["noise"]), seed=int(cfg["seed"]))
        write_dump(run.root / "activations.icrd", trace.dump)
        run.files.append("activations.icrd")
    run.write_json("config.json", snapshot(cfg))
    return run


def _lengths(cfg: dict) -> list[int]:
    if cfg.get("lengths"):
        lengths = sorted(set(parse_int_list(cfg["lengths"])))
    else:
        lo, hi, count = parse_float_list(cfg["length_range"])
        lengths = list(log_lengths(lo, hi, int(count)))
    if not lengths or lengths[0] < 1:
        raise UsageError("context lengths must be positive")
    return lengths


def _pc_dims(cfg: dict) -> list[int] | None:
    if cfg.get("pc_dims") in (None, "", []):
        return None
    return parse_int_list(cfg["pc_dims"])


def _view_rows(g: Graph, run: Run, tag: str, table, labels, pc_dims, length: int, cos_rows, sub_rows):
    """PCA scores, cosine-to-spectral and subspace energies for one table."""
    valid = table.valid_nodes()
    k = min(2, len(valid) - 1, table.d)
    if k < 1:
        return
    res = pca(table, k)
    scores = res.scores if k == 2 else np.column_stack([res.scores, np.zeros(len(valid))])
    run.write_csv(
        f"pca_scores_{tag}_l{length}.csv",
        ["node_index", "label", "x", "y"],
        ([int(v), labels[v], s[0], s[1]] for v, s in zip(valid, scores)),
    )
    sub, _ = g.subgraph(valid)
    if k == 2 and is_connected(sub):
        c1, c2 = cosine_to_spectral(table, g)
        cos_rows.append([tag, length, c1, c2])
    if pc_dims:
        try:
            e = energy_on_components(g, table, pc_dims).value
        except IndexError as exc:
            raise DataError(f"--pc-dims {pc_dims}: {exc}") from exc
        sub_rows.append([tag, length, ",".join(map(str, pc_dims)), e])


def cmd_analyze(cfg: dict) -> Run:
    g = graph_from(cfg)
    lengths = _lengths(cfg)
    labels = node_labels(g)
    pc_dims = _pc_dims(cfg)
    run = Run(cfg["out"])
    curve_rows, cos_rows, sub_rows = [], [], []
    show = lengths[-1]

    if cfg["source"] == "oracle":
        if cfg.get("contexts"):
            batch = loads_jsonl(Path(cfg["contexts"]).read_text(encoding="utf-8"))
            _check_batch(g, batch, lengths[-1])
            seeds = [0]
            runs = [oracle_snapshots(g, batch, lengths, int(cfg["embed_dim"]), float(cfg["noise"]), 0)]
            series = {}
            for name in ENERGY_METRICS:
                series[name] = np.array([[s.energies(g)[name] for s in runs[0]]])
            series["accuracy"] = np.array([[s.accuracy for s in runs[0]]])
            first = runs[0]
        else:
            seeds = cfg["seeds"]
            curves = oracle_curves(
                g, cfg["kind"], lengths, seeds, int(cfg["embed_dim"]), float(cfg["noise"]), int(cfg["jobs"])
            )
            series = curves.series
            batch = make_batch(g, lengths[-1], cfg["kind"], seeds[0])
            first = oracle_snapshots(g, batch, lengths, int(cfg["embed_dim"]), float(cfg["noise"]), seeds[0])
        for name, mat in series.items():
            for i, s in enumerate(seeds):
                curve_rows.extend([name, l, mat[i, j], str(s)] for j, l in enumerate(lengths))
            med = np.median(mat, axis=0)
            curve_rows.extend([name, l, med[j], "median"] for j, l in enumerate(lengths))
        energy = np.median(series["energy_standardized"], axis=0)
        accuracy = np.median(series["accuracy"], axis=0)
        for snap in first:
            _view_rows(g, run, "pooled", snap.pooled(), labels, pc_dims, snap.length, cos_rows, sub_rows)
        view_table = first[-1].pooled()
        source = "oracle"
    else:
        if not cfg.get("dump"):
            raise UsageError("source 'dump' needs --dump PATH")
        dump = ingest_dump(cfg["dump"])
        end = int(dump.position.max()) + 1 if len(dump) else 0
        if lengths[-1] > end:
            raise DataError(f"context length {lengths[-1]} exceeds the dump's {end} positions")
        energy, tables = [], {}
        for l in lengths:
            t = mean_token_reprs(dump, int(cfg["layer"]), l, int(cfg["window"]), n=g.n)
            tables[l] = t
            e = table_energies(g, t)
            curve_rows.extend([name, l, e[name], "dump"] for name in ENERGY_METRICS)
            energy.append(e["energy_standardized"])
            _view_rows(g, run, "dump", t, labels, pc_dims, l, cos_rows, sub_rows)
        accuracy = None
        if cfg.get("predictions"):
            recs = load_predictions_jsonl(Path(cfg["predictions"]).read_text(encoding="utf-8"))
            curve = accuracy_curve_from_predictions(g, recs)
            curve_rows.extend(["accuracy", l, v, "ingested"] for l, v in zip(curve.lengths, curve.values))
            if curve.lengths == tuple(lengths):
                accuracy = np.asarray(curve.values)
        view_table = tables[show]
        source = "dump"

    one, two = memorization_curves(g.n, lengths)
    for c in (one, two):
        curve_rows.extend([c.metric, l, v, "analytic"] for l, v in zip(c.lengths, c.values))

    run.write_csv("curves.csv", ["metric", "context_length", "value", "seed"], curve_rows)
    if cos_rows:
        run.write_csv("cosine_to_spectral.csv", ["view", "context_length", "cos_pc1_z2", "cos_pc2_z3"], cos_rows)
    if sub_rows:
        run.write_csv("subspace_energy.csv", ["view", "context_length", "pc_dims", "energy"], sub_rows)

    title = f"{g.topology} n={g.n}, {source} source"
    if accuracy is not None:
        run.figure("energy_accuracy.svg", plotting.energy_accuracy_figure, lengths, energy, accuracy, title=title)
    else:
        run.figure(
            "energy.svg", plotting.curves_figure, lengths, {"standardized energy": energy}, ylabel="energy", title=title
        )
    valid = view_table.valid_nodes()
    if min(len(valid) - 1, view_table.d) >= 2:
        res = pca(view_table, 2)
        run.figure(
            "pca_embedding.svg",
            plotting.embedding_figure,
            g,
            res.scores,
            nodes=valid,
            labels=[labels[v] for v in valid],
            title=f"PC1/PC2 at context length {show}",
        )
    if g.n >= 3 and is_connected(g):
        z = energy_minimizers(g, 3).vectors[:, 1:3]
        run.figure("spectral_embedding.svg", plotting.embedding_figure, g, z, labels=labels, title="spectral embedding")
    run.write_json("config.json", snapshot(cfg))
    return run


def _check_batch(g: Graph, batch: PromptBatch, length: int):
    for k, seq in enumerate(batch):
        if len(seq) < length:
            raise DataError(f"context {k} has {len(seq)} tokens, fewer than context length {length}")
        if max(seq.tokens) >= g.n:
            raise DataError(f"context {k} references node {max(seq.tokens)} but the graph has {g.n} nodes")


def cmd_spectral(cfg: dict) -> Run:
    g = graph_from(cfg)
    run = Run(cfg["out"])
    labels = node_labels(g, int(cfg["seed"]))
    k = min(int(cfg["k"]), g.n)
    basis = energy_minimizers(g, k, method=cfg["method"])
    run.write_csv("eigenvalues.csv", ["k", "eigenvalue"], ([j + 1, lam] for j, lam in enumerate(basis.eigenvalues)))
    cols = basis.vectors[:, 1:]
    if cols.shape[1]:
        names = ["x", "y", "z"] + [f"c{j}" for j in range(4, cols.shape[1] + 1)]
        run.write_csv(
            "embedding.csv",
            ["node_index", "label", *names[: cols.shape[1]]],
            ([v, labels[v], *cols[v]] for v in range(g.n)),
        )
    if not is_connected(g):
        zb = zero_energy_basis(g)
        run.write_json(
            "zero_energy_basis.json",
            {"alphas": zb.alphas, "paper_alpha": zb.paper_alpha, "gram": zb.gram, "gram_schmidt": zb.gram_schmidt},
        )
    if cols.shape[1] >= 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEmbeddingWarning)
            run.figure("spectral_embedding.svg", plotting.embedding_figure, g, cols[:, :2], labels=labels,
                       title=f"spectral embedding, {g.topology} n={g.n}")
    eps = parse_float_list(cfg["epsilons"])
    if len(eps) - 1 >= 1 and len(eps) <= min(g.n, int(cfg["dim"])) - 1:
        H = construct_min_energy_matrix(g, eps, int(cfg["dim"]), seed=int(cfg["seed"]))
        res = pca(H, len(eps) - 1)
        names = ["x", "y", "z"] + [f"c{j}" for j in range(4, res.k + 1)]
        run.write_csv(
            "pca_scores.csv",
            ["node_index", "label", *names[: res.k]],
            ([v, labels[v], *res.scores[v]] for v in range(g.n)),
        )
    run.write_json("config.json", snapshot(cfg))
    return run


def _read_curve(path, metric: str):
    rows = list(csv.DictReader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or not {"metric", "context_length", "value", "seed"} <= set(rows[0]):
        raise DataError(f"{path}: expected columns metric,context_length,value,seed")
    by_len: dict[int, list[float]] = {}
    median: dict[int, float] = {}
    for r in rows:
        if r["metric"] != metric:
            continue
        l, v = int(r["context_length"]), float(r["value"])
        if r["seed"] == "median":
            median[l] = v
        else:
            by_len.setdefault(l, []).append(v)
    values = median or {l: float(np.median(v)) for l, v in by_len.items()}
    if not values:
        raise DataError(f"{path}: no rows for metric {metric!r}")
    xs = sorted(values)
    return np.array(xs, dtype=np.float64), np.array([values[x] for x in xs])


def _breakpoint_entry(fit, x, y, **extra) -> dict:
    return {
        **extra,
        "tc": fit.knot,
        "slopes": list(fit.slopes),
        "sse_two_piece": fit.sse_two_piece,
        "sse_single_line": fit.sse_single_line,
        "r2": fit.r2,
        "degenerate": fit.degenerate,
        "clipped": fit.clipped,
        "lengths": list(x),
        "accuracy": list(y),
    }


def cmd_transition(cfg: dict) -> Run:
    run = Run(cfg["out"])
    entries, curve_rows = [], []
    if cfg.get("curve") or cfg.get("predictions"):
        if cfg.get("curve"):
            x, y = _read_curve(cfg["curve"], cfg["curve_metric"])
        else:
            if not cfg.get("graph"):
                raise UsageError("--predictions needs --graph to score against")
            g = graph_from(cfg)
            curve = accuracy_curve_from_predictions(
                g, load_predictions_jsonl(Path(cfg["predictions"]).read_text(encoding="utf-8"))
            )
            x, y = curve.x, curve.y
        fit = fit_breakpoint(x, y, clip=True)
        entries.append(_breakpoint_entry(fit, x, y, source="ingested"))
        curve_rows.extend(["accuracy", int(l), v, "ingested"] for l, v in zip(x, y))
        run.figure("breakpoint.svg", plotting.breakpoint_figure, x, y, fit, title="ingested accuracy curve")
    else:
        for size in cfg["sizes"]:
            g = family_graph(cfg["family"], size)
            if cfg["metric"] == "coverage":
                res = coverage_transition(g, cfg["kind"], float(cfg["threshold"]), cfg["seeds"],
                                          criterion=cfg["criterion"])
                entries.append({
                    "size": size, "n": g.n, "source": "coverage-simulation", "tc": res.tc,
                    "tc_per_context": res.tc_per_context, "threshold": res.threshold, "criterion": res.criterion,
                })
                curve_rows.extend(
                    ["coverage_total_tokens", size, t, str(s)] for s, t in zip(cfg["seeds"], res.total_tokens)
                )
            else:
                lengths = log_lengths(max(2, g.n / 2), 50 * g.n, int(cfg["lengths_per_size"]))
                curves = oracle_curves(g, cfg["kind"], lengths, cfg["seeds"], jobs=int(cfg["jobs"]))
                acc = curves.accuracy_curve()
                fit = fit_breakpoint(acc, clip=True)
                entries.append(_breakpoint_entry(fit, acc.lengths, acc.values, size=size, n=g.n, source="oracle"))
                curve_rows.extend([f"accuracy_size{size}", l, v, "median"] for l, v in zip(acc.lengths, acc.values))
                run.figure(f"breakpoint_size{size}.svg", plotting.breakpoint_figure, acc.x, acc.y, fit,
                           title=f"{cfg['family']} size {size}, oracle")
    run.write_csv("curves.csv", ["metric", "context_length", "value", "seed"], curve_rows)
    run.write_json("transition.json", {"metric": cfg["metric"], "per_size": entries})
    run.write_json("config.json", snapshot(cfg))
    return run


def cmd_scaling(cfg: dict) -> Run:
    if len(cfg["sizes"]) < 3:
        raise UsageError(f"scaling needs at least 3 sizes, got {len(cfg['sizes'])}")
    rep = scaling_experiment(
        cfg["family"], cfg["sizes"], cfg["kind"], cfg["metric"], cfg["seeds"], float(cfg["threshold"]),
        int(cfg["lengths_per_size"]), int(cfg["jobs"]),
    )
    run = Run(cfg["out"])
    rows = []
    for entry in rep.per_size:
        if rep.metric == "coverage":
            rows.extend(["coverage_total_tokens", entry["size"], t, str(s)]
                        for s, t in zip(cfg["seeds"], entry["total_tokens"]))
        else:
            rows.extend([f"accuracy_size{entry['size']}", l, v, "median"]
                        for l, v in zip(entry["lengths"], entry["accuracy"]))
    run.write_csv("curves.csv", ["metric", "context_length", "value", "seed"], rows)
    report = rep.to_dict()
    report["reference_exponents"] = {k: v for k, v in REFERENCE_EXPONENTS.items()}
    report["reference_note"] = "reference exponents come from language-model experiments, not this run"
    run.write_json("scaling.json", report)
    run.figure("power_law.svg", plotting.power_law_figure, rep.fit, references=rep.reference,
               title=f"{rep.family}, {rep.metric} ({rep.source})")
    run.write_json("config.json", snapshot(cfg))
    return run


COMMANDS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "spectral": cmd_spectral,
    "transition": cmd_transition,
    "scaling": cmd_scaling,
}


# ------------------------------------------------------------------ parser


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphtrace", description="In-context graph tracing experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        sp.add_argument("--config", help="TOML file with settings (flags override it)")
        sp.add_argument("--out", help="output directory")
        if graph:
            sp.add_argument("--topology", choices=TOPOLOGIES)
            sp.add_argument("--size", type=parse_int_list, help="size parameters, e.g. 10 or 4,6 for hex")
            sp.add_argument("--graph", help="graph JSON file (overrides --topology/--size)")

    g = sub.add_parser("gen", help="generate a graph, labels and a prompt batch")
    common(g)
    g.add_argument("--kind", choices=("walk", "pairs"))
    g.add_argument("--length", type=int, help="tokens per context")
    g.add_argument("--seed", type=int)
    g.add_argument("--labels", type=_bool, help="attach word labels (default true)")
    g.add_argument("--emit-dump", type=_bool, help="also write oracle activations as a binary dump")
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--noise", type=float)

    a = sub.add_parser("analyze", help="energy, accuracy and PCA curves over context length")
    common(a)
    a.add_argument("--kind", choices=("walk", "pairs"))
    a.add_argument("--lengths", help="comma-separated context lengths")
    a.add_argument("--length-range", help="lo,hi,count for log-spaced lengths (default 10,1000,15)")
    a.add_argument("--seeds", help="seed count (e.g. 20) or list/range (e.g. 0-19)")
    a.add_argument("--source", choices=("oracle", "dump"))
    a.add_argument("--dump", help="activation dump file for source=dump")
    a.add_argument("--contexts", help="context JSONL to run the oracle on instead of sampling")
    a.add_argument("--predictions", help="prediction JSONL for an ingested accuracy curve")
    a.add_argument("--layer", type=int)
    a.add_argument("--window", type=int, help="window N_w of preceding tokens")
    a.add_argument("--pc-dims", help="one-based PC indices for subspace energy, e.g. 3,4")
    a.add_argument("--embed-dim", type=int)
    a.add_argument("--noise", type=float)
    a.add_argument("--jobs", type=int)

    s = sub.add_parser("spectral", help="energy minimizers, spectral embedding and PCA of a minimizing matrix")
    common(s)
    s.add_argument("--k", type=int, help="number of minimizers")
    s.add_argument("--method", choices=("lapack", "jacobi"))
    s.add_argument("--epsilons", help="singular values for the minimizing matrix, e.g. 4,3,2,1")
    s.add_argument("--dim", type=int, help="ambient dimension of the minimizing matrix")
    s.add_argument("--seed", type=int)

    for name, helptext in (("transition", "transition point per graph size"),
                           ("scaling", "power law of transition point against graph size")):
        t = sub.add_parser(name, help=helptext)
        common(t, graph=False)
        t.add_argument("--family", choices=TOPOLOGIES)
        t.add_argument("--sizes", help="sizes, e.g. 3-8 or 10,20,40")
        t.add_argument("--kind", choices=("walk", "pairs"))
        t.add_argument("--metric", choices=("accuracy_knot", "coverage"))
        t.add_argument("--seeds", help="seed count or list/range")
        t.add_argument("--threshold", type=float, help="largest-component fraction for coverage")
        t.add_argument("--lengths-per-size", type=int)
        t.add_argument("--jobs", type=int)
        if name == "transition":
            t.add_argument("--criterion", choices=("largest_component", "all_edges"))
            t.add_argument("--curve", help="curve CSV to fit instead of running the oracle")
            t.add_argument("--curve-metric", help="metric column to fit from --curve (default accuracy)")
            t.add_argument("--predictions", help="prediction JSONL to build and fit an accuracy curve")
            t.add_argument("--graph", help="graph JSON used with --predictions")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve(args.command, args)
        run = COMMANDS[args.command](cfg)
        manifest = run.finish()
        log.info("wrote %d files to %s", len(manifest["files"]), run.root)
        return 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"graphtrace: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"graphtrace: numeric error: {exc}", file=sys.stderr)
        return 4
    except (DataError, GraphTraceError) as exc:
        print(f"graphtrace: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"graphtrace: I/O error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError) as exc:
        # malformed values that slipped past the parser, e.g. from a config file
        print(f"graphtrace: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
