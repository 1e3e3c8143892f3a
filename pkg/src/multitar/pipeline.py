"""End-to-end orchestration: configuration, staged runs, and exports.

A run goes log-transform -> fractional differencing -> lagged pairs ->
ridge selection -> ALS fit -> network blocks -> per-block filtering ->
layer measures, and writes a manifest recording every resolved parameter so
the run can be reproduced from the manifest alone.  Identical config, panel
and seed produce byte-identical manifests and export files.
"""

from __future__ import annotations

import json
import math
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields

import numpy as np

from . import multinet
from .fracdiff import FracDiffSpec, default_adf_lags, find_min_alpha, fracdiff_apply
from .multinet import MultilayerNetwork
from .panel import PanelSeries, export_panel
from .regression import FitConfig, als_fit, build_lagged_pairs, predicted_r2, select_lambda

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
_XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
_GRAPHML_SCHEMA = "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd"

NETWORK_HEADER = ["src_entity", "src_layer", "dst_entity", "dst_layer",
                  "weight", "p_value", "kept"]


class PipelineError(RuntimeError):
    """Stage-tagged failure; ``stage`` names the pipeline step that died."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of a pipeline run; unknown config keys are rejected."""

    alpha: float | None = None          # fixed differencing order; None = search
    alpha_grid: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    adf_level: float = 0.05
    adf_lags: int | None = None         # None = floor(12 * (T/100)^0.25)
    ranks: object = "full"
    lambda_grid: tuple = (0.0, 1.0, 5.0, 10.0, 20.0, 50.0)
    train_fraction: float = 0.9
    max_sweeps: int = 200
    rel_tol: float = 1e-8
    lag: int = 1
    filter_method: str = "polya"
    filter_a: float = 1.0
    retain_fraction: float = 0.1
    overlap_normalized: bool = False
    log_transform: bool = True
    log_epsilon: float = 0.0
    missing_policy: str = "reject"
    drop_burn_in: bool = False
    out_dir: str = "run"
    seed: int = 0

    def __post_init__(self):
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.adf_level not in (0.01, 0.05, 0.10):
            raise ValueError("adf_level must be 0.01, 0.05 or 0.10")
        if self.adf_lags is not None and self.adf_lags < 0:
            raise ValueError("adf_lags must be >= 0")
        if self.filter_method not in ("polya", "hard"):
            raise ValueError("filter_method must be 'polya' or 'hard'")
        if not 0.0 < self.retain_fraction <= 1.0:
            raise ValueError("retain_fraction must lie in (0, 1]")
        if self.filter_a < 0.0:
            raise ValueError("filter_a must be >= 0")
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        if self.log_epsilon < 0.0:
            raise ValueError("log_epsilon must be >= 0")
        if self.missing_policy not in ("reject", "ffill"):
            raise ValueError("missing_policy must be 'reject' or 'ffill'")
        object.__setattr__(self, "alpha_grid",
                           tuple(float(v) for v in self.alpha_grid))
        object.__setattr__(self, "lambda_grid",
                           tuple(float(v) for v in self.lambda_grid))
        if not isinstance(self.ranks, str):
            object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        # delegate the remaining numeric checks
        self.fit_config()

    def fit_config(self) -> FitConfig:
        return FitConfig(
            max_sweeps=self.max_sweeps,
            rel_tol=self.rel_tol,
            lambda_grid=self.lambda_grid,
            train_fraction=self.train_fraction,
            seed=self.seed,
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        """Parse the flat ``key = value`` config format with typed validation."""
        values = {}
        known = {f.name for f in fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{line_no}: expected 'key = value'")
                key, _, val = (s.strip() for s in line.partition("="))
                if key not in known:
                    raise ValueError(f"{path}:{line_no}: unknown key {key!r}")
                if key in values:
                    raise ValueError(f"{path}:{line_no}: duplicate key {key!r}")
                values[key] = _parse_config_value(key, val)
        return cls(**values)

    def resolved(self) -> dict:
        """JSON-friendly view of every field, for the manifest."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "alpha" and value is None:
                value = "search"
            elif f.name == "adf_lags" and value is None:
                value = "auto"
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_BOOL_KEYS = {"overlap_normalized", "log_transform", "drop_burn_in"}
_INT_KEYS = {"max_sweeps", "lag", "seed"}
_FLOAT_KEYS = {"adf_level", "train_fraction", "rel_tol", "filter_a",
               "retain_fraction", "log_epsilon"}
_STR_KEYS = {"filter_method", "missing_policy", "out_dir"}


def _parse_config_value(key: str, val: str):
    try:
        if key == "alpha":
            return None if val == "search" else float(val)
        if key == "adf_lags":
            return None if val == "auto" else int(val)
        if key == "ranks":
            return "full" if val == "full" else tuple(
                int(s) for s in val.split(","))
        if key in ("alpha_grid", "lambda_grid"):
            return tuple(float(s) for s in val.split(","))
        if key in _BOOL_KEYS:
            if val.lower() in ("true", "yes", "1"):
                return True
            if val.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {val!r}")
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return float(val)
        return val
    except ValueError as exc:
        raise ValueError(f"bad value for {key!r}: {exc}") from None


def _fmt(value: float) -> str:
    """17-significant-digit rendering; round-trips float64 exactly."""
    return "%.17g" % value


# ---------------------------------------------------------------------------
# pipeline stages


def prepare_panel(panel: PanelSeries, config: PipelineConfig):
    """Log-transform and fractionally difference the panel.

    Returns ``(differenced_panel, info)`` where ``info`` records the
    differencing order, how it was chosen and the ADF settings.
    """
    values = panel.values
    if config.log_transform:
        shifted = values + config.log_epsilon
        if np.any(shifted <= 0.0):
            t, i, j = np.unravel_index(int(np.argmax(shifted <= 0.0)),
                                       shifted.shape)
            raise ValueError(
                f"nonpositive value at (date={panel.dates[t]}, "
                f"entity={panel.entities[i]}, layer={panel.layers[j]}); "
                "log transform needs positive inputs or log_epsilon > 0"
            )
        values = np.log(shifted)

    t_len = values.shape[0]
    n_lags = config.adf_lags if config.adf_lags is not None else default_adf_lags(t_len)
    columns = values.reshape(t_len, -1)
    if config.alpha is not None:
        alpha, source = float(config.alpha), "fixed"
    else:
        alpha = find_min_alpha(columns, config.alpha_grid,
                               level=config.adf_level, n_lags=n_lags)
        source = "search"

    spec = FracDiffSpec(alpha=alpha, n_weights=t_len)
    diff = np.column_stack([fracdiff_apply(columns[:, j], spec)
                            for j in range(columns.shape[1])])
    diff = diff.reshape(values.shape)

    n_dropped = 0
    dates = panel.dates
    if config.drop_burn_in:
        n_dropped = math.ceil(0.05 * t_len)
        if n_dropped >= t_len:
            raise ValueError("burn-in drop would remove the whole panel")
        diff = diff[n_dropped:]
        dates = dates[n_dropped:]

    out = PanelSeries(dates=dates, entities=panel.entities,
                      layers=panel.layers, values=diff)
    info = {
        "alpha": alpha,
        "alpha_source": source,
        "adf_level": config.adf_level,
        "adf_lags": n_lags,
        "log_transform": config.log_transform,
        "dropped_burn_in": n_dropped,
    }
    return out, info


def fit_model(panel: PanelSeries, config: PipelineConfig):
    """Select the ridge weight on a chronological split and refit on train.

    Returns ``(model, info)``; the model is trained on the first
    ``train_fraction`` of lagged pairs with the selected lambda.
    """
    fit_cfg = config.fit_config()
    best_lambda, table = select_lambda(panel.values, config.ranks, fit_cfg,
                                       lag=config.lag)
    x, y = build_lagged_pairs(panel.values, config.lag)
    n_train = int(x.shape[0] * config.train_fraction)
    model, report = als_fit(x[:n_train], y[:n_train], config.ranks,
                            best_lambda, fit_cfg)
    r2 = predicted_r2(model, x[n_train:], y[n_train:])
    info = {
        "lambda": best_lambda,
        "r2_table": [[lam, table[lam]] for lam in fit_cfg.lambda_grid],
        "ranks": list(model.ranks),
        "n_train": n_train,
        "n_test": int(x.shape[0] - n_train),
        "n_sweeps": report.n_sweeps,
        "converged": report.converged,
        "objective_final": report.objective_trace[-1],
        "predicted_r2": r2,
    }
    return model, info


def build_network(coefficient, panel_or_labels) -> MultilayerNetwork:
    """Arrange a fitted coefficient into an unfiltered multilayer network."""
    if isinstance(panel_or_labels, PanelSeries):
        entities, layers = panel_or_labels.entities, panel_or_labels.layers
    else:
        entities, layers = panel_or_labels
    return multinet.from_coefficient(coefficient, entities, layers)


def filter_network(net: MultilayerNetwork, config: PipelineConfig):
    """Filter every block and report kept counts and thresholds per block."""
    filtered = multinet.apply_filter(net, method=config.filter_method,
                                     retain_fraction=config.retain_fraction,
                                     a=config.filter_a)
    kept_counts = filtered.kept.sum(axis=(2, 3)).astype(int)
    info = {
        "method": config.filter_method,
        "a": config.filter_a,
        "retain_fraction": config.retain_fraction,
        "kept_counts": kept_counts.tolist(),
        "total_kept": int(kept_counts.sum()),
        "total_edges": int(filtered.kept.size),
    }
    return filtered, info


def compute_measures(net: MultilayerNetwork, config: PipelineConfig):
    assort = multinet.assortativity_matrix(net)
    overlap = multinet.edge_overlap_matrix(net,
                                           normalized=config.overlap_normalized)
    strength = multinet.node_strength(net)
    coreness = multinet.k_coreness(net)
    return assort, overlap, strength, coreness


# ---------------------------------------------------------------------------
# exports


def export_network(net: MultilayerNetwork, path, fmt: str = "csv") -> str:
    """Write the network in one of the supported formats.

    ``csv`` lists every edge (kept or not) and round-trips exactly through
    :func:`import_network`; ``graphml`` and ``dot`` describe the filtered
    graph for external renderers, with node strength/coreness attached.
    """
    path = str(path)
    if fmt == "csv":
        _write_network_csv(net, path)
    elif fmt == "graphml":
        _write_graphml(net, path)
    elif fmt == "dot":
        _write_dot(net, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _write_network_csv(net: MultilayerNetwork, path: str) -> None:
    lines = [",".join(NETWORK_HEADER)]
    for j, src_layer in enumerate(net.layer_labels):
        for l, dst_layer in enumerate(net.layer_labels):
            block = net.blocks[j, l]
            kept = net.kept[j, l]
            pv = net.p_values[j, l]
            for i, src in enumerate(net.entity_labels):
                for k, dst in enumerate(net.entity_labels):
                    lines.append(",".join([
                        src, src_layer, dst, dst_layer,
                        _fmt(block[i, k]), _fmt(pv[i, k]),
                        "true" if kept[i, k] else "false",
                    ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def import_network(path) -> MultilayerNetwork:
    """Rebuild a network from its edge CSV; the grid must be complete."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != NETWORK_HEADER:
            raise ValueError(f"unexpected network CSV header: {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ValueError(f"row {line_no}: expected 7 fields")
            rows.append(parts)
    if not rows:
        raise ValueError("network CSV contains no edges")
    entities = sorted({r[0] for r in rows} | {r[2] for r in rows})
    layers = sorted({r[1] for r in rows} | {r[3] for r in rows})
    e_idx = {e: i for i, e in enumerate(entities)}
    l_idx = {l: i for i, l in enumerate(layers)}
    shape = (len(layers), len(layers), len(entities), len(entities))
    if len(rows) != int(np.prod(shape)):
        raise ValueError(
            f"incomplete edge grid: {len(rows)} rows for shape {shape}"
        )
    blocks = np.zeros(shape)
    kept = np.zeros(shape, dtype=bool)
    pv = np.full(shape, np.nan)
    for src, src_layer, dst, dst_layer, w, p, k in rows:
        j, l = l_idx[src_layer], l_idx[dst_layer]
        i, m = e_idx[src], e_idx[dst]
        blocks[j, l, i, m] = float(w)
        pv[j, l, i, m] = float(p)
        kept[j, l, i, m] = k == "true"
    return MultilayerNetwork(entity_labels=entities, layer_labels=layers,
                             blocks=blocks, kept=kept, p_values=pv)


def _node_id(entity: str, layer: str) -> str:
    return f"{entity}|{layer}"


def _write_graphml(net: MultilayerNetwork, path: str) -> None:
    strength = multinet.node_strength(net)
    coreness = multinet.k_coreness(net)
    ET.register_namespace("", GRAPHML_NS)
    root = ET.Element(f"{{{GRAPHML_NS}}}graphml")
    root.set(f"{{{_XSI_NS}}}schemaLocation", f"{GRAPHML_NS} {_GRAPHML_SCHEMA}")
    keys = [
        ("d_entity", "node", "entity", "string"),
        ("d_layer", "node", "layer", "string"),
        ("d_strength", "node", "strength", "double"),
        ("d_coreness", "node", "coreness", "long"),
        ("d_weight", "edge", "weight", "double"),
        ("d_pvalue", "edge", "p_value", "double"),
    ]
    for key_id, domain, name, typ in keys:
        el = ET.SubElement(root, f"{{{GRAPHML_NS}}}key")
        el.set("id", key_id)
        el.set("for", domain)
        el.set("attr.name", name)
        el.set("attr.type", typ)
    graph = ET.SubElement(root, f"{{{GRAPHML_NS}}}graph")
    graph.set("id", "multilayer")
    graph.set("edgedefault", "directed")

    for i, entity in enumerate(net.entity_labels):
        for j, layer in enumerate(net.layer_labels):
            node = ET.SubElement(graph, f"{{{GRAPHML_NS}}}node")
            node.set("id", _node_id(entity, layer))
            for key_id, text in (
                ("d_entity", entity),
                ("d_layer", layer),
                ("d_strength", _fmt(strength[i, j])),
                ("d_coreness", str(int(coreness[i, j]))),
            ):
                data = ET.SubElement(node, f"{{{GRAPHML_NS}}}data")
                data.set("key", key_id)
                data.text = text
    for j, src_layer in enumerate(net.layer_labels):
        for l, dst_layer in enumerate(net.layer_labels):
            kept = net.kept[j, l]
            for i, src in enumerate(net.entity_labels):
                for k, dst in enumerate(net.entity_labels):
                    if not kept[i, k]:
                        continue
                    edge = ET.SubElement(graph, f"{{{GRAPHML_NS}}}edge")
                    edge.set("source", _node_id(src, src_layer))
                    edge.set("target", _node_id(dst, dst_layer))
                    for key_id, text in (
                        ("d_weight", _fmt(net.blocks[j, l, i, k])),
                        ("d_pvalue", _fmt(net.p_values[j, l, i, k])),
                    ):
                        data = ET.SubElement(edge, f"{{{GRAPHML_NS}}}data")
                        data.set("key", key_id)
                        data.text = text
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    tree.write(path, encoding="utf-8", xml_declaration=True)


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _write_dot(net: MultilayerNetwork, path: str) -> None:
    strength = multinet.node_strength(net)
    coreness = multinet.k_coreness(net)
    lines = ["digraph multilayer {"]
    for j, layer in enumerate(net.layer_labels):
        lines.append(f"  subgraph cluster_{j} {{")
        lines.append(f"    label={_dot_quote(layer)};")
        for i, entity in enumerate(net.entity_labels):
            lines.append(
                f"    {_dot_quote(_node_id(entity, layer))} "
                f"[strength={_fmt(strength[i, j])}, "
                f"coreness={int(coreness[i, j])}];"
            )
        lines.append("  }")
    for j, src_layer in enumerate(net.layer_labels):
        for l, dst_layer in enumerate(net.layer_labels):
            kept = net.kept[j, l]
            for i, src in enumerate(net.entity_labels):
                for k, dst in enumerate(net.entity_labels):
                    if not kept[i, k]:
                        continue
                    lines.append(
                        f"  {_dot_quote(_node_id(src, src_layer))} -> "
                        f"{_dot_quote(_node_id(dst, dst_layer))} "
                        f"[weight={_fmt(net.blocks[j, l, i, k])}];"
                    )
    lines.append("}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def export_matrices(assortativity, overlap, strength, coreness,
                    entity_labels, layer_labels, out_dir) -> dict:
    """Write the two layer matrices and the per-node measure table as CSVs."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "assortativity": os.path.join(out_dir, "assortativity.csv"),
        "edge_overlap": os.path.join(out_dir, "edge_overlap.csv"),
        "node_measures": os.path.join(out_dir, "node_measures.csv"),
    }
    _write_layer_matrix(assortativity.values, layer_labels, paths["assortativity"])
    _write_layer_matrix(overlap.values, layer_labels, paths["edge_overlap"])
    lines = ["entity,layer,strength,coreness"]
    for i, entity in enumerate(entity_labels):
        for j, layer in enumerate(layer_labels):
            lines.append(
                f"{entity},{layer},{_fmt(strength[i, j])},{int(coreness[i, j])}"
            )
    with open(paths["node_measures"], "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return paths


def _write_layer_matrix(values, layer_labels, path) -> None:
    lines = ["layer," + ",".join(layer_labels)]
    for j, label in enumerate(layer_labels):
        lines.append(label + "," + ",".join(_fmt(v) for v in values[j]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# full run


def save_model(model, panel: PanelSeries, info: dict, model_dir) -> None:
    os.makedirs(model_dir, exist_ok=True)
    np.save(os.path.join(model_dir, "coefficient.npy"), model.coefficient_tensor())
    np.save(os.path.join(model_dir, "intercept.npy"), model.intercept)
    np.save(os.path.join(model_dir, "x_mean.npy"), model.x_mean)
    np.save(os.path.join(model_dir, "y_mean.npy"), model.y_mean)
    meta = dict(info)
    meta["entities"] = list(panel.entities)
    meta["layers"] = list(panel.layers)
    _write_json(meta, os.path.join(model_dir, "meta.json"))


def load_model_coefficient(model_dir):
    """Coefficient tensor plus labels, as saved by :func:`save_model`."""
    coefficient = np.load(os.path.join(model_dir, "coefficient.npy"))
    with open(os.path.join(model_dir, "meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    return coefficient, meta


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(config: PipelineConfig, panel: PanelSeries) -> dict:
    """Run every stage and write all artifacts under ``config.out_dir``.

    Returns the manifest (also written as ``manifest.json``).  Any stage
    failure is re-raised as :class:`PipelineError` tagged with the stage.
    """
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    def _stage(name, fn, *args):
        try:
            return fn(*args)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, str(exc)) from exc

    differenced, frac_info = _stage("fracdiff", prepare_panel, panel, config)
    export_panel(differenced, os.path.join(out_dir, "differenced.csv"))

    model, fit_info = _stage("fit", fit_model, differenced, config)
    save_model(model, differenced, fit_info, os.path.join(out_dir, "model"))

    net = _stage("build-network", build_network,
                 model.coefficient_tensor(), differenced)
    filtered, filter_info = _stage("filter", filter_network, net, config)
    export_network(filtered, os.path.join(out_dir, "network.csv"), "csv")

    assort, overlap, strength, coreness = _stage(
        "measure", compute_measures, filtered, config)
    export_network(filtered, os.path.join(out_dir, "network.graphml"), "graphml")
    export_network(filtered, os.path.join(out_dir, "network.dot"), "dot")
    export_matrices(assort, overlap, strength, coreness,
                    filtered.entity_labels, filtered.layer_labels, out_dir)

    manifest = {
        "config": config.resolved(),
        "panel": {
            "n_dates": panel.n_dates,
            "n_entities": len(panel.entities),
            "n_layers": len(panel.layers),
            "first_date": panel.dates[0],
            "last_date": panel.dates[-1],
            "entities": list(panel.entities),
            "layers": list(panel.layers),
        },
        "fracdiff": frac_info,
        "fit": fit_info,
        "filter": filter_info,
        "measures": {"overlap_normalized": config.overlap_normalized},
        "outputs": {
            "differenced_panel": "differenced.csv",
            "model": "model",
            "network_csv": "network.csv",
            "network_graphml": "network.graphml",
            "network_dot": "network.dot",
            "assortativity": "assortativity.csv",
            "edge_overlap": "edge_overlap.csv",
            "node_measures": "node_measures.csv",
        },
    }
    _write_json(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest
