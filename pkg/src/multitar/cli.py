"""Command-line interface.

Stages can be run end to end (``pipeline``) or one at a time, each reading
the artifacts the previous stage wrote, so a run can be resumed from any
intermediate output.  Failures exit nonzero with a stage-tagged message.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import pipeline as pl
from .panel import export_panel, ingest_csv
from .synthetic import generate_tar_panel


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--out", help="output directory", default=None)
    parser.add_argument("--alpha",
                        help="differencing order ('search' or a number)")
    parser.add_argument("--lambda", dest="ridge",
                        help="fixed ridge weight (replaces the grid)")
    parser.add_argument("--retain", type=float,
                        help="fraction of edges to keep per block")
    parser.add_argument("--method", choices=("polya", "hard"),
                        help="filter method")
    parser.add_argument("--seed", type=int, help="seed override")


def _load_config(args) -> pl.PipelineConfig:
    config = (pl.PipelineConfig.from_file(args.config) if args.config
              else pl.PipelineConfig())
    updates = {}
    if args.out is not None:
        updates["out_dir"] = args.out
    if getattr(args, "alpha", None) is not None:
        updates["alpha"] = None if args.alpha == "search" else float(args.alpha)
    if getattr(args, "ridge", None) is not None:
        updates["lambda_grid"] = (float(args.ridge),)
    if getattr(args, "retain", None) is not None:
        updates["retain_fraction"] = args.retain
    if getattr(args, "method", None) is not None:
        updates["filter_method"] = args.method
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return dataclasses.replace(config, **updates) if updates else config


def _write_stage_json(info: dict, out_dir: str, name: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_ingest(args) -> None:
    config = _load_config(args)
    panel = ingest_csv(args.input, on_missing=config.missing_policy)
    os.makedirs(config.out_dir, exist_ok=True)
    export_panel(panel, os.path.join(config.out_dir, "panel.csv"))
    print(f"ingested {panel.n_dates} dates x {len(panel.entities)} entities "
          f"x {len(panel.layers)} layers -> {config.out_dir}/panel.csv")


def _cmd_fracdiff(args) -> None:
    config = _load_config(args)
    panel = ingest_csv(args.panel, on_missing=config.missing_policy)
    differenced, info = pl.prepare_panel(panel, config)
    os.makedirs(config.out_dir, exist_ok=True)
    export_panel(differenced, os.path.join(config.out_dir, "differenced.csv"))
    _write_stage_json(info, config.out_dir, "fracdiff.json")
    print(f"alpha={info['alpha']} ({info['alpha_source']}) -> "
          f"{config.out_dir}/differenced.csv")


def _cmd_fit(args) -> None:
    config = _load_config(args)
    panel = ingest_csv(args.panel, on_missing=config.missing_policy)
    model, info = pl.fit_model(panel, config)
    pl.save_model(model, panel, info, os.path.join(config.out_dir, "model"))
    _write_stage_json(info, config.out_dir, "fit.json")
    print(f"lambda={info['lambda']} predicted_r2={info['predicted_r2']:.6f} "
          f"-> {config.out_dir}/model")


def _cmd_build_network(args) -> None:
    config = _load_config(args)
    coefficient, meta = pl.load_model_coefficient(args.model)
    net = pl.build_network(coefficient, (meta["entities"], meta["layers"]))
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "network_full.csv")
    pl.export_network(net, path, "csv")
    print(f"wrote {net.kept.size} edges -> {path}")


def _cmd_filter(args) -> None:
    config = _load_config(args)
    net = pl.import_network(args.network)
    filtered, info = pl.filter_network(net, config)
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "network.csv")
    pl.export_network(filtered, path, "csv")
    _write_stage_json(info, config.out_dir, "filter.json")
    print(f"kept {info['total_kept']} of {info['total_edges']} edges -> {path}")


def _cmd_measure(args) -> None:
    config = _load_config(args)
    net = pl.import_network(args.network)
    assort, overlap, strength, coreness = pl.compute_measures(net, config)
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    pl.export_network(net, os.path.join(out_dir, "network.graphml"), "graphml")
    pl.export_network(net, os.path.join(out_dir, "network.dot"), "dot")
    paths = pl.export_matrices(assort, overlap, strength, coreness,
                               net.entity_labels, net.layer_labels, out_dir)
    print(f"wrote measures -> {', '.join(sorted(paths.values()))}")


def _cmd_pipeline(args) -> None:
    config = _load_config(args)
    panel = ingest_csv(args.input, on_missing=config.missing_policy)
    manifest = pl.run_pipeline(config, panel)
    print(f"alpha={manifest['fracdiff']['alpha']} "
          f"lambda={manifest['fit']['lambda']} "
          f"kept={manifest['filter']['total_kept']}/"
          f"{manifest['filter']['total_edges']} -> {config.out_dir}/manifest.json")


def _cmd_synth(args) -> None:
    panel, _ = generate_tar_panel(
        n_entities=args.entities, n_layers=args.layers, n_steps=args.steps,
        seed=args.seed,
    )
    export_panel(panel, args.output)
    print(f"wrote synthetic panel {panel.values.shape} -> {args.output}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multitar",
        description="Learn, filter and measure a multilayer network from "
                    "panel time series via tensor autoregression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and canonicalize a panel CSV")
    p.add_argument("--input", required=True, help="long-format panel CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("fracdiff", help="log-transform and difference a panel")
    p.add_argument("--panel", required=True, help="panel CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_fracdiff)

    p = sub.add_parser("fit", help="fit the tensor autoregression")
    p.add_argument("--panel", required=True, help="differenced panel CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("build-network", help="arrange the coefficient into blocks")
    p.add_argument("--model", required=True, help="model directory")
    _add_common(p)
    p.set_defaults(fn=_cmd_build_network)

    p = sub.add_parser("filter", help="sparsify a network CSV")
    p.add_argument("--network", required=True, help="network edge CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("measure", help="compute layer matrices and node measures")
    p.add_argument("--network", required=True, help="filtered network CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_measure)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--input", required=True, help="long-format panel CSV")
    _add_common(p)
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("synth", help="write a seeded synthetic panel CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--entities", type=int, default=10)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except pl.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
