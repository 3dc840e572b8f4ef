"""Command line entry point: ``infonet <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import BenchmarkConfig, benchmark_timing, evaluate_quality, render_map
from .grid import GridSpec
from .io import FormatError, read_container
from .neural.nets import build_map_net, coeff_net_for, load_weights, save_weights
from .neural.train import TrainConfig, train, write_history_csv
from .sim import EpisodeConfig, generate_dataset, load_dataset
from .spectral import SpectralBasis, reconstruct


def _grid(args) -> GridSpec:
    return GridSpec(side_length=args.side, n=args.n, heading_bins=args.headings)


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_generate(args) -> dict:
    cfg = EpisodeConfig(steps=args.steps, modality=args.modality, metric=args.metric,
                        seed=args.seed, K=args.K)
    ds = generate_dataset(args.episodes, cfg, args.out, _grid(args))
    return {"out": str(args.out), "num_samples": len(ds), "modality": cfg.modality,
            "metric": cfg.metric, "K": cfg.K, "seed": cfg.seed}


def cmd_train(args) -> dict:
    ds = load_dataset(args.dataset)
    grid, modality = ds.grid, ds.modality
    metric = ds.manifest["metric"]
    if args.arch == "map":
        net = build_map_net(grid, modality, seed=args.seed, meta={"metric": metric})
        targets = net.encode_targets(ds.maps)
    else:
        basis = SpectralBasis(grid, ds.manifest["K"], modality)
        if ds.coeffs.shape[1] != len(basis):
            raise FormatError(f"{args.dataset}: coefficient length {ds.coeffs.shape[1]} does not match K")
        net = coeff_net_for(basis, seed=args.seed, metric=metric)
        targets = net.encode_targets(ds.coeffs)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                         val_fraction=args.val_fraction, seed=args.seed,
                         augment=None if args.augment == "none" else args.augment,
                         schedule=None if args.schedule == "constant" else args.schedule)
    res = train(net, net.encode_inputs(ds.beliefs), targets, config)
    _, last_train, last_val = res.history[-1]
    training = {
        "config": config.to_dict(),
        "best_epoch": res.best_epoch,
        "dataset": {k: ds.manifest[k] for k in ("modality", "metric", "K", "seed", "num_samples")},
        "final_train_loss": last_train,
        "final_val_loss": None if np.isnan(last_val) else last_val,
    }
    save_weights(net, args.out, training)
    history = args.history or f"{args.out}.history.csv"
    write_history_csv(history, res.history)
    return {"out": str(args.out), "history": str(history), **training}


def cmd_evaluate(args) -> dict:
    map_net = load_weights(args.map_weights) if args.map_weights else None
    coeff_net = load_weights(args.coeff_weights) if args.coeff_weights else None
    if map_net is None and coeff_net is None:
        raise ValueError("give --map-weights and/or --coeff-weights")
    for path, net, arch in ((args.map_weights, map_net, "map"), (args.coeff_weights, coeff_net, "coeff")):
        if net is not None and net.arch != arch:
            raise ValueError(f"{path} holds a {net.arch} network, expected {arch}")
    grid = (map_net or coeff_net).grid
    report = evaluate_quality(map_net, coeff_net, args.episodes, seed=args.seed,
                              steps=args.steps, grid=grid).to_dict()
    _write_json(args.report, report)
    return report


def cmd_benchmark(args) -> dict:
    kw = {}
    if args.map_weights:
        kw["map_net"] = load_weights(args.map_weights)
    if args.coeff_weights:
        kw["coeff_net"] = load_weights(args.coeff_weights)
    cfg = BenchmarkConfig(modality=args.modality, metric=args.metric, reps=args.reps,
                          warmup=args.warmup, seed=args.seed, grid=_grid(args), K=args.K, **kw)
    report = benchmark_timing(cfg)
    _write_json(args.report, report)
    return report


def _load_render_source(args):
    path = Path(args.input)
    if path.suffix == ".npy":
        return np.load(path)
    manifest, _ = read_container(path)
    if manifest.get("kind") != "dataset":
        raise FormatError(f"{path}: render reads dataset files or .npy arrays")
    ds = load_dataset(path)
    if not 0 <= args.sample < len(ds):
        raise IndexError(f"sample {args.sample} out of range [0, {len(ds)})")
    if args.field == "belief":
        return ds.beliefs[args.sample]
    if args.field == "reconstruction":
        basis = SpectralBasis(ds.grid, ds.manifest["K"], ds.modality)
        return reconstruct(ds.coeffs[args.sample], basis)
    return ds.maps[args.sample]


def cmd_render(args) -> dict:
    m = _load_render_source(args)
    s = render_map(m, args.out, args.format, args.heading_bin)
    return {"out": str(args.out), "format": args.format, "shape": list(s.shape)}


def _add_grid_args(p) -> None:
    p.add_argument("--n", type=int, default=28, help="cells per side")
    p.add_argument("--headings", type=int, default=36, help="heading bins")
    p.add_argument("--side", type=float, default=200.0, help="field side length in meters")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infonet", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-dataset", help="run greedy episodes and store beliefs, maps, coefficients")
    p.add_argument("--modality", choices=["bearing", "fov"], required=True)
    p.add_argument("--metric", choices=["mutual", "fisher"], default="mutual")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=None, help="coefficient order (default 5 bearing, 17 fov)")
    p.add_argument("--out", required=True)
    _add_grid_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a map or coefficient network on a dataset")
    p.add_argument("--arch", choices=["map", "coeff"], required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--augment", choices=["none", "dihedral"], default="none",
                   help="random square symmetries per sample (bearing only)")
    p.add_argument("--schedule", choices=["constant", "cosine"], default="constant",
                   help="learning-rate schedule over epochs")
    p.add_argument("--history", default=None, help="loss history CSV (default <out>.history.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="KL quality of trained networks on fresh episodes")
    p.add_argument("--map-weights")
    p.add_argument("--coeff-weights")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="single-threaded timing of exact vs network maps")
    p.add_argument("--modality", choices=["bearing", "fov"], required=True)
    p.add_argument("--metric", choices=["mutual", "fisher"], default="mutual")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--K", type=int, default=None, help="coefficient order (default 5 bearing, 17 fov)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--map-weights")
    p.add_argument("--coeff-weights")
    p.add_argument("--report", default="-")
    _add_grid_args(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("render", help="write a map or belief as 16-bit PGM or CSV")
    p.add_argument("--input", required=True, help="dataset file or .npy array")
    p.add_argument("--format", choices=["pgm", "csv"], default="pgm")
    p.add_argument("--heading-bin", type=int, default=0)
    p.add_argument("--sample", type=int, default=0, help="sample index within a dataset")
    p.add_argument("--field", choices=["map", "belief", "reconstruction"], default="map")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = args.func(args)
    except (ValueError, IndexError, KeyError, OSError, RuntimeError) as exc:
        print(f"infonet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if args.command in ("generate-dataset", "train", "render"):
        _write_json("-", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
