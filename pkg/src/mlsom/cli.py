"""Command line entry point: ``mlsom {train,ablate,encode,eval,viz}``."""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from .classifier import evaluate, load_classifier
from .coding import encode_images
from .errors import ConfigError, MlsomError
from .pipeline import (
    format_table,
    load_splits,
    run,
    run_ablation,
    write_artifacts,
)
from .som import load_grid
from .viz import dump_feature_map, render_feature_overlay, render_grid

logger = logging.getLogger("mlsom")

# flag name -> RunConfig field
_OVERRIDES = {
    "data_dir": "data_dir",
    "subset": "subset",
    "test_subset": "test_subset",
    "seed": "seed",
    "epochs_som": "epochs_som",
    "epochs_clf": "epochs_clf",
    "clf_lr": "clf_lr",
    "batch_size": "batch_size",
    "n": "n_winners",
    "k": "k",
    "sigma": "sigma",
    "lr": "lr",
    "window": "window",
    "stride": "stride",
    "grid": None,
    "out_dir": "out_dir",
    "threads": "threads",
    "shuffle": "shuffle",
    "no_lrf": None,
}


def _add_common(p):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--preset", choices=sorted(config_mod.PRESETS), default=None)
    p.add_argument("--data-dir", default=None,
                   help="dataset root (default: $MLSOM_DATA_DIR or ./data)")
    p.add_argument("--subset", type=int, help="stratified training subset size")
    p.add_argument("--test-subset", type=int, help="stratified test subset size")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs-som", type=int)
    p.add_argument("--epochs-clf", type=int)
    p.add_argument("--clf-lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--n", type=int, help="winners updated per patch")
    p.add_argument("--k", type=int, help="winners coded per patch")
    p.add_argument("--sigma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--grid", type=int, metavar="SIDE", help="square lattice side")
    p.add_argument("--no-lrf", action="store_true", help="whole-image receptive field")
    p.add_argument("--shuffle", action="store_true", default=None)
    p.add_argument("--out-dir")
    p.add_argument("--threads", type=int, help="cap on worker threads")


def build_config(args):
    values = {}
    if args.config:
        values.update(config_mod.load_config_file(args.config))
    name = args.preset or values.pop("preset", None) or values.get("dataset") or "mnist"
    values.pop("preset", None)
    values.setdefault("data_dir", os.environ.get("MLSOM_DATA_DIR", "data"))
    for flag, fieldname in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None or fieldname is None:
            continue
        values[fieldname] = value
    if getattr(args, "grid", None):
        values["grid_height"] = values["grid_width"] = args.grid
    if getattr(args, "no_lrf", False):
        values["use_lrf"] = False
    return config_mod.preset(name, **values)


def _apply_threads(cfg):
    if cfg.threads:
        import numba

        numba.set_num_threads(max(1, min(cfg.threads, numba.config.NUMBA_NUM_THREADS)))


def cmd_train(args):
    cfg = build_config(args)
    _apply_threads(cfg)
    train, test = load_splits(cfg)
    logger.info("training on %d images, testing on %d", len(train), len(test))
    result = run(cfg, train, test)
    paths = write_artifacts(result, cfg.out_dir)
    rows = [{
        "dataset": cfg.dataset,
        "train_accuracy": result.report["train_accuracy"],
        "test_accuracy": result.report["test_accuracy"],
        "seconds": f"{result.report['wall_time']['total_s']:.1f}",
    }]
    print(format_table(rows, ["dataset", "train_accuracy", "test_accuracy", "seconds"]))
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def cmd_ablate(args):
    cfg = build_config(args)
    _apply_threads(cfg)
    train, test = load_splits(cfg)
    t0 = time.perf_counter()
    table = run_ablation(cfg, train, test)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    print(format_table(table["rows"],
                       ["variant", "n_winners", "use_lrf", "k", "train_accuracy", "test_accuracy"]))
    logger.info("ablation finished in %.1fs", time.perf_counter() - t0)
    print(f"ablation: {out / 'ablation.json'}")
    return 0


def _checkpoint_dir(args, cfg):
    return Path(args.checkpoint_dir or cfg.out_dir)


def cmd_encode(args):
    cfg = build_config(args)
    _apply_threads(cfg)
    grid = load_grid(_checkpoint_dir(args, cfg) / "grid.bin")
    train, test = load_splits(cfg)
    data = test if args.split == "test" else train
    maps = encode_images(data.images, grid, cfg.patch_config(), cfg.k)
    out = Path(args.output or Path(cfg.out_dir) / f"features_{args.split}.npz")
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(out, features=maps, labels=data.labels)
    for i in range(min(args.dump, len(maps))):
        dump_feature_map(maps[i], out.parent / f"feature_{args.split}_{i}.pgm")
    print(f"features: {out} ({len(maps)} maps, mean popcount "
          f"{maps.reshape(len(maps), -1).sum(1).mean():.1f})")
    return 0


def cmd_eval(args):
    cfg = build_config(args)
    _apply_threads(cfg)
    ckpt = _checkpoint_dir(args, cfg)
    grid = load_grid(ckpt / "grid.bin")
    clf = load_classifier(ckpt / "classifier.bin")
    _, test = load_splits(cfg)
    x = encode_images(test.images, grid, cfg.patch_config(), cfg.k, flat=True)
    acc = evaluate(clf, x, test.labels)
    print(format_table([{"split": "test", "n": len(test), "accuracy": acc}],
                       ["split", "n", "accuracy"]))
    return 0


def cmd_viz(args):
    cfg = build_config(args)
    ckpt = _checkpoint_dir(args, cfg)
    grid = load_grid(args.grid_file or ckpt / "grid.bin")
    patch_cfg = cfg.patch_config()
    if grid.dim != patch_cfg.patch_dim:
        raise ConfigError(
            f"checkpoint dim {grid.dim} does not match window {patch_cfg.window} "
            f"(dim {patch_cfg.patch_dim}); pass matching --preset/--window or --no-lrf"
        )
    out = Path(args.output_dir or ckpt)
    out.mkdir(parents=True, exist_ok=True)
    ext = args.format
    sheet = render_grid(grid, patch_cfg, out / f"grid.{'pgm' if cfg.channels == 1 else 'ppm'}"
                        if ext == "pnm" else out / "grid.png")
    print(f"grid sheet: {sheet}")
    if args.image_index is not None:
        _, test = load_splits(cfg)
        if not 0 <= args.image_index < len(test):
            raise ConfigError(f"--image-index must lie in [0, {len(test)})")
        image = test.images[args.image_index]
        fmap = encode_images(image[None], grid, patch_cfg, cfg.k)[0]
        name = f"overlay_{args.image_index}.{'ppm' if ext == 'pnm' else 'png'}"
        panel = render_feature_overlay(image, fmap, out / name)
        print(f"overlay: {panel} (label {int(test.labels[args.image_index])}, "
              f"{int(fmap.sum())} active cells)")
    return 0


def make_parser():
    parser = argparse.ArgumentParser(prog="mlsom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="SOM phase, encoding, classifier, evaluation")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="SOM -> +multi-winner -> +LRF -> mlSOM ladder")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("encode", help="write feature maps for a split")
    _add_common(p)
    p.add_argument("--checkpoint-dir")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--output")
    p.add_argument("--dump", type=int, default=0, help="also write the first N maps as PGM")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="score saved checkpoints on the test split")
    _add_common(p)
    p.add_argument("--checkpoint-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="render neuron tiles and feature-map overlays")
    _add_common(p)
    p.add_argument("--checkpoint-dir")
    p.add_argument("--grid-file", help="grid checkpoint (default: <checkpoint-dir>/grid.bin)")
    p.add_argument("--image-index", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--format", choices=("pnm", "png"), default="pnm")
    p.set_defaults(func=cmd_viz)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except MlsomError as exc:
        print(f"mlsom: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mlsom: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
