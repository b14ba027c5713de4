"""End-to-end orchestration: SOM phase, encoding, read-out training, evaluation."""

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from .classifier import LinearClassifier, evaluate, save_classifier, train_classifier
from .coding import encode_images
from .data import load_dataset, subset
from .som import init_grid, quantization_error, save_grid, train_som

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
# images used for the before/after quantization-error probe
_QE_PROBE = 1000

ABLATION_VARIANTS = ("SOM", "SOM+multi-winner", "SOM+multi-winner+LRF", "mlSOM")


@dataclass
class RunResult:
    grid: object
    classifier: LinearClassifier
    report: dict


def load_splits(cfg):
    """Train/test sets for `cfg`, reduced to stratified subsets when requested.

    ``test_subset`` defaults to a fifth of ``subset`` when only the latter is set.
    """
    train = load_dataset(cfg.dataset, cfg.data_dir, "train")
    test = load_dataset(cfg.dataset, cfg.data_dir, "test")
    if cfg.subset:
        train = subset(train, cfg.subset, seed=cfg.seed)
    test_count = cfg.test_subset or (cfg.subset // 5 if cfg.subset else 0)
    if test_count:
        test = subset(test, min(test_count, len(test)), seed=cfg.seed + 1)
    return train, test


def run(cfg, train, test, log_every=True):
    """Train the lattice and the read-out on `train`; score on `test`."""
    t0 = time.perf_counter()
    patch_cfg = cfg.patch_config()
    som_cfg = cfg.som_config()
    grid = init_grid(som_cfg, patch_cfg.patch_dim)
    probe = train.images[:_QE_PROBE]
    qe_before = quantization_error(grid, probe, patch_cfg)

    def som_progress(epoch, done, total):
        if log_every and done == total:
            logger.info("som epoch %d/%d done", epoch + 1, som_cfg.epochs)

    train_som(grid, train.images, patch_cfg, som_cfg, progress=som_progress)
    qe_after = quantization_error(grid, probe, patch_cfg)
    t_som = time.perf_counter()

    x_train = encode_images(train.images, grid, patch_cfg, cfg.k, flat=True)
    x_test = encode_images(test.images, grid, patch_cfg, cfg.k, flat=True)
    clf = LinearClassifier.zeros(train.num_classes, grid.size)

    def clf_progress(epoch, loss, acc):
        logger.debug("clf epoch %d loss=%.4f acc=%.4f", epoch + 1, loss, acc)

    clf_report = train_classifier(
        clf, x_train, train.labels, cfg.epochs_clf, cfg.clf_lr, cfg.batch_size,
        seed=cfg.seed, progress=clf_progress,
    )
    clf_report.test_accuracy = evaluate(clf, x_test, test.labels)
    train_acc = evaluate(clf, x_train, train.labels)
    report = {
        "report_version": REPORT_VERSION,
        "config": cfg.to_dict(),
        "n_train": len(train),
        "n_test": len(test),
        "som": {
            "quantization_error_initial": qe_before,
            "quantization_error_final": qe_after,
            "mean_feature_popcount": float(x_train.sum(axis=1).mean()),
        },
        "classifier": clf_report.to_dict(),
        "train_accuracy": train_acc,
        "test_accuracy": clf_report.test_accuracy,
        "wall_time": {
            "som_s": t_som - t0,
            "total_s": time.perf_counter() - t0,
        },
    }
    return RunResult(grid, clf, report)


def write_artifacts(result, out_dir):
    """grid.bin, classifier.bin and report.json under `out_dir`; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "grid": out / "grid.bin",
        "classifier": out / "classifier.bin",
        "report": out / "report.json",
    }
    save_grid(result.grid, paths["grid"])
    save_classifier(result.classifier, paths["classifier"])
    paths["report"].write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n")
    return paths


def ablation_configs(cfg):
    """The four rungs of the ladder, sharing seed, data and budget with `cfg`."""
    return {
        "SOM": cfg.replace(n_winners=1, use_lrf=False, k=1),
        "SOM+multi-winner": cfg.replace(use_lrf=False, k=1),
        "SOM+multi-winner+LRF": cfg.replace(use_lrf=True, k=1),
        "mlSOM": cfg.replace(use_lrf=True),
    }


def run_ablation(cfg, train, test):
    rows = []
    for name, variant in ablation_configs(cfg).items():
        logger.info("ablation variant %s", name)
        result = run(variant, train, test)
        rows.append({
            "variant": name,
            "n_winners": variant.n_winners,
            "use_lrf": variant.use_lrf,
            "window": variant.patch_config().window,
            "stride": variant.patch_config().stride,
            "k": variant.k,
            "train_accuracy": result.report["train_accuracy"],
            "test_accuracy": result.report["test_accuracy"],
        })
    return {
        "report_version": REPORT_VERSION,
        "config": cfg.to_dict(),
        "n_train": len(train),
        "n_test": len(test),
        "rows": rows,
    }


def format_table(rows, columns):
    """Aligned plain-text table; floats in [0, 1] shown as percentages."""
    def cell(v):
        if isinstance(v, float):
            return f"{100 * v:.2f}"
        return str(v)

    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)

