"""Run configuration, dataset presets and the key = value config file format."""

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .patching import PatchConfig
from .som import SomConfig

IMAGE_SIZE = {"mnist": 28, "cifar10": 32}
CHANNELS = {"mnist": 1, "cifar10": 3}

# hidden 44x44, w, s, n, sigma, k, lr per dataset
PRESETS = {
    "mnist": dict(grid_height=44, grid_width=44, window=14, stride=7, n_winners=5,
                  sigma=2.0, k=20, lr=0.3, epochs_som=20),
    "cifar10": dict(grid_height=44, grid_width=44, window=16, stride=4, n_winners=5,
                    sigma=2.0, k=100, lr=0.3, epochs_som=200),
}


@dataclass
class RunConfig:
    dataset: str = "mnist"
    data_dir: str = "data"
    grid_height: int = 44
    grid_width: int = 44
    window: int = 14
    stride: int = 7
    n_winners: int = 5
    sigma: float = 2.0
    lr: float = 0.3
    k: int = 20
    epochs_som: int = 20
    epochs_clf: int = 50
    clf_lr: float = 0.1
    batch_size: int = 64
    use_lrf: bool = True
    subset: int = 0
    test_subset: int = 0
    shuffle: bool = False
    seed: int = 0
    out_dir: str = "runs"
    threads: int = 0

    def __post_init__(self):
        if self.dataset not in IMAGE_SIZE:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choose mnist or cifar10")
        if self.k <= 0 or self.k > self.grid_height * self.grid_width:
            raise ConfigError(f"k={self.k} must lie in [1, {self.grid_height * self.grid_width}]")
        if self.epochs_clf < 0 or self.batch_size <= 0:
            raise ConfigError("epochs_clf must be >= 0 and batch_size > 0")
        if self.clf_lr <= 0:
            raise ConfigError("clf_lr must be positive")
        if self.subset < 0 or self.test_subset < 0:
            raise ConfigError("subset sizes must be non-negative")
        # surface stride errors before any data is touched
        self.patch_config().check_axis(self.image_size)
        self.som_config()

    @property
    def image_size(self):
        return IMAGE_SIZE[self.dataset]

    @property
    def channels(self):
        return CHANNELS[self.dataset]

    def patch_config(self):
        """Window geometry; without LRF the single window covers the whole image."""
        if not self.use_lrf:
            return PatchConfig(self.image_size, self.image_size, self.channels)
        return PatchConfig(self.window, self.stride, self.channels)

    def som_config(self):
        return SomConfig(
            grid_height=self.grid_height, grid_width=self.grid_width,
            n_winners=self.n_winners, sigma=self.sigma, base_lr=self.lr,
            epochs=self.epochs_som, seed=self.seed, shuffle=self.shuffle,
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    values = dict(PRESETS[name], dataset=name)
    values.update(overrides)
    return RunConfig(**values)


def _coerce(kind, raw, key):
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}") from exc
    return raw


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` comments) into typed RunConfig fields."""
    kinds = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "preset":
            values["preset"] = raw
            continue
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(kinds[key], raw, key)
    return values


def load_config_file(path):
    return parse_config_text(Path(path).read_text())
