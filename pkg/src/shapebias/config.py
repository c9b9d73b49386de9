"""TOML run configuration binding every experiment default.

Unknown sections or keys are rejected and each value is range-checked when
the file is loaded.  Manifest paths are resolved against the config file's
directory.
"""

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bias import SYNTHETIC, SYNTHETIC_NOVEL, SweepConfig
from .embedder import EmbedderConfig
from .errors import ContractError
from .matchnet import MatchNetConfig

# section -> key -> (type, predicate, description of valid range)
_POS = (lambda v: v > 0, "> 0")
_NONNEG = (lambda v: v >= 0, ">= 0")
_PROB = (lambda v: 0 < v < 1, "in (0, 1)")

SCHEMA = {
    "world": {
        "seed": (int, *_NONNEG),
        "n_classes": (int, lambda v: 2 <= v <= 12, "in [2, 12]"),
        "n_per_class": (int, *_POS),
        "n_test_per_class": (int, *_POS),
        "mn_world_classes": (int, lambda v: 3 <= v <= 12, "in [3, 12]"),
        "mn_per_class": (int, lambda v: v >= 2, ">= 2"),
    },
    "embedder": {
        "feature_dim": (int, *_POS),
        "steps": (int, *_NONNEG),
        "batch_size": (int, *_POS),
        "optimizer": (str, lambda v: v in ("rmsprop", "sgd"), "rmsprop or sgd"),
        "lr": (float, *_POS),
        "decay": (float, *_PROB),
        "eps": (float, *_POS),
        "checkpoint_interval": (int, *_POS),
    },
    "matchnet": {
        "way": (int, lambda v: v >= 2, ">= 2"),
        "episodes": (int, *_NONNEG),
        "lr": (float, *_POS),
        "read_steps": (int, *_NONNEG),
        "checkpoint_interval": (int, *_POS),
        "eval_episodes": (int, *_POS),
        "n_train_classes": (int, lambda v: v >= 2, ">= 2"),
    },
    "sweep": {
        "n_embedder_seeds": (int, *_POS),
        "mn_seeds_per_embedder": (int, *_POS),
        "base_seed": (int, *_NONNEG),
        "distance": (str, lambda v: v in ("euclidean", "cosine"), "euclidean or cosine"),
        "jobs": (int, *_POS),
    },
    "probes": {
        "n_triples": (int, *_POS),
        "seed": (int, *_NONNEG),
        "datasets": (list, lambda v: len(v) > 0 and all(isinstance(s, str) for s in v), "non-empty list of strings"),
    },
    "output": {
        "dir": (str, lambda v: bool(v), "non-empty"),
    },
}


@dataclass
class RunConfig:
    sweep: SweepConfig = field(default_factory=SweepConfig)
    out_dir: str = "runs"
    jobs: int = 1
    source: str = ""


def _check(section, key, value):
    typ, ok, desc = SCHEMA[section][key]
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(value, bool) or not isinstance(value, typ):
        raise ContractError(f"[{section}] {key} must be {typ.__name__}, got {value!r}")
    if not ok(value):
        raise ContractError(f"[{section}] {key} must be {desc}, got {value!r}")
    return value


def parse_config(data, base_dir="."):
    """Build a RunConfig from a parsed TOML mapping."""
    values = {}
    for section, table in data.items():
        if section not in SCHEMA:
            raise ContractError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ContractError(f"[{section}] must be a table")
        for key, value in table.items():
            if key not in SCHEMA[section]:
                raise ContractError(f"unknown key {key!r} in [{section}]")
            values[section, key] = _check(section, key, value)

    def pick(section, names):
        return {n: values[section, n] for n in names if (section, n) in values}

    emb = EmbedderConfig(**pick("embedder", SCHEMA["embedder"]))
    mn = MatchNetConfig(**pick("matchnet", SCHEMA["matchnet"]))
    world = pick("world", SCHEMA["world"])
    datasets = values.get(("probes", "datasets"), [SYNTHETIC, SYNTHETIC_NOVEL])
    datasets = [d if d in (SYNTHETIC, SYNTHETIC_NOVEL) else os.path.join(base_dir, d) for d in datasets]
    sweep_kw = pick("sweep", ("n_embedder_seeds", "mn_seeds_per_embedder", "base_seed", "distance"))
    if "seed" in world:
        sweep_kw["world_seed"] = world.pop("seed")
    sweep_kw.update(world)
    if ("probes", "n_triples") in values:
        sweep_kw["n_triples"] = values["probes", "n_triples"]
    if ("probes", "seed") in values:
        sweep_kw["triple_seed"] = values["probes", "seed"]
    sweep = SweepConfig(embedder=emb, matchnet=mn, probe_datasets=tuple(datasets), **sweep_kw)
    out_dir = values.get(("output", "dir"), "runs")
    return RunConfig(sweep, os.path.join(base_dir, out_dir), values.get(("sweep", "jobs"), 1))


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ContractError(f"{path}: {exc}") from exc
    cfg = parse_config(data, os.path.dirname(os.path.abspath(path)))
    cfg.source = path
    return cfg


DEFAULT_TOML = """\
[world]
seed = 0
n_classes = 10
n_per_class = 100
n_test_per_class = 30
mn_world_classes = 12
mn_per_class = 50

[embedder]
feature_dim = 64
steps = 1000
batch_size = 32
optimizer = "rmsprop"
lr = 0.001
decay = 0.9
eps = 1e-8
checkpoint_interval = 100

[matchnet]
way = 2
episodes = 1000
lr = 0.1
read_steps = 2
checkpoint_interval = 100
eval_episodes = 200
n_train_classes = 8

[sweep]
n_embedder_seeds = 5
mn_seeds_per_embedder = 3
base_seed = 0
distance = "euclidean"
jobs = 1

[probes]
n_triples = 50
seed = 0
datasets = ["synthetic", "synthetic-novel"]

[output]
dir = "runs"
"""
