"""Shape-bias harness: probe triples through one-shot classifiers, sweep seeds.

The support set of every probe holds the shape match under label 0 and the
colour match under label 1, so support order never depends on how a caller
passes the pair.
"""

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .corpus import BiasRecord, load_manifest, records_write
from .embedder import EmbedderConfig, classify_accuracy, embed_batch, train_embedder
from .errors import ContractError, NumericError
from .matchnet import MatchNetConfig, MatchNetModel, mn_predict, one_shot_accuracy, predict_labels, train_matchnet
from .oneshot import Distance, NearestNeighbor, SupportSet
from .stimgen import N_SHAPES, Mode, generate_dataset, make_probe_triples

log = logging.getLogger(__name__)

SHAPE_LABEL, COLOR_LABEL = 0, 1
SYNTHETIC = "synthetic"
SYNTHETIC_NOVEL = "synthetic-novel"


class Choice(enum.Enum):
    SHAPE_MATCH = "shape"
    COLOR_MATCH = "color"

    def complement(self):
        return Choice.COLOR_MATCH if self is Choice.SHAPE_MATCH else Choice.SHAPE_MATCH


@dataclass(frozen=True)
class ProbeOutcome:
    triple_id: int
    chosen: Choice
    margin: float  # score(shape) - score(colour); exactly 0 marks a tie

    @property
    def tie(self):
        return self.margin == 0.0


@dataclass(frozen=True)
class FeatureTriple:
    """A probe triple whose members are already embedded."""

    triple_id: int
    probe: np.ndarray
    shape_match: np.ndarray
    color_match: np.ndarray


def _payload(member):
    return member.image if hasattr(member, "image") else np.asarray(member)


def probe_once(classifier, triple):
    """Run one triple as a two-way one-shot problem.

    ``classifier.label_scores(support, probe)`` returns per-label scores where
    higher wins.  A tie goes to label 0, the shape match, and shows up as a
    zero margin.
    """
    xs = np.stack([_payload(triple.shape_match), _payload(triple.color_match)])
    support = SupportSet(xs, np.array([SHAPE_LABEL, COLOR_LABEL]))
    try:
        scores = classifier.label_scores(support, _payload(triple.probe))
    except NumericError as exc:
        raise NumericError(f"triple {triple.triple_id}: {exc}") from exc
    margin = float(scores[SHAPE_LABEL] - scores[COLOR_LABEL])
    chosen = Choice.SHAPE_MATCH if margin >= 0 else Choice.COLOR_MATCH
    return ProbeOutcome(triple.triple_id, chosen, margin)


def measure_bias(outcomes):
    """Proportion of probes given the shape-match label."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ContractError("measure_bias needs at least one outcome")
    return sum(o.chosen is Choice.SHAPE_MATCH for o in outcomes) / len(outcomes)


def tie_count(outcomes):
    return sum(o.tie for o in outcomes)


class MatchNetClassifier:
    """Adapter exposing a matching network through ``label_scores``.

    ``embed_fn`` maps raw inputs to base features; by default inputs already
    are features.
    """

    def __init__(self, model, embed_fn=None):
        self.model = model
        self.embed_fn = embed_fn

    def label_scores(self, support, probe):
        xs = np.concatenate([np.asarray(support.xs), np.asarray(probe)[None]])
        feats = self.embed_fn(xs) if self.embed_fn is not None else xs.reshape(len(xs), -1)
        return mn_predict(self.model, feats[-1:], feats[:-1], support.labels, support.n_labels).data[0]


def embed_triples(ckpt, triples):
    """Embed every member of every triple in one batch."""
    images = np.stack([_payload(m) for t in triples for m in (t.probe, t.shape_match, t.color_match)])
    feats = embed_batch(ckpt, images).reshape(len(triples), 3, -1)
    return [FeatureTriple(t.triple_id, f[0], f[1], f[2]) for t, f in zip(triples, feats)]


def bias_of(classifier, triples):
    return measure_bias(probe_once(classifier, t) for t in triples)


def ib_bias(ckpt, triples, distance=Distance.EUCLIDEAN):
    return bias_of(NearestNeighbor(distance=distance), embed_triples(ckpt, triples))


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepConfig:
    n_embedder_seeds: int = 5
    mn_seeds_per_embedder: int = 3
    base_seed: int = 0
    world_seed: int = 0
    n_classes: int = 10
    n_per_class: int = 100
    n_test_per_class: int = 30
    mn_world_classes: int = N_SHAPES
    mn_per_class: int = 50
    probe_datasets: tuple = (SYNTHETIC, SYNTHETIC_NOVEL)
    n_triples: int = 50
    triple_seed: int = 0
    distance: str = "euclidean"
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    matchnet: MatchNetConfig = field(default_factory=MatchNetConfig)

    def __post_init__(self):
        self.probe_datasets = tuple(self.probe_datasets)
        self.distance = Distance(self.distance).value
        for name in ("n_embedder_seeds", "mn_seeds_per_embedder", "n_classes", "n_per_class", "n_test_per_class",
                     "mn_per_class", "n_triples"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.mn_per_class < 2:
            raise ContractError("mn_per_class must be >= 2 (support and probe images)")
        if not self.probe_datasets:
            raise ContractError("at least one probe dataset is required")
        if not 2 <= self.n_classes <= N_SHAPES:
            raise ContractError(f"n_classes must lie in [2, {N_SHAPES}]")
        if not self.matchnet.n_train_classes < self.mn_world_classes <= N_SHAPES:
            raise ContractError("matching-network world must keep held-out classes")
        if self.mn_world_classes - self.matchnet.n_train_classes < self.matchnet.way:
            raise ContractError("too few held-out classes for the episode way")

    def embedder_seeds(self):
        return [self.base_seed + i for i in range(self.n_embedder_seeds)]

    def mn_seeds(self, embedder_seed):
        return [embedder_seed * self.mn_seeds_per_embedder + j for j in range(self.mn_seeds_per_embedder)]

    def parent_seed(self, mn_seed):
        return mn_seed // self.mn_seeds_per_embedder


def dataset_name(spec):
    if spec in (SYNTHETIC, SYNTHETIC_NOVEL):
        return spec
    return os.path.splitext(os.path.basename(spec))[0]


def load_probe_datasets(config):
    """{name: triples} for each configured probe dataset (synthetic or manifest path)."""
    out = {}
    for spec in config.probe_datasets:
        if spec == SYNTHETIC:
            triples = make_probe_triples(config.n_triples, config.triple_seed, n_shapes=config.n_classes)
        elif spec == SYNTHETIC_NOVEL:
            triples = make_probe_triples(config.n_triples, config.triple_seed, n_shapes=N_SHAPES)
        else:
            triples = load_manifest(spec)
        name = dataset_name(spec)
        if name in out:
            raise ContractError(f"duplicate probe dataset name {name!r}")
        out[name] = triples
    return out


@dataclass(eq=False)
class Worlds:
    train: object
    test: object
    mn_train: object
    mn_heldout: object


def build_worlds(config):
    ws = config.world_seed
    train = generate_dataset(Mode.BY_SHAPE, config.n_classes, config.n_per_class, ws, split="train")
    test = generate_dataset(Mode.BY_SHAPE, config.n_classes, config.n_test_per_class, ws, split="test")
    mn_world = generate_dataset(Mode.BY_SHAPE, config.mn_world_classes, config.mn_per_class, ws, split="episodes")
    mn_train, mn_heldout = mn_world.split_classes(config.matchnet.n_train_classes)
    return Worlds(train, test, mn_train, mn_heldout)


_INPUTS = {}


def _cached_inputs(config):
    """Worlds and probe sets, built once per worker process and config."""
    key = repr(config)
    if key not in _INPUTS:
        _INPUTS.clear()
        _INPUTS[key] = build_worlds(config), load_probe_datasets(config)
    return _INPUTS[key]


def run_seed(config, embedder_seed, worlds=None, probes=None, out_dir=None):
    """All records for one embedder seed and its matching networks."""
    if worlds is None or probes is None:
        worlds, probes = _cached_inputs(config)
    distance = Distance(config.distance)
    emb_cfg = EmbedderConfig(**{**config.embedder.__dict__, "seed": embedder_seed,
                                "image_size": worlds.train.images.shape[1]})
    records = []
    ck_dir = os.path.join(out_dir, "checkpoints") if out_dir else None
    if ck_dir:
        os.makedirs(ck_dir, exist_ok=True)

    def on_embedder_ckpt(ck):
        acc = classify_accuracy(ck, worlds.test)
        for name, triples in probes.items():
            records.append(BiasRecord("IB", embedder_seed, ck.step, name, ib_bias(ck, triples, distance), acc))
        if ck_dir:
            ck.save(os.path.join(ck_dir, f"embedder_s{embedder_seed}_step{ck.step}.ck"))

    final = train_embedder(worlds.train, emb_cfg, on_checkpoint=on_embedder_ckpt)[-1]
    emb_path = f"checkpoints/embedder_s{embedder_seed}_step{final.step}.ck"

    mn_train_feats = embed_batch(final, worlds.mn_train.images)
    mn_heldout_feats = embed_batch(final, worlds.mn_heldout.images)
    probe_feats = {name: embed_triples(final, triples) for name, triples in probes.items()}
    mcfg = config.matchnet
    for mn_seed in config.mn_seeds(embedder_seed):
        model = MatchNetModel.init(final.feature_dim, mn_seed, mcfg.read_steps, emb_path)

        def on_mn_ckpt(step, m, losses, mn_seed=mn_seed):
            acc = one_shot_accuracy(lambda ep, f: predict_labels(m, ep, f), worlds.mn_heldout, mcfg.way,
                                    mcfg.eval_episodes, seeding.generator(mn_seed, "mn-eval"), mn_heldout_feats)
            clf = MatchNetClassifier(m)
            for name, feats in probe_feats.items():
                records.append(BiasRecord("MN", mn_seed, step, name, bias_of(clf, feats), acc))

        train_matchnet(model, worlds.mn_train, mn_train_feats, mcfg, mn_seed, on_checkpoint=on_mn_ckpt)
        if ck_dir:
            model.save(os.path.join(ck_dir, f"mn_s{mn_seed}.ck"))
    return records


def sort_records(records):
    return sorted(records, key=lambda r: (r.model_kind != "IB", r.seed, r.step, r.dataset))


def run_sweep(config, out_dir=None, jobs=1, records_name="records.csv"):
    """Train every embedder seed and its matching networks, collecting BiasRecords.

    Seed jobs may run in ``jobs`` worker processes; the parent is the single
    writer and rewrites the records file after every finished seed, so a
    failure leaves the completed seeds on disk.
    """
    if jobs < 1:
        raise ContractError("jobs must be >= 1")
    records = []
    path = os.path.join(out_dir, records_name) if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    def collect(batch):
        records.extend(batch)
        if path:
            records_write(path, sort_records(records))

    seeds = config.embedder_seeds()
    if jobs == 1:
        worlds, probes = build_worlds(config), load_probe_datasets(config)
        for s in seeds:
            collect(run_seed(config, s, worlds, probes, out_dir))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_seed, config, s, None, None, out_dir) for s in seeds]
            for fut in futures:
                collect(fut.result())
    return sort_records(records)


def final_records(records, kind=None, dataset=None):
    """The last-step record for every (kind, seed, dataset)."""
    last = {}
    for r in records:
        if (kind and r.model_kind != kind) or (dataset and r.dataset != dataset):
            continue
        k = (r.model_kind, r.seed, r.dataset)
        if k not in last or r.step > last[k].step:
            last[k] = r
    return [last[k] for k in sorted(last)]


def pair_mn_ib(records, mn_per_embedder, dataset=None):
    """(ib_bias, mn_bias) per MN seed at end of training, paired by seed lineage."""
    ib = {(r.seed, r.dataset): r for r in final_records(records, "IB", dataset)}
    pairs, missing = [], []
    for r in final_records(records, "MN", dataset):
        parent = r.seed // mn_per_embedder
        if (parent, r.dataset) not in ib:
            missing.append(r.seed)
            continue
        pairs.append((ib[parent, r.dataset].bias, r.bias))
    if missing:
        raise ContractError(f"no IB records for the parents of MN seeds {sorted(set(missing))}")
    if not pairs:
        raise ContractError("records hold no matching-network results")
    return pairs


WINDOWS = ("start", "middle", "end")


def window_records(records, window, kind="IB", fraction=0.1):
    """Records from the first, middle or last ``fraction`` of each model's checkpoints."""
    if window not in WINDOWS:
        raise ContractError(f"window must be one of {WINDOWS}")
    by_model = {}
    for r in records:
        if r.model_kind == kind:
            by_model.setdefault((r.seed, r.dataset), []).append(r)
    out = []
    for key in sorted(by_model):
        rs = sorted(by_model[key], key=lambda r: r.step)
        n = len(rs)
        w = max(1, int(round(fraction * n)))
        start = {"start": 0, "middle": (n - w) // 2, "end": n - w}[window]
        out.extend(rs[start:start + w])
    return out
