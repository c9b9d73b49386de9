"""Command-line entry point: ``shapebias <command> ...``.

Exit codes: 0 success, 1 numeric or training failure, 2 usage or config
failure.
"""

import argparse
import csv
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__, seeding
from .bias import MatchNetClassifier, bias_of, build_worlds, embed_triples, ib_bias, run_sweep
from .config import DEFAULT_TOML, RunConfig, load_config
from .corpus import load_manifest, ppm_save, records_read, write_manifest
from .embedder import EmbedderCheckpoint, EmbedderConfig, embed_batch, train_embedder
from .errors import ContractError, DecodeError, NumericError, TrainingError
from .matchnet import MatchNetModel, one_shot_accuracy, predict_labels, train_matchnet
from .oneshot import Distance
from .report import stats_lines, write_report
from .stimgen import N_BACKGROUNDS, Mode, generate_dataset, make_probe_triples

log = logging.getLogger("shapebias")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    sweep = cfg.sweep
    if getattr(args, "distance", None):
        sweep.distance = Distance(args.distance).value
    return cfg


def _out(args, cfg):
    return args.out if getattr(args, "out", None) else cfg.out_dir


def _tsv(*fields):
    print("\t".join(str(f) for f in fields), flush=True)


def cmd_init_config(args):
    if os.path.exists(args.path) and not args.force:
        raise ContractError(f"{args.path} exists (use --force to overwrite)")
    with open(args.path, "w") as fh:
        fh.write(DEFAULT_TOML)
    return EXIT_OK


def _write_world(dataset, directory):
    os.makedirs(directory, exist_ok=True)
    rows = []
    for i, (image, label) in enumerate(zip(dataset.images, dataset.labels)):
        name = f"img{i:05d}.ppm"
        ppm_save(os.path.join(directory, name), image)
        rows.append([name, int(label)])
    with open(os.path.join(directory, "labels.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "label"])
        w.writerows(rows)


def cmd_gen_stimuli(args):
    cfg = _config(args)
    sweep = cfg.sweep
    out = _out(args, cfg)
    n = args.n if args.n is not None else sweep.n_triples
    seed = args.seed if args.seed is not None else sweep.triple_seed
    if n % N_BACKGROUNDS:
        warnings.warn(f"{n} triples is not a multiple of {N_BACKGROUNDS}: background balance is broken",
                      stacklevel=1)
        print(f"warning: {n} triples is not a multiple of {N_BACKGROUNDS}; backgrounds are unbalanced",
              file=sys.stderr)
    triples = make_probe_triples(n, seed, n_shapes=sweep.n_classes)
    write_manifest(os.path.join(out, "probes", "manifest.csv"), triples)
    if not args.no_worlds:
        worlds = build_worlds(sweep)
        for name in ("train", "test", "mn_train", "mn_heldout"):
            _write_world(getattr(worlds, name), os.path.join(out, "worlds", name))
    _tsv("triples", n, os.path.join(out, "probes", "manifest.csv"))
    return EXIT_OK


def cmd_train_embedder(args):
    cfg = _config(args)
    sweep = cfg.sweep
    out = _out(args, cfg)
    seed = args.seed if args.seed is not None else sweep.base_seed
    mode = Mode(args.world)
    n_classes = sweep.n_classes if mode is Mode.BY_SHAPE else min(sweep.n_classes, 8)
    train = generate_dataset(mode, n_classes, sweep.n_per_class, sweep.world_seed, split="train")
    emb_cfg = EmbedderConfig(**{**sweep.embedder.__dict__, "seed": seed})
    os.makedirs(out, exist_ok=True)
    _tsv("step", "loss", "accuracy")

    def on_ckpt(ck):
        ck.save(os.path.join(out, f"embedder_{mode.value}_s{seed}_step{ck.step}.ck"))
        _tsv(ck.step, f"{ck.train_loss:.6f}", f"{ck.train_accuracy:.6f}")

    train_embedder(train, emb_cfg, on_checkpoint=on_ckpt)
    return EXIT_OK


def _load_embedder(path):
    if not os.path.exists(path):
        raise ContractError(f"embedder checkpoint not found: {path}")
    return EmbedderCheckpoint.load(path)


def cmd_train_mn(args):
    cfg = _config(args)
    sweep = cfg.sweep
    ckpt = _load_embedder(args.embedder)
    out = _out(args, cfg)
    seed = args.seed if args.seed is not None else sweep.base_seed
    worlds = build_worlds(sweep)
    train_feats = embed_batch(ckpt, worlds.mn_train.images)
    heldout_feats = embed_batch(ckpt, worlds.mn_heldout.images)
    mcfg = sweep.matchnet
    model = MatchNetModel.init(ckpt.feature_dim, seed, mcfg.read_steps, os.path.abspath(args.embedder))
    os.makedirs(out, exist_ok=True)
    _tsv("step", "loss", "accuracy")

    def on_ckpt(step, m, losses):
        acc = one_shot_accuracy(lambda ep, f: predict_labels(m, ep, f), worlds.mn_heldout, mcfg.way,
                                mcfg.eval_episodes, seeding.generator(seed, "mn-eval"), heldout_feats)
        recent = losses[-mcfg.checkpoint_interval:]
        _tsv(step, f"{np.mean(recent):.6f}" if recent else "nan", f"{acc:.6f}")

    train_matchnet(model, worlds.mn_train, train_feats, mcfg, seed, on_checkpoint=on_ckpt)
    path = os.path.join(out, f"mn_s{seed}.ck")
    model.save(path)
    if model.clamp_count:
        print(f"warning: {model.clamp_count} probabilities clamped", file=sys.stderr)
    return EXIT_OK


def cmd_probe(args):
    cfg = _config(args)
    ckpt = _load_embedder(args.checkpoint)
    triples = load_manifest(args.manifest)
    distance = Distance(args.distance or cfg.sweep.distance)
    if args.mn:
        model = MatchNetModel.load(args.mn)
        value = bias_of(MatchNetClassifier(model), embed_triples(ckpt, triples))
    else:
        value = ib_bias(ckpt, triples, distance)
    _tsv("B_s", f"{value:.6f}", len(triples))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    if args.seed is not None:
        cfg.sweep.base_seed = args.seed
    out = _out(args, cfg)
    jobs = args.jobs or cfg.jobs
    records = run_sweep(cfg.sweep, out, jobs)
    _tsv("records", len(records), os.path.join(out, "records.csv"))
    return EXIT_OK


def _mn_per(args):
    if getattr(args, "config", None):
        return load_config(args.config).sweep.mn_seeds_per_embedder
    return args.mn_per_embedder


def cmd_stats(args):
    records = records_read(args.records)
    for line in stats_lines(records, _mn_per(args)):
        print(line)
    return EXIT_OK


def cmd_report(args):
    records = records_read(args.records)
    for name in write_report(records, args.out, args.bandwidth, _mn_per(args)):
        print(os.path.join(args.out, name))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="shapebias", description="Shape-bias probes for one-shot learners.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="TOML run config (defaults apply when omitted)")
        if out:
            sp.add_argument("--out", help="output directory (overrides [output] dir)")

    sp = sub.add_parser("init-config", help="write the default TOML config")
    sp.add_argument("path")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_init_config)

    sp = sub.add_parser("gen-stimuli", help="write probe triples and training worlds as PPM")
    common(sp)
    sp.add_argument("--n", type=int, help="number of probe triples")
    sp.add_argument("--seed", type=int, help="probe triple seed")
    sp.add_argument("--no-worlds", action="store_true", help="skip writing the labeled worlds")
    sp.set_defaults(func=cmd_gen_stimuli)

    sp = sub.add_parser("train-embedder", help="train the feature embedder")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--world", choices=[m.value for m in (Mode.BY_SHAPE, Mode.BY_COLOR)], default="by_shape")
    sp.set_defaults(func=cmd_train_embedder)

    sp = sub.add_parser("train-mn", help="train a matching network on a frozen embedder")
    common(sp)
    sp.add_argument("--embedder", required=True, help="embedder checkpoint")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_train_mn)

    sp = sub.add_parser("probe", help="measure B_s of one checkpoint on one manifest")
    common(sp, out=False)
    sp.add_argument("--checkpoint", required=True, help="embedder checkpoint")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--mn", help="matching-network checkpoint (probe the MN instead of the IB)")
    sp.add_argument("--distance", choices=[d.value for d in Distance])
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("sweep", help="seeds x checkpoints x datasets bias sweep")
    common(sp)
    sp.add_argument("--seed", type=int, help="base embedder seed")
    sp.add_argument("--jobs", type=int, help="concurrent seed jobs")
    sp.add_argument("--distance", choices=[d.value for d in Distance])
    sp.set_defaults(func=cmd_sweep)

    for name, func, helptext in (("stats", cmd_stats, "population statistics of a records file"),
                                 ("report", cmd_report, "CSV tables and SVG plots of a records file")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--records", required=True)
        sp.add_argument("--config", help="config used for the sweep (for seed lineage)")
        sp.add_argument("--mn-per-embedder", type=int, default=3)
        if name == "report":
            sp.add_argument("--out", required=True)
            sp.add_argument("--bandwidth", type=float, help="KDE bandwidth (Silverman when omitted)")
        sp.set_defaults(func=func)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NumericError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContractError, DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
