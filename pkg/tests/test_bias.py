import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import shapebias.bias as bias_mod
from shapebias.bias import (
    Choice,
    FeatureTriple,
    MatchNetClassifier,
    ProbeOutcome,
    SweepConfig,
    bias_of,
    measure_bias,
    pair_mn_ib,
    probe_once,
    run_sweep,
    tie_count,
    window_records,
)
from shapebias.corpus import BiasRecord, records_read
from shapebias.embedder import EmbedderConfig
from shapebias.errors import ContractError, NumericError
from shapebias.matchnet import MatchNetConfig, MatchNetModel
from shapebias.oneshot import Distance, NearestNeighbor, SupportSet

S, C = Choice.SHAPE_MATCH, Choice.COLOR_MATCH


def ft(i, probe, s, c):
    return FeatureTriple(i, np.asarray(probe, float), np.asarray(s, float), np.asarray(c, float))


def test_probe_once_geometry_and_order():
    t = ft(0, [1, 0], [0.99, 0], [0, 1])
    out = probe_once(NearestNeighbor(), t)
    assert out.chosen is S and out.margin > 0


@pytest.mark.parametrize("kind", list(Distance))
def test_ib_scores_ignore_support_order(kind):
    rng = np.random.default_rng(3)
    clf = NearestNeighbor(distance=kind)
    for _ in range(100):
        xs, probe = rng.normal(size=(2, 5)), rng.normal(size=5)
        forward = clf.label_scores(SupportSet(xs, np.array([0, 1])), probe)
        backward = clf.label_scores(SupportSet(xs[::-1], np.array([1, 0])), probe)
        assert np.array_equal(forward, backward)


def test_tie_counts_as_shape_and_is_flagged():
    out = probe_once(NearestNeighbor(), ft(3, [0, 0], [1, 0], [0, 1]))
    assert out.chosen is S and out.margin == 0.0 and out.tie
    assert tie_count([out]) == 1


def _oracle(t, kind):
    def dist(a, b):
        if kind is Distance.EUCLIDEAN:
            return float(np.sqrt(((a - b) ** 2).sum()))
        return 1.0 - float(a @ b / np.sqrt((a @ a) * (b @ b)))

    return S if dist(t.probe, t.shape_match) <= dist(t.probe, t.color_match) else C


@pytest.mark.parametrize("kind", list(Distance))
def test_hand_built_triples_match_brute_force(kind):
    triples = [
        ft(0, [1, 0, 0], [0.9, 0.1, 0], [0, 1, 0]),
        ft(1, [0, 1, 0], [1, 0, 0], [0, 0.8, 0.3]),
        ft(2, [1, 1, 0], [2, 2.1, 0], [1, 0.5, 0]),
        ft(3, [0, 0, 1], [0.2, 0, 1], [0, 0.3, 1]),
    ]
    clf = NearestNeighbor(distance=kind)
    got = [probe_once(clf, t).chosen for t in triples]
    assert got == [_oracle(t, kind) for t in triples]


def test_cosine_degenerate_names_triple():
    with pytest.raises(NumericError, match="triple 7"):
        probe_once(NearestNeighbor(distance=Distance.COSINE_DISTANCE), ft(7, [0, 0], [1, 0], [0, 1]))


def test_measure_bias_examples():
    mk = lambda cs: [ProbeOutcome(i, c, 1.0) for i, c in enumerate(cs)]
    assert measure_bias(mk([S, S, C, S])) == 0.75
    assert measure_bias(mk([C, C])) == 0.0
    with pytest.raises(ContractError):
        measure_bias([])


@given(st.lists(st.booleans(), min_size=1, max_size=200))
def test_measure_bias_recount_and_complement(flags):
    outcomes = [ProbeOutcome(i, S if f else C, 1.0) for i, f in enumerate(flags)]
    b = measure_bias(outcomes)
    assert b == sum(flags) / len(flags)
    flipped = [ProbeOutcome(o.triple_id, o.chosen.complement(), o.margin) for o in outcomes]
    assert measure_bias(flipped) == (len(flags) - sum(flags)) / len(flags)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_label_swap_complement(seed):
    rng = np.random.default_rng(seed)
    triples = [ft(i, *rng.normal(size=(3, 4))) for i in range(20)]
    swapped = [FeatureTriple(t.triple_id, t.probe, t.color_match, t.shape_match) for t in triples]
    for kind in Distance:
        clf = NearestNeighbor(distance=kind)
        outs = [probe_once(clf, t) for t in triples]
        if tie_count(outs):
            continue
        n_shape = sum(o.chosen is S for o in outs)
        swapped_shape = sum(probe_once(clf, t).chosen is S for t in swapped)
        assert swapped_shape == len(outs) - n_shape
        assert bias_of(clf, swapped) == (len(outs) - n_shape) / len(outs)


def test_zero_weight_mn_reproduces_cosine_ib():
    rng = np.random.default_rng(0)
    triples = [ft(i, *np.abs(rng.normal(size=(3, 8)))) for i in range(200)]
    mn = MatchNetClassifier(MatchNetModel.zeros(8))
    ib = NearestNeighbor(distance=Distance.COSINE_DISTANCE)
    assert [probe_once(mn, t).chosen for t in triples] == [probe_once(ib, t).chosen for t in triples]


def _rec(kind, seed, step, b, ds="synthetic"):
    return BiasRecord(kind, seed, step, ds, b, 0.5)


def test_pair_mn_ib_lineage():
    recs = [_rec("IB", e, s, 0.1 * e + s / 1000) for e in range(2) for s in (0, 10)]
    recs += [_rec("MN", m, s, 0.5) for m in range(6) for s in (0, 5)]
    pairs = pair_mn_ib(recs, 3)
    assert pairs == [(0.01, 0.5)] * 3 + [(0.11, 0.5)] * 3
    with pytest.raises(ContractError, match="6"):
        pair_mn_ib(recs + [_rec("MN", 6, 5, 0.5)], 3)


def test_windows():
    recs = [_rec("IB", 0, s, s / 200) for s in range(0, 200, 10)]  # 20 checkpoints
    assert [r.step for r in window_records(recs, "start")] == [0, 10]
    assert [r.step for r in window_records(recs, "middle")] == [90, 100]
    assert [r.step for r in window_records(recs, "end")] == [180, 190]
    with pytest.raises(ContractError):
        window_records(recs, "late")


def tiny_config(**kw):
    base = dict(
        n_embedder_seeds=2, mn_seeds_per_embedder=2, n_classes=3, n_per_class=6, n_test_per_class=3,
        mn_world_classes=6, mn_per_class=3, n_triples=5,
        embedder=EmbedderConfig(feature_dim=8, channels=(4, 4), steps=20, batch_size=8, checkpoint_interval=10),
        matchnet=MatchNetConfig(episodes=20, checkpoint_interval=10, eval_episodes=5, n_train_classes=3),
    )
    base.update(kw)
    return SweepConfig(**base)


@pytest.mark.slow
def test_tiny_sweep_counts_and_determinism(tmp_path):
    cfg = tiny_config()
    recs = run_sweep(cfg, tmp_path / "a")
    ib = [r for r in recs if r.model_kind == "IB"]
    mn = [r for r in recs if r.model_kind == "MN"]
    assert len(ib) == 2 * 3 * 2  # seeds x checkpoints x datasets
    assert len(mn) == 2 * 2 * 3 * 2
    assert all(0 <= r.bias <= 1 and 0 <= r.accuracy <= 1 for r in recs)
    assert {r.step for r in ib} == {0, 10, 20}
    assert records_read(tmp_path / "a" / "records.csv") == recs
    run_sweep(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "records.csv").read_bytes() == (tmp_path / "b" / "records.csv").read_bytes()
    assert len(pair_mn_ib(recs, 2, "synthetic")) == 4


@pytest.mark.slow
def test_parallel_jobs_match_serial(tmp_path):
    cfg = tiny_config(mn_seeds_per_embedder=1)
    run_sweep(cfg, tmp_path / "serial")
    run_sweep(cfg, tmp_path / "parallel", jobs=2)
    assert (tmp_path / "serial" / "records.csv").read_bytes() == (tmp_path / "parallel" / "records.csv").read_bytes()


@pytest.mark.slow
def test_sweep_flushes_completed_seeds(tmp_path, monkeypatch):
    real = bias_mod.run_seed

    def flaky(config, seed, *a, **k):
        if seed == 1:
            raise NumericError("boom")
        return real(config, seed, *a, **k)

    monkeypatch.setattr(bias_mod, "run_seed", flaky)
    with pytest.raises(NumericError):
        run_sweep(tiny_config(mn_seeds_per_embedder=1), tmp_path)
    saved = records_read(tmp_path / "records.csv")
    assert saved and {r.seed for r in saved if r.model_kind == "IB"} == {0}


def test_sweep_config_contracts():
    with pytest.raises(ContractError):
        SweepConfig(n_embedder_seeds=0)
    with pytest.raises(ContractError):
        SweepConfig(probe_datasets=())
    with pytest.raises(ValueError):
        SweepConfig(distance="manhattan")
    cfg = SweepConfig(mn_seeds_per_embedder=3)
    assert cfg.mn_seeds(4) == [12, 13, 14] and cfg.parent_seed(14) == 4
