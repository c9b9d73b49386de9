import numpy as np
import pytest
from scipy import stats as sps

from shapebias.errors import ContractError
from shapebias.stimgen import (
    N_BACKGROUNDS,
    N_SHAPES,
    PALETTE,
    Mode,
    ProbeTriple,
    StimulusSpec,
    coverage,
    generate_dataset,
    make_probe_triples,
    render_stimulus,
)


def test_render_is_pure():
    spec = StimulusSpec(4, 2, 4, 123)
    assert render_stimulus(spec).image.tobytes() == render_stimulus(spec).image.tobytes()


def test_background_zero_is_flat_gray():
    for shape in range(N_SHAPES):
        spec = StimulusSpec(shape, shape % 8, 0, 7)
        img = render_stimulus(spec).image
        off = coverage(spec, 32) == 0
        assert (img[off] == (180, 180, 180)).all()


def test_fully_covered_pixels_take_palette_colour():
    spec = StimulusSpec(1, 3, 4, 9)
    img = render_stimulus(spec).image
    full = coverage(spec, 32) == 1
    assert full.sum() > 50
    assert (img[full] == PALETTE[3].astype(np.uint8)).all()


def test_foreground_fraction_sweep():
    for shape in range(N_SHAPES):
        for seed in range(100):
            frac = (coverage(StimulusSpec(shape, 0, 0, seed), 32) > 0).mean()
            assert 0.05 <= frac <= 0.60, (shape, seed, frac)


def test_out_of_range_ids():
    for bad in [StimulusSpec(12, 0, 0, 0), StimulusSpec(0, 8, 0, 0), StimulusSpec(0, 0, 5, 0)]:
        with pytest.raises(ContractError):
            render_stimulus(bad)
    with pytest.raises(ContractError):
        render_stimulus(StimulusSpec(0, 0, 0, 0), size=8)


def test_fifty_triples_structure():
    triples = make_probe_triples(50, rng_seed=0)
    assert len(triples) == 50
    idents = {(t.probe.spec.shape_id, t.probe.spec.color_id) for t in triples}
    assert len(idents) == 10
    for ident in idents:
        bgs = sorted(t.background_id for t in triples if (t.probe.spec.shape_id, t.probe.spec.color_id) == ident)
        assert bgs == list(range(N_BACKGROUNDS))
    for t in triples:
        assert t.shape_match.spec.shape_id == t.probe.spec.shape_id
        assert t.shape_match.spec.color_id != t.probe.spec.color_id
        assert t.color_match.spec.color_id == t.probe.spec.color_id
        assert t.color_match.spec.shape_id != t.probe.spec.shape_id
        assert t.probe.spec.background_id == t.shape_match.spec.background_id == t.color_match.spec.background_id


def test_triples_depend_on_seed():
    def ids(seed):
        return [(t.probe.spec.shape_id, t.probe.spec.color_id) for t in make_probe_triples(50, rng_seed=seed)]

    assert ids(0) != ids(1)
    assert ids(0) == ids(0)


def test_triple_validation_rejects_bad_triple():
    a = render_stimulus(StimulusSpec(0, 0, 0, 1))
    b = render_stimulus(StimulusSpec(0, 0, 0, 2))  # same colour: not a shape match
    with pytest.raises(ContractError):
        ProbeTriple(a, b, b, 0, 0).validate()


def test_triple_config_errors():
    with pytest.raises(ContractError):
        make_probe_triples(0)
    with pytest.raises(ContractError):
        make_probe_triples(5, n_colors=1)


def test_by_shape_dataset():
    ds = generate_dataset(Mode.BY_SHAPE, 10, 100, rng_seed=0)
    assert len(ds) == 1000
    for c in range(10):
        specs = [s for s, y in zip(ds.specs, ds.labels) if y == c]
        assert len(specs) == 100
        assert {s.shape_id for s in specs} == {c}
        assert len({s.color_id for s in specs}) >= 2


def test_by_color_dataset():
    ds = generate_dataset(Mode.BY_COLOR, 8, 100, rng_seed=0)
    for c in range(8):
        assert {s.color_id for s, y in zip(ds.specs, ds.labels) if y == c} == {c}


def test_conjunction_dataset():
    ds = generate_dataset(Mode.CONJUNCTION, 6, 5, rng_seed=3)
    pairs = {}
    for s, y in zip(ds.specs, ds.labels):
        pairs.setdefault(int(y), set()).add((s.shape_id, s.color_id))
    assert all(len(v) == 1 for v in pairs.values())
    assert len({next(iter(v)) for v in pairs.values()}) == 6


def test_dataset_purity_and_splits():
    a = generate_dataset("by_shape", 3, 4, rng_seed=5)
    b = generate_dataset("by_shape", 3, 4, rng_seed=5)
    assert a.specs == b.specs and a.images.tobytes() == b.images.tobytes()
    test = generate_dataset("by_shape", 3, 4, rng_seed=5, split="test")
    assert not set(a.specs) & set(test.specs)
    tr, ho = generate_dataset("by_shape", 12, 2, rng_seed=0).split_classes(8)
    assert tr.classes == tuple(range(8)) and ho.classes == (8, 9, 10, 11)


def test_infeasible_class_counts():
    with pytest.raises(ContractError):
        generate_dataset(Mode.BY_SHAPE, 13, 1)
    with pytest.raises(ContractError):
        generate_dataset(Mode.BY_COLOR, 9, 1)


def test_by_shape_label_independent_of_colour():
    # a 1%-level test: across 300 seeds it rejected 0.7% of the time
    ds = generate_dataset(Mode.BY_SHAPE, 10, 100, rng_seed=0)
    table = np.zeros((10, 8))
    for s, y in zip(ds.specs, ds.labels):
        table[y, s.color_id] += 1
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
    chi2 = ((table - expected) ** 2 / expected).sum()
    assert chi2 < sps.chi2.ppf(0.99, df=9 * 7)
