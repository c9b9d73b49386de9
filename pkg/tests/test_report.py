import xml.etree.ElementTree as ET

import numpy as np
import pytest

from shapebias.corpus import BiasRecord
from shapebias.report import build_report, stats_lines, write_report
from shapebias.stats import corr_t_test, pearson


def population(rng, same=False):
    recs = []
    for e in range(5):
        for step in range(0, 110, 10):
            recs.append(BiasRecord("IB", e, step, "synthetic", float(rng.uniform()), float(rng.uniform())))
        for j in range(3):
            for step in (0, 50, 100):
                b = recs[-1].bias if same else float(rng.uniform())
                recs.append(BiasRecord("MN", e * 3 + j, step, "synthetic", b, 0.9))
    return recs


def test_report_files_and_determinism(tmp_path):
    recs = population(np.random.default_rng(0))
    names = write_report(recs, tmp_path / "a")
    assert sorted(n.rsplit(".", 1)[1] for n in names) == ["csv"] * 4 + ["svg"] * 4
    write_report(recs, tmp_path / "b")
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        if n.endswith(".svg"):
            ET.parse(tmp_path / "a" / n)


def test_kde_table_integrates_to_one():
    files = build_report(population(np.random.default_rng(1)))
    rows = [line.split(",") for line in files["bias_kde.csv"].strip().split("\n")[1:]]
    grid = np.array([float(r[0]) for r in rows])
    for col in range(1, 4):
        dens = np.array([float(r[col]) for r in rows])
        assert abs(np.sum((dens[1:] + dens[:-1]) / 2 * np.diff(grid)) - 1) < 0.02


def test_identical_biases_give_null_paired_test():
    lines = stats_lines(population(np.random.default_rng(2), same=True))
    paired = [l for l in lines if "paired" in l]
    assert paired == ["MN vs IB paired t-test [synthetic]: t=0.0000 df=14 p_two_tail=1.0000 n=15"]


def test_correlation_line_is_corr_t_test_verbatim():
    recs = population(np.random.default_rng(3))
    final = [r for r in recs if r.model_kind == "IB" and r.step == 100]
    res = corr_t_test(pearson([r.bias for r in final], [r.accuracy for r in final]), len(final))
    want = (f"bias-accuracy correlation [synthetic]: rho={res.rho:.4f} t={res.t:.4f} df={res.df} "
            f"p_one_tail={res.p_one_tail:.4f}")
    assert want in stats_lines(recs)


def test_report_needs_ib_records():
    with pytest.raises(ValueError):
        build_report([BiasRecord("MN", 0, 0, "synthetic", 0.5, 0.5)])
