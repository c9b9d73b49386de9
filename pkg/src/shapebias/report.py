"""CSV tables and hand-written SVG plots for a records file.

Four figures, each with the CSV it was drawn from: bias over training per
seed, accuracy over training per seed, start/middle/end bias densities, and
MN bias against the bias of its parent embedder.
"""

import csv
import io
import os
from xml.sax.saxutils import escape

import numpy as np

from .bias import WINDOWS, final_records, pair_mn_ib, window_records
from .errors import ContractError
from .stats import corr_t_test, kde, mean_std, paired_t_test, pearson

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#e6a700", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#17becf", "#bcbd22")
KDE_GRID = np.linspace(-0.5, 1.5, 401)


def _fmt(v):
    return f"{v:.6g}"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        return H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _frame(ax, title, xlabel, ylabel):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    x_left, x_right = ax.px(ax.x0), ax.px(ax.x1)
    y_bot, y_top = ax.py(ax.y0), ax.py(ax.y1)
    out.append(f'<rect x="{x_left:.1f}" y="{y_top:.1f}" width="{x_right - x_left:.1f}" '
               f'height="{y_bot - y_top:.1f}" fill="none" stroke="black"/>')
    for t in np.linspace(ax.x0, ax.x1, 5):
        x = ax.px(t)
        out.append(f'<line x1="{x:.1f}" y1="{y_bot:.1f}" x2="{x:.1f}" y2="{y_bot + 5:.1f}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{y_bot + 18:.1f}" text-anchor="middle">{_fmt(t)}</text>')
    for t in np.linspace(ax.y0, ax.y1, 5):
        y = ax.py(t)
        out.append(f'<line x1="{x_left - 5:.1f}" y1="{y:.1f}" x2="{x_left:.1f}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{x_left - 8:.1f}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{(x_left + x_right) / 2:.1f}" y="{H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(y_top + y_bot) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y_top + y_bot) / 2:.1f})">{escape(ylabel)}</text>')
    return out


def _legend(names):
    out = []
    for i, name in enumerate(names):
        y = TOP + 10 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<line x1="{W - RIGHT + 15}" y1="{y}" x2="{W - RIGHT + 35}" y2="{y}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 40}" y="{y + 4}">{escape(name)}</text>')
    return out


def line_plot(series, title, xlabel, ylabel, ylim=None):
    """``series`` maps a legend name to (xs, ys); returns SVG text."""
    if not series:
        raise ContractError(f"nothing to plot for {title!r}")
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ys = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    ax = _Axes((xs.min(), xs.max()), ylim or (ys.min(), ys.max()))
    out = _frame(ax, title, xlabel, ylabel)
    for i, (name, (sx, sy)) in enumerate(series.items()):
        pts = " ".join(f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5"/>')
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_plot(points, title, xlabel, ylabel):
    ax = _Axes((0.0, 1.0), (0.0, 1.0))
    out = _frame(ax, title, xlabel, ylabel)
    out.append(f'<line x1="{ax.px(0):.1f}" y1="{ax.py(0):.1f}" x2="{ax.px(1):.1f}" y2="{ax.py(1):.1f}" '
               'stroke="#999999" stroke-dasharray="4 3"/>')
    for x, y in points:
        out.append(f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="4" fill="{PALETTE[0]}" '
                   'fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _per_seed(records, field):
    rows, series = [], {}
    for r in sorted((r for r in records if r.model_kind == "IB"), key=lambda r: (r.dataset, r.seed, r.step)):
        value = getattr(r, field)
        rows.append([r.dataset, r.seed, r.step, repr(value)])
        series.setdefault(f"{r.dataset} s{r.seed}", ([], []))
        series[f"{r.dataset} s{r.seed}"][0].append(r.step)
        series[f"{r.dataset} s{r.seed}"][1].append(value)
    return rows, series


def _accuracy_series(records):
    # accuracy does not depend on the probe dataset, so keep one line per seed
    seen, rows, series = set(), [], {}
    for r in sorted((r for r in records if r.model_kind == "IB"), key=lambda r: (r.seed, r.step, r.dataset)):
        if (r.seed, r.step) in seen:
            continue
        seen.add((r.seed, r.step))
        rows.append([r.seed, r.step, repr(r.accuracy)])
        xs, ys = series.setdefault(f"s{r.seed}", ([], []))
        xs.append(r.step)
        ys.append(r.accuracy)
    return rows, series


def build_report(records, bandwidth=None, mn_per_embedder=3):
    """{file name: text} for every report artifact."""
    if not any(r.model_kind == "IB" for r in records):
        raise ContractError("records hold no IB results")
    files = {}
    rows, series = _per_seed(records, "bias")
    files["bias_vs_step.csv"] = _csv(["dataset", "seed", "step", "bias"], rows)
    files["bias_vs_step.svg"] = line_plot(series, "Shape bias over training", "step", "B_s", (0.0, 1.0))

    rows, series = _accuracy_series(records)
    files["accuracy_vs_step.csv"] = _csv(["seed", "step", "accuracy"], rows)
    files["accuracy_vs_step.svg"] = line_plot(series, "Held-out accuracy over training", "step", "accuracy",
                                              (0.0, 1.0))

    rows, series = [], {}
    dens = {}
    for w in WINDOWS:
        values = [r.bias for r in window_records(records, w)]
        dens[w] = kde(values, KDE_GRID, bandwidth)
        series[w] = (KDE_GRID, dens[w].density)
    for i, g in enumerate(KDE_GRID):
        rows.append([_fmt(g)] + [repr(float(dens[w].density[i])) for w in WINDOWS])
    files["bias_kde.csv"] = _csv(["bias", *WINDOWS], rows)
    files["bias_kde.svg"] = line_plot(series, "Bias density at start, middle and end of training", "B_s",
                                      "density")

    try:
        pairs = pair_mn_ib(records, mn_per_embedder)
    except ContractError:
        pairs = []
    mn_final = final_records(records, "MN")
    files["mn_vs_ib.csv"] = _csv(["mn_seed", "embedder_seed", "dataset", "ib_bias", "mn_bias"],
                                 [[r.seed, r.seed // mn_per_embedder, r.dataset, repr(ib), repr(mn)]
                                  for r, (ib, mn) in zip(mn_final, pairs)])
    files["mn_vs_ib.svg"] = scatter_plot(pairs, "MN bias against parent IB bias", "IB bias", "MN bias")
    return files


def write_report(records, out_dir, bandwidth=None, mn_per_embedder=3):
    os.makedirs(out_dir, exist_ok=True)
    files = build_report(records, bandwidth, mn_per_embedder)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
    return sorted(files)


def stats_lines(records, mn_per_embedder=3):
    """Human-readable summary lines for the ``stats`` command."""
    lines = []
    datasets = sorted({r.dataset for r in records})
    for ds in datasets:
        for kind in ("IB", "MN"):
            final = final_records(records, kind, ds)
            if len(final) >= 2:
                m, s = mean_std([r.bias for r in final])
                lines.append(f"{kind} final bias [{ds}]: mean={m:.4f} std={s:.4f} n={len(final)} (sample std)")
            elif final:
                lines.append(f"{kind} final bias [{ds}]: value={final[0].bias:.4f} n=1")
        ib = final_records(records, "IB", ds)
        if len(ib) >= 3:
            try:
                rho = pearson([r.bias for r in ib], [r.accuracy for r in ib])
                res = corr_t_test(rho, len(ib))
                lines.append(f"bias-accuracy correlation [{ds}]: rho={res.rho:.4f} t={res.t:.4f} df={res.df} "
                             f"p_one_tail={res.p_one_tail:.4f}")
            except ContractError as exc:
                lines.append(f"bias-accuracy correlation [{ds}]: undefined ({exc})")
        try:
            pairs = pair_mn_ib(records, mn_per_embedder, ds)
        except ContractError:
            continue
        if len(pairs) >= 2:
            ibv, mnv = zip(*pairs)
            try:
                res = paired_t_test(mnv, ibv)
                lines.append(f"MN vs IB paired t-test [{ds}]: t={res.t:.4f} df={res.df} "
                             f"p_two_tail={res.p_two_tail:.4f} n={len(pairs)}")
            except ContractError as exc:
                lines.append(f"MN vs IB paired t-test [{ds}]: undefined ({exc})")
    return lines
