"""CSV series behind each figure, plus a minimal static SVG renderer."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..dynamics import transmission_rate
from ..errors import ConfigError, MissingSeries
from ..synthesis import SyntheticDataset
from .runner import RunArtifact, SweepArtifact, _f

PANEL_COLUMNS = ["time", "truth", "mean", "lo2sd", "hi2sd", "data"]

# figure id -> (artifact kind, required run components)
FIGURES = {
    "fig3": ("dataset", ()),
    "figA1": ("dataset", ()),
    "fig4": ("run", ("S", "I")),
    "fig5": ("run", ("S", "I", "b0", "b1")),
    "fig6": ("run", ("S", "I", "b0", "b1")),
    "fig7": ("run", ("S", "I", "beta")),
    "fig8": ("run", ("S", "I", "beta")),
    "fig10": ("run", ("S", "I")),
    "fig11": ("run", ("S", "I", "b0", "b1")),
    "fig9": ("sweep", ()),
    "figB1": ("sweep", ()),
}


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_f(x) if isinstance(x, (float, np.floating)) or x is None else x
                        for x in row])
    return path


def _dataset_panels(ds: SyntheticDataset, out: Path, prefix: str):
    dense_t = ds.truth_times
    paths = [
        _write(out / f"{prefix}_S.csv", ["time", "truth"],
               ((t, s) for t, s in zip(dense_t, ds.truth_states[:, 0]))),
        _write(out / f"{prefix}_I.csv", ["time", "truth"],
               ((t, i) for t, i in zip(dense_t, ds.truth_states[:, 1]))),
        _write(out / f"{prefix}_cases.csv", ["time", "truth", "data"],
               zip(ds.times, ds.truth_monthly_cases, ds.observations)),
    ]
    return paths


def _run_panels(art: RunArtifact, out: Path, prefix: str, required):
    res = art.results[0]
    for lab in required:
        if lab not in res.labels:
            raise MissingSeries(f"run artifact has no {lab!r} series (components: {res.labels})")
    ds = art.dataset
    truth = ds.truth_at_obs
    p = ds.params
    truths = {"S": truth[:, 0], "I": truth[:, 1],
              "b0": np.full(len(res.times), p.b0), "b1": np.full(len(res.times), p.b1),
              "beta": transmission_rate(res.times, p.b0, p.b1)}
    paths = []
    for lab in [l for l in res.labels if l in truths]:
        m, sd = res.series(lab), res.std(lab)
        rows = ((t, tr, mu, mu - 2 * s, mu + 2 * s, None)
                for t, tr, mu, s in zip(res.times, truths[lab], m, sd))
        paths.append(_write(out / f"{prefix}_{lab}.csv", PANEL_COLUMNS, rows))
    # monthly cases as the filter interprets the data: g applied to the posterior
    true_g = ds.truth_monthly_cases * (p.rho if ds.gen_case.uses_rho else 1.0)
    rows = ((t, tg, mu, mu - 2 * s, mu + 2 * s, y)
            for t, tg, mu, s, y in zip(res.times, true_g, res.cases_mean, res.cases_std,
                                       ds.observations))
    paths.append(_write(out / f"{prefix}_cases.csv", PANEL_COLUMNS, rows))
    return paths


def _sweep_panels(art: SweepArtifact, out: Path, prefix: str, metric_names):
    paths = []
    for metric in metric_names:
        table = art.table(metric)
        if not table:
            raise MissingSeries(f"sweep artifact has no {metric!r} values")
        for case in sorted({r["case"] for r in table}):
            rows = ((float(r["sigma_d"]), r["mean"], r["median"], r["n"])
                    for r in table if r["case"] == case)
            paths.append(_write(out / f"{prefix}_{metric}_case{case}.csv",
                                ["sigma_d", "mean", "median", "n"], rows))
    return paths


def emit_plot_data(artifact, figure: str, out_dir, svg: bool = False) -> list[Path]:
    """Write one CSV per panel of ``figure`` into ``out_dir``.

    ``artifact`` is a :class:`RunArtifact`, :class:`SweepArtifact` or
    :class:`SyntheticDataset` matching the figure.
    """
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}", "figure")
    kind, required = FIGURES[figure]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "dataset":
        if isinstance(artifact, RunArtifact):
            artifact = artifact.dataset
        if not isinstance(artifact, SyntheticDataset):
            raise MissingSeries(f"{figure} needs a dataset or run artifact")
        paths = _dataset_panels(artifact, out, figure)
    elif kind == "run":
        if not isinstance(artifact, RunArtifact):
            raise MissingSeries(f"{figure} needs a run artifact")
        paths = _run_panels(artifact, out, figure, required)
    else:
        if not isinstance(artifact, SweepArtifact):
            raise MissingSeries(f"{figure} needs a sweep artifact")
        metrics = ("gamma",) if figure == "figB1" else ("mse_s", "mse_i")
        paths = _sweep_panels(artifact, out, figure, metrics)
    if svg:
        for p in list(paths):
            paths.append(render_svg(p))
    return paths


def render_svg(csv_path, width=640, height=320) -> Path:
    """Line chart of every numeric column against the first one."""
    csv_path = Path(csv_path)
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]

    def num(v):
        return float(v) if v not in ("", None) else np.nan

    data = np.array([[num(v) for v in r] for r in body], dtype=float)
    x = data[:, 0]
    cols = [(h, data[:, k]) for k, h in enumerate(header) if k > 0 and h != "n"]
    ys = np.concatenate([c for _, c in cols]) if cols else np.array([0.0])
    ys = ys[np.isfinite(ys)]
    lo, hi = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    hi = hi if hi > lo else lo + 1.0
    xlo, xhi = np.nanmin(x), np.nanmax(x)
    xhi = xhi if xhi > xlo else xlo + 1.0
    pad = 40
    colours = ["#000000", "#c0392b", "#7f8c8d", "#7f8c8d", "#2c3e50", "#2980b9"]

    def sx(v):
        return pad + (v - xlo) / (xhi - xlo) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20" font-size="12">{escape(csv_path.stem)}</text>']
    for k, (name, y) in enumerate(cols):
        ok = np.isfinite(y) & np.isfinite(x)
        if not ok.any():
            continue
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x[ok], y[ok]))
        colour = colours[k % len(colours)]
        if name == "data":
            parts += [f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="1.5" fill="{colour}"/>'
                      for a, b in zip(x[ok], y[ok])]
        else:
            parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
        parts.append(f'<text x="{width - pad - 80}" y="{20 + 12 * k}" font-size="10" '
                     f'fill="{colour}">{escape(name)}</text>')
    parts.append("</svg>")
    out = csv_path.with_suffix(".svg")
    out.write_text("\n".join(parts))
    return out
