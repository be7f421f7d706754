"""Static figures rendered from the schema-tagged CSV outputs (nothing else is read)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

from .errors import FormatError
from .io import read_csv

PROPS = ("sigma", "epsilon", "rho")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _tissue_stats(rows, out: Path, stem: str):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    by = defaultdict(dict)
    for r in rows:
        by[r["tissue"]][r["pipeline"]] = r
    tissues = list(by)
    for ax, p in zip(axes, PROPS):
        for k, pipe in enumerate(("standard", "learned")):
            xs = [i + 0.38 * k for i in range(len(tissues))]
            means = [float(by[t][pipe][f"{p}_mean"]) if pipe in by[t] else 0.0 for t in tissues]
            stds = [float(by[t][pipe][f"{p}_std"]) if pipe in by[t] else 0.0 for t in tissues]
            ax.bar(xs, means, 0.38, yerr=stds, label=pipe, capsize=2)
        ax.set_xticks([i + 0.19 for i in range(len(tissues))], tissues, rotation=45, ha="right")
        ax.set_title(p)
    axes[0].legend()
    fig.tight_layout()
    path = out / f"{stem}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def _sweep(rows, out: Path, stem: str):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    series = defaultdict(list)
    for r in rows:
        series[r["tissue"]].append(r)
    for ax, p in zip(axes, PROPS):
        for tissue, rs in series.items():
            rs = sorted(rs, key=lambda r: float(r["value"]))
            ax.plot([float(r["value"]) for r in rs], [float(r[f"{p}_abs_err"]) for r in rs], "o-", label=tissue)
        ax.set_xlabel(rows[0]["axis"])
        ax.set_title(f"{p} mean absolute error")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    path = out / f"{stem}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def _xy(rows, out: Path, stem: str, x: str, ys):
    plt = _pyplot()
    fig, axes = plt.subplots(len(ys), 1, figsize=(8, 2.6 * len(ys)), squeeze=False)
    for ax, y in zip(axes[:, 0], ys):
        ax.plot([float(r[x]) for r in rows], [float(r[y]) for r in rows])
        ax.set_ylabel(y)
    axes[-1, 0].set_xlabel(x)
    fig.tight_layout()
    path = out / f"{stem}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def plot_csv(csv_path, out_dir) -> list[Path]:
    csv_path = Path(csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, rows = read_csv(csv_path)
    if not rows:
        raise FormatError(f"{csv_path}: no rows to plot")
    stem = csv_path.stem
    if schema == "tissue-stats-v1":
        return _tissue_stats(rows, out, stem)
    if schema == "sweep-v1":
        return _sweep(rows, out, stem)
    if schema == "probe-v1":
        return _xy(rows, out, stem, "step", ("v", "i"))
    if schema == "training-loss-v1":
        return _xy(rows, out, stem, "step", ("loss",))
    raise FormatError(f"{csv_path}: no plot defined for schema {schema!r}")
