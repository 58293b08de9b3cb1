"""Shared CSV loading and figure plumbing.

The solver CLI documents five CSV schemas; each figure kind consumes
one of them.  Loading is strict: a missing column is a descriptive
error, never a silent empty plot.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

ALLOWED_GUIDES = (-4.0, -2.0, 1.0, 2.0)

FIGURE_KINDS = (
    "loglog-converge",
    "loglog-cond",
    "shift-flat",
    "energy",
    "cutcell-scatter",
)


class FigureError(ValueError):
    """Input CSV does not match the documented schema."""


@dataclass
class FigureSpec:
    """What to render: input CSVs, figure kind, guides, output path."""

    kind: str
    csv_paths: tuple[Path, ...]
    out_path: Path
    guides: tuple[float, ...] = ()
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}")
        bad = [g for g in self.guides if g not in ALLOWED_GUIDES]
        if bad:
            raise FigureError(f"guide slopes {bad} not in {ALLOWED_GUIDES}")
        self.csv_paths = tuple(Path(p) for p in self.csv_paths)
        self.out_path = Path(self.out_path)


@dataclass
class Table:
    """Columns of one CSV file, keyed by header name."""

    columns: dict[str, list[str]]
    path: Path

    def numeric(self, name: str) -> np.ndarray:
        raw = self.text(name)
        try:
            return np.array([float(v) for v in raw])
        except ValueError as exc:
            raise FigureError(f"{self.path}: column {name!r} is not numeric: {exc}") from exc

    def text(self, name: str) -> list[str]:
        if name not in self.columns:
            raise FigureError(
                f"{self.path}: missing column {name!r} (found {sorted(self.columns)})"
            )
        return self.columns[name]


def load_table(path: Path) -> Table:
    """Read a comma-separated table, skipping '#' comment lines."""
    path = Path(path)
    if not path.exists():
        raise FigureError(f"input CSV {path} does not exist")
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise FigureError(f"{path} contains no data")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if any(len(r) != len(header) for r in body):
        raise FigureError(f"{path}: ragged rows do not match the header {header}")
    columns = {h: [r[i] for r in body] for i, h in enumerate(header)}
    return Table(columns, path)


def guide_lines(ax, x, y_anchor, slopes, flip=False):
    """Draw h^slope reference lines anchored near the data."""
    x = np.asarray(x, dtype=float)
    x_ref = x.max() if not flip else x.min()
    for s in slopes:
        y = y_anchor * (x / x_ref) ** s
        ax.plot(x, y, "k--", linewidth=0.8, label=f"slope {s:g}")


def finish(fig, spec: FigureSpec) -> Path:
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return spec.out_path


def new_figure(spec: FigureSpec, nrows=1):
    fig, axes = plt.subplots(nrows, 1, figsize=(5.2, 3.6 * nrows), squeeze=False)
    if spec.title:
        fig.suptitle(spec.title)
    return fig, axes[:, 0]
