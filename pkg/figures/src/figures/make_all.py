"""Render every recognized CSV in a results directory."""

from __future__ import annotations

from pathlib import Path

from . import cutcell_scatter, energy, loglog_cond, loglog_converge, shift_flat
from .common import FigureSpec

PATTERNS = (
    ("converge_*.csv", "loglog-converge", loglog_converge.render),
    ("cond_*.csv", "loglog-cond", loglog_cond.render),
    ("shift.csv", "shift-flat", shift_flat.render),
    ("energy.csv", "energy", energy.render),
    ("cutcells.csv", "cutcell-scatter", cutcell_scatter.render),
)


def render_all(in_dir: Path, out_dir: Path) -> list[Path]:
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    written = []
    for pattern, kind, renderer in PATTERNS:
        for csv_path in sorted(in_dir.glob(pattern)):
            out = out_dir / (csv_path.stem + ".png")
            written.append(renderer(FigureSpec(kind, (csv_path,), out)))
    return written
