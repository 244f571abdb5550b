"""Optional PNG rendering of run figures; needs the ``plot`` extra (matplotlib)."""

from __future__ import annotations

import logging
from pathlib import Path

log = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_figures(figures: list[dict], directory: str | Path) -> list[Path]:
    """One PNG per figure spec ({name, x, series, xlabel, ylabel, title}); [] without matplotlib."""
    plt = _pyplot()
    if plt is None:
        log.warning("matplotlib not installed; skipping %d figure(s)", len(figures))
        return []
    directory = Path(directory)
    written = []
    for fig_spec in figures:
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for label, ys in fig_spec["series"].items():
            ax.plot(fig_spec["x"], ys, label=label, lw=1.2)
        ax.set_xlabel(fig_spec.get("xlabel", ""))
        ax.set_ylabel(fig_spec.get("ylabel", ""))
        if fig_spec.get("title"):
            ax.set_title(fig_spec["title"])
        if len(fig_spec["series"]) > 1:
            ax.legend(fontsize="small", frameon=False)
        fig.tight_layout()
        path = directory / f"{fig_spec['name']}.png"
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
