"""Static PNG renderings of run artifacts (commit graphs, check counts).

Uses the non-interactive Agg backend so rendering works headless; figure
files land next to the plain-text report and never feed back into it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .store import log as store_log


def _jitter(h: str) -> float:
    # deterministic horizontal offset from the hash, for visual separation
    return (int(h[:8], 16) / 0xFFFFFFFF - 0.5) * 0.5


def render_commit_graph(repos, out_path) -> Path:
    """One column per repo, commits stacked by seq, edges to parents."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(2.8 * max(1, len(repos)), 6))
    for column, (name, repo) in enumerate(repos):
        entries = store_log(repo, repo.head())
        coords = {}
        for h, commit in entries:
            coords[h] = (2.0 * column + _jitter(h), commit.seq)
        for h, commit in entries:
            x, y = coords[h]
            for parent in commit.parents:
                if parent in coords:
                    px, py = coords[parent]
                    ax.plot([x, px], [y, py], color="0.6", lw=1, zorder=1)
        xs = [coords[h][0] for h, _ in entries]
        ys = [coords[h][1] for h, _ in entries]
        ax.scatter(xs, ys, s=60, zorder=2, label=name)
        for h, commit in entries:
            x, y = coords[h]
            ax.annotate(
                h[:8], (x, y), textcoords="offset points", xytext=(6, 4), fontsize=7
            )
    ax.set_xlabel("repository")
    ax.set_ylabel("commit seq")
    ax.set_xticks([2.0 * i for i in range(len(repos))])
    ax.set_xticklabels([name for name, _ in repos])
    ax.set_title("commit graph per repository")
    if repos:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_check_counts(counts: dict, out_path) -> Path:
    """Horizontal bars: cases run per property check."""
    out_path = Path(out_path)
    names = sorted(counts)
    values = [counts[name] for name in names]
    fig, ax = plt.subplots(figsize=(7, 0.5 * max(4, len(names))))
    ax.barh(range(len(names)), values, color="tab:blue")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=9)
    ax.invert_yaxis()
    ax.set_xlabel("cases run")
    ax.set_title("property suite coverage")
    for i, value in enumerate(values):
        ax.annotate(str(value), (value, i), xytext=(3, 0),
                    textcoords="offset points", va="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
