"""Matplotlib figure output: top-down division maps (SVG) and baseline
comparison panels. Figures are written deterministically so reruns are
byte-identical."""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "occlupart"

import matplotlib.pyplot as plt
import numpy as np

_CMAP = plt.get_cmap("tab10")


def _draw_division(ax, division, positions_2d, labels, title=None):
    for r in division.regions:
        color = _CMAP(r.id % 10)
        hull = r.hull_2d
        if len(hull) >= 3:
            closed = np.vstack([hull, hull[:1]])
            ax.plot(closed[:, 0], closed[:, 1], color=color, lw=1.0, alpha=0.8)
        for nb, n, b in r.boundary:
            if nb < r.id:
                continue  # draw each shared line once
            _draw_line(ax, n, b, positions_2d)
    colors = [_CMAP(labels[i] % 10) for i in range(len(positions_2d))]
    ax.scatter(positions_2d[:, 0], positions_2d[:, 1], c=colors, s=8, zorder=3)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)


def _draw_line(ax, normal, offset, positions_2d):
    lo = positions_2d.min(axis=0) - 1.0
    hi = positions_2d.max(axis=0) + 1.0
    # line normal·p = offset, direction perpendicular to normal
    d = np.array([-normal[1], normal[0]])
    p0 = normal * offset
    span = np.linalg.norm(hi - lo)
    ts = np.array([-span, span])
    seg = p0[None, :] + ts[:, None] * d[None, :]
    ax.plot(seg[:, 0], seg[:, 1], "k--", lw=0.8, alpha=0.7)
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])


def save_division_map(division, model, path):
    basis = division.ground_basis
    pos2d = model.positions() @ basis.T
    labels = np.array([division.assignment[c.id] for c in model.cameras])
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_division(ax, division, pos2d, labels)
    fig.savefig(path, metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def save_comparison_panel(divisions_by_name, model, path):
    names = list(divisions_by_name)
    fig, axes = plt.subplots(1, len(names), figsize=(5 * len(names), 5))
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        division = divisions_by_name[name]
        pos2d = model.positions() @ division.ground_basis.T
        labels = np.array([division.assignment[c.id] for c in model.cameras])
        _draw_division(ax, division, pos2d, labels, title=name)
    fig.savefig(path, metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
