"""Matplotlib figure emission.

All figures are written as static SVG next to the delimited outputs.
Rendering is deterministic: a fixed hash salt and no date metadata, so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "svg.hashsalt": "isopulse",
    "figure.figsize": (6.0, 4.5),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

_SVG_META = {"Date": None}

_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple"]


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)


def save_time_series(path, traj, state_labels=None, input_labels=None):
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    state_labels = state_labels or [f"x{i+1}" for i in range(n)]
    input_labels = input_labels or [f"u{i+1}" for i in range(m)]
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True,
                                   gridspec_kw={"height_ratios": [3, 1]})
    for i in range(n):
        ax1.plot(traj.times, traj.states[:, i], label=state_labels[i],
                 color=_COLORS[i % len(_COLORS)])
    ax1.set_ylabel("state")
    ax1.legend(loc="best")
    for i in range(m):
        ax2.step(traj.times, traj.inputs[:, i], where="post",
                 label=input_labels[i], color=_COLORS[i % len(_COLORS)])
    ax2.set_xlabel("time")
    ax2.set_ylabel("input")
    ax2.legend(loc="best")
    _save(fig, path)


def save_phase_plane(path, traj=None, box=None, curves=(), points=(),
                     xlabel="x1", ylabel="x2", xlim=None, ylim=None):
    """Phase-plane picture: trajectory, containment box, labeled curves."""
    fig, ax = plt.subplots()
    for k, (line, label) in enumerate(curves):
        line = np.asarray(line)
        ax.plot(line[:, 0], line[:, 1], color=_COLORS[k % len(_COLORS)],
                lw=1.2, label=label)
    if box is not None:
        lo, hi = np.asarray(box.lo), np.asarray(box.hi)
        rect = plt.Rectangle(lo, hi[0] - lo[0], hi[1] - lo[1], fill=False,
                             edgecolor="black", lw=1.5, label="box")
        ax.add_patch(rect)
    if traj is not None:
        ax.plot(traj.states[:, 0], traj.states[:, 1], color="tab:red", lw=0.9,
                label="trajectory")
        ax.plot(traj.states[0, 0], traj.states[0, 1], "o", color="tab:red",
                ms=4)
    for xy, label in points:
        ax.plot(xy[0], xy[1], "k*", ms=8)
        ax.annotate(label, xy, textcoords="offset points", xytext=(4, 4))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if xlim:
        ax.set_xlim(*xlim)
    if ylim:
        ax.set_ylim(*ylim)
    if curves or box is not None or traj is not None:
        ax.legend(loc="best", fontsize=8)
    _save(fig, path)


def save_time_field_contours(path, fields, sigmas, design=None):
    """Overlayed convergence-time level sets for several parameter sets.

    fields is a list of (TimeField, label). Pulse length runs on the
    horizontal axis, magnitude on the vertical one.
    """
    fig, ax = plt.subplots()
    any_label = False
    for k, (tf, label) in enumerate(fields):
        color = _COLORS[k % len(_COLORS)]
        first = True
        for sigma in sigmas:
            for line in tf.contours(sigma):
                ax.plot(line[:, 1], line[:, 0], color=color, lw=1.2,
                        label=label if first else None)
                first = False
                any_label = True
    if design is not None:
        ax.plot(design.tau, design.mu, "k*", ms=10, label="design")
        any_label = True
    ax.set_xlabel("pulse length")
    ax.set_ylabel("pulse magnitude")
    if any_label:
        ax.legend(loc="best", fontsize=8)
    _save(fig, path)
