"""SVG figures. Output is byte-stable: fixed hash salt and no timestamp."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "crnpp"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trace(trace, species: Sequence[str], path, title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for s in species:
        ax.plot(trace.times, trace.column(s), label=s, linewidth=1.2)
    ax.set_xlabel("time")
    ax.set_ylabel("concentration")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def plot_error(report, path, title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for s, curve in report.curves.items():
        ax.plot(report.curve_times, curve, label=f"|error| {s}", linewidth=1.0)
    ax.set_xlabel("time")
    ax.set_ylabel("absolute error")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)


def plot_surface(surface, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    a, b = surface.a_values, surface.b_values
    im = ax.imshow(surface.errors, origin="lower", aspect="auto", cmap="viridis",
                   extent=(b[0], b[-1], a[0], a[-1]) if len(a) > 1 and len(b) > 1 else None)
    ax.set_xlabel("b")
    ax.set_ylabel("a")
    ax.set_title(f"{surface.kind}: absolute error after one phase")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    _save(fig, path)
