"""Figure writers used by the command line reports.

Everything here renders straight to a file with the Agg backend, so the
functions work in headless environments and never open a window.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

_DPI = 120


def _finish(fig: plt.Figure, path: str | os.PathLike) -> str:
    fig.tight_layout()
    # dropping the Software tag keeps repeated runs byte-identical
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)
    return os.fspath(path)


def save_density_figure(
    table: pd.DataFrame,
    path: str | os.PathLike,
    truth: tuple[np.ndarray, np.ndarray] | None = None,
    xlabel: str = "theta",
) -> str:
    """Plot the pdf (and cdf, dashed) from a pdf/cdf table.

    ``table`` needs ``theta``, ``pdf`` and ``cdf`` columns, as produced by
    :func:`aghq.summaries.compute_pdf_and_cdf`.  When ``truth`` is given it is
    an ``(x, density)`` pair drawn as a reference curve.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(table["theta"], table["pdf"], color="C0", label="approximate pdf")
    if truth is not None:
        ax.plot(truth[0], truth[1], color="C3", linestyle=":", label="exact pdf")
    ax2 = ax.twinx()
    ax2.plot(table["theta"], table["cdf"], color="C0", linestyle="--", alpha=0.6)
    ax2.set_ylabel("cdf")
    ax2.set_ylim(0.0, 1.05)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.legend(loc="upper right")
    return _finish(fig, path)


def save_rate_sweep_figure(
    ks: np.ndarray,
    errors: np.ndarray,
    path: str | os.PathLike,
) -> str:
    """Semilog plot of normalizing-constant error against the number of nodes."""
    ks = np.asarray(ks)
    errors = np.asarray(errors, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    positive = errors > 0
    ax.semilogy(ks[positive], errors[positive], marker="o", color="C0")
    if not positive.all():
        # Zero error cannot be drawn on a log axis; mark it at the bottom edge.
        floor = errors[positive].min() if positive.any() else 1e-16
        ax.semilogy(ks[~positive], np.full((~positive).sum(), floor), marker="v", color="C2")
    ax.set_xlabel("quadrature points k")
    ax.set_ylabel("absolute error in log normalizing constant")
    ax.set_xticks(list(ks))
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def save_sample_histogram(
    samples: np.ndarray,
    path: str | os.PathLike,
    xlabel: str = "w",
    bins: int = 60,
) -> str:
    """Histogram of posterior draws for one latent coordinate."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(np.asarray(samples, dtype=float), bins=bins, density=True, color="C0", alpha=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    return _finish(fig, path)
