"""Self-contained SVG log-log plots of estimate series."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .estimator import Estimate, RateFit  # noqa: E402

# fixed ids and no timestamp so identical data gives identical files
matplotlib.rcParams["svg.hashsalt"] = "eucrates"
matplotlib.rcParams["svg.fonttype"] = "path"


def rate_plot(estimates: Sequence[Estimate], fit: RateFit, path: str | Path) -> None:
    ns = np.array([e.n for e in estimates], dtype=float)
    y = np.array([e.mean for e in estimates])
    se = np.array([e.stderr for e in estimates])
    e0 = estimates[0]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(ns, y, yerr=2 * se, fmt="o", ms=4, capsize=2, label="mean +- 2 stderr")
    grid = np.geomspace(ns.min(), ns.max(), 64)
    line = fit.alpha_hat * grid**fit.exponent_hat
    if fit.model == "alpha_plus_correction":
        line = line + fit.c_hat * grid ** ((e0.d - 1 - e0.p) / e0.d) + fit.const_hat
    elif fit.model == "power_with_log":
        line = line + fit.c_hat * np.log(grid) + fit.const_hat
    else:
        line = line + fit.const_hat
    ax.plot(grid, line, "-", lw=1, label=f"fit, alpha = {fit.alpha_hat:.4f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(f"E L ({e0.functional}, d={e0.d}, p={e0.p:g})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
