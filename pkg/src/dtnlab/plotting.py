"""Figure output for the CLI.  Everything renders off-screen to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
    # fixed metadata keeps repeated runs byte-stable for PNG and SVG
    "svg.hashsalt": "dtnlab",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)


def kappa_curve(path, a, columns: dict, d: int):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, vals in columns.items():
            ax.plot(a, vals, label=name, lw=1.2)
        ax.set_xlabel("a")
        ax.set_ylabel(f"kappa(a), d={d}")
        ax.legend(frameon=False)
        _save(fig, path)


def branch_values(path, index, beta, poles, title: str = ""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        index = np.asarray(index)
        ok = ~np.asarray(poles)
        ax.plot(index[ok], np.asarray(beta)[ok], ".", ms=3)
        if (~ok).any():
            ax.plot(index[~ok], np.zeros((~ok).sum()), "rx", label="Dirichlet pole")
            ax.legend(frameon=False)
        ax.set_xlabel("angular index")
        ax.set_ylabel("beta")
        ax.set_title(title)
        _save(fig, path)


def measure_histogram(path, edges, masses, reference):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.stairs(masses, edges, label="spectrum", lw=1.2)
        ax.stairs(reference, edges, label="kappa~ increment", ls="--", lw=1.2)
        ax.set_xlabel("theta")
        ax.set_ylabel("bin mass")
        ax.set_yscale("log")
        ax.legend(frameon=False)
        _save(fig, path)


def weyl_ladder(path, lams, counts, power: int, coefficient: float):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lams = np.asarray(lams, dtype=float)
        ax.loglog(lams, counts, "o", label="count")
        grid = np.geomspace(lams.min(), lams.max(), 50)
        ax.loglog(grid, coefficient * grid**power, "-", label="leading term")
        ax.set_xlabel("lambda")
        ax.set_ylabel("N")
        ax.legend(frameon=False)
        _save(fig, path)


def second_term(path, samples, values, reference: float):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(samples, values, ".", ms=3, label="(N - bulk) h^(d-1)")
        ax.axhline(np.mean(values), color="C0", lw=1, label="window mean")
        ax.axhline(reference, color="C1", ls="--", lw=1, label="kappa(a) vol'")
        ax.set_xlabel("lambda")
        ax.legend(frameon=False)
        _save(fig, path)
