"""Static figures written next to the CSV outputs of the command-line tools."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STATUS_COLORS = {"Stable": "tab:blue", "Unstable": "tab:red", "NotFound": "gold"}
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def steady_state(x, u, path, exact=None, title=""):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.step(x, u, where="pre", label="approximate", color="tab:blue")
    if exact is not None:
        xs = np.linspace(0.0, x[-1], 400)
        ax.plot(xs, exact(xs), "--", color="k", label="exact")
        ax.legend()
    ax.set_xlabel("size x")
    ax.set_ylabel("u(x)")
    ax.set_title(title)
    _save(fig, path)


def sweep_regions(records, path):
    """One panel per value of ``b``: points coloured by status, stable and
    unstable points shaded by the rightmost eigenvalue."""
    bs = sorted({r.point.b for r in records})
    fig, axes = plt.subplots(1, len(bs), figsize=(4 * len(bs) + 1, 3.6), squeeze=False, layout="constrained")
    found = [r.rightmost_re for r in records if r.rightmost_re is not None]
    vmax = max((abs(v) for v in found), default=1.0) or 1.0
    sc = None
    for ax, b in zip(axes[0], bs):
        sub = [r for r in records if r.point.b == b]
        nf = [r for r in sub if r.status == "NotFound"]
        ok = [r for r in sub if r.status != "NotFound"]
        if nf:
            ax.scatter([r.point.a for r in nf], [r.point.c for r in nf], c=STATUS_COLORS["NotFound"], s=14, marker="s")
        if ok:
            sc = ax.scatter(
                [r.point.a for r in ok],
                [r.point.c for r in ok],
                c=[r.rightmost_re for r in ok],
                cmap="coolwarm",
                vmin=-vmax,
                vmax=vmax,
                s=14,
                marker="s",
            )
        ax.set_title(f"b = {b:g}")
        ax.set_xlabel("a")
        ax.set_ylabel("c")
    if sc is not None:
        fig.colorbar(sc, ax=axes[0].tolist(), label="Re rightmost eigenvalue")
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def moments(times, m0, m1, path, target=None):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    for ax, m, name, k in ((axes[0], m0, "M0 (number)", 0), (axes[1], m1, "M1 (mass)", 1)):
        ax.plot(times, m, color="tab:blue")
        if target is not None:
            ax.axhline(target[k], ls="--", color="k", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel(name)
    _save(fig, path)


def convergence(ns, errors, path, ylabel="sup error", slope=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(ns, errors, "o-")
    if slope is not None:
        ax.set_title(f"fitted slope {slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel(ylabel)
    _save(fig, path)


def moment_ladder(ns, m0, m1, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(ns, m0, "o-", label="M0")
    ax.plot(ns, m1, "s-", label="M1")
    ax.axhline(m0[-1], ls="--", color="tab:red", lw=0.8)
    ax.axhline(m1[-1], ls=":", color="tab:green", lw=0.8)
    ax.set_xlabel("n")
    ax.legend()
    _save(fig, path)


def spectra(per_n: dict, rightmost: dict, path_eig, path_right, scaled=False):
    fig, ax = plt.subplots(figsize=(5, 4))
    for n, ev in per_n.items():
        ax.scatter(ev.real, ev.imag, s=8, label=f"n={n}")
    ax.axvline(0.0, color="k", lw=0.6)
    ax.set_xlabel("Re" + (" (x dx)" if scaled else ""))
    ax.set_ylabel("Im")
    ax.legend(fontsize=7)
    _save(fig, path_eig)

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ns = sorted(rightmost)
    ax.plot(ns, [rightmost[n] for n in ns], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("Re rightmost" + (" (x dx)" if scaled else ""))
    _save(fig, path_right)
