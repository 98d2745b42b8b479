"""Standalone SVG figures for CLI outputs (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps SVG bytes reproducible across runs
_SVG_META = {"Date": None, "Creator": None}
plt.rcParams["svg.hashsalt"] = "hystnet"


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_trace(trace, path_phase, path_history):
    """(aggregate damping, A_Q) phase plot and time histories."""
    eps = trace.meta["epsilon"]
    s = trace.t * eps
    z = trace.zeta_aggregate
    fig, ax = plt.subplots(figsize=(5, 4))
    # the large regime leaves A_Q at zero, so plot the largest estimate
    ax.plot(z, trace.A.max(axis=1), lw=0.8)
    ax.set_xlabel(r"aggregate $\zeta$")
    ax.set_ylabel(r"$\max_k A_k$")
    p1 = _save(fig, path_phase)

    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    axes[0].plot(s, trace.u, lw=0.3)
    axes[0].set_ylabel("u")
    axes[1].plot(s, trace.A, lw=0.8)
    axes[1].axhline(trace.meta["thresholds"]["activation"], color="k", ls=":", lw=0.8)
    axes[1].set_ylabel("A")
    axes[2].plot(s, z, lw=0.8)
    axes[2].set_ylabel(r"aggregate $\zeta$")
    axes[2].set_xlabel(r"$\epsilon t$")
    p2 = _save(fig, path_history)
    return [p1, p2]


def plot_branches(branches, q, path):
    """Bifurcation diagram: max displacement of the nonlinear node versus parameter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for br in branches:
        if not br.points:
            continue
        mu = br.params
        amp = br.max_u[:, q - 1]
        st = br.stable
        for flag, style in ((True, "-"), (False, "--")):
            y = np.where(st == flag, amp, np.nan)
            ax.plot(mu, y, style, color="C0" if br.kind == "periodic" else "k", lw=1.2)
        for ev in br.events:
            ax.plot([ev.param], [np.interp(ev.param, *_sorted(mu, amp))], "o", ms=4,
                    color="r" if ev.kind == "Hopf" else "k")
    ax.set_xlabel("parameter")
    ax.set_ylabel(rf"max $u_{{{q}}}$")
    return _save(fig, path)


def _sorted(x, y):
    order = np.argsort(x)
    return x[order], y[order]


def plot_map(result, path):
    """(eps, mu) map with Hopf and saddle-node curves and their asymptotes."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for curve in result.hopf_curves:
        ax.plot(curve[:, 0], curve[:, 1], "r.-", lw=1)
    for curve in result.sn_curves:
        ax.plot(curve[:, 0], curve[:, 1], "k.-", lw=1)
    a = result.asymptotes
    if a is not None and len(result.eps):
        e = np.geomspace(result.eps.min(), result.eps.max(), 100)
        ax.plot(e, np.full_like(e, a.mu_hb), "r:", lw=0.8)
        ax.plot(e, np.full_like(e, a.mu_sn), "k:", lw=0.8)
        ax.plot(e, a.large_hb(e), "r:", lw=0.8)
        ax.plot(e, a.large_sn(e), "k:", lw=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\epsilon$")
    ax.set_ylabel(r"$\mu$")
    return _save(fig, path)


def plot_slowflow(traj, nullcline_pts, path):
    """Planar trajectory over the amplitude nullcline."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(nullcline_pts[:, 0], nullcline_pts[:, 1], ".", ms=1.5, color="0.6")
    ax.plot(traj[:, 1], traj[:, 2], lw=1)
    ax.set_xlabel(r"aggregate $\zeta$")
    ax.set_ylabel("A")
    return _save(fig, path)


def plot_trigger(scales, closed, integrated, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(scales, closed, "o-", label="closed form")
    ax.loglog(scales, integrated, "s--", label="integrated")
    ax.set_xlabel("forcing amplitude")
    ax.set_ylabel(r"$t_{req}$")
    ax.legend()
    return _save(fig, path)


def plot_design(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    qs = [r.q for r in rows]
    ax.bar([str(q) for q in qs], [r.eps_estimate for r in rows])
    ax.set_xlabel("Q")
    ax.set_ylabel(r"estimated $\epsilon_{max}$")
    return _save(fig, path)
