"""Figure rendering for CLI reports.

Every report-producing subcommand writes its delimited output first and then
renders a matplotlib figure of the same data next to it.  All figures use
the Agg backend and fixed styling so repeated runs produce stable files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import os
import tempfile

import numpy as np
import matplotlib.pyplot as plt

_DPI = 150


def _save(fig, path):
    directory = os.path.dirname(os.path.abspath(str(path)))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=_DPI, bbox_inches="tight", format="png")
        os.replace(tmp, str(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def ct_histogram(ct_values, path, title="Torque coefficient distribution"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(ct_values, bins=30, color="steelblue", edgecolor="white")
    ax.set_xlabel("$C_T$")
    ax.set_ylabel("count")
    ax.set_title(title)
    _save(fig, path)


def predicted_vs_actual(actual, predicted, path, label="model"):
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    lo = min(np.min(actual), np.min(predicted))
    hi = max(np.max(actual), np.max(predicted))
    pad = 0.05 * (hi - lo + 1e-12)
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", lw=0.8)
    ax.plot(actual, predicted, "o", ms=4, color="crimson", alpha=0.7)
    ax.set_xlabel("actual $C_T$")
    ax.set_ylabel(f"predicted $C_T$ ({label})")
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_title("Held-out prediction quality")
    _save(fig, path)


def training_history(history, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(np.arange(len(history)), history, color="darkslateblue", lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE")
    ax.set_title("Gradient-descent convergence")
    _save(fig, path)


def grid_search_mse(rows, path):
    """Test MSE of each grid configuration, grouped by depth/learning rate."""
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = {}
    for r in rows:
        key = (r.config.hidden_layers, r.config.learning_rate)
        groups.setdefault(key, []).append((r.config.width, r.test_mse))
    for (n, lr), pts in sorted(groups.items()):
        pts.sort()
        ax.semilogy(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            ms=4,
            label=f"n={n}, lr={lr:g}",
        )
    ax.set_xlabel("hidden width")
    ax.set_ylabel("test MSE")
    ax.set_title("Hyperparameter grid search")
    ax.legend(fontsize=8)
    _save(fig, path)


def contour(axis1, axis2, values, feasible, path, names=("L_rr", "L_d"), fixed_label=""):
    """Filled contour of predicted C_T over a 2-D slice; infeasible cells
    are overlaid in gray."""
    a1 = np.unique(axis1)
    a2 = np.unique(axis2)
    z = np.asarray(values, dtype=float).reshape(len(a1), len(a2))
    mask = ~np.asarray(feasible, dtype=bool).reshape(len(a1), len(a2))
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    cs = ax.contourf(a2, a1, z, levels=20, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="predicted $C_T$")
    if mask.any():
        overlay = np.where(mask, 1.0, np.nan)
        ax.contourf(a2, a1, overlay, levels=[0.5, 1.5], colors=["lightgray"], alpha=0.75)
    ax.set_xlabel(names[1])
    ax.set_ylabel(names[0])
    title = "Surrogate contour"
    if fixed_label:
        title += f" ({fixed_label})"
    ax.set_title(title, fontsize=9)
    _save(fig, path)


def torque_curve(curve, rated, path):
    """Torque-speed samples with the constant-power hyperbola through the
    rated point, the tangency that defines rated power."""
    fig, ax = plt.subplots(figsize=(5, 3.8))
    ax.plot(curve.omega, curve.torque, "o-", color="black", ms=4, label="torque curve")
    w = np.linspace(min(curve.omega), max(curve.omega), 200)
    w = w[w > 0]
    ax.plot(w, rated.power / w, "r--", lw=1.0, label=f"P = {rated.power:.4g} W")
    ax.plot([rated.omega], [rated.torque], "r*", ms=12)
    ax.set_xlabel("rotor speed [rad/s]")
    ax.set_ylabel("torque [N m]")
    ax.set_ylim(bottom=min(0.0, min(curve.torque)))
    ax.legend(fontsize=8)
    ax.set_title("Rated-power extraction")
    _save(fig, path)


def power_law(points, fit, path, value_label="rated power"):
    """Log-log data vs the fitted law, one line per wind-speed scale."""
    fig, ax = plt.subplots(figsize=(5, 4))
    by_lv = {}
    for ll, lv, val in points:
        by_lv.setdefault(lv, []).append((ll, val))
    for lv, pts in sorted(by_lv.items()):
        pts.sort()
        ll = np.array([p[0] for p in pts])
        vals = np.array([p[1] for p in pts])
        (line,) = ax.loglog(ll, vals, "o", ms=5, label=f"$\\lambda_v$={lv:g}")
        span = np.linspace(ll.min(), ll.max(), 50)
        ax.loglog(
            span,
            fit.prefactor * span**fit.exponent_l * lv**fit.exponent_v,
            "-",
            lw=1.0,
            color=line.get_color(),
        )
    ax.set_xlabel("$\\lambda_l$")
    ax.set_ylabel(value_label)
    ax.set_title(
        f"fit: {fit.prefactor:.3g} $\\lambda_l^{{{fit.exponent_l:.3g}}}"
        f" \\lambda_v^{{{fit.exponent_v:.3g}}}$",
        fontsize=10,
    )
    ax.legend(fontsize=8)
    _save(fig, path)


def optimization_summary(baseline, predicted, verified, path):
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    labels = ["baseline", "predicted $C_T^*$"]
    values = [baseline, predicted]
    colors = ["gray", "steelblue"]
    if verified is not None:
        labels.append("oracle-verified")
        values.append(verified)
        colors.append("seagreen")
    ax.bar(labels, values, color=colors)
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.4f}", ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("$C_T$")
    ax.set_title("Optimization outcome")
    _save(fig, path)
