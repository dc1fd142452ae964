"""Static report figures rendered next to the delimited outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "scbf"}

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 9,
    "lines.linewidth": 1.4,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def ledger_figure(ledger, path):
    """Energy terms and the identity residual along one trajectory."""
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
        t = ledger.times
        ax1.plot(t, ledger.energy_h2, label=r"$\|u\|_H^2$")
        ax1.plot(t, ledger.diss_v, label="viscous dissipation")
        ax1.plot(t, ledger.diss_lr1, label="absorption dissipation")
        ax1.plot(t, ledger.mart_wiener + ledger.mart_jump, label="martingale terms")
        ax1.plot(t, ledger.qv_sigma + ledger.qv_gamma, label="quadratic variation")
        ax1.set_xlabel("t")
        ax1.set_ylabel("cumulative value")
        ax1.legend(loc="best")
        ax1.set_title("energy ledger")
        ax2.plot(t, np.abs(ledger.residual), color="crimson")
        ax2.set_yscale("log")
        ax2.set_xlabel("t")
        ax2.set_ylabel("|residual|")
        ax2.set_title("identity residual")
        _save(fig, path)


def ensemble_figure(balance_values, balance_report, moment_report, path):
    """Balance statistic histogram plus the moment estimate vs its bound."""
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
        ax1.hist(balance_values, bins=60, color="steelblue", alpha=0.85)
        ax1.axvline(0.0, color="k", lw=1)
        ax1.axvline(balance_report.mean, color="crimson", lw=1.5,
                    label=f"mean = {balance_report.mean:.2e}")
        ax1.set_xlabel("per-path balance statistic")
        ax1.set_ylabel("count")
        ax1.legend(loc="best")
        ax1.set_title(f"energy balance (m = {balance_report.m})")
        labels = ["estimate", "bound"]
        vals = [moment_report.estimate, moment_report.bound]
        ax2.bar(labels, vals, color=["steelblue", "darkgray"])
        ax2.errorbar([0], [moment_report.estimate], yerr=[moment_report.estimate_ci],
                     fmt="none", ecolor="k", capsize=4)
        ax2.set_yscale("log")
        ax2.set_title("moment estimate vs a-priori bound")
        _save(fig, path)


def convergence_figure(dts, residuals, slope, cutoffs, diffs, rate, path):
    """Log-log residual-vs-dt and difference-vs-cutoff panels."""
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
        ax1.loglog(dts, residuals, "o-", label=f"slope {slope:.2f}")
        ax1.set_xlabel("dt")
        ax1.set_ylabel("|ledger residual(T)|")
        ax1.legend()
        ax1.set_title("time-step refinement")
        ax2.loglog(cutoffs[:-1], diffs, "s-", color="darkorange",
                   label=f"rate {rate:.2f}")
        ax2.set_xlabel("cutoff n")
        ax2.set_ylabel(r"$\sup_t \|u_n - u_{2n}\|_H$")
        ax2.legend()
        ax2.set_title("spectral refinement")
        _save(fig, path)


def uniqueness_figure(ratios, tol_line, path):
    """Per-seed peak of the weighted difference against the envelope."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(range(len(ratios)), ratios, "o", ms=4, color="steelblue")
        ax.axhline(tol_line, color="crimson", lw=1.5, label="envelope")
        ax.set_xlabel("seed index")
        ax.set_ylabel("max weighted difference / envelope")
        ax.set_ylim(bottom=0)
        ax.legend()
        ax.set_title("twin-run contraction")
        _save(fig, path)


def verify_figure(reports, path):
    """Worst margin per property, normalized by its tolerance."""
    with plt.rc_context(_STYLE):
        names = [r["name"] for r in reports]
        margins = [max(r["worst"] / r["tol"], 1e-18) if r["tol"] > 0 else 0.0
                   for r in reports]
        colors = ["steelblue" if r["passed"] else "crimson" for r in reports]
        fig, ax = plt.subplots(figsize=(8.5, 0.35 * len(names) + 1.5))
        ax.barh(range(len(names)), margins, color=colors)
        ax.axvline(1.0, color="k", lw=1)
        ax.set_yticks(range(len(names)), names, fontsize=8)
        ax.set_xscale("log")
        ax.set_xlabel("worst / tolerance (pass left of 1)")
        _save(fig, path)
