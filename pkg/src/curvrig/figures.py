"""Figure rendering for run reports.  One PNG per scenario, Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_figure"]


def _radial_axis(domain):
    if domain.is_radial:
        return domain.nodes
    return np.arange(domain.node_count, dtype=float)


def render_figure(kind, ident, payload, path) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=110)
    if kind == "certificate":
        cert = payload["certificate"]
        ax.bar([0, 1], [cert.lhs, cert.rhs], color=["#b33", "#36b"])
        ax.set_xticks([0, 1], ["lhs", "rhs"])
        ax.set_title(f"{ident}: {cert.criterion} ({cert.verdict})")
        ax.axhline(0.0, color="k", lw=0.6)
    elif kind == "bvp":
        x = _radial_axis(payload["domain"])
        for sol in payload["solutions"]:
            ax.plot(x, sol.values, lw=1.2, label=sol.start_label)
        ax.axhline(1.0, color="0.6", ls=":")
        ax.set_xlabel("radial coordinate" if payload["domain"].is_radial else "node")
        ax.set_ylabel("u")
        ax.set_title(f"{ident}: conformal factor")
        ax.legend(fontsize=7)
    elif kind == "annulus-scan":
        scan = payload["scan"]
        finite = np.isfinite(scan.end_values)
        ax.plot(scan.slopes[finite], scan.end_values[finite], lw=1.0, color="#36b")
        ax.axhline(0.0, color="0.6", ls=":")
        for sol in scan.solutions:
            ax.plot([sol.slope], [0.0], "o", color="#b33", ms=5)
        ax.set_xlabel("inner slope s")
        ax.set_ylabel("u(b; s) - 1")
        ax.set_title(f"{ident}: end mismatch, {scan.count} solution(s)")
        if scan.solutions:
            inset = ax.inset_axes([0.55, 0.55, 0.4, 0.4])
            for sol in scan.solutions:
                inset.plot(sol.r, sol.u, lw=0.9)
            inset.axhline(1.0, color="0.7", ls=":", lw=0.6)
            inset.tick_params(labelsize=6)
    elif kind == "quotient":
        est = payload["estimate"]
        eps = [e for e, _ in est.subcritical]
        vals = [v for _, v in est.subcritical]
        ax.plot(eps, vals, "o-", color="#36b", label="subcritical")
        ax.plot([0.0], [est.extrapolated], "s", color="#b33", label="extrapolated")
        ax.axhline(est.upper_bound, color="0.4", ls="--", lw=0.8, label="upper bound")
        ax.set_xlabel("exponent defect eps")
        ax.set_ylabel("quotient value")
        ax.set_title(f"{ident}: quotient estimate")
        ax.legend(fontsize=7)
    elif kind == "lapse-check":
        x = _radial_axis(payload["domain"])
        ax.plot(x, payload["values"], lw=1.2, color="#36b", label="f")
        ax.set_xlabel("radial coordinate" if payload["domain"].is_radial else "node")
        ax.set_title(
            f"{ident}: lapse candidate, residual {payload['report'].residual:.2e}"
        )
        ax.legend(fontsize=7)
    else:
        ax.set_title(ident)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
