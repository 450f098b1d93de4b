"""Rendering of convergence reports to log-log figures.

Uses the non-interactive matplotlib backend so figures render identically
in headless runs; one figure per report, with every error column drawn
against the subdivision count and a dashed reference slope next to each
series showing the expected order.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

# error column -> (legend label, expected order as a function of r and s)
_SERIES = {
    "e_l2": ("L2 error", lambda r, s: r + 1),
    "e_h1": ("H1-seminorm error", lambda r, s: r),
    "e_p": ("scalar error", lambda r, s: s + 1),
    "e_u": ("vector error", lambda r, s: r + 1),
    "e_div": ("divergence error", lambda r, s: s + 1),
}


def plot_convergence(report, path, title=None):
    """Render one convergence report to a log-log figure at ``path``.

    Each error column becomes a marked series over the subdivision counts;
    a dashed guide line anchored at the last data point of each series
    shows the expected asymptotic order.  Returns the path.
    """
    rows = report.rows
    if not rows:
        raise ValueError("cannot plot an empty report")
    ns = [row["n"] for row in rows]
    r = rows[0]["r"]
    s = r if rows[0].get("variant") == "full" else r - 1

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    for key, (label, order_of) in _SERIES.items():
        if key not in rows[0] or rows[0][key] is None:
            continue
        errs = [row[key] for row in rows]
        (line,) = ax.loglog(ns, errs, marker="o", label=label)
        order = order_of(r, s)
        guide = [errs[-1] * (ns[-1] / n) ** order for n in ns]
        ax.loglog(ns, guide, linestyle="--", linewidth=0.8,
                  color=line.get_color(), alpha=0.6)
        ax.annotate(f"order {order}", (ns[0], guide[0]),
                    fontsize=8, color=line.get_color(),
                    textcoords="offset points", xytext=(4, 2))
    ax.set_xlabel("subdivisions n")
    ax.set_ylabel("error")
    ax.set_xticks(ns)
    ax.set_xticklabels([str(n) for n in ns])
    ax.minorticks_off()
    if title is None:
        first = rows[0]
        kind = first.get("element", "mixed-" + first.get("variant", ""))
        title = f"{kind} r={r} on {first['family']}"
    ax.set_title(title)
    ax.grid(True, which="major", linewidth=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
