"""Two-panel cumulative-reward chart and ranking table."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "standard_rl": "Standard actor-critic",
    "hybrid_rl": "Hybrid actor-critic",
    "mb_unbiased": "Model-based (unbiased)",
    "mb_over": "Model-based (over-estimate)",
    "mb_under": "Model-based (under-estimate)",
    "random": "Random",
    "perfect_info": "Perfect information",
}


def render_svg(curves: dict, title: str = "") -> str:
    """Expected (left) and realised (right) cumulative reward per agent.

    Output is byte-stable: fixed hash salt and no date metadata.
    """
    with plt.rc_context({"svg.hashsalt": "pcwlab", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharex=True)
        for name, (ce, cr) in curves.items():
            label = LABELS.get(name, name)
            axes[0].plot(range(1, len(ce) + 1), ce, label=label, lw=1.2)
            axes[1].plot(range(1, len(cr) + 1), cr, label=label, lw=1.2)
        for ax, what in zip(axes, ("expected", "realised")):
            ax.set_xlabel("customers quoted")
            ax.set_ylabel(f"cumulative {what} reward")
            ax.axhline(0.0, color="grey", lw=0.6)
            ax.grid(alpha=0.3)
        axes[0].legend(fontsize=7, loc="upper left")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
