"""Training-curve figures rendered next to the delimited output."""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_curves(records, path, title: str = None) -> str:
    """Plot log-loss against epoch, one line per (method, formulation, eta0).

    Failed evaluation points are dropped.  Uses a log y-axis when every
    plotted loss is positive.  Returns the path written.
    """
    groups = {}
    for r in records:
        if r.failed or not math.isfinite(r.log_loss):
            continue
        key = (r.method, r.formulation, r.eta0)
        groups.setdefault(key, []).append((r.epoch, r.log_loss))

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    positive = True
    for key in sorted(groups, key=repr):
        method, formulation, eta0 = key
        pts = sorted(groups[key])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        positive = positive and all(y > 0.0 for y in ys)
        ax.plot(xs, ys, marker="o", markersize=3.5,
                label=f"{method}/{formulation} eta0={eta0:g}")
    if groups and positive:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("log-loss")
    if title:
        ax.set_title(title)
    if groups:
        ax.legend(fontsize=8, ncols=2 if len(groups) > 6 else 1)
    else:
        ax.text(0.5, 0.5, "no finite curves", ha="center", va="center",
                transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
