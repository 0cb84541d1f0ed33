"""Serialized training reports and the figures rendered next to them.

The CSV and JSON artifacts are byte-reproducible for identical runs, so
wall-clock timings deliberately stay out of them; per-epoch timings live
on the in-memory report and in console output only.
"""

from __future__ import annotations

import json
from pathlib import Path

REPORT_CSV_HEADER = "# train-report 1"


def write_report_csv(report, path):
    lines = [REPORT_CSV_HEADER, "epoch,correctness_loss,accuracy_loss,regions"]
    for row in report.epochs:
        lines.append(f"{row.epoch},{row.loss_correct!r},{row.loss_accuracy!r},{row.regions}")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def write_report_json(report, path, split_log_name=None):
    cfg = report.config
    doc = {
        "version": 1,
        "outcome": report.outcome,
        "certified": report.certified,
        "final_correctness_loss": report.final_loss_correct,
        "final_accuracy_loss": report.final_loss_accuracy,
        "epochs_run": len(report.epochs),
        "regions": report.region_count,
        "splits": report.split_count,
        "split_log": split_log_name,
        "config": {
            "lr": cfg.lr,
            "k": cfg.k,
            "region_cap": cfg.region_cap,
            "eps_accuracy": cfg.eps_accuracy,
            "max_epochs": cfg.max_epochs,
            "optimizer": cfg.optimizer,
            "lr_decay": None if cfg.lr_decay is None else {
                "patience": cfg.lr_decay.patience,
                "factor": cfg.lr_decay.factor,
            },
            "seed": cfg.seed,
            "refine": cfg.refine,
            "correctness_weight": cfg.correctness_weight,
        },
    }
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def render_loss_figure(report, path):
    """Loss curves over epochs, saved as a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [row.epoch for row in report.epochs]
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    top.plot(epochs, [row.loss_correct for row in report.epochs],
             marker=".", color="tab:red", label="correctness loss")
    top.plot(epochs, [row.loss_accuracy for row in report.epochs],
             marker=".", color="tab:blue", label="accuracy loss")
    top.set_ylabel("loss")
    top.legend()
    top.set_title(f"outcome: {report.outcome}")
    bottom.step(epochs, [row.regions for row in report.epochs],
                where="post", color="tab:green")
    bottom.set_ylabel("regions")
    bottom.set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_region_figure(net, region_set, path):
    """2-D input partitions colored by their worst-case distance.

    Only meaningful for 2-input networks; returns False otherwise.
    """
    if not region_set.regions or region_set.regions[0].box.dim != 2:
        return False

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib import cm, colors, patches

    from .regions import region_losses

    evaluation = region_losses(net, region_set)
    top = max(evaluation.losses) if max(evaluation.losses) > 0 else 1.0
    norm = colors.Normalize(vmin=0.0, vmax=top)
    cmap = matplotlib.colormaps["RdYlGn_r"]

    fig, ax = plt.subplots(figsize=(6, 5))
    for region, loss in zip(region_set.regions, evaluation.losses):
        box = region.box
        ax.add_patch(patches.Rectangle(
            (box.lower[0], box.lower[1]),
            box.upper[0] - box.lower[0],
            box.upper[1] - box.lower[1],
            facecolor=cmap(norm(loss)),
            edgecolor="black",
            linewidth=0.4,
        ))
    for prop in region_set.origins:
        box = prop.input_box
        ax.add_patch(patches.Rectangle(
            (box.lower[0], box.lower[1]),
            box.upper[0] - box.lower[0],
            box.upper[1] - box.lower[1],
            fill=False, edgecolor="black", linewidth=1.2,
        ))
        ax.update_datalim([(box.lower[0], box.lower[1]), (box.upper[0], box.upper[1])])
    ax.autoscale_view()
    ax.set_xlabel("input 0")
    ax.set_ylabel("input 1")
    ax.set_title(f"{len(region_set.regions)} regions (color = worst-case distance)")
    fig.colorbar(cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def save_run(out_dir, net, region_set, report):
    """Write every artifact of a training run into ``out_dir``.

    Returns the list of file names written.
    """
    from .network import save_network
    from .regions import write_split_log

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    save_network(net, out / "network.txt")
    written.append("network.txt")
    write_split_log(region_set, out / "splits.csv")
    written.append("splits.csv")
    write_report_csv(report, out / "report.csv")
    written.append("report.csv")
    write_report_json(report, out / "report.json", split_log_name="splits.csv")
    written.append("report.json")
    render_loss_figure(report, out / "loss_curves.png")
    written.append("loss_curves.png")
    if render_region_figure(net, region_set, out / "regions.png"):
        written.append("regions.png")
    return written
