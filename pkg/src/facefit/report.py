"""Fit report output: delimited loss table plus rendered loss-curve figure."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write_text

COARSE_COLUMNS = ("iteration", "total", "feat", "regu", "phot", "land",
                  "grad_norm")
DETAIL_COLUMNS = ("iteration", "total", "grad_norm")


def report_table(report, sep="\t"):
    """Per-iteration loss history as delimited text (no wall-clock data,
    so identical fits produce identical tables)."""
    columns = COARSE_COLUMNS if report.stage == "coarse" else DETAIL_COLUMNS
    lines = [sep.join(columns)]
    for row in report.history:
        lines.append(sep.join(
            str(row[c]) if c == "iteration" else repr(float(row[c]))
            for c in columns))
    lines.append(f"# stage{sep}{report.stage}")
    lines.append(f"# termination{sep}{report.termination}")
    if report.stage == "detail":
        lines.append(f"# saturated_pixels{sep}{report.saturated_pixels}")
    return "\n".join(lines) + "\n"


def write_report(report, path, sep="\t"):
    atomic_write_text(path, report_table(report, sep=sep))


def plot_loss_curves(reports, path):
    """Render loss curves for one or more fit stages to an image file."""
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    fig, axes = plt.subplots(1, len(reports), figsize=(5 * len(reports), 3.5),
                             squeeze=False)
    for ax, rep in zip(axes[0], reports):
        its = [row["iteration"] for row in rep.history]
        ax.plot(its, [row["total"] for row in rep.history], label="total")
        if rep.stage == "coarse":
            for key in ("feat", "regu", "phot", "land"):
                ax.plot(its, [row[key] for row in rep.history],
                        label=key, linewidth=0.8)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.set_title(f"{rep.stage} fit ({rep.termination})")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": "facefit"})
    plt.close(fig)
