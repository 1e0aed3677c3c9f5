import os
from dataclasses import dataclass

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from src.core import log_handling as lh
from src.core.errors import ValidationError

LOG_FILE = lh.log_path("plots.log")
LOG_TZ = "UTC"
LOGGER = lh.LogHandling(LOG_FILE, LOG_TZ)

LINE_STYLES = {"solid": "-", "dashed": "--", "dotted": ":"}

# fixed ids and no timestamp, so the same data gives the same file
plt.rcParams["svg.hashsalt"] = "sgc-cavity"


@dataclass(frozen=True, eq=False)
class PlotSeries:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    style: str = "solid"


def spectrum_series(spectrum, channel, label="", style="solid"):
    return PlotSeries(x=spectrum.detunings, y=spectrum.channels[channel], label=label, style=style)


def time_series(response, label="", style="solid"):
    return PlotSeries(x=response.times, y=response.intensity, label=label, style=style)


def emit_plot(series, path, xlabel=r"Detuning $\Delta$ ($\gamma$)", ylabel="Intensity (arb. units)",
              title="", log_y=False):
    """
    Write a static line plot with one curve per series (overlay when several)

    Args:
        series: PlotSeries or list of them; styles map to solid/dashed/dotted lines
        path: Output file; the extension picks the format (svg, pdf, png)
        log_y: Logarithmic intensity axis

    Returns:
        The path written
    """
    series = [series] if isinstance(series, PlotSeries) else list(series)
    if not series or any(np.asarray(s.x).size == 0 for s in series):
        raise ValidationError("cannot plot an empty data set")
    for s in series:
        if s.style not in LINE_STYLES:
            raise ValidationError(f"unknown line style {s.style!r}, expected one of {sorted(LINE_STYLES)}")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        for s in series:
            ax.plot(s.x, s.y, LINE_STYLES[s.style], color="black" if len(series) == 1 else None,
                    linewidth=1.2, label=s.label or None)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if log_y:
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        if any(s.label for s in series):
            ax.legend(frameon=False)
        fig.tight_layout()

        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    except OSError as e:
        LOGGER.writeLog(f"Error writing plot {path}: {e}")
        raise OSError(f"cannot write plot to {path}: {e}") from e
    finally:
        plt.close(fig)

    LOGGER.writeDebugLog(f"Plot written to {path} ({len(series)} curves)")
    return path
