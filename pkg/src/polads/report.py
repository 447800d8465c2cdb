"""Report emission: machine-first JSON and CSV, bar-chart figures beside them.

JSON is written with sorted keys and stable float repr so that re-runs are
byte-identical; anything time-dependent belongs in run_metadata.json, which
callers write separately.
"""

from __future__ import annotations

import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import __version__

log = logging.getLogger(__name__)


def write_json(path: str | Path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def write_csv(path: str | Path, header: Sequence[str],
              rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
    return path


def write_run_metadata(directory: str | Path, command: str) -> Path:
    """Timestamps live here and only here, so every other report file is
    byte-identical across re-runs."""
    return write_json(Path(directory) / "run_metadata.json", {
        "command": command,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "polads_version": __version__,
    })


def save_bar_chart(path: str | Path, labels: Sequence[str],
                   values: Sequence[float], title: str, xlabel: str) -> Path:
    """Horizontal bar chart, largest value on top, PNG without timestamps."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height = max(2.0, 0.4 * len(labels) + 1.2)
    fig, ax = plt.subplots(figsize=(8, height))
    y = range(len(labels))
    ax.barh(y, values, color="steelblue", edgecolor="black")
    ax.set_yticks(list(y))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": "polads"})
    plt.close(fig)
    log.debug("figure written to %s", path)
    return path
