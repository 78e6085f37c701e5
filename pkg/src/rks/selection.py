"""Checkpoint selection over a training trace, and trace CSV export.

Selecting the checkpoint with minimum held-out perplexity is the common
early-stopping rule; selecting by entropy-regularized perplexity instead
tolerates a small perplexity increase in exchange for lower-entropy
posteriors, which is the better proxy for downstream decoding quality.
"""

from __future__ import annotations

import enum
import os

from .metrics import MetricsRecord
from .training import CheckpointTrace, TraceEntry

_CSV_HEADER = "epoch,perplexity,accuracy,entropy,erp,checkpoint"


class SelectionCriterion(enum.Enum):
    PERPLEXITY = "ppx"
    ERP = "erp"


def select_checkpoint(trace: CheckpointTrace, criterion: SelectionCriterion) -> TraceEntry:
    """Entry minimizing the criterion; ties go to the earliest epoch."""
    if not trace.entries:
        raise ValueError("cannot select from an empty trace")
    if criterion is SelectionCriterion.PERPLEXITY:
        key = lambda e: e.metrics.perplexity
    elif criterion is SelectionCriterion.ERP:
        key = lambda e: e.metrics.erp
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    best = trace.entries[0]
    for entry in trace.entries[1:]:
        if key(entry) < key(best):
            best = entry
    return best


def selection_summary(entry: TraceEntry) -> dict:
    """The stable JSON schema printed by the select command."""
    return {
        "epoch": int(entry.epoch),
        "checkpoint": entry.checkpoint,
        "perplexity": float(entry.metrics.perplexity),
        "entropy": float(entry.metrics.mean_entropy),
        "erp": float(entry.metrics.erp),
    }


def export_trace(trace: CheckpointTrace, path) -> None:
    """Write the trace as CSV with shortest-round-trip float formatting.

    Exporting, parsing, and exporting again yields byte-identical files.
    """
    if not str(path):
        raise ValueError("export path must be non-empty")
    lines = [_CSV_HEADER]
    for e in trace.entries:
        m = e.metrics
        lines.append(
            f"{int(e.epoch)},{float(m.perplexity)!r},{float(m.accuracy)!r},"
            f"{float(m.mean_entropy)!r},{float(m.erp)!r},{e.checkpoint}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trace(path) -> CheckpointTrace:
    """Parse a trace CSV back into a metrics-only trace.

    Frame counts are not stored in the CSV, so loaded records carry
    num_frames=0. The parent directory becomes the run directory for
    resolving checkpoints.
    """
    with open(path, "r") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError(f"{path}: not a trace CSV (expected header {_CSV_HEADER!r})")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"{path}: line {lineno}: expected 6 columns, got {len(parts)}")
        epoch_s, ppx_s, acc_s, ent_s, erp_s, checkpoint = parts
        try:
            metrics = MetricsRecord(
                perplexity=float(ppx_s),
                accuracy=float(acc_s),
                mean_entropy=float(ent_s),
                erp=float(erp_s),
                num_frames=0,
            )
            epoch = int(epoch_s)
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
        entries.append(TraceEntry(epoch=epoch, metrics=metrics, checkpoint=checkpoint))
    run_dir = os.path.dirname(os.path.abspath(path))
    return CheckpointTrace(entries=entries, config=None, run_dir=run_dir)
