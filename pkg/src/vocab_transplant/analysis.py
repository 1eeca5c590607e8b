"""Diagnostic reports: vocabulary-overlap statistics and the subword-count
histogram of new types under the source tokenizer.

A type that the source tokenizer maps to [UNK] counts as one subword, so
histogram bucket 1 collects both single-piece types and unsegmentable ones.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import ValidationError
from .tokenizer import Vocabulary, tokenize_word
from .transplant import VocabAlignment

PROVENANCE_KINDS = ("copied", "sampled", "projected", "averaged", "unk-fallback")

_SUMMARY_FIELDS = (
    "n_shared",
    "n_new",
    "pct_new",
    "strategy",
    "fallback_count",
    "effective_target_size",
    "mean_subwords",
)


@dataclass
class TransplantReport:
    n_shared: int
    n_new: int
    pct_new: float
    strategy: str
    fallback_count: int
    histogram: dict
    mean_subwords: float
    effective_target_size: int
    per_token_provenance: Optional[dict] = field(default=None)


def subword_histogram(new_types: Iterable[str], src_vocab: Vocabulary) -> dict:
    """Map piece-count -> frequency over the new types."""
    hist = {}
    for tok in new_types:
        n = len(tokenize_word(tok, src_vocab).pieces)
        hist[n] = hist.get(n, 0) + 1
    return hist


def mean_subword_count(hist: dict) -> float:
    """Frequency-weighted mean of a subword-count histogram."""
    total = sum(hist.values())
    if total == 0:
        raise ValueError("cannot average an empty histogram")
    return sum(k * f for k, f in hist.items()) / total


def build_report(
    align: VocabAlignment,
    strategy: str,
    src_vocab: Vocabulary,
    provenance: Optional[dict] = None,
    include_provenance: bool = False,
) -> TransplantReport:
    """Assemble a report for an alignment under a named strategy."""
    hist = subword_histogram(align.new, src_vocab)
    n_shared = len(align.shared)
    n_new = len(align.new)
    effective = n_shared + n_new
    pct_new = 100.0 * n_new / effective if effective else 0.0
    mean = mean_subword_count(hist) if n_new else 0.0
    if strategy == "fasttext-projection" and provenance is not None:
        fallback = sum(
            1 for t in align.new if provenance.get(t) in ("averaged", "unk-fallback")
        )
    else:
        fallback = 0
    return TransplantReport(
        n_shared=n_shared,
        n_new=n_new,
        pct_new=pct_new,
        strategy=strategy,
        fallback_count=fallback,
        histogram=dict(sorted(hist.items())),
        mean_subwords=mean,
        effective_target_size=effective,
        per_token_provenance=dict(provenance) if include_provenance and provenance else None,
    )


def validate_report(report: TransplantReport) -> None:
    """Raise ValidationError unless every report invariant holds."""
    if report.n_shared < 0 or report.n_new < 0:
        raise ValidationError("counts must be non-negative")
    if report.n_shared + report.n_new != report.effective_target_size:
        raise ValidationError(
            f"n_shared + n_new = {report.n_shared + report.n_new} does not equal "
            f"effective target size {report.effective_target_size}"
        )
    if not report.strategy:
        raise ValidationError("strategy must be named")
    if not 0 <= report.fallback_count <= max(report.n_new, 0):
        raise ValidationError("fallback_count must lie in [0, n_new]")
    total = 0
    for k, f in report.histogram.items():
        if not isinstance(k, int) or k < 1:
            raise ValidationError(f"histogram keys must be positive integers, got {k!r}")
        if not isinstance(f, int) or f < 1:
            raise ValidationError(f"histogram frequencies must be positive integers, got {f!r}")
        total += f
    if total != report.n_new:
        raise ValidationError(
            f"histogram mass {total} does not equal n_new {report.n_new}"
        )
    if report.n_new:
        expected = mean_subword_count(report.histogram)
        if abs(expected - report.mean_subwords) > 1e-9:
            raise ValidationError(
                f"mean_subwords {report.mean_subwords} inconsistent with histogram "
                f"(expected {expected})"
            )
    elif report.mean_subwords != 0.0:
        raise ValidationError("mean_subwords must be 0.0 when there are no new types")
    expected_pct = (
        100.0 * report.n_new / report.effective_target_size
        if report.effective_target_size
        else 0.0
    )
    if abs(expected_pct - report.pct_new) > 1e-9:
        raise ValidationError(f"pct_new {report.pct_new} inconsistent (expected {expected_pct})")
    if report.per_token_provenance is not None:
        if len(report.per_token_provenance) != report.effective_target_size:
            raise ValidationError("provenance must cover every shared and new token")
        for tok, kind in report.per_token_provenance.items():
            if kind not in PROVENANCE_KINDS:
                raise ValidationError(f"unknown provenance kind {kind!r} for {tok!r}")


def _report_to_json_dict(report: TransplantReport) -> dict:
    total = report.n_new
    return {
        "n_shared": report.n_shared,
        "n_new": report.n_new,
        "pct_new": report.pct_new,
        "strategy": report.strategy,
        "fallback_count": report.fallback_count,
        "effective_target_size": report.effective_target_size,
        "mean_subwords": report.mean_subwords,
        "histogram": {str(k): f for k, f in sorted(report.histogram.items())},
        "proportions": {
            str(k): f / total for k, f in sorted(report.histogram.items())
        } if total else {},
        "per_token_provenance": report.per_token_provenance,
    }


def emit_report(report: TransplantReport, path, format: str = "json") -> list:
    """Write the report; returns the paths written.

    JSON: one file at ``path``.  CSV: a summary CSV at ``path`` plus a
    histogram CSV (columns subwords,count, ascending) at
    ``<path stem>.histogram.csv``.
    """
    validate_report(report)
    path = Path(path)
    if format == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_report_to_json_dict(report), fh, sort_keys=True, indent=2)
            fh.write("\n")
        return [path]
    if format == "csv":
        hist_path = path.with_suffix("").with_suffix(".histogram.csv") \
            if path.suffix else Path(f"{path}.histogram.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_SUMMARY_FIELDS)
            writer.writerow([getattr(report, name) for name in _SUMMARY_FIELDS])
        with open(hist_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subwords", "count"])
            for k, f in sorted(report.histogram.items()):
                writer.writerow([k, f])
        return [path, hist_path]
    raise ValueError(f"unknown report format {format!r}; use 'json' or 'csv'")


def load_report(path) -> TransplantReport:
    """Parse a JSON report back into a TransplantReport."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return TransplantReport(
        n_shared=data["n_shared"],
        n_new=data["n_new"],
        pct_new=data["pct_new"],
        strategy=data["strategy"],
        fallback_count=data["fallback_count"],
        histogram={int(k): v for k, v in data["histogram"].items()},
        mean_subwords=data["mean_subwords"],
        effective_target_size=data["effective_target_size"],
        per_token_provenance=data.get("per_token_provenance"),
    )
