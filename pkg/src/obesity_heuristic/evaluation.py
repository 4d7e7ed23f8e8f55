"""Duplicate-detection metrics and a brute-force all-pairs oracle.

Two metrics share the count of identified duplicates as denominator::

    recall               = correctly identified / identified
    false positive error = wrongly identified / identified

so they always sum to one. Because the first one is precision in
conventional terms, conventional precision and recall against the full
truth set are reported next to them. A zero denominator yields ``None``
(undefined), never 0 or 1.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence, Set, Tuple

from .dedup import CandidatePair, Decision, MatchPolicy, Record, normalize, score_pairs
from .errors import ConfigurationError, StateError

__all__ = [
    "UNDEFINED",
    "MetricsReport",
    "identified_recall",
    "false_positive_error",
    "conventional_metrics",
    "brute_force_oracle",
    "score_run",
    "canonical_truth",
    "metrics_table",
    "ORACLE_LIMIT",
]

UNDEFINED = None
ORACLE_LIMIT = 5000

Pair = Tuple[int, int]


def identified_recall(correct: int, identified: int) -> Optional[float]:
    if correct < 0 or correct > identified:
        raise ValueError(f"need 0 <= correct <= identified, got {correct}, {identified}")
    if identified == 0:
        return UNDEFINED
    return correct / identified


def false_positive_error(wrong: int, identified: int) -> Optional[float]:
    if wrong < 0 or wrong > identified:
        raise ValueError(f"need 0 <= wrong <= identified, got {wrong}, {identified}")
    if identified == 0:
        return UNDEFINED
    return wrong / identified


def canonical_truth(pairs: Iterable[Pair]) -> Set[Pair]:
    """Canonicalize pairs to ``(low, high)``; self-pairs are rejected."""
    out = set()
    for a, b in pairs:
        if a == b:
            raise ConfigurationError(f"self-pair ({a}, {b}) in truth set")
        out.add((min(a, b), max(a, b)))
    return out


def _predicted(decisions) -> Set[Pair]:
    if isinstance(decisions, (set, frozenset)):
        return set(decisions)
    out = set()
    for p in decisions:
        if p.decision is None:
            raise StateError(f"pair {p.key} has no decision")
        if p.decision is Decision.DUPLICATE:
            out.add(p.key)
    return out


def conventional_metrics(decisions, truth: Set[Pair]):
    """``(precision, recall)`` of DUPLICATE decisions against ``truth``.

    ``decisions`` is either an iterable of decided :class:`CandidatePair`
    or a set of predicted ``(left, right)`` pairs.
    """
    predicted = _predicted(decisions)
    tp = len(predicted & truth)
    precision = tp / len(predicted) if predicted else UNDEFINED
    recall = tp / len(truth) if truth else UNDEFINED
    return precision, recall


@dataclass(frozen=True)
class MetricsReport:
    identified: int
    correctly_identified: int
    wrongly_identified: int
    truth_size: int
    recall: Optional[float]
    false_positive_error: Optional[float]
    conventional_precision: Optional[float]
    conventional_recall: Optional[float]

    def to_dict(self):
        return asdict(self)


def score_run(decisions, truth: Set[Pair]) -> MetricsReport:
    predicted = _predicted(decisions)
    correct = len(predicted & truth)
    wrong = len(predicted) - correct
    precision, recall = conventional_metrics(predicted, truth)
    return MetricsReport(
        identified=len(predicted),
        correctly_identified=correct,
        wrongly_identified=wrong,
        truth_size=len(truth),
        recall=identified_recall(correct, len(predicted)),
        false_positive_error=false_positive_error(wrong, len(predicted)),
        conventional_precision=precision,
        conventional_recall=recall,
    )


def brute_force_oracle(records: Sequence[Record], policy: MatchPolicy):
    """Score and classify every unordered pair of ``records``."""
    if len(records) > ORACLE_LIMIT:
        raise ConfigurationError(
            f"brute-force oracle refuses {len(records)} records "
            f"(limit {ORACLE_LIMIT}: {len(records) * (len(records) - 1) // 2} pairs)"
        )
    normed = {r.record_id: normalize(r) for r in records}
    ids = sorted(normed)
    pairs = [CandidatePair(a, b) for a, b in itertools.combinations(ids, 2)]
    return score_pairs(pairs, normed, policy)


METRIC_COLUMNS = [
    "run",
    "identified",
    "correctly_identified",
    "wrongly_identified",
    "truth_size",
    "recall",
    "false_positive_error",
    "conventional_precision",
    "conventional_recall",
]


def metrics_table(rows: Iterable[Tuple[str, Mapping]]) -> str:
    """Comma-delimited table, one row per ``(run_name, metrics_dict)``.

    Undefined metrics are written as the literal ``undefined``.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for name, m in rows:
        row = [name]
        for col in METRIC_COLUMNS[1:]:
            v = m.get(col)
            row.append("undefined" if v is None else repr(v))
        writer.writerow(row)
    return buf.getvalue()
