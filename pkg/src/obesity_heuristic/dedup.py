"""Duplicate detection: token keys, sorted neighborhood, weighted matching.

Records are compared only inside a sliding window over records sorted by a
token key. Each candidate pair gets a weighted mean of per-field
similarities, and the score is mapped to one of three decisions by the
two thresholds of a :class:`MatchPolicy`::

    score >= theta_high          -> DUPLICATE
    theta_low <= score < high    -> AMBIGUOUS
    score < theta_low            -> NON_DUPLICATE

A policy is also a genome for :mod:`obesity_heuristic.ais_core`; see
:meth:`MatchPolicy.from_genome` and :func:`policy_objective`.
"""

from __future__ import annotations

import enum
import functools
import math
import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from rapidfuzz.distance import DamerauLevenshtein

from .ais_core import Objective
from .errors import ConfigurationError, InputError

__all__ = [
    "Record",
    "KeySpec",
    "MatchPolicy",
    "Decision",
    "CandidatePair",
    "Calibration",
    "normalize",
    "normalize_text",
    "token_key",
    "sort_and_window",
    "edit_distance",
    "field_similarity",
    "field_similarities",
    "record_similarity",
    "classify",
    "score_pairs",
    "policy_fitness",
    "policy_objective",
    "resolve_backlog",
]

_PUNCT = re.compile(r"[^\w\s]|_")
_SPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class Record:
    record_id: int
    fields: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class KeySpec:
    """Token key construction.

    ``fields_used`` holds field positions; ``None`` means every field.
    """

    token_count: int = 3
    prefix_len: int = 4
    fields_used: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if int(self.token_count) != self.token_count or self.token_count < 1:
            raise ConfigurationError(f"token_count must be >= 1, got {self.token_count!r}")
        if int(self.prefix_len) != self.prefix_len or self.prefix_len < 1:
            raise ConfigurationError(f"prefix_len must be >= 1, got {self.prefix_len!r}")
        if self.fields_used is not None:
            object.__setattr__(self, "fields_used", tuple(self.fields_used))


@dataclass(frozen=True)
class MatchPolicy:
    weights: Tuple[float, ...]
    theta_low: float = 0.6
    theta_high: float = 0.85

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise ConfigurationError("policy needs at least one weight")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ConfigurationError(f"weights must be non-negative, got {w}")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ConfigurationError(f"weights must sum to 1, got sum {sum(w)!r}")
        if not 0.0 <= self.theta_low <= self.theta_high <= 1.0:
            raise ConfigurationError(
                "thresholds must satisfy 0 <= theta_low <= theta_high <= 1, got "
                f"theta_low={self.theta_low!r}, theta_high={self.theta_high!r}"
            )

    @classmethod
    def uniform(cls, n_fields, theta_low=0.6, theta_high=0.85):
        return cls((1.0 / n_fields,) * n_fields, theta_low, theta_high)

    @property
    def n_fields(self):
        return len(self.weights)

    @staticmethod
    def genome_bounds(n_fields):
        """Unit box for ``n_fields`` raw weights plus two thresholds."""
        return np.zeros(n_fields + 2), np.ones(n_fields + 2)

    @classmethod
    def from_genome(cls, genome, n_fields):
        """Decode a genome, renormalizing weights and swapping inverted thresholds.

        An all-zero weight vector decodes to uniform weights.
        """
        genome = np.clip(np.asarray(genome, dtype=float), 0.0, 1.0)
        if genome.size != n_fields + 2:
            raise ConfigurationError(
                f"genome of length {genome.size} does not encode {n_fields} fields"
            )
        raw = genome[:n_fields]
        total = raw.sum()
        weights = raw / total if total > 0 else np.full(n_fields, 1.0 / n_fields)
        lo, hi = sorted((float(genome[n_fields]), float(genome[n_fields + 1])))
        return cls(tuple(weights.tolist()), lo, hi)

    def to_genome(self):
        return np.array(list(self.weights) + [self.theta_low, self.theta_high])

    def to_dict(self):
        return {
            "weights": list(self.weights),
            "theta_low": self.theta_low,
            "theta_high": self.theta_high,
        }


class Decision(str, enum.Enum):
    DUPLICATE = "DUPLICATE"
    AMBIGUOUS = "AMBIGUOUS"
    NON_DUPLICATE = "NON_DUPLICATE"


@dataclass(frozen=True)
class CandidatePair:
    """An unordered record pair in canonical form ``left < right``.

    ``field_scores`` caches the per-field similarities so rescoring under a
    new policy needs no string comparisons.
    """

    left: int
    right: int
    score: Optional[float] = None
    decision: Optional[Decision] = None
    field_scores: Optional[Tuple[float, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError(f"pair ({self.left}, {self.right}) is not canonical")

    @classmethod
    def of(cls, a, b):
        return cls(min(a, b), max(a, b))

    @property
    def key(self):
        return (self.left, self.right)


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _SPACE.sub(" ", _PUNCT.sub("", text.lower())).strip()


def normalize(record: Record) -> Record:
    return Record(record.record_id, tuple(normalize_text(f) for f in record.fields))


def token_key(record: Record, spec: KeySpec) -> str:
    """Sort key from the ``k`` lexicographically smallest tokens.

    Each token contributes its first ``c`` characters. Input is normalized
    first, so the key ignores token order, case and punctuation.
    """
    idx = range(len(record.fields)) if spec.fields_used is None else spec.fields_used
    tokens = []
    for i in idx:
        tokens.extend(normalize_text(record.fields[i]).split())
    tokens.sort()
    return "".join(t[: spec.prefix_len] for t in tokens[: spec.token_count])


def sort_and_window(
    records: Sequence[Record], window: int, spec: Optional[KeySpec] = None
) -> List[CandidatePair]:
    """Sorted-neighborhood candidate pairs.

    Records are sorted by token key (ties by ``record_id``) and each one is
    paired with its ``window - 1`` successors. Pairs come back canonical and
    sorted.
    """
    if int(window) != window or window < 2:
        raise ConfigurationError(f"window must be an integer >= 2, got {window!r}")
    spec = spec or KeySpec()
    ordered = sorted(records, key=lambda r: (token_key(r, spec), r.record_id))
    pairs = set()
    for i, rec in enumerate(ordered):
        for other in ordered[i + 1 : i + window]:
            if rec.record_id != other.record_id:
                pairs.add((min(rec.record_id, other.record_id), max(rec.record_id, other.record_id)))
    return [CandidatePair(a, b) for a, b in sorted(pairs)]


@functools.lru_cache(maxsize=1 << 18)
def edit_distance(a: str, b: str) -> int:
    """Damerau-Levenshtein distance (adjacent transpositions cost 1)."""
    return DamerauLevenshtein.distance(a, b)


def field_similarity(a: str, b: str) -> float:
    """``1 - edit_distance / max(len)``; 1.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


def field_similarities(left: Record, right: Record) -> Tuple[float, ...]:
    if len(left.fields) != len(right.fields):
        raise InputError(
            f"records {left.record_id} and {right.record_id} have "
            f"{len(left.fields)} and {len(right.fields)} fields"
        )
    return tuple(
        field_similarity(*sorted((a, b))) for a, b in zip(left.fields, right.fields)
    )


def _weighted(sims, weights) -> float:
    # fsum keeps the result order-independent and inside [0, 1]
    return min(1.0, max(0.0, math.fsum(w * s for w, s in zip(weights, sims))))


def record_similarity(left: Record, right: Record, policy: MatchPolicy) -> float:
    if len(left.fields) != policy.n_fields:
        raise InputError(
            f"policy has {policy.n_fields} weights but records have {len(left.fields)} fields"
        )
    return _weighted(field_similarities(left, right), policy.weights)


def classify(score: float, policy: MatchPolicy) -> Decision:
    if score >= policy.theta_high:
        return Decision.DUPLICATE
    if score >= policy.theta_low:
        return Decision.AMBIGUOUS
    return Decision.NON_DUPLICATE


def score_pairs(
    pairs: Iterable[CandidatePair],
    records: Mapping[int, Record],
    policy: MatchPolicy,
) -> List[CandidatePair]:
    """Score and classify pairs; ``records`` maps id to a normalized record."""
    out = []
    for p in pairs:
        sims = p.field_scores
        if sims is None:
            sims = field_similarities(records[p.left], records[p.right])
        if len(sims) != policy.n_fields:
            raise InputError(
                f"policy has {policy.n_fields} weights but pair {p.key} has {len(sims)} fields"
            )
        s = _weighted(sims, policy.weights)
        out.append(replace(p, score=s, decision=classify(s, policy), field_scores=sims))
    return out


class Calibration:
    """Labeled pairs with cached field similarities, for fast policy scoring."""

    def __init__(self, field_scores, labels):
        self.field_scores = np.asarray(field_scores, dtype=float)
        self.labels = np.asarray(labels, dtype=bool)
        if self.field_scores.ndim != 2 or len(self.field_scores) != len(self.labels):
            raise ConfigurationError("calibration scores and labels do not line up")
        if len(self.labels) == 0:
            raise ConfigurationError("calibration set is empty")

    @classmethod
    def from_pairs(cls, pairs: Sequence[CandidatePair], truth, records=None):
        """Label pairs by membership in ``truth`` (a set of ``(left, right)``)."""
        rows = []
        for p in pairs:
            sims = p.field_scores
            if sims is None:
                if records is None:
                    raise ConfigurationError(f"pair {p.key} has no cached field scores")
                sims = field_similarities(records[p.left], records[p.right])
            rows.append(sims)
        labels = [p.key in truth for p in pairs]
        if not rows:
            raise ConfigurationError("calibration set is empty")
        return cls(rows, labels)

    def __len__(self):
        return len(self.labels)

    @property
    def n_fields(self):
        return self.field_scores.shape[1]


def _f1(predicted: np.ndarray, labels: np.ndarray) -> float:
    tp = int(np.sum(predicted & labels))
    n_pred = int(predicted.sum())
    n_true = int(labels.sum())
    if tp == 0 or n_pred == 0 or n_true == 0:
        return 0.0
    precision, recall = tp / n_pred, tp / n_true
    return 2 * precision * recall / (precision + recall)


def policy_fitness(policy: MatchPolicy, calibration: Calibration) -> float:
    """F1 of the policy's DUPLICATE decisions; AMBIGUOUS counts as negative."""
    if len(calibration) == 0:
        raise ConfigurationError("calibration set is empty")
    scores = np.clip(calibration.field_scores @ np.asarray(policy.weights), 0.0, 1.0)
    return _f1(scores >= policy.theta_high, calibration.labels)


def policy_objective(calibration: Calibration) -> Objective:
    """Maximization objective over policy genomes for clonal selection."""
    n = calibration.n_fields
    lower, upper = MatchPolicy.genome_bounds(n)
    return Objective(
        lambda g: policy_fitness(MatchPolicy.from_genome(g, n), calibration), lower, upper
    )


def resolve_backlog(
    backlog: Sequence[CandidatePair],
    policy: MatchPolicy,
    records: Optional[Mapping[int, Record]] = None,
) -> List[CandidatePair]:
    """Rescore AMBIGUOUS pairs under an optimized policy."""
    return score_pairs(backlog, records or {}, policy)
