"""Seeded synthetic person records and duplicate injection with ground truth."""

from __future__ import annotations

import math
import string
from typing import List, Sequence, Set, Tuple

import numpy as np

from .dedup import Record
from .errors import ConfigurationError

__all__ = ["SCHEMA", "EDIT_OPS", "make_clean_records", "corrupt", "inject_duplicates"]

SCHEMA = ("given_name", "surname", "street", "city", "postcode")
EDIT_OPS = ("substitute", "insert", "delete", "transpose")

_GIVEN = (
    "adam alice amir anna arthur beatrice benjamin carla carlos chloe daniel "
    "diana edgar elena emil farah felix fiona george grace hannah hector irene "
    "isaac jasmine joel julia kevin laila leon lucia marcus maria martin nadia "
    "nathan olga oscar paula pedro quentin rachel robert sabine samuel sofia "
    "tariq teresa ulrich valerie victor wanda walter xenia yusuf zara zoltan"
).split()
_SUR_HEAD = (
    "ander bal bern cald dorn ell fair gar hal hart kess lind mar mont nor "
    "ost pell quin rad ros sand stan thorn vand west wick yar zell brom cor"
).split()
_SUR_TAIL = (
    "son sen berg field ford ham ley man mann more ridge ston ton well wood "
    "ova ez ini ard ell"
).split()
_STREETS = (
    "acacia birch cedar chestnut elm hawthorn hazel juniper laurel linden "
    "maple oak olive pine poplar rowan spruce sycamore willow yew harbor "
    "meadow orchard quarry river station sunset valley"
).split()
_STREET_TYPES = "street avenue road lane drive court place way".split()
_CITIES = (
    "ashford bramley carlow dunmore eastwick fernhill glenrock highbury "
    "ironbridge kingsley larkspur millbrook newhaven oakridge pemberton "
    "queensbury redhill stonegate thornbury upton westbrook yarmouth"
).split()

_ALPHABET = string.ascii_lowercase


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def make_clean_records(n: int, seed: int) -> List[Record]:
    """``n`` distinct person records with ids ``0..n-1``."""
    if int(n) != n or n < 0:
        raise ConfigurationError(f"n must be a non-negative integer, got {n!r}")
    rng = np.random.default_rng(seed)
    seen = set()
    out = []
    while len(out) < n:
        fields = (
            _pick(rng, _GIVEN).capitalize(),
            (_pick(rng, _SUR_HEAD) + _pick(rng, _SUR_TAIL)).capitalize(),
            f"{int(rng.integers(1, 10000))} {_pick(rng, _STREETS).capitalize()} "
            f"{_pick(rng, _STREET_TYPES).capitalize()}",
            _pick(rng, _CITIES).capitalize(),
            f"{int(rng.integers(10000, 100000))}",
        )
        if fields[:2] in seen:
            continue
        seen.add(fields[:2])
        out.append(Record(len(out), fields))
    return out


def _other_char(rng, c=None):
    while True:
        x = _pick(rng, _ALPHABET)
        if x != c:
            return x


def corrupt(text: str, op: str, rng) -> str:
    """Apply one character-level edit. Impossible edits fall back to insert."""
    n = len(text)
    if op == "transpose" and n >= 2:
        i = int(rng.integers(n - 1))
        return text[:i] + text[i + 1] + text[i] + text[i + 2 :]
    if op == "substitute" and n >= 1:
        i = int(rng.integers(n))
        return text[:i] + _other_char(rng, text[i]) + text[i + 1 :]
    if op == "delete" and n >= 1:
        i = int(rng.integers(n))
        return text[:i] + text[i + 1 :]
    if op not in EDIT_OPS:
        raise ValueError(f"unknown edit operation {op!r}")
    i = int(rng.integers(n + 1))
    return text[:i] + _other_char(rng) + text[i:]


def inject_duplicates(
    clean_records: Sequence[Record], dup_rate: float, max_edits: int, seed: int
) -> Tuple[List[Record], Set[Tuple[int, int]]]:
    """Copy and corrupt a fraction of records, then shuffle.

    ``round(dup_rate * n)`` distinct sources are copied; each copy receives
    between 1 and ``max_edits`` edits, each on a uniformly chosen field
    with a uniformly chosen operation. Output records are renumbered by
    their shuffled position, and the truth set holds the canonical
    ``(source, copy)`` id pairs.
    """
    if not 0.0 <= dup_rate <= 1.0:
        raise ConfigurationError(f"dup_rate must be in [0, 1], got {dup_rate!r}")
    if int(max_edits) != max_edits or max_edits < 1:
        raise ConfigurationError(f"max_edits must be an integer >= 1, got {max_edits!r}")
    n = len(clean_records)
    if n == 0 and dup_rate > 0:
        raise ConfigurationError("cannot inject duplicates into an empty dataset")
    rng = np.random.default_rng(seed)
    m = int(math.floor(dup_rate * n + 0.5))
    if m == 0:
        return list(clean_records), set()

    sources = rng.choice(n, size=m, replace=False)
    n_fields = len(clean_records[0].fields)
    copies = []
    for src in sources:
        fields = list(clean_records[src].fields)
        for _ in range(int(rng.integers(1, max_edits + 1))):
            f = int(rng.integers(n_fields))
            fields[f] = corrupt(fields[f], _pick(rng, EDIT_OPS), rng)
        copies.append(tuple(fields))

    rows = [r.fields for r in clean_records] + copies
    order = rng.permutation(len(rows))
    new_id = np.empty(len(rows), dtype=int)
    new_id[order] = np.arange(len(rows))
    dirty = [Record(i, rows[j]) for i, j in enumerate(order)]
    truth = set()
    for c, src in enumerate(sources):
        a, b = int(new_id[src]), int(new_id[n + c])
        truth.add((min(a, b), max(a, b)))
    return dirty, truth
