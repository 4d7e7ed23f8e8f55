"""Just-In-Time cleaning loop with omega-6 and lipotoxicity triggers.

Each cycle ingests one batch of raw units, turns it into labeled output
units, stores every unit in a site chosen by its label, and then checks two
conditions:

* lipotoxicity: a non-adipose site holds strictly more units than its
  threshold (adipose sites are exempt whatever their size);
* omega-6 overload: the run's count of OMEGA6 (ambiguous) units is strictly
  above the configured threshold.

Only if one of them holds is the immune response started. It asks the
generator for a better policy, relabels the OMEGA6 backlog with it and
moves resolved units out of lipotoxic sites into adipose storage. Nothing
runs in the background between triggers.

The performance measure of a run is the number of OMEGA3 units.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from .ais_core import ClonalParams, run as clonal_run
from .dedup import (
    Calibration,
    CandidatePair,
    Decision,
    KeySpec,
    MatchPolicy,
    Record,
    normalize,
    policy_objective,
    resolve_backlog,
    score_pairs,
    token_key,
)
from .errors import ConfigurationError, InputError, RunError, StateError

log = logging.getLogger(__name__)

__all__ = [
    "Label",
    "Reason",
    "StorageSite",
    "StorageRegistry",
    "AminoAcidUnit",
    "FattyAcidUnit",
    "OmegaTally",
    "TriggerConfig",
    "TriggerDecision",
    "ImmuneOutcome",
    "RunReport",
    "IdentityGenerator",
    "DedupGenerator",
    "Controller",
    "register_site",
    "ingest",
    "batched",
    "generate_fatty_acids",
    "store",
    "check_lipotoxicity",
    "omega_accounting",
    "should_trigger",
    "trigger_immune_response",
    "run_cycle",
]


class Label(str, enum.Enum):
    OMEGA3 = "OMEGA3"
    OMEGA6 = "OMEGA6"
    REJECTED = "REJECTED"


DECISION_LABEL = {
    Decision.DUPLICATE: Label.OMEGA3,
    Decision.AMBIGUOUS: Label.OMEGA6,
    Decision.NON_DUPLICATE: Label.REJECTED,
}


class Reason(str, enum.Enum):
    OMEGA6 = "OMEGA6"
    LIPOTOXICITY = "LIPOTOXICITY"
    NONE = "NONE"


# --------------------------------------------------------------------------
# storage


@dataclass
class StorageSite:
    site_id: str
    is_adipose: bool
    capacity_threshold: float
    current_size: int = 0

    def __post_init__(self):
        if not (self.capacity_threshold >= 0):
            raise ConfigurationError(
                f"site {self.site_id!r}: capacity_threshold must be non-negative"
            )

    def to_dict(self):
        return {
            "site_id": self.site_id,
            "is_adipose": self.is_adipose,
            "capacity_threshold": _num(self.capacity_threshold),
            "current_size": self.current_size,
        }


class StorageRegistry:
    """Named storage sites. Sizes are counters; payloads are not kept here."""

    def __init__(self):
        self.sites: Dict[str, StorageSite] = {}

    def __contains__(self, site_id):
        return site_id in self.sites

    def __getitem__(self, site_id) -> StorageSite:
        try:
            return self.sites[site_id]
        except KeyError:
            raise ConfigurationError(f"unknown storage site {site_id!r}") from None

    def adipose_sites(self):
        return [s for s in self.sites.values() if s.is_adipose]

    def total_size(self):
        return sum(s.current_size for s in self.sites.values())

    def to_dict(self):
        return {k: s.to_dict() for k, s in self.sites.items()}


def register_site(registry, site_id, is_adipose, capacity_threshold=math.inf):
    if site_id in registry.sites:
        raise ConfigurationError(f"storage site {site_id!r} is already registered")
    registry.sites[site_id] = StorageSite(site_id, bool(is_adipose), capacity_threshold)
    return registry


def store(unit, site_id, registry):
    """Count ``unit`` into ``site_id``; returns the unit tagged with the site."""
    site = registry[site_id]
    site.current_size += 1
    return replace(unit, site_id=site_id) if unit.site_id != site_id else unit


def check_lipotoxicity(registry) -> List[str]:
    """Non-adipose sites whose size is strictly above their threshold."""
    return [
        s.site_id
        for s in registry.sites.values()
        if not s.is_adipose and s.current_size > s.capacity_threshold
    ]


# --------------------------------------------------------------------------
# units and tallies


@dataclass(frozen=True)
class AminoAcidUnit:
    payload: Any
    source_offset: int


@dataclass(frozen=True)
class FattyAcidUnit:
    payload: Any
    label: Optional[Label]
    site_id: Optional[str] = None


@dataclass(frozen=True)
class OmegaTally:
    omega3_count: int = 0
    omega6_count: int = 0
    rejected_count: int = 0

    @property
    def total(self):
        return self.omega3_count + self.omega6_count + self.rejected_count

    def to_dict(self):
        return {
            "omega3_count": self.omega3_count,
            "omega6_count": self.omega6_count,
            "rejected_count": self.rejected_count,
            "total": self.total,
        }


@dataclass(frozen=True)
class TriggerConfig:
    omega6_threshold: float = math.inf

    def __post_init__(self):
        if not (self.omega6_threshold >= 0):
            raise ConfigurationError(
                f"omega6_threshold must be non-negative or infinite, got {self.omega6_threshold!r}"
            )


@dataclass(frozen=True)
class TriggerDecision:
    reasons: tuple = ()
    lipotoxic_sites: tuple = ()

    @property
    def fired(self):
        return bool(self.reasons)

    @property
    def reason(self):
        if not self.reasons:
            return Reason.NONE
        return "+".join(r.value for r in self.reasons)


def ingest(stream: Iterable, start: int = 0) -> List[AminoAcidUnit]:
    """Wrap raw items with consecutive source offsets."""
    out = []
    offset = start
    it = iter(stream)
    while True:
        try:
            item = next(it)
        except StopIteration:
            return out
        except Exception as exc:
            raise InputError(f"input stream failed at offset {offset}: {exc}", offset) from exc
        out.append(AminoAcidUnit(item, offset))
        offset += 1


def batched(stream: Iterable, batch_size: int) -> Iterator[List[AminoAcidUnit]]:
    """Split a stream into batches of amino-acid units with global offsets."""
    if int(batch_size) != batch_size or batch_size < 1:
        raise ConfigurationError(f"batch_size must be a positive integer, got {batch_size!r}")
    offset = 0
    it = iter(stream)
    while True:
        chunk = []
        while len(chunk) < batch_size:
            try:
                chunk.append(next(it))
            except StopIteration:
                break
            except Exception as exc:
                raise InputError(
                    f"input stream failed at offset {offset + len(chunk)}: {exc}",
                    offset + len(chunk),
                ) from exc
        if not chunk:
            return
        yield ingest(chunk, start=offset)
        offset += len(chunk)


def omega_accounting(units: Iterable[FattyAcidUnit]) -> OmegaTally:
    counts = {Label.OMEGA3: 0, Label.OMEGA6: 0, Label.REJECTED: 0}
    for u in units:
        if u.label is None:
            raise StateError(f"unlabeled fatty-acid unit {u.payload!r}")
        counts[Label(u.label)] += 1
    return OmegaTally(counts[Label.OMEGA3], counts[Label.OMEGA6], counts[Label.REJECTED])


def should_trigger(tally: OmegaTally, config: TriggerConfig, lipotoxic_sites) -> TriggerDecision:
    reasons = []
    if tally.omega6_count > config.omega6_threshold:
        reasons.append(Reason.OMEGA6)
    if lipotoxic_sites:
        reasons.append(Reason.LIPOTOXICITY)
    return TriggerDecision(tuple(reasons), tuple(lipotoxic_sites))


# --------------------------------------------------------------------------
# generators


@dataclass
class ImmuneOutcome:
    """Result of one immune response.

    ``relabeled`` is aligned with the backlog handed to the generator.
    """

    relabeled: List[FattyAcidUnit]
    policy: Optional[MatchPolicy] = None
    best_fitness: Optional[float] = None
    evaluations: int = 0


class IdentityGenerator:
    """Output equals input; with no mining nothing is ambiguous, so all OMEGA3."""

    policy = None

    def generate(self, batch: Sequence[AminoAcidUnit]) -> List[FattyAcidUnit]:
        return [FattyAcidUnit(u.payload, Label.OMEGA3) for u in batch]

    def respond(self, backlog, seed) -> ImmuneOutcome:
        return ImmuneOutcome(list(backlog))


class DedupGenerator:
    """Sorted-neighborhood duplicate detection over everything seen so far.

    Each batch is merged into the sorted order of all previously ingested
    records, and only pairs not emitted before are returned, one labeled
    unit per candidate pair. The immune response optimizes the policy by
    clonal selection on a labeled calibration set built from the truth
    pairs.
    """

    def __init__(
        self,
        n_fields: int,
        window: int = 10,
        key_spec: Optional[KeySpec] = None,
        policy: Optional[MatchPolicy] = None,
        clonal: Optional[ClonalParams] = None,
        truth=None,
        calibration_size: Optional[int] = None,
    ):
        if int(window) != window or window < 2:
            raise ConfigurationError(f"window must be an integer >= 2, got {window!r}")
        self.n_fields = n_fields
        self.window = window
        self.key_spec = key_spec or KeySpec()
        self.policy = policy or MatchPolicy.uniform(n_fields)
        if self.policy.n_fields != n_fields:
            raise ConfigurationError(
                f"policy has {self.policy.n_fields} weights for {n_fields} fields"
            )
        self.clonal = clonal or ClonalParams(
            population_size=20, select_count=5, mutation_base=0.1,
            replace_count=2, max_generations=30,
        )
        self.truth = None if truth is None else set(truth)
        self.calibration_size = calibration_size
        self.records: Dict[int, Record] = {}
        self._ordered: List[tuple] = []
        self._emitted = set()
        self._seen_pairs: List[CandidatePair] = []

    def _new_pairs(self):
        w = self.window
        out = []
        for i, (_, a) in enumerate(self._ordered):
            for _, b in self._ordered[i + 1 : i + w]:
                key = (min(a, b), max(a, b))
                if key not in self._emitted:
                    self._emitted.add(key)
                    out.append(CandidatePair(*key))
        out.sort(key=lambda p: p.key)
        return out

    def generate(self, batch: Sequence[AminoAcidUnit]) -> List[FattyAcidUnit]:
        for u in batch:
            rec = u.payload
            if not isinstance(rec, Record):
                raise RunError(f"dedup generator expects records, got {type(rec).__name__}")
            if len(rec.fields) != self.n_fields:
                raise InputError(
                    f"record {rec.record_id} has {len(rec.fields)} fields, expected {self.n_fields}",
                    u.source_offset,
                )
            if rec.record_id in self.records:
                raise InputError(f"duplicate record_id {rec.record_id}", u.source_offset)
            norm = normalize(rec)
            self.records[rec.record_id] = norm
            self._ordered.append((token_key(norm, self.key_spec), rec.record_id))
        self._ordered.sort()
        pairs = score_pairs(self._new_pairs(), self.records, self.policy)
        self._seen_pairs.extend(pairs)
        return [FattyAcidUnit(p, DECISION_LABEL[p.decision]) for p in pairs]

    def calibration(self, seed) -> Calibration:
        if self.truth is None:
            raise RunError(
                "immune response needs labeled pairs: supply a truth file for calibration"
            )
        pairs = self._seen_pairs
        if self.calibration_size is not None and self.calibration_size < len(pairs):
            rng = np.random.default_rng(seed)
            idx = np.sort(rng.choice(len(pairs), size=self.calibration_size, replace=False))
            pairs = [pairs[i] for i in idx]
        return Calibration.from_pairs(pairs, self.truth)

    def respond(self, backlog, seed) -> ImmuneOutcome:
        calib = self.calibration(seed)
        params = replace(self.clonal, seed=seed)
        result = clonal_run(policy_objective(calib), params)
        best = MatchPolicy.from_genome(result.best.genome, self.n_fields)
        self.policy = best
        rescored = resolve_backlog([u.payload for u in backlog], best, self.records)
        relabeled = [
            replace(u, payload=p, label=DECISION_LABEL[p.decision])
            for u, p in zip(backlog, rescored)
        ]
        return ImmuneOutcome(relabeled, best, result.best.fitness, result.evaluations)


def generate_fatty_acids(batch, generator=None) -> List[FattyAcidUnit]:
    generator = generator or IdentityGenerator()
    try:
        return generator.generate(batch)
    except (InputError, ConfigurationError, RunError):
        raise
    except Exception as exc:
        raise RunError(f"generator failed: {exc}") from exc


# --------------------------------------------------------------------------
# the loop


def _num(x):
    """JSON-safe number: infinities become the string ``"inf"``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class RunReport:
    tally: OmegaTally
    invocations: List[dict]
    cycles: List[dict]
    performance: int
    seed: int
    final_policy: Optional[dict] = None
    sites: Dict[str, dict] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    metrics: Optional[dict] = None

    def to_dict(self):
        return {
            "performance": self.performance,
            "omega_tally": self.tally.to_dict(),
            "immune_invocations": self.invocations,
            "cycles": self.cycles,
            "final_policy": self.final_policy,
            "sites": self.sites,
            "metrics": self.metrics,
            "seed": self.seed,
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _invocation_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


class Controller:
    """State of one cleaning run: registry, routing, stored units, logs."""

    def __init__(self, registry, config: TriggerConfig, generator=None, routing=None, seed=0):
        if not registry.adipose_sites():
            raise ConfigurationError("at least one adipose storage site is required")
        self.registry = registry
        self.config = config
        self.generator = generator or IdentityGenerator()
        default_site = registry.adipose_sites()[0].site_id
        self.routing = {label: default_site for label in Label}
        for label, site in (routing or {}).items():
            registry[site]
            self.routing[Label(label)] = site
        self.seed = seed
        self.units: List[FattyAcidUnit] = []
        self.invocations: List[dict] = []
        self.cycles: List[dict] = []

    def tally(self):
        return omega_accounting(self.units)

    def cycle(self, batch: Sequence[AminoAcidUnit]):
        index = len(self.cycles)
        generated = generate_fatty_acids(batch, self.generator)
        for u in generated:
            self.units.append(store(u, self.routing[u.label], self.registry))
        lipotoxic = check_lipotoxicity(self.registry)
        tally = self.tally()
        decision = should_trigger(tally, self.config, lipotoxic)
        entry = {
            "cycle": index,
            "ingested": len(batch),
            "generated": len(generated),
            "units_total": len(self.units),
            "tally": tally.to_dict(),
            "trigger": decision.reason if decision.fired else Reason.NONE.value,
        }
        if decision.fired:
            after = trigger_immune_response(self, decision, index)
            entry["tally_after_response"] = after.to_dict()
        self.cycles.append(entry)

    def report(self, config_echo=None, metrics=None) -> RunReport:
        tally = self.tally()
        policy = getattr(self.generator, "policy", None)
        return RunReport(
            tally=tally,
            invocations=self.invocations,
            cycles=self.cycles,
            performance=tally.omega3_count,
            seed=self.seed,
            final_policy=policy.to_dict() if policy is not None else None,
            sites={k: v for k, v in self.registry.to_dict().items()},
            config=config_echo or {},
            metrics=metrics,
        )


def trigger_immune_response(controller: Controller, decision: TriggerDecision, cycle: int):
    """Handle a fired trigger; returns the tally after handling."""
    if not decision.fired:
        raise StateError("immune response requested without a trigger")
    before = controller.tally()
    units = controller.units
    backlog_idx = [i for i, u in enumerate(units) if u.label == Label.OMEGA6]
    seed = _invocation_seed(controller.seed, len(controller.invocations))
    try:
        outcome = controller.generator.respond([units[i] for i in backlog_idx], seed)
    except (ConfigurationError, InputError, RunError):
        raise
    except Exception as exc:
        raise RunError(f"immune response failed: {exc}") from exc
    if len(outcome.relabeled) != len(backlog_idx):
        raise RunError("immune response dropped or added backlog units")

    registry = controller.registry
    for i, new in zip(backlog_idx, outcome.relabeled):
        if new.label is None:
            raise RunError("immune response returned an unlabeled unit")
        units[i] = replace(new, site_id=units[i].site_id)

    # resolved backlog units follow their new label's routing; resolved
    # units in a lipotoxic site are compacted into adipose storage
    lipotoxic = set(check_lipotoxicity(registry)) | set(decision.lipotoxic_sites)
    adipose = registry.adipose_sites()[0].site_id
    backlog_set = set(backlog_idx)
    moved = 0
    for i, u in enumerate(units):
        if u.label == Label.OMEGA6:
            continue
        in_toxic = u.site_id in lipotoxic
        if not (in_toxic or i in backlog_set):
            continue
        target = controller.routing[u.label]
        if in_toxic and not registry[target].is_adipose:
            target = adipose
        if target != u.site_id:
            registry[u.site_id].current_size -= 1
            units[i] = store(u, target, registry)
            moved += 1

    after = controller.tally()
    if after.omega6_count > before.omega6_count:
        raise RunError("immune response increased the omega-6 backlog")
    still = [s for s in check_lipotoxicity(registry) if s in lipotoxic]
    if still:
        log.warning("sites still lipotoxic after compaction: %s", still)

    controller.invocations.append(
        {
            "cycle": cycle,
            "reasons": [r.value for r in decision.reasons],
            "lipotoxic_sites": list(decision.lipotoxic_sites),
            "omega6_before": before.omega6_count,
            "omega6_after": after.omega6_count,
            "units_moved": moved,
            "unresolved_lipotoxic_sites": still,
            "best_fitness": outcome.best_fitness,
            "evaluations": outcome.evaluations,
            "policy": outcome.policy.to_dict() if outcome.policy is not None else None,
        }
    )
    return after


def run_cycle(stream, registry, config, generator=None, batch_size=100, routing=None, seed=0):
    """Run cycles over ``stream`` until it is exhausted; returns the controller's report."""
    ctl = Controller(registry, config, generator, routing, seed)
    for batch in batched(stream, batch_size):
        ctl.cycle(batch)
    return ctl.report()
