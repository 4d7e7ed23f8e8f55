"""Just-In-Time duplicate cleaning driven by clonal selection.

The package pairs a bounded real-vector clonal selection optimizer
(:mod:`~obesity_heuristic.ais_core`) with a sorted-neighborhood duplicate
detector (:mod:`~obesity_heuristic.dedup`). A controller
(:mod:`~obesity_heuristic.controller`) runs the detector batch by batch and
starts the optimizer only when the ambiguous backlog or a non-adipose
storage site grows past its threshold.
"""

from .ais_core import Antibody, ClonalParams, Objective, Population, run
from .controller import (
    Controller,
    DedupGenerator,
    FattyAcidUnit,
    IdentityGenerator,
    Label,
    OmegaTally,
    RunReport,
    StorageRegistry,
    TriggerConfig,
)
from .dedup import CandidatePair, Decision, KeySpec, MatchPolicy, Record
from .errors import ConfigurationError, InputError, RunError, StateError
from .evaluation import MetricsReport, score_run

__version__ = "0.1.0"
