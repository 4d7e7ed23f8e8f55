"""Run configuration: strict JSON parsing, defaults, and delimited-file I/O."""

from __future__ import annotations

import contextlib
import copy
import csv
import difflib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from .ais_core import ClonalParams
from .controller import Label, StorageRegistry, TriggerConfig, register_site
from .dedup import KeySpec, MatchPolicy, Record
from .errors import ConfigurationError, InputError

__all__ = [
    "SEED_ENV",
    "DEFAULTS",
    "RunConfig",
    "parse_config",
    "read_records",
    "write_records",
    "read_truth",
    "write_truth",
]

SEED_ENV = "OBESITY_HEURISTIC_SEED"

DEFAULTS: Dict[str, Any] = {
    "output": None,
    "truth": None,
    "key": {"token_count": 3, "prefix_len": 4, "fields": None},
    "window": 10,
    "batch_size": 100,
    "policy": {"weights": None, "theta_low": 0.6, "theta_high": 0.85},
    "trigger": {"omega6_threshold": "inf"},
    "sites": [
        {"id": "warehouse", "adipose": True, "threshold": "inf"},
        {"id": "staging", "adipose": False, "threshold": 1000},
    ],
    "routing": {"OMEGA3": "warehouse", "OMEGA6": "staging", "REJECTED": "warehouse"},
    "clonal": {
        "population_size": 20,
        "select_count": 5,
        "clone_factor": 1.0,
        "mutation_base": 0.1,
        "replace_count": 2,
        "max_generations": 30,
    },
    "calibration_size": None,
    "seed": 0,
}
REQUIRED = ("input", "schema")
SITE_KEYS = ("id", "adipose", "threshold")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where or 'config'} must be a JSON object")
    for key in obj:
        if key not in allowed:
            hint = difflib.get_close_matches(key, list(allowed), n=1)
            msg = f"unknown key {where + '.' if where else ''}{key!r}"
            if hint:
                msg += f"; did you mean {hint[0]!r}?"
            raise ConfigurationError(msg)


def _count(value, name, allow_inf=True):
    """Non-negative count, where ``"inf"`` or ``null`` mean infinite."""
    if value is None or value == "inf":
        if allow_inf:
            return math.inf
        raise ConfigurationError(f"{name} must be finite")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        raise ConfigurationError(f"{name} must be a non-negative number or \"inf\", got {value!r}")
    return value


@dataclass
class RunConfig:
    input: Path
    schema: List[str]
    output: Path
    truth: Optional[Path]
    key_spec: KeySpec
    window: int
    batch_size: int
    policy: MatchPolicy
    trigger: TriggerConfig
    sites: List[dict]
    routing: Dict[str, str]
    clonal: ClonalParams
    calibration_size: Optional[int]
    seed: int
    echo: Dict[str, Any]

    def registry(self) -> StorageRegistry:
        reg = StorageRegistry()
        for s in self.sites:
            register_site(reg, s["id"], s["adipose"], _count(s["threshold"], f"sites.{s['id']}"))
        return reg


@contextlib.contextmanager
def _section(name):
    try:
        yield
    except ConfigurationError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc
    except TypeError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc


def _merge(defaults, given, where):
    _check_keys(given, defaults, where)
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def parse_config(source, base_dir=None) -> RunConfig:
    """Validate a config given as a path or an already-loaded dict.

    Relative paths resolve against the config file's directory (or
    ``base_dir``). ``OBESITY_HEURISTIC_SEED`` in the environment overrides
    the seed.
    """
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from exc
        base_dir = path.parent if base_dir is None else Path(base_dir)
    else:
        raw = copy.deepcopy(source)
        base_dir = Path(base_dir or ".")

    _check_keys(raw, set(DEFAULTS) | set(REQUIRED), "")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigurationError(f"missing required key {key!r}")
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update(raw)
    for section in ("key", "policy", "trigger", "clonal"):
        cfg[section] = _merge(DEFAULTS[section], raw.get(section, {}), section)
    if "routing" in raw:
        _check_keys(raw["routing"], [l.value for l in Label], "routing")
        cfg["routing"] = {**DEFAULTS["routing"], **raw["routing"]}
    if os.environ.get(SEED_ENV):
        try:
            cfg["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer") from None

    schema = cfg["schema"]
    if not isinstance(schema, list) or not schema or not all(isinstance(s, str) for s in schema):
        raise ConfigurationError("schema must be a non-empty list of field names")
    if len(set(schema)) != len(schema):
        raise ConfigurationError("schema has repeated field names")
    if cfg["output"] is None:
        cfg["output"] = str(Path(cfg["input"]).with_suffix("")) + ".report.json"

    key_fields = cfg["key"]["fields"]
    if key_fields is None:
        key_fields = list(schema)
        cfg["key"]["fields"] = key_fields
    for f in key_fields:
        if f not in schema:
            raise ConfigurationError(f"key.fields names unknown field {f!r}")
    with _section("key"):
        key_spec = KeySpec(
            cfg["key"]["token_count"],
            cfg["key"]["prefix_len"],
            tuple(schema.index(f) for f in key_fields),
        )

    weights = cfg["policy"]["weights"]
    if weights is None:
        weights = [1.0 / len(schema)] * len(schema)
        cfg["policy"]["weights"] = weights
    elif isinstance(weights, dict):
        _check_keys(weights, schema, "policy.weights")
        weights = [float(weights.get(f, 0.0)) for f in schema]
    if len(weights) != len(schema):
        raise ConfigurationError(
            f"policy.weights has {len(weights)} entries for {len(schema)} schema fields"
        )
    lo, hi = cfg["policy"]["theta_low"], cfg["policy"]["theta_high"]
    if lo > hi:
        raise ConfigurationError(
            f"policy.theta_low ({lo}) must not exceed policy.theta_high ({hi})"
        )
    with _section("policy"):
        policy = MatchPolicy(tuple(weights), lo, hi)

    t6 = _count(cfg["trigger"]["omega6_threshold"], "trigger.omega6_threshold")
    trigger = TriggerConfig(t6)
    cfg["trigger"]["omega6_threshold"] = "inf" if math.isinf(t6) else t6

    sites = []
    if not isinstance(cfg["sites"], list) or not cfg["sites"]:
        raise ConfigurationError("sites must be a non-empty list")
    for i, s in enumerate(cfg["sites"]):
        _check_keys(s, SITE_KEYS, f"sites[{i}]")
        if "id" not in s:
            raise ConfigurationError(f"sites[{i}] needs an 'id'")
        site = {"id": s["id"], "adipose": bool(s.get("adipose", False)),
                "threshold": s.get("threshold", "inf")}
        _count(site["threshold"], f"sites[{i}].threshold")
        sites.append(site)
    cfg["sites"] = sites
    ids = [s["id"] for s in sites]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("sites has repeated ids")
    if not any(s["adipose"] for s in sites):
        raise ConfigurationError("sites needs at least one adipose site")
    for label, site in cfg["routing"].items():
        if site not in ids:
            raise ConfigurationError(f"routing.{label} names unknown site {site!r}")

    for name in ("window", "batch_size"):
        v = cfg[name]
        if isinstance(v, bool) or not isinstance(v, int) or v < (2 if name == "window" else 1):
            raise ConfigurationError(f"{name} has invalid value {v!r}")

    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed!r}")
    with _section("clonal"):
        clonal = ClonalParams(**cfg["clonal"], seed=seed)

    calib = cfg["calibration_size"]
    if calib is not None and (isinstance(calib, bool) or not isinstance(calib, int) or calib < 1):
        raise ConfigurationError(f"calibration_size must be a positive integer, got {calib!r}")

    def resolve(p):
        return None if p is None else (base_dir / p)

    return RunConfig(
        input=resolve(cfg["input"]),
        schema=list(schema),
        output=resolve(cfg["output"]),
        truth=resolve(cfg["truth"]),
        key_spec=key_spec,
        window=cfg["window"],
        batch_size=cfg["batch_size"],
        policy=policy,
        trigger=trigger,
        sites=sites,
        routing=dict(cfg["routing"]),
        clonal=clonal,
        calibration_size=calib,
        seed=seed,
        echo=cfg,
    )


def read_records(path, schema) -> List[Record]:
    """Read a comma-delimited file with a header row.

    Columns are picked by name in schema order; extra columns are ignored.
    ``record_id`` is the 0-based data row index.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: missing header row", 1) from None
        missing = [f for f in schema if f not in header]
        if missing:
            raise InputError(f"{path}:1: header lacks schema fields {missing}", 1)
        cols = [header.index(f) for f in schema]
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}",
                    reader.line_num,
                )
            records.append(Record(len(records), tuple(row[c] for c in cols)))
    return records


def write_records(path, records, schema):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema)
        for r in records:
            writer.writerow(r.fields)


def read_truth(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read truth file {path}: {exc}") from exc
    pairs = set()
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["left", "right"]:
            raise InputError(f"{path}:1: truth header must be 'left,right'", 1)
        for row in reader:
            if not row:
                continue
            try:
                a, b = (int(x) for x in row)
            except ValueError:
                raise InputError(f"{path}:{reader.line_num}: bad pair {row}", reader.line_num) from None
            if a == b:
                raise InputError(f"{path}:{reader.line_num}: self-pair {a}", reader.line_num)
            pairs.add((min(a, b), max(a, b)))
    return pairs


def write_truth(path, pairs):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["left", "right"])
        for a, b in sorted(pairs):
            writer.writerow([a, b])
