import csv
import json
import math

import pytest

from obesity_heuristic import cli
from obesity_heuristic.benchmarks import ackley, benchmark_objective
from obesity_heuristic.config import (
    SEED_ENV,
    parse_config,
    read_records,
    read_truth,
    write_truth,
)
from obesity_heuristic.errors import ConfigurationError, InputError
from obesity_heuristic.synth import SCHEMA

import numpy as np


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data" / "dirty.csv"
    assert cli.main(["generate", "--n", "80", "--dup-rate", "0.3", "--max-edits", "2",
                     "--seed", "3", "--out", str(out)]) == 0
    return out


def write_config(tmp_path, **extra):
    cfg = {
        "input": "data/dirty.csv",
        "schema": list(SCHEMA),
        "truth": "data/dirty.truth.csv",
        "output": "out/report.json",
        "key": {"fields": ["surname", "street"]},
        "window": 8,
        "batch_size": 25,
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


# -- config -------------------------------------------------------------------


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config({"input": "in.csv", "schema": ["a", "b"]}, base_dir=tmp_path)
    assert cfg.window == 10
    assert cfg.batch_size == 100
    assert math.isinf(cfg.trigger.omega6_threshold)
    assert cfg.policy.weights == (0.5, 0.5)
    assert (cfg.policy.theta_low, cfg.policy.theta_high) == (0.6, 0.85)
    assert cfg.key_spec.fields_used == (0, 1)
    assert cfg.output == tmp_path / "in.report.json"
    assert cfg.truth is None
    assert cfg.seed == 0
    assert cfg.echo["trigger"]["omega6_threshold"] == "inf"


def test_config_thresholds_out_of_order():
    with pytest.raises(ConfigurationError) as info:
        parse_config({"input": "x", "schema": ["a"],
                      "policy": {"theta_low": 0.9, "theta_high": 0.5}})
    assert "theta_low" in str(info.value) and "theta_high" in str(info.value)


def test_config_unknown_key_suggestion():
    with pytest.raises(ConfigurationError, match="did you mean 'window'"):
        parse_config({"input": "x", "schema": ["a"], "windw": 5})


@pytest.mark.parametrize(
    "extra",
    [
        {"window": 1},
        {"batch_size": 0},
        {"seed": -1},
        {"key": {"fields": ["nope"]}},
        {"policy": {"weights": [1.0, 2.0]}},
        {"policy": {"weights": [-1.0]}},
        {"trigger": {"omega6_threshold": -2}},
        {"sites": [{"id": "s", "adipose": False}]},
        {"routing": {"OMEGA6": "missing"}},
        {"clonal": {"select_count": 99}},
        {"calibration_size": 0},
    ],
)
def test_config_rejections(extra):
    with pytest.raises(ConfigurationError):
        parse_config({"input": "x", "schema": ["a"], **extra})


def test_config_missing_required():
    with pytest.raises(ConfigurationError, match="schema"):
        parse_config({"input": "x"})


def test_config_seed_env_override(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "17")
    cfg = parse_config({"input": "x", "schema": ["a"], "seed": 3})
    assert cfg.seed == 17
    assert cfg.clonal.seed == 17


def test_config_dict_weights(tmp_path):
    cfg = parse_config({"input": "x", "schema": ["a", "b"], "policy": {"weights": {"b": 1.0}}})
    assert cfg.policy.weights == (0.0, 1.0)


# -- delimited I/O ------------------------------------------------------------


def test_read_records_picks_schema_columns(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("extra,b,a\n1,x,y\n2,\"p,q\",r\n")
    recs = read_records(p, ["a", "b"])
    assert [r.record_id for r in recs] == [0, 1]
    assert recs[1].fields == ("r", "p,q")


def test_read_records_ragged_row(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(InputError) as info:
        read_records(p, ["a", "b"])
    assert info.value.offset == 3


def test_read_records_header_mismatch(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,c\n1,2\n")
    with pytest.raises(InputError, match="b"):
        read_records(p, ["a", "b"])


def test_read_records_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_records(tmp_path / "nope.csv", ["a"])


def test_truth_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    write_truth(p, {(3, 1), (0, 2)})
    assert read_truth(p) == {(1, 3), (0, 2)}
    p.write_text("a,b\n")
    with pytest.raises(InputError):
        read_truth(p)


# -- generate -----------------------------------------------------------------


def test_generate_counts(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["generate", "--n", "100", "--dup-rate", "0.3", "--max-edits", "2",
                     "--seed", "1", "--out", str(out)]) == 0
    data = rows(out)
    assert data[0] == list(SCHEMA)
    assert len(data) == 131
    truth = read_truth(tmp_path / "d.truth.csv")
    assert len(truth) == 30


def test_generate_zero_rate(tmp_path):
    out = tmp_path / "d.csv"
    cli.main(["generate", "--n", "10", "--dup-rate", "0", "--out", str(out)])
    assert len(rows(out)) == 11
    assert read_truth(tmp_path / "d.truth.csv") == set()


def test_generate_deterministic(tmp_path):
    for name in ("a", "b"):
        cli.main(["generate", "--n", "50", "--dup-rate", "0.2", "--seed", "9",
                  "--out", str(tmp_path / f"{name}.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.truth.csv").read_bytes() == (tmp_path / "b.truth.csv").read_bytes()


def test_generate_bad_rate_exit_code(tmp_path):
    assert cli.main(["generate", "--n", "10", "--dup-rate", "1.5",
                     "--out", str(tmp_path / "x.csv")]) == 2


# -- optimize -----------------------------------------------------------------


def test_optimize_sphere_history(tmp_path):
    out = tmp_path / "h.csv"
    assert cli.main(["optimize", "--benchmark", "sphere", "--dims", "5", "--generations", "200",
                     "--seed", "42", "--out", str(out)]) == 0
    data = rows(out)
    assert data[0] == ["generation", "best_fitness"]
    body = data[1:]
    assert len(body) == 200
    assert [int(g) for g, _ in body] == list(range(1, 201))
    fits = [float(f) for _, f in body]
    assert all(a <= b for a, b in zip(fits, fits[1:]))


def test_optimize_bad_dims(tmp_path):
    assert cli.main(["optimize", "--benchmark", "sphere", "--dims", "0",
                     "--out", str(tmp_path / "h.csv")]) == 2


def test_optimize_unknown_benchmark(tmp_path, capsys):
    code = cli.main(["optimize", "--benchmark", "rosenbrok", "--dims", "2",
                     "--out", str(tmp_path / "h.csv")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_ackley_minimum():
    assert ackley(np.zeros(4)) == 0.0
    obj = benchmark_objective("ackley", 3)
    assert obj(np.zeros(3)) == 0.0
    assert obj.lower[0] == -32.768


# -- clean --------------------------------------------------------------------


def test_clean_writes_outputs(tmp_path, dataset):
    cfg = write_config(tmp_path)
    assert cli.main(["clean", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["omega_tally"]["total"] == report["cycles"][-1]["units_total"]
    assert set(report["metrics"]) >= {"recall", "false_positive_error"}
    assert (tmp_path / "out" / "report.summary.txt").read_text().startswith("cycles")
    assert rows(tmp_path / "out" / "report.metrics.csv")[1][0] == "report"


def test_clean_byte_identical(tmp_path, dataset):
    cfg = write_config(tmp_path, trigger={"omega6_threshold": 0})
    cli.main(["clean", "--config", str(cfg)])
    first = (tmp_path / "out" / "report.json").read_bytes()
    cli.main(["clean", "--config", str(cfg)])
    assert (tmp_path / "out" / "report.json").read_bytes() == first


def test_clean_without_truth_has_no_metrics(tmp_path, dataset):
    cfg = write_config(tmp_path, truth=None)
    assert cli.main(["clean", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["metrics"] is None
    assert not (tmp_path / "out" / "report.metrics.csv").exists()


def test_clean_unreadable_input(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["clean", "--config", str(cfg)]) == 3


def test_clean_bad_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    assert cli.main(["clean", "--config", str(p)]) == 2


def test_clean_response_without_truth_is_run_error(tmp_path, dataset):
    cfg = write_config(tmp_path, truth=None, trigger={"omega6_threshold": 0},
                       policy={"theta_low": 0.0, "theta_high": 1.0})
    assert cli.main(["clean", "--config", str(cfg)]) == 4


# -- report-merge -------------------------------------------------------------


def test_report_merge(tmp_path, dataset):
    cli.main(["clean", "--config", str(write_config(tmp_path, output="out/a.json"))])
    cli.main(["clean", "--config", str(write_config(tmp_path, output="out/b.json", window=4))])
    merged = tmp_path / "merged.csv"
    assert cli.main(["report-merge", str(tmp_path / "out" / "a.json"),
                     str(tmp_path / "out" / "b.metrics.csv"), "--out", str(merged)]) == 0
    data = rows(merged)
    assert [r[0] for r in data[1:]] == ["a", "b"]
    again = tmp_path / "again.csv"
    cli.main(["report-merge", str(merged), "--out", str(again)])
    assert again.read_bytes() == merged.read_bytes()


def test_report_merge_rejects_metricless(tmp_path, dataset):
    cli.main(["clean", "--config", str(write_config(tmp_path, truth=None))])
    code = cli.main(["report-merge", str(tmp_path / "out" / "report.json"),
                     "--out", str(tmp_path / "m.csv")])
    assert code == 3
