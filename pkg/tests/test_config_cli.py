import csv
import json

import numpy as np
import pytest

from eigenreptile.cli import main
from eigenreptile.config import ConfigError, RunConfig, from_dict, load_config
from eigenreptile.evaluation import mean_ci95
from eigenreptile.runner import METRIC_COLUMNS, build_spec

TINY = {"task_family": "sine", "hidden_sizes": [8], "outer_iterations": 6, "meta_batch": 2,
        "inner_steps": 3, "eval_interval": 3, "eval_task_count": 4, "eval_adapt_steps": 2}


def write_config(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_defaults_are_valid():
    cfg = from_dict({})
    assert cfg == RunConfig()
    assert cfg.meta_config().inner_steps == 5 and cfg.optimizer().learning_rate == 0.02


@pytest.mark.parametrize("data,msg", [
    ({"betaa": 0.1}, "unknown config keys: betaa"),
    ({"noise": {"kind": "symmetric", "prob": 0.1}}, "noise.prob"),
    ({"beta": "fast"}, "beta"),
    ({"meta_batch": 2.5}, "meta_batch"),
    ({"project_before_flip": 1}, "project_before_flip"),
    ({"task_family": "mnist"}, "task_family"),
    ({"task_family": "synthetic-cls", "noise": {"kind": "symmetric", "p": 1.5}}, "outside"),
    ({"noise": {"kind": "symmetric", "p": 0.2}}, "classification"),
    ({"inner_steps": 1}, "inner"),
    ({"task_family": "episode-dir"}, "episode_dir"),
    ({"ispl": {"enabled": True, "Q": 0}}, "prior"),
])
def test_invalid_configs(data, msg):
    with pytest.raises(ConfigError, match=msg):
        from_dict(data)


def test_int_accepted_for_float_and_roundtrip(tmp_path):
    cfg = load_config(write_config(tmp_path / "c.json", {"beta": 1}), seed=4)
    assert cfg.beta == 1.0 and isinstance(cfg.beta, float) and cfg.seed == 4
    assert from_dict(cfg.to_dict()) == cfg


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(bad)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_writes_fixed_schema_and_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", TINY)
    assert main(["train", "--config", cfg, "--output", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", cfg, "--output", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    rows = read_rows(tmp_path / "a" / "metrics.csv")
    assert tuple(rows[0]) == METRIC_COLUMNS and len(rows) == 7
    # ISPL is off: its columns carry the sentinel
    assert all(r[4] == "NA" and r[5] == "NA" for r in rows[1:])
    assert rows[1][2] == "NA" and rows[3][2] != "NA"
    summary = json.loads((tmp_path / "a" / "final_summary.json").read_text())
    assert {"best_iteration", "best_metric", "final_metric", "config_echo", "wall_seconds"} <= set(summary)
    assert summary["best_metric"] <= summary["final_metric"]
    assert summary["config_echo"]["hidden_sizes"] == [8]


def test_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path / "c.json", TINY)
    main(["train", "--config", cfg, "--output", str(tmp_path / "a")])
    main(["train", "--config", cfg, "--seed", "5", "--output", str(tmp_path / "b")])
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (tmp_path / "b" / "metrics.csv").read_bytes()


def test_ispl_columns_filled_when_enabled(tmp_path):
    data = dict(TINY, task_family="synthetic-cls", K_train=3, input_dim=4,
                noise={"kind": "symmetric", "p": 0.5}, ispl={"enabled": True, "gamma0": 2.0})
    assert main(["train", "--config", write_config(tmp_path / "c.json", data),
                 "--output", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "metrics.csv")
    assert all(r[4] != "NA" and 0 < float(r[5]) <= 1 for r in rows[1:])


def test_train_exit_codes(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err
    bad = write_config(tmp_path / "bad.json", {"task_family": "synthetic-cls",
                                               "noise": {"kind": "symmetric", "p": 2.0}})
    assert main(["train", "--config", bad]) == 2
    assert main(["train"]) == 2
    assert main(["frobnicate"]) == 2
    diverge = write_config(tmp_path / "d.json", dict(TINY, inner_lr=1e300, eval_task_count=0))
    assert main(["train", "--config", diverge, "--output", str(tmp_path / "d")]) == 3


def test_verify_exit_codes(capsys):
    assert main(["verify", "theorem2"]) == 0
    assert "10000/10000" in capsys.readouterr().out
    assert main(["verify", "gram-equivalence"]) == 0
    assert main(["verify", "bogus"]) == 2


def test_eval_roundtrip_and_errors(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", TINY)
    main(["train", "--config", cfg, "--output", str(tmp_path / "run")])
    capsys.readouterr()
    summary = str(tmp_path / "run" / "final_summary.json")
    assert main(["eval", "--summary", summary]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["metric"] == "grid_mse" and report["tasks"] == 4 and report["ci95"] >= 0
    zero = write_config(tmp_path / "e.json", {"eval_task_count": 0})
    assert main(["eval", "--summary", summary, "--config", zero]) == 2
    unknown = write_config(tmp_path / "u.json", {"tasks": 3})
    assert main(["eval", "--summary", summary, "--config", unknown]) == 2
    assert main(["eval", "--summary", str(tmp_path / "missing.json")]) == 2
    assert main(["eval"]) == 2


def test_eval_chance_level_classifier(tmp_path, capsys):
    cfg = from_dict({"task_family": "synthetic-cls", "hidden_sizes": [4], "K_train": 1,
                     "eval_adapt_steps": 0})
    run = tmp_path / "run"
    run.mkdir()
    zeros = np.zeros(build_spec(cfg).n_params)
    np.savez(run / "params.npz", final=zeros, best=zeros)
    (run / "final_summary.json").write_text(json.dumps({"config_echo": cfg.to_dict()}))
    opts = write_config(tmp_path / "e.json", {"eval_task_count": 1000})
    assert main(["eval", "--summary", str(run / "final_summary.json"), "--config", opts]) == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["mean"] - 0.2) <= max(report["ci95"], 1e-12)


def test_ci_of_perfect_scores_is_zero():
    assert mean_ci95(np.zeros(50)) == (0.0, 0.0)
    mean, ci = mean_ci95([1.0, 3.0])
    assert mean == 2.0 and ci == pytest.approx(1.96 * 1.0 / np.sqrt(2))
    with pytest.raises(ValueError):
        mean_ci95([])


def test_compare_directions_csv(tmp_path):
    cfg = write_config(tmp_path / "c.json", TINY)
    out = tmp_path / "cmp"
    assert main(["compare-directions", "--config", cfg, "--output", str(out)]) == 0
    rows = read_rows(out / "directions.csv")
    assert rows[0] == ["iteration", "main_direction", "reptile", "avg_gradient_direction",
                       "avg_weights_direction"]
    assert [r[0] for r in rows[1:]] == ["2", "5"]
    assert all(len(r) == 5 for r in rows)
    cls = write_config(tmp_path / "k.json", dict(TINY, task_family="synthetic-cls"))
    assert main(["compare-directions", "--config", cls]) == 2
