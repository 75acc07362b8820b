"""Wire a RunConfig into networks, task streams, training and output files."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .evaluation import classification_eval_accuracies, mean_ci95, sine_eval_losses
from .meta import MetaTrainingResult, outer_loop
from .nn import NetworkSpec
from .tasks import (
    ClassificationTaskSource,
    EpisodeDirSource,
    NoiseSpec,
    SineTaskSource,
    gen_classification_episode,
)

METRIC_COLUMNS = (
    "iteration",
    "meta_train_loss",
    "eval_metric",
    "eval_ci95",
    "gamma",
    "selected_fraction",
    "zeta_mean",
)
NA = "NA"
EVAL_STREAM = 424242


def build_spec(cfg: RunConfig) -> NetworkSpec:
    if cfg.task_family == "sine":
        return NetworkSpec.mlp([1, *cfg.hidden_sizes, 1], cfg.activation)
    if cfg.task_family == "episode-dir":
        src = _episode_source(cfg)
        dim = src.load(src.files[0]).train_inputs.shape[1]
    else:
        dim = cfg.input_dim
    return NetworkSpec.mlp([dim, *cfg.hidden_sizes, cfg.N], cfg.activation, "classification-softmax")


def _episode_source(cfg, eval_split=False):
    shots = cfg.eval_task_config().K_train if eval_split else cfg.K_train
    noise = NoiseSpec() if eval_split else cfg.noise_spec()
    return EpisodeDirSource(cfg.episode_dir, shots, cfg.K_test, noise)


def build_task_source(cfg: RunConfig):
    if cfg.task_family == "sine":
        return SineTaskSource(cfg.K_train)
    if cfg.task_family == "synthetic-cls":
        return ClassificationTaskSource(cfg.train_task_config(), cfg.noise_spec())
    return _episode_source(cfg)


def higher_is_better(cfg: RunConfig) -> bool:
    return cfg.task_family != "sine"


def build_evaluator(cfg: RunConfig, spec: NetworkSpec, task_count=None, adapt_steps=None, seed=None):
    """``evaluate(params, iteration) -> (mean, ci95)`` on fresh meta-test tasks.

    Every call draws the same task sequence, so curves and algorithms are
    compared on identical tasks. Classification meta-test tasks are clean.
    """
    count = cfg.eval_task_count if task_count is None else task_count
    steps = cfg.eval_adapt_steps if adapt_steps is None else adapt_steps
    seed = cfg.seed if seed is None else seed
    opt = cfg.optimizer()
    if count < 1:
        raise ValueError("evaluation needs at least one task")

    if cfg.task_family == "sine":
        def values(params, rng):
            return sine_eval_losses(params, spec, count, cfg.K_train, steps, opt, rng)
    else:
        if cfg.task_family == "synthetic-cls":
            task_cfg = cfg.eval_task_config()

            def episode_fn(rng):
                return gen_classification_episode(task_cfg, rng)
        else:
            episode_fn = _episode_source(cfg, eval_split=True).episode

        def values(params, rng):
            return classification_eval_accuracies(params, spec, episode_fn, count, steps, opt, rng)

    def evaluate(params, iteration=None):
        return mean_ci95(values(params, np.random.default_rng([seed, EVAL_STREAM])))

    return evaluate


@dataclass
class TrainOutcome:
    result: MetaTrainingResult
    best_iteration: int | None
    best_metric: float | None
    best_params: np.ndarray
    final_metric: float | None
    wall_seconds: float


def train(cfg: RunConfig, algorithm=None) -> TrainOutcome:
    """Meta-train per ``cfg``; tracks the best evaluated checkpoint."""
    spec = build_spec(cfg)
    source = build_task_source(cfg)
    evaluate = build_evaluator(cfg, spec) if cfg.eval_task_count > 0 else None
    better = (lambda a, b: a > b) if higher_is_better(cfg) else (lambda a, b: a < b)
    best = {"iteration": None, "metric": None, "params": None}

    def tracked(params, iteration):
        metric, ci = evaluate(params, iteration)
        if best["metric"] is None or better(metric, best["metric"]):
            best.update(iteration=iteration, metric=metric, params=params.copy())
        return metric, ci

    start = time.perf_counter()
    result = outer_loop(
        cfg.meta_config(algorithm),
        spec,
        source,
        cfg.optimizer(),
        seed=cfg.seed,
        ispl=cfg.ispl_config(),
        evaluate=tracked if evaluate else None,
        eval_interval=cfg.eval_interval,
        threads=cfg.threads,
    )
    wall = time.perf_counter() - start
    final = result.history[-1]["eval_metric"] if result.history else None
    best_params = best["params"] if best["params"] is not None else result.params
    return TrainOutcome(result, best["iteration"], best["metric"], best_params, final, wall)


def fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_metrics(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in history:
            w.writerow([fmt(row[c]) for c in METRIC_COLUMNS])


def write_outputs(cfg: RunConfig, outcome: TrainOutcome, output_dir=None) -> Path:
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.csv", outcome.result.history)
    np.savez(out / "params.npz", final=outcome.result.params, best=outcome.best_params)
    summary = {
        "best_iteration": outcome.best_iteration,
        "best_metric": outcome.best_metric,
        "final_metric": outcome.final_metric,
        "config_echo": cfg.to_dict(),
        "wall_seconds": outcome.wall_seconds,
        "params_file": "params.npz",
    }
    (out / "final_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return out


DIRECTION_SERIES = (
    ("main_direction", "eigen-reptile"),
    ("reptile", "reptile"),
    ("avg_gradient_direction", "avg-gradient-dir"),
    ("avg_weights_direction", "avg-weights-dir"),
)


def compare_directions(cfg: RunConfig):
    """Train all four update rules on one shared task stream.

    Returns ``(rows, outcomes)`` where each row is the iteration followed by
    the evaluated loss of each rule at that iteration.
    """
    outcomes = {name: train(cfg, algorithm) for name, algorithm in DIRECTION_SERIES}
    rows = []
    first = outcomes[DIRECTION_SERIES[0][0]].result.history
    for k, row in enumerate(first):
        if row["eval_metric"] is None:
            continue
        rows.append([row["iteration"]] + [outcomes[n].result.history[k]["eval_metric"]
                                          for n, _ in DIRECTION_SERIES])
    return rows, outcomes


def write_direction_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [name for name, _ in DIRECTION_SERIES])
        for row in rows:
            w.writerow([fmt(v) for v in row])
