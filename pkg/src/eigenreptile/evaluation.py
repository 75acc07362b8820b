"""Meta-test evaluation: adapt from the meta-parameters, then score."""

from __future__ import annotations

import numpy as np

from .nn import Batch, NetworkSpec, OptimizerState, forward, loss_and_grad, step
from .tasks import eval_grid_loss, gen_sine_task, sample_points


def adapt(params, spec: NetworkSpec, batch: Batch, steps: int, opt: OptimizerState, kind=None):
    """Plain fine-tuning, ``steps`` full-batch optimizer steps (0 allowed)."""
    params = np.array(params, dtype=np.float64)
    state = opt.fresh()
    for _ in range(steps):
        _, g = loss_and_grad(params, spec, batch, kind)
        params, state = step(params, g, state)
    return params


def mean_ci95(values):
    """Mean and the 95% normal half-width 1.96 * std / sqrt(count)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no values to summarize")
    return float(values.mean()), float(1.96 * values.std() / np.sqrt(values.size))


def sine_eval_losses(params, spec, n_tasks, K, steps, opt, rng):
    out = np.empty(n_tasks)
    for i in range(n_tasks):
        task = gen_sine_task(rng)
        adapted = adapt(params, spec, sample_points(task, K, rng), steps, opt)
        out[i] = eval_grid_loss(adapted, spec, task)
    return out


def accuracy(params, spec, batch: Batch) -> float:
    pred = forward(params, spec, batch.inputs).argmax(axis=1)
    return float(np.mean(pred == batch.targets))


def classification_eval_accuracies(params, spec, episode_fn, n_tasks, steps, opt, rng):
    """``episode_fn(rng)`` yields clean meta-test episodes."""
    out = np.empty(n_tasks)
    for i in range(n_tasks):
        ep = episode_fn(rng)
        adapted = adapt(params, spec, ep.train, steps, opt)
        out[i] = accuracy(adapted, spec, ep.test)
    return out
