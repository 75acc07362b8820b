"""Introspective self-paced sample selection.

Q prior models are trained from the task's starting point on random subsets
of its training set. They vote a mean loss for every training sample, and
samples whose voted loss is not below the threshold gamma are dropped from
the inner loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import Batch, NetworkSpec, OptimizerState, loss_and_grad, per_sample_loss, step
from .trajectory import TrajectoryRecord, run_inner_loop

SCHEDULES = ("outer-period", "inner-step")


@dataclass(frozen=True)
class ISPLConfig:
    Q: int = 2
    gamma0: float = 10.0
    mu: float = 0.6
    period: int = 1000
    prior_fraction: float = 0.5
    prior_steps: int | None = None
    schedule: str = "outer-period"

    def __post_init__(self):
        if self.Q < 1:
            raise ValueError("need at least one prior model")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.period < 1:
            raise ValueError("period must be a positive iteration count")
        if not 0.0 < self.prior_fraction <= 1.0:
            raise ValueError("prior_fraction must lie in (0, 1]")
        if self.prior_steps is not None and self.prior_steps < 0:
            raise ValueError("prior_steps must be nonnegative")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown gamma schedule {self.schedule!r}")


@dataclass
class SelectionMask:
    v: np.ndarray
    gamma_used: float
    mean_losses: np.ndarray

    @property
    def count(self) -> int:
        return int(self.v.sum())


def _train(params, spec, batch, steps, opt, kind):
    state = opt.fresh()
    for _ in range(steps):
        _, g = loss_and_grad(params, spec, batch, kind)
        params, state = step(params, g, state)
    return params


def build_priors(phi_star, spec: NetworkSpec, train: Batch, cfg: ISPLConfig, seed,
                 opt: OptimizerState, steps: int, kind=None) -> list[np.ndarray]:
    """Train ``cfg.Q`` prior models on random subsets of ``train``.

    Each subset holds ``ceil(prior_fraction * h)`` samples drawn without
    replacement from its own stream ``default_rng([seed, j])``.
    ``steps`` is the fallback when ``cfg.prior_steps`` is unset.
    """
    h = len(train)
    size = math.ceil(cfg.prior_fraction * h)
    if h == 0 or size == 0:
        raise ValueError("cannot build priors from an empty training set")
    m = steps if cfg.prior_steps is None else cfg.prior_steps
    phi_star = np.array(phi_star, dtype=np.float64)
    priors = []
    for j in range(cfg.Q):
        rng = np.random.default_rng([seed, j])
        idx = np.sort(rng.choice(h, size=size, replace=False))
        priors.append(_train(phi_star, spec, train.subset(idx), m, opt, kind))
    return priors


def vote_losses(priors, spec: NetworkSpec, train: Batch, kind=None) -> np.ndarray:
    """Per-sample loss averaged over the prior models."""
    if len(priors) == 0:
        raise ValueError("need at least one prior model")
    total = np.zeros(len(train))
    for p in priors:
        total += per_sample_loss(p, spec, train, kind)
    return total / len(priors)


def select(mean_losses, gamma: float) -> SelectionMask:
    """Keep samples with voted loss strictly below ``gamma``.

    If nothing survives, the single lowest-loss sample is kept so the inner
    loop always has data.
    """
    losses = np.asarray(mean_losses, dtype=np.float64)
    if not np.all(np.isfinite(losses)):
        raise ValueError("voted losses must be finite")
    v = (losses < gamma).astype(np.int64)
    if not v.any():
        v[int(np.argmin(losses))] = 1
    return SelectionMask(v=v, gamma_used=float(gamma), mean_losses=losses)


def gamma_at(iteration: int, cfg: ISPLConfig) -> float:
    if iteration < 0:
        raise ValueError("iteration must be nonnegative")
    return max(0.0, cfg.gamma0 - cfg.mu * (iteration // cfg.period))


def ispl_inner_loop(phi, spec: NetworkSpec, train: Batch, n: int, opt: OptimizerState,
                    cfg: ISPLConfig, iteration: int, seed, kind=None):
    """Inner loop on the ISPL-selected subset of ``train``.

    Returns ``(record, mask)``. With the ``inner-step`` schedule the
    threshold keeps dropping by ``mu`` after every inner step and the
    selection is redone each step; the returned mask is the first one.
    """
    priors = build_priors(phi, spec, train, cfg, seed, opt, n, kind)
    voted = vote_losses(priors, spec, train, kind)
    gamma = gamma_at(iteration, cfg)
    mask = select(voted, gamma)
    if cfg.schedule == "outer-period":
        record = run_inner_loop(phi, spec, train, n, opt, mask=mask.v, kind=kind)
        return record, mask

    masks = [select(voted, max(0.0, gamma - cfg.mu * j)).v for j in range(n)]
    record = _run_with_step_masks(phi, spec, train, n, opt, masks, kind)
    return record, mask


def _run_with_step_masks(phi, spec, train, n, opt, masks, kind) -> TrajectoryRecord:
    if n < 2:
        raise ValueError("an inner loop needs at least 2 steps")
    params = np.array(phi, dtype=np.float64)
    snapshots = np.empty((params.size, n), order="F")
    losses = np.empty(n)
    state = opt.fresh()
    for j, v in enumerate(masks):
        value, g = loss_and_grad(params, spec, train, kind, v)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite training loss at inner step {j + 1}")
        losses[j] = value
        params, state = step(params, g, state)
        snapshots[:, j] = params
    return TrajectoryRecord(start=np.array(phi, dtype=np.float64), snapshots=snapshots,
                            step_losses=losses, selected_count=int(masks[-1].sum()))
