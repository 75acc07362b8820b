"""Outer-loop meta-updates: Reptile, Eigen-Reptile and baseline directions."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ispl import ISPLConfig, ispl_inner_loop
from .linalg import DegenerateTrajectory, mean_center, principal_direction
from .nn import NetworkSpec, OptimizerState, init_params, loss
from .trajectory import TrajectoryRecord, run_inner_loop

log = logging.getLogger(__name__)

ALGORITHMS = ("reptile", "eigen-reptile", "avg-gradient-dir", "avg-weights-dir")
BETA_SCHEDULES = ("constant", "linear-decay")


@dataclass
class TaskDirection:
    e_signed: np.ndarray | None
    zeta: float
    nu: float
    degenerate: bool = False


@dataclass(frozen=True)
class MetaConfig:
    algorithm: str = "eigen-reptile"
    beta: float = 0.1
    meta_batch: int = 10
    inner_steps: int = 5
    outer_iterations: int = 1000
    beta_schedule: str = "constant"
    project_before_flip: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.meta_batch < 1:
            raise ValueError("meta_batch must be >= 1")
        if self.inner_steps < 2:
            raise ValueError("inner_steps must be >= 2")
        if self.outer_iterations < 1:
            raise ValueError("outer_iterations must be >= 1")
        if self.beta_schedule not in BETA_SCHEDULES:
            raise ValueError(f"unknown beta schedule {self.beta_schedule!r}")

    def beta_at(self, iteration: int) -> float:
        if self.beta_schedule == "linear-decay":
            return self.beta * (1.0 - iteration / self.outer_iterations)
        return self.beta


def reptile_update(phi, phi_tilde, beta: float) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    phi_tilde = np.asarray(phi_tilde, dtype=np.float64)
    if phi.shape != phi_tilde.shape:
        raise ValueError("parameter vectors differ in length")
    return phi + beta * (phi_tilde - phi)


def mean_motion(W) -> np.ndarray:
    """Average of the mirrored long-range differences ``w[n-i] - w[i]``.

    Rows of the result correspond to parameters; ``W`` is d x n and need not
    be centered.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[1]
    if n < 2:
        raise ValueError("need at least 2 snapshots")
    half = n // 2
    return (W[:, n - half:][:, ::-1] - W[:, :half]).sum(axis=1) / half


def _projected_step(W, e) -> float:
    # sum of consecutive differences telescopes to last - first
    return float((W[:, -1] - W[:, 0]) @ e)


def task_direction(rec: TrajectoryRecord, project_before_flip: bool = False) -> TaskDirection:
    """Sign-corrected principal direction, eigen-share and projected step.

    The eigenvector is flipped to agree with the mean motion before the step
    length is projected. With ``project_before_flip=True`` the step is
    projected onto the raw eigenvector and the flip happens afterwards.
    """
    W = rec.snapshots
    centered, _ = mean_center(W)
    try:
        main = principal_direction(centered)
    except DegenerateTrajectory:
        return TaskDirection(e_signed=None, zeta=0.0, nu=0.0, degenerate=True)
    e = main.e
    flip = float(e @ mean_motion(W)) < 0.0
    if project_before_flip:
        nu = _projected_step(W, e)
        if flip:
            e = -e
    else:
        if flip:
            e = -e
        nu = _projected_step(W, e)
    return TaskDirection(e_signed=e, zeta=main.zeta, nu=nu)


def baseline_direction(rec: TrajectoryRecord, kind: str) -> TaskDirection:
    W = rec.snapshots
    if kind == "avg-gradient-dir":
        raw = np.diff(W, axis=1).mean(axis=1)
    elif kind == "avg-weights-dir":
        raw = W.mean(axis=1) - rec.start
    else:
        raise ValueError(f"unknown baseline direction {kind!r}")
    norm = np.linalg.norm(raw)
    if norm < 1e-300 or not np.isfinite(norm):
        return TaskDirection(e_signed=None, zeta=0.0, nu=0.0, degenerate=True)
    e = raw / norm
    return TaskDirection(e_signed=e, zeta=1.0, nu=_projected_step(W, e))


def eigen_reptile_meta_update(phi, dirs, beta: float) -> np.ndarray:
    """``phi + beta * (sum(nu) / B) * mean(zeta * e)`` over the task batch.

    Degenerate tasks add nothing but still count toward ``B``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    B = len(dirs)
    live = [d for d in dirs if not d.degenerate]
    if not live:
        log.warning("every task in the batch is degenerate; meta-parameters unchanged")
        return phi.copy()
    e_sum = np.zeros_like(phi)
    nu_sum = 0.0
    for d in live:
        e_sum += d.zeta * d.e_signed
        nu_sum += d.nu
    return phi + beta * (nu_sum / B) * (e_sum / B)


@dataclass
class MetaTrainingResult:
    params: np.ndarray
    history: list[dict] = field(default_factory=list)


def _inner(phi, spec, batch, config, opt, ispl, iteration, task_seed, kind):
    if ispl is None:
        return run_inner_loop(phi, spec, batch, config.inner_steps, opt, kind=kind), None
    return ispl_inner_loop(phi, spec, batch, config.inner_steps, opt, ispl, iteration,
                           task_seed, kind)


def outer_loop(
    config: MetaConfig,
    spec: NetworkSpec,
    task_source,
    opt: OptimizerState,
    seed: int = 0,
    init=None,
    ispl: ISPLConfig | None = None,
    evaluate=None,
    eval_interval: int = 0,
    threads: int = 1,
    kind=None,
) -> MetaTrainingResult:
    """Meta-train for ``config.outer_iterations`` iterations.

    ``task_source(rng)`` returns the training Batch of one task. Task ``i``
    of iteration ``t`` always draws from ``default_rng([seed, t, i])``, so
    runs that differ only in ``config.algorithm`` see the same tasks.
    ``evaluate(params, iteration)`` returns ``(metric, ci95)`` and is called
    every ``eval_interval`` iterations and after the last one.
    """
    phi = init_params(spec, seed) if init is None else np.array(init, dtype=np.float64)
    history = []
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    T = config.outer_iterations

    def run_task(t, i):
        rng = np.random.default_rng([seed, t, i])
        batch = task_source(rng)
        task_seed = int(rng.integers(2**63 - 1))
        rec, mask = _inner(phi, spec, batch, config, opt, ispl, t, task_seed, kind)
        post = loss(rec.endpoint, spec, batch, kind)
        return rec, mask, post, len(batch)

    try:
        for t in range(T):
            jobs = [(t, i) for i in range(config.meta_batch)]
            if pool is None:
                results = [run_task(*j) for j in jobs]
            else:
                results = list(pool.map(lambda j: run_task(*j), jobs))
            records = [r[0] for r in results]
            beta = config.beta_at(t)

            zetas = []
            if config.algorithm == "reptile":
                target = np.mean([r.endpoint for r in records], axis=0)
                phi = reptile_update(phi, target, beta)
            else:
                if config.algorithm == "eigen-reptile":
                    dirs = [task_direction(r, config.project_before_flip) for r in records]
                else:
                    dirs = [baseline_direction(r, config.algorithm) for r in records]
                zetas = [d.zeta for d in dirs if not d.degenerate]
                phi = eigen_reptile_meta_update(phi, dirs, beta)
            if not np.all(np.isfinite(phi)):
                raise FloatingPointError(f"meta-parameters became non-finite at iteration {t}")

            row = {
                "iteration": t,
                "meta_train_loss": float(np.mean([r[2] for r in results])),
                "eval_metric": None,
                "eval_ci95": None,
                "gamma": None,
                "selected_fraction": None,
                "zeta_mean": float(np.mean(zetas)) if zetas else None,
            }
            if ispl is not None:
                row["gamma"] = results[0][1].gamma_used
                row["selected_fraction"] = float(
                    sum(r[0].selected_count for r in results) / sum(r[3] for r in results)
                )
            last = t == T - 1
            if evaluate is not None and (last or (eval_interval and (t + 1) % eval_interval == 0)):
                row["eval_metric"], row["eval_ci95"] = evaluate(phi, t)
            history.append(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return MetaTrainingResult(params=phi, history=history)
