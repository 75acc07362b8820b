"""Inner-loop adaptation with a full record of the parameter trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Batch, NetworkSpec, OptimizerState, layer_views, loss_and_grad, step


@dataclass
class TrajectoryRecord:
    """Parameters after each of the ``n`` inner steps.

    ``snapshots[:, j]`` holds the parameters after ``j + 1`` optimizer steps;
    the starting point is kept separately in ``start``. ``step_losses[j]`` is
    the training loss evaluated right before step ``j + 1``.
    """

    start: np.ndarray
    snapshots: np.ndarray
    step_losses: np.ndarray
    selected_count: int

    @property
    def n_steps(self) -> int:
        return self.snapshots.shape[1]

    @property
    def endpoint(self) -> np.ndarray:
        return self.snapshots[:, -1]


def flatten(layers) -> np.ndarray:
    """Concatenate ``[(W, b), ...]`` into one parameter vector."""
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def unflatten(vector, spec: NetworkSpec):
    """Inverse of :func:`flatten`; returns independent copies per layer."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (spec.n_params,):
        raise ValueError(
            f"vector of length {vector.size} does not match {spec.n_params} parameters"
        )
    return [(w.copy(), b.copy()) for w, b in layer_views(vector, spec)]


def run_inner_loop(
    init,
    spec: NetworkSpec,
    train: Batch,
    steps: int,
    opt: OptimizerState,
    mask=None,
    kind=None,
) -> TrajectoryRecord:
    """Run ``steps`` full-batch optimizer steps from ``init`` on ``train``.

    ``mask`` (0/1 per training sample) restricts the loss to the selected
    samples; it is applied as a mean over the selected subset.
    """
    if steps < 2:
        raise ValueError("an inner loop needs at least 2 steps")
    init = np.array(init, dtype=np.float64)
    n_samples = len(train)
    weight = None
    selected = n_samples
    if mask is not None:
        weight = np.asarray(mask, dtype=np.float64)
        if weight.shape != (n_samples,):
            raise ValueError(f"mask length {weight.size} != {n_samples} training samples")
        selected = int(np.count_nonzero(weight))
        if selected == 0:
            raise ValueError("mask selects no samples")
        if selected == n_samples:
            weight = None

    snapshots = np.empty((init.size, steps), order="F")
    losses = np.empty(steps)
    state = opt.fresh()
    params = init
    for j in range(steps):
        value, g = loss_and_grad(params, spec, train, kind, weight)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite training loss at inner step {j + 1}")
        losses[j] = value
        params, state = step(params, g, state)
        snapshots[:, j] = params
    return TrajectoryRecord(start=init, snapshots=snapshots, step_losses=losses, selected_count=selected)
