"""Dense feedforward networks over flat parameter vectors.

Every parameter set is a single float64 vector; layers are views into it.
Layout per layer is the weight matrix (fan_in x fan_out, row-major) followed
by its bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")
HEADS = ("regression-linear", "classification-softmax")
LOSSES = ("mse", "cross-entropy")


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]
    output_head: str = "regression-linear"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        acts = tuple(self.activations)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if len(acts) != len(sizes) - 2:
            raise ValueError(
                f"expected {len(sizes) - 2} hidden activations, got {len(acts)}"
            )
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.output_head not in HEADS:
            raise ValueError(f"unknown output head {self.output_head!r}")

    @classmethod
    def mlp(cls, sizes, activation="tanh", head="regression-linear"):
        sizes = tuple(sizes)
        return cls(sizes, (activation,) * (len(sizes) - 2), head)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in self.shapes)

    @property
    def default_loss(self) -> str:
        return "mse" if self.output_head == "regression-linear" else "cross-entropy"


@dataclass
class Batch:
    """Inputs (samples x features) with real targets or integer labels."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        targets = np.asarray(self.targets)
        if targets.dtype.kind not in "iu":
            targets = targets.astype(np.float64)
            if targets.ndim == 1:
                targets = targets[:, None]
        self.targets = targets
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"{len(self.inputs)} input rows but {len(self.targets)} targets"
            )

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx) -> "Batch":
        return Batch(self.inputs[idx], self.targets[idx])


def init_params(spec: NetworkSpec, seed=None) -> np.ndarray:
    """Glorot-uniform weights, zero biases. Deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in spec.shapes:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def layer_views(params: np.ndarray, spec: NetworkSpec):
    """List of (W, b) views into ``params``; writes go through to the vector."""
    params = np.asarray(params)
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"parameter vector has shape {params.shape}, spec needs ({spec.n_params},)"
        )
    out = []
    offset = 0
    for fan_in, fan_out in spec.shapes:
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        out.append((w, b))
    return out


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(a, z, kind):
    # derivative expressed through the activation output where possible
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (z > 0).astype(np.float64)
    return np.ones_like(a)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_inputs(inputs, spec):
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != spec.layer_sizes[0]:
        raise ValueError(
            f"inputs have {x.shape[1]} features, network expects {spec.layer_sizes[0]}"
        )
    return x


def _forward_cache(params, spec, x):
    layers = layer_views(params, spec)
    hs, zs = [x], []
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = z if i == last else _activate(z, spec.activations[i])
        zs.append(z)
        hs.append(h)
    return layers, hs, zs


def forward(params, spec: NetworkSpec, inputs) -> np.ndarray:
    """Network outputs; class probabilities for a softmax head."""
    x = _check_inputs(inputs, spec)
    _, hs, _ = _forward_cache(params, spec, x)
    out = hs[-1]
    if spec.output_head == "classification-softmax":
        return _softmax(out)
    return out


def _check_kind(kind, spec):
    kind = kind or spec.default_loss
    if kind not in LOSSES:
        raise ValueError(f"unknown loss kind {kind!r}")
    if kind == "cross-entropy" and spec.output_head != "classification-softmax":
        raise ValueError("cross-entropy needs a softmax head")
    return kind


def _per_sample(out, targets, kind):
    if kind == "mse":
        t = targets.reshape(out.shape)
        return np.sum((out - t) ** 2, axis=1)
    z = out - out.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    return logz - z[np.arange(len(z)), targets]


def per_sample_loss(params, spec: NetworkSpec, batch: Batch, kind=None) -> np.ndarray:
    """Loss of each sample separately (used for ISPL voting)."""
    kind = _check_kind(kind, spec)
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = _check_inputs(batch.inputs, spec)
    _, hs, _ = _forward_cache(params, spec, x)
    return _per_sample(hs[-1], batch.targets, kind)


def _weights(n, sample_weight):
    if sample_weight is None:
        return None
    w = np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"sample_weight must have shape ({n},)")
    total = w.sum()
    if total <= 0:
        raise ValueError("sample weights select no samples")
    return w / total


def loss(params, spec: NetworkSpec, batch: Batch, kind=None, sample_weight=None) -> float:
    """Mean loss over the batch, or weighted mean if ``sample_weight`` is given."""
    per = per_sample_loss(params, spec, batch, kind)
    w = _weights(len(per), sample_weight)
    return float(per.mean() if w is None else per @ w)


def loss_and_grad(params, spec: NetworkSpec, batch: Batch, kind=None, sample_weight=None):
    kind = _check_kind(kind, spec)
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    x = _check_inputs(batch.inputs, spec)
    layers, hs, zs = _forward_cache(params, spec, x)
    out = hs[-1]
    per = _per_sample(out, batch.targets, kind)
    w = _weights(n, sample_weight)
    if w is None:
        w = np.full(n, 1.0 / n)
    value = float(per @ w)

    if kind == "mse":
        delta = 2.0 * (out - batch.targets.reshape(out.shape))
    else:
        delta = _softmax(out)
        delta[np.arange(n), batch.targets] -= 1.0
    delta *= w[:, None]

    g = np.empty(spec.n_params)
    grad_views = layer_views(g, spec)
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = grad_views[i]
        gw[...] = hs[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            a = hs[i]
            delta = (delta @ layers[i][0].T) * _activation_grad(
                a, zs[i - 1], spec.activations[i - 1]
            )
    return value, g


def grad(params, spec: NetworkSpec, batch: Batch, kind=None, sample_weight=None) -> np.ndarray:
    """Exact gradient of :func:`loss` with respect to every parameter."""
    return loss_and_grad(params, spec, batch, kind, sample_weight)[1]


@dataclass
class OptimizerState:
    kind: str = "sgd"
    learning_rate: float = 0.02
    beta1: float = 0.0
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    t: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("Adam betas must lie in [0, 1)")

    def fresh(self) -> "OptimizerState":
        """Same hyperparameters, zeroed moments and step counter."""
        return replace(self, m=None, v=None, t=0)


def step(params, gradient, state: OptimizerState):
    """One optimizer step. Returns ``(new_params, new_state)``; inputs untouched."""
    params = np.asarray(params, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if params.shape != gradient.shape:
        raise ValueError(f"shape mismatch {params.shape} vs {gradient.shape}")
    if not np.all(np.isfinite(gradient)):
        raise FloatingPointError("non-finite gradient")

    lr = state.learning_rate
    if state.kind == "sgd":
        return params - lr * gradient, replace(state, t=state.t + 1)

    m = np.zeros_like(params) if state.m is None else state.m
    v = np.zeros_like(params) if state.v is None else state.v
    if m.shape != params.shape:
        raise ValueError("optimizer moments do not match the parameter vector")
    t = state.t + 1
    m = state.beta1 * m + (1.0 - state.beta1) * gradient
    v = state.beta2 * v + (1.0 - state.beta2) * gradient * gradient
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, t=t)
