"""Episode generators: sine regression, Gaussian-cluster classification,
label-noise injection and a loader for episode files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .nn import Batch, NetworkSpec, forward

GRID = np.linspace(-5.0, 5.0, 50)
AMPLITUDE_RANGE = (0.1, 5.0)
PHASE_RANGE = (0.0, 2.0 * np.pi)
X_RANGE = (-5.0, 5.0)


@dataclass(frozen=True)
class RegressionTask:
    amplitude: float
    phase: float

    def __call__(self, x):
        return self.amplitude * np.sin(np.asarray(x, dtype=np.float64) + self.phase)


def gen_sine_task(rng) -> RegressionTask:
    return RegressionTask(rng.uniform(*AMPLITUDE_RANGE), rng.uniform(*PHASE_RANGE))


def sample_points(task: RegressionTask, K: int, rng) -> Batch:
    if K < 1:
        raise ValueError("K must be >= 1")
    x = rng.uniform(*X_RANGE, size=(K, 1))
    return Batch(x, task(x))


def eval_grid_loss(params, spec: NetworkSpec, task: RegressionTask) -> float:
    """Mean squared error over 50 evenly spaced points of [-5, 5]."""
    x = GRID[:, None]
    pred = forward(params, spec, x)
    return float(np.mean((pred - task(x)) ** 2))


@dataclass(frozen=True)
class SineTaskSource:
    """Callable task source for the outer loop: one K-shot sine batch per call."""

    K: int = 10

    def __call__(self, rng) -> Batch:
        return sample_points(gen_sine_task(rng), self.K, rng)


@dataclass(frozen=True)
class ClassificationConfig:
    N: int = 5
    K_train: int = 1
    K_test: int = 1
    dim: int = 16
    radius: float = 3.0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least 2 classes")
        if self.K_train < 1 or self.K_test < 1:
            raise ValueError("shot counts must be >= 1")
        if self.dim < 1 or not self.radius > 0:
            raise ValueError("dim and radius must be positive")


@dataclass
class Episode:
    train_inputs: np.ndarray
    train_labels: np.ndarray
    test_inputs: np.ndarray
    test_labels: np.ndarray
    N: int
    K_train: int
    K_test: int
    noise_record: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def train(self) -> Batch:
        return Batch(self.train_inputs, self.train_labels)

    @property
    def test(self) -> Batch:
        return Batch(self.test_inputs, self.test_labels)


def _cluster_samples(means, k, rng):
    N, D = means.shape
    labels = np.repeat(np.arange(N), k)
    x = means[labels] + rng.standard_normal((N * k, D))
    return x, labels


def gen_classification_episode(cfg: ClassificationConfig, rng) -> Episode:
    """N isotropic Gaussian clusters with means on the radius sphere."""
    means = rng.standard_normal((cfg.N, cfg.dim))
    means *= cfg.radius / np.linalg.norm(means, axis=1, keepdims=True)
    xtr, ytr = _cluster_samples(means, cfg.K_train, rng)
    xte, yte = _cluster_samples(means, cfg.K_test, rng)
    return Episode(xtr, ytr, xte, yte, cfg.N, cfg.K_train, cfg.K_test)


NOISE_KINDS = ("none", "symmetric", "asymmetric")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    p: float = 0.0
    pairing_seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise probability {self.p} outside [0, 1]")


def asymmetric_pairing(N: int, pairing_seed: int) -> np.ndarray:
    """Fixed derangement: the cycle c -> c+1 relabelled by a seeded permutation."""
    perm = np.random.default_rng(pairing_seed).permutation(N)
    pairing = np.empty(N, dtype=np.int64)
    pairing[perm] = perm[(np.arange(N) + 1) % N]
    return pairing


def inject_label_noise(ep: Episode, spec: NoiseSpec, rng) -> Episode:
    """Corrupt training labels only; the test split is never touched."""
    if spec.kind == "none" or spec.p == 0.0:
        return ep
    labels = ep.train_labels.copy()
    flip = rng.random(len(labels)) < spec.p
    if spec.kind == "symmetric":
        # uniform over the other N-1 classes
        offset = rng.integers(1, ep.N, size=len(labels))
        new = (labels + offset) % ep.N
    else:
        new = asymmetric_pairing(ep.N, spec.pairing_seed)[labels]
    record = [(int(i), int(labels[i]), int(new[i])) for i in np.flatnonzero(flip)]
    labels[flip] = new[flip]
    return replace(ep, train_labels=labels, noise_record=list(ep.noise_record) + record)


def compute_train_shot(inner_steps: int, batch_size: int, N: int) -> int:
    """Training shots per class so one inner loop sees each sample about once."""
    if inner_steps < 1 or batch_size < 1 or N < 1:
        raise ValueError("inputs must be positive")
    return math.ceil(inner_steps * batch_size / N) + 1


@dataclass(frozen=True)
class ClassificationTaskSource:
    """Outer-loop task source: a (possibly noisy) episode's training split."""

    cfg: ClassificationConfig
    noise: NoiseSpec = NoiseSpec()

    def episode(self, rng) -> Episode:
        return inject_label_noise(gen_classification_episode(self.cfg, rng), self.noise, rng)

    def __call__(self, rng) -> Batch:
        return self.episode(rng).train


class EpisodeFormatError(ValueError):
    pass


def read_episode_file(path, K_train: int, K_test: int) -> Episode:
    """Parse a ``label,f1,...,fD`` file.

    Per class, the first ``K_train`` rows in file order form the training
    split and the next ``K_test`` rows the test split.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EpisodeFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        D = len(header) - 1
        if D < 1 or header[0] != "label" or header[1:] != [f"f{i}" for i in range(1, D + 1)]:
            raise EpisodeFormatError(f"{path}:1: header must be label,f1,...,fD")
        labels, feats = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != D + 1:
                raise EpisodeFormatError(f"{path}:{lineno}: expected {D + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
                values = [float(c) for c in row[1:]]
            except ValueError:
                raise EpisodeFormatError(f"{path}:{lineno}: malformed number") from None
            if label < 0 or not all(math.isfinite(v) for v in values):
                raise EpisodeFormatError(f"{path}:{lineno}: invalid label or feature")
            labels.append(label)
            feats.append(values)

    labels = np.array(labels, dtype=np.int64)
    X = np.array(feats, dtype=np.float64).reshape(-1, D)
    N = int(labels.max()) + 1 if len(labels) else 0
    if N < 2 or set(labels.tolist()) != set(range(N)):
        raise EpisodeFormatError(f"{path}: labels must cover 0..N-1 with N >= 2")
    tr, te = [], []
    for c in range(N):
        rows = np.flatnonzero(labels == c)
        if len(rows) < K_train + K_test:
            raise EpisodeFormatError(
                f"{path}: class {c} has {len(rows)} rows, need {K_train + K_test}"
            )
        tr.extend(rows[:K_train])
        te.extend(rows[K_train:K_train + K_test])
    tr, te = np.array(tr), np.array(te)
    return Episode(X[tr], labels[tr], X[te], labels[te], N, K_train, K_test)


@dataclass
class EpisodeDirSource:
    """Draws episodes uniformly from a directory of episode files."""

    directory: Path
    K_train: int
    K_test: int
    noise: NoiseSpec = NoiseSpec()
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.directory = Path(self.directory)
        self.files = sorted(p for p in self.directory.iterdir() if p.is_file())
        if not self.files:
            raise FileNotFoundError(f"no episode files in {self.directory}")

    def load(self, path) -> Episode:
        if path not in self._cache:
            self._cache[path] = read_episode_file(path, self.K_train, self.K_test)
        return self._cache[path]

    def episode(self, rng) -> Episode:
        ep = self.load(self.files[int(rng.integers(len(self.files)))])
        return inject_label_noise(ep, self.noise, rng)

    def __call__(self, rng) -> Batch:
        return self.episode(rng).train
