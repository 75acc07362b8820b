"""Numerical checks behind the Eigen-Reptile analysis.

* an isotropic shift ``C + s*I`` keeps the eigenvectors of ``C`` and moves
  every eigenvalue by exactly ``s``;
* dropping a shared contribution ``xi`` from both the top and the corrupted
  eigenvalue lowers their ratio;
* truncating a snapshot matrix to its top singular direction discards the
  low-energy tail;
* with noisy snapshots the principal direction moves less than the
  endpoint difference Reptile uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import DegenerateTrajectory, mean_center, principal_angle, principal_direction, sym_eigen

GAP_TOL = 1e-6
IDENTITY_TOL = 1e-12


@dataclass
class ShiftReport:
    max_eigvec_angle: float
    eigenvalue_shift_error: float
    degenerate: bool = False


def check_isotropic_shift(C, sigma2: float) -> ShiftReport:
    """Compare the eigensystems of ``C`` and ``C + sigma2 * I``.

    Spectra with a gap below 1e-6 are reported as degenerate and not compared,
    since their eigenvectors are not unique.
    """
    C = np.asarray(C, dtype=np.float64)
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    base = sym_eigen(C)
    if len(base.eigenvalues) > 1 and np.min(-np.diff(base.eigenvalues)) <= GAP_TOL:
        return ShiftReport(math.nan, math.nan, degenerate=True)
    shifted = sym_eigen(C + sigma2 * np.eye(len(C)))
    angle = max(
        principal_angle(base.eigenvectors[:, k], shifted.eigenvectors[:, k])
        for k in range(len(C))
    )
    err = float(np.max(np.abs(shifted.eigenvalues - (base.eigenvalues + sigma2))))
    return ShiftReport(angle, err)


@dataclass
class DiscardCheck:
    lam: float
    lam_o: float
    xi: float
    before_ratio: float
    after_ratio: float
    diff: float
    identity_error: float
    valid: bool

    @property
    def passed(self) -> bool:
        return self.valid and self.identity_error <= IDENTITY_TOL and self.diff > 0


def check_discard_ratio(lam: float, lam_o: float, xi: float) -> DiscardCheck:
    """Ratio of corrupted to top eigenvalue before and after removing ``xi``.

    ``diff`` is the closed form ``xi (lam - lam_o) / (lam (lam - xi))``; the
    identity error compares it with the direct difference of the ratios.
    Inputs outside ``lam > lam_o > xi > 0`` are flagged invalid, not raised.
    """
    valid = lam > lam_o > xi > 0
    before = lam_o / lam if lam != 0 else math.nan
    after = (lam_o - xi) / (lam - xi) if lam != xi else math.nan
    denom = lam * (lam - xi)
    diff = xi * (lam - lam_o) / denom if denom != 0 else math.nan
    err = abs((before - after) - diff)
    return DiscardCheck(lam, lam_o, xi, before, after, diff, err, valid)


@dataclass
class SNRReport:
    zeta: float
    retained_share: float
    tail_share: float
    spectrum: np.ndarray
    direction: np.ndarray
    planted_removed_share: float


def snr_truncation_demo(W, planted_noise_columns=()) -> SNRReport:
    """Energy kept by the top singular direction of an uncentered ``W``.

    ``planted_removed_share`` is the fraction of the planted columns' energy
    that lies outside the kept direction, i.e. what truncation throws away.
    """
    W = np.asarray(W, dtype=np.float64)
    dec = sym_eigen(W.T @ W)
    spectrum = np.maximum(dec.eigenvalues, 0.0)
    if not np.all(np.diff(spectrum) <= 0):
        raise AssertionError("spectrum is not sorted non-increasing")
    total = spectrum.sum()
    if total < 1e-12:
        raise DegenerateTrajectory("snapshot matrix is zero")
    e = W @ dec.eigenvectors[:, 0]
    e /= np.linalg.norm(e)
    retained = float(spectrum[0] / total)

    cols = list(planted_noise_columns)
    if cols:
        P = W[:, cols]
        energy = float(np.sum(P * P))
        kept = float(np.sum((e @ P) ** 2))
        removed = 1.0 - kept / energy if energy > 0 else 0.0
    else:
        removed = math.nan
    return SNRReport(retained, retained, 1.0 - retained, spectrum, e, removed)


@dataclass
class Theorem1Report:
    mean_angle_eigen: float
    mean_angle_reptile: float
    angles_eigen: np.ndarray
    angles_reptile: np.ndarray


def smooth_trajectory(rng, d: int, n: int) -> np.ndarray:
    """A gently curving d x n path: steady drift plus a small quadratic bend."""
    start = rng.standard_normal(d)
    drift = rng.standard_normal(d)
    bend = rng.standard_normal(d)
    s = np.arange(1, n + 1) / n
    steps = rng.uniform(0.5, 1.5, size=n).cumsum() / n
    return start[:, None] + np.outer(drift, steps) + 0.2 * np.outer(bend, s**2)


def empirical_theorem1(trials: int, d: int, n: int, sigma: float, seed=0,
                       relative: bool = True) -> Theorem1Report:
    """Mean angle moved by each direction when snapshots get Gaussian noise.

    With ``relative=True`` the noise standard deviation is ``sigma`` times the
    standard deviation of the centered clean snapshot entries.
    """
    if trials < 10:
        raise ValueError("need at least 10 trials")
    rng = np.random.default_rng(seed)
    eig = np.empty(trials)
    rep = np.empty(trials)
    for k in range(trials):
        W = smooth_trajectory(rng, d, n)
        centered, _ = mean_center(W)
        scale = sigma * centered.std() if relative else sigma
        noisy = W + scale * rng.standard_normal(W.shape)
        clean_e = principal_direction(centered).e
        noisy_e = principal_direction(mean_center(noisy)[0]).e
        eig[k] = principal_angle(clean_e, noisy_e)
        rep[k] = principal_angle(W[:, -1] - W[:, 0], noisy[:, -1] - noisy[:, 0])
    return Theorem1Report(float(eig.mean()), float(rep.mean()), eig, rep)


def random_distinct_psd(rng, size: int, min_gap: float = 1e-3) -> np.ndarray:
    """Random PSD matrix whose eigenvalues are separated by at least ``min_gap``."""
    Q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    gaps = rng.uniform(min_gap, 1.0, size=size)
    values = np.cumsum(gaps)[::-1] - gaps[0] + rng.uniform(0.0, 0.5)
    return (Q * values) @ Q.T


def random_trajectory(rng, d: int, n: int) -> np.ndarray:
    return rng.standard_normal((d, n))


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def gram_equivalence_suite(count=100, seed=0) -> SuiteResult:
    """Gram-path principal direction vs a direct d x d scatter eigensolve."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        d = int(rng.integers(8, 65))
        n = int(rng.integers(3, 11))
        centered, _ = mean_center(random_trajectory(rng, d, n))
        e = principal_direction(centered).e
        _, vecs = np.linalg.eigh(centered @ centered.T)
        worst = max(worst, principal_angle(e, vecs[:, -1]))
    return SuiteResult("gram-equivalence", worst < 1e-6, f"max angle {worst:.3e} rad over {count} trajectories")


def theorem1_suite(count=100, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst_angle = worst_shift = 0.0
    for _ in range(count):
        C = random_distinct_psd(rng, int(rng.integers(2, 11)))
        rep = check_isotropic_shift(C, float(rng.uniform(0.01, 2.0)))
        worst_angle = max(worst_angle, rep.max_eigvec_angle)
        worst_shift = max(worst_shift, rep.eigenvalue_shift_error)
    emp = empirical_theorem1(200, 50, 8, 0.1, seed=seed)
    ok = worst_angle < 1e-8 and worst_shift < 1e-10 and emp.mean_angle_eigen < emp.mean_angle_reptile
    return SuiteResult(
        "theorem1", ok,
        f"max angle {worst_angle:.2e}, max shift error {worst_shift:.2e}; "
        f"noisy mean angle eigen {emp.mean_angle_eigen:.4f} vs reptile {emp.mean_angle_reptile:.4f}",
    )


def random_discard_triples(rng, count):
    lam = rng.uniform(1.0, 100.0, size=count)
    lam_o = lam * rng.uniform(0.01, 0.99, size=count)
    xi = lam_o * rng.uniform(0.01, 0.99, size=count)
    return lam, lam_o, xi


def theorem2_suite(count=10_000, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    checks = [check_discard_ratio(*t) for t in zip(*random_discard_triples(rng, count))]
    failures = sum(not c.passed for c in checks)
    worst = max(c.identity_error for c in checks)
    return SuiteResult("theorem2", failures == 0,
                       f"{count - failures}/{count} triples pass, max identity error {worst:.2e}")


def snr_suite(seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(30)
    u /= np.linalg.norm(u)
    rank1 = snr_truncation_demo(np.outer(u, [1.0, 2.0, 3.0, 4.0]))
    ok = abs(rank1.retained_share - 1.0) < 1e-12 and rank1.tail_share < 1e-12

    noise = rng.standard_normal(30)
    noise -= (noise @ u) * u
    noise *= 0.5 / np.linalg.norm(noise)
    W = np.column_stack([np.outer(u, [1.0, 2.0, 3.0]), noise])
    planted = snr_truncation_demo(W, [3])
    angle = principal_angle(planted.direction, u)
    ok = ok and angle < 1e-6 and planted.planted_removed_share > 1 - 1e-9

    for _ in range(20):
        rep = snr_truncation_demo(rng.standard_normal((20, 6)))
        ok = ok and bool(np.all(np.diff(rep.spectrum) <= 0))
    return SuiteResult("snr", ok, f"planted-signal angle {angle:.2e}, tail share {planted.tail_share:.4f}")


SUITES = {
    "theorem1": theorem1_suite,
    "theorem2": theorem2_suite,
    "snr": snr_suite,
    "gram-equivalence": gram_equivalence_suite,
}
