"""Sampling, empirical cumulants, and the target CDF by CF inversion.

Everything random is driven by a counter-based Philox generator keyed on the
caller's seed, so batches are reproducible bit for bit.  The exact engine in
the other modules never consumes randomness; this module exists to validate
it and to measure empirical distances.

Total variation against an empirical measure is degenerate (always 1 for a
continuous law), so the distance computed here is the Kolmogorov statistic,
which the continuity of the limit laws makes a sound observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chaos
from .chaos import ChaosExpansion
from .errors import NumericalError
from .spectral2 import TargetSpec

GENERATOR_ID = "philox4x64-normals-v1"

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


@dataclass(frozen=True)
class SampleBatch:
    """Reproducible sample: (seed, generator_id, n) determines the values."""

    values: np.ndarray
    seed: int
    generator_id: str = GENERATOR_ID

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return len(self.values)


def sample_target(spec: TargetSpec, n: int, seed: int) -> SampleBatch:
    """n i.i.d. draws of sum_i alpha_i (N_i^2 - 1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = _rng(seed).standard_normal((n, spec.k))
    values = (z ** 2 - 1.0) @ np.asarray(spec.alphas)
    return SampleBatch(values, seed)


def sample_chaos(F: ChaosExpansion, n: int, seed: int) -> SampleBatch:
    """n pathwise evaluations of F at i.i.d. standard normal inputs."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x = _rng(seed).standard_normal((n, F.dim))
    return SampleBatch(chaos.evaluate(F, x), seed)


def k_statistics(batch, rmax: int = 6):
    """Cumulant estimates [k_1 .. k_rmax]: unbiased k-statistics for r <= 4,
    central-moment plug-in (bias O(1/n)) for r in {5, 6}."""
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, float)
    n = len(values)
    if not 1 <= rmax <= 6:
        raise ValueError(f"rmax must be in 1..6, got {rmax}")
    if n <= rmax:
        raise ValueError(f"need more than rmax={rmax} samples, got {n}")
    mean = float(np.mean(values))
    d = values - mean
    m = [float(np.mean(d ** r)) for r in range(2, 7)]
    m2, m3, m4, m5, m6 = m
    out = [mean]
    if rmax >= 2:
        out.append(n / (n - 1) * m2)
    if rmax >= 3:
        out.append(n ** 2 / ((n - 1) * (n - 2)) * m3)
    if rmax >= 4:
        out.append(n ** 2 * ((n + 1) * m4 - 3 * (n - 1) * m2 ** 2)
                   / ((n - 1) * (n - 2) * (n - 3)))
    if rmax >= 5:
        out.append(m5 - 10.0 * m2 * m3)
    if rmax >= 6:
        out.append(m6 - 15.0 * m2 * m4 - 10.0 * m3 ** 2 + 30.0 * m2 ** 3)
    return out


def k_statistic_errors(batch, rmax: int = 6, nsplit: int = 10):
    """Standard errors of :func:`k_statistics` from nsplit contiguous sub-batches."""
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, float)
    chunks = np.array_split(values, nsplit)
    stats = np.array([k_statistics(c, rmax) for c in chunks])
    return list(np.std(stats, axis=0, ddof=1) / math.sqrt(nsplit))


def target_cf(spec: TargetSpec, t):
    """Characteristic function of the target: prod (1-2i a t)^{-1/2} e^{-i a t}."""
    t = np.asarray(t, dtype=float)
    alphas = np.asarray(spec.alphas)
    z = np.ones(t.shape, dtype=complex)
    for a in alphas:
        z = z / np.sqrt(1.0 - 2j * a * t)
    return z * np.exp(-1j * t * float(np.sum(alphas)))


class _Inverter:
    """Adaptive quadrature of Im[e^{-itx} cf(t)] / t over t in (0, T].

    The integrand is rho(t) sin(theta(t)) / t with
    rho(t) = prod (1 + 4 a^2 t^2)^{-1/4} and
    theta(t) = (1/2) sum arctan(2 a t) - t (x + sum a).
    Panels double geometrically; each panel gets enough Gauss-Legendre
    subpanels to resolve its phase change.  Once the phase at the panel end
    dominates (|theta'(T)| T large), two integration-by-parts tail terms are
    added, and refinement stops when successive estimates differ by < tol
    twice in a row.
    """

    def __init__(self, spec: TargetSpec, tol: float = 1e-6,
                 max_doublings: int = 64):
        self.alphas = np.asarray(spec.alphas)
        self.asum = float(np.sum(self.alphas))
        self.tol = tol
        self.max_doublings = max_doublings
        self.lower_edge = -self.asum if np.all(self.alphas > 0) else None
        self.upper_edge = -self.asum if np.all(self.alphas < 0) else None

    def _rho(self, t):
        return np.exp(-0.25 * np.sum(
            np.log1p(4.0 * (self.alphas[:, None] * t[None, :]) ** 2), axis=0))

    def _theta(self, t, x):
        return 0.5 * np.sum(np.arctan(2.0 * self.alphas[:, None] * t[None, :]),
                            axis=0) - t * (x + self.asum)

    def _theta_scalar(self, t, x):
        return float(0.5 * np.sum(np.arctan(2.0 * self.alphas * t))
                     - t * (x + self.asum))

    def _panel(self, a, b, x):
        dtheta = abs(self._theta_scalar(b, x) - self._theta_scalar(a, x))
        nsub = max(2, int(math.ceil(2.0 * dtheta / math.pi)))
        if nsub > 400_000:
            raise NumericalError(
                f"CDF quadrature panel [{a:g}, {b:g}] at x={x:g} would need "
                f"{nsub} subpanels"
            )
        edges = np.linspace(a, b, nsub + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        ts = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        ws = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        vals = self._rho(ts) * np.sin(self._theta(ts, x)) / ts
        return float(np.sum(ws * vals))

    def _tail(self, T, x):
        """Two integration-by-parts terms for the remainder beyond T, or None
        while the oscillation does not yet dominate the envelope decay."""
        a2t2 = 4.0 * (self.alphas * T) ** 2
        theta = self._theta_scalar(T, x)
        dtheta = float(np.sum(self.alphas / (1.0 + a2t2))) - (x + self.asum)
        if abs(dtheta) * T < 20.0:
            return None
        rho = float(np.exp(-0.25 * np.sum(np.log1p(a2t2))))
        env = rho / T
        dlog_rho = -2.0 * T * float(np.sum(self.alphas ** 2 / (1.0 + a2t2)))
        denv = env * (dlog_rho - 1.0 / T)
        d2theta = float(np.sum(-8.0 * self.alphas ** 3 * T / (1.0 + a2t2) ** 2))
        g = (denv * dtheta - env * d2theta) / dtheta ** 2
        return env * math.cos(theta) / dtheta - g * math.sin(theta) / dtheta

    def cdf(self, x: float) -> float:
        x = float(x)
        if self.lower_edge is not None and x <= self.lower_edge:
            return 0.0
        if self.upper_edge is not None and x >= self.upper_edge:
            return 1.0
        freq = max(abs(x + self.asum), 2.0 * float(np.max(np.abs(self.alphas))))
        T = 0.25 / freq
        integral = self._panel(0.0, T, x)
        prev = None
        small_steps = 0
        for _ in range(self.max_doublings):
            integral += self._panel(T, 2.0 * T, x)
            T *= 2.0
            tail = self._tail(T, x)
            est = 0.5 - (integral + (tail or 0.0)) / math.pi
            if prev is not None and abs(est - prev) < self.tol:
                small_steps += 1
                if small_steps >= 2:
                    return min(max(est, 0.0), 1.0)
            else:
                small_steps = 0
            prev = est
        raise NumericalError(
            f"CDF quadrature did not converge at x={x:g}: reached T={T:g}, "
            f"last estimate {prev!r}, tolerance {self.tol:g}"
        )


class TargetLaw:
    """The target law: characteristic function plus CDF by numerical inversion."""

    def __init__(self, spec: TargetSpec, tol: float = 1e-6):
        self.spec = spec
        self._inverter = _Inverter(spec, tol=tol)

    def cf(self, t):
        return target_cf(self.spec, t)

    def cdf(self, x) -> float:
        return self._inverter.cdf(x)

    def cdf_batch(self, xs, grid_size: int = None) -> np.ndarray:
        """CDF at many points: exact inversion on a quantile grid of the
        inputs, monotone interpolation in between.

        The interpolation error at any point is at most the CDF increment
        between adjacent grid nodes, roughly 1/grid_size when the nodes are
        sample quantiles.
        """
        xs = np.asarray(xs, dtype=float)
        n = len(xs)
        if grid_size is None:
            grid_size = int(np.clip(n // 64, 256, 1600))
        if n <= grid_size:
            return np.array([self.cdf(x) for x in xs])
        order = np.sort(xs)
        idx = np.unique(np.round(np.linspace(0, n - 1, grid_size)).astype(int))
        grid = np.unique(order[idx])
        vals = np.array([self.cdf(x) for x in grid])
        vals = np.clip(np.maximum.accumulate(vals), 0.0, 1.0)
        return np.interp(xs, grid, vals)


def target_cdf(spec: TargetSpec, x) -> float:
    """P(target <= x) by characteristic-function inversion."""
    return TargetLaw(spec).cdf(x)


def kolmogorov_distance(batch, cdf) -> float:
    """One-sample Kolmogorov statistic: sup over the sample of |ECDF - cdf|."""
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, float)
    v = np.sort(values)
    n = len(v)
    if n < 1:
        raise ValueError("need at least one sample")
    try:
        F = np.asarray(cdf(v), dtype=float)
        if F.shape != v.shape:
            raise TypeError
    except (TypeError, ValueError):
        F = np.array([float(cdf(x)) for x in v])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def export_csv(batch: SampleBatch, path):
    """Single-column CSV; the header comment carries seed and generator id."""
    with open(path, "w") as fh:
        fh.write(f"# seed={batch.seed} generator_id={batch.generator_id}\n")
        fh.write("value\n")
        for v in batch.values:
            fh.write(f"{float(v)!r}\n")
