"""Independent ground truth.

Closed-form examples are evaluated with ``scipy.integrate.quad`` directly
from their printed integrals and share no code with the spine pipeline.
The Monte Carlo simulator handles mixture specifications (Gaussian part,
drift, exponential jumps).
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .process import ProcessSpec

__all__ = [
    "OracleError",
    "SpecUnsupported",
    "brownian_drift_heat_kernel",
    "risk_sup_cdf",
    "risk_sup_cdf_R",
    "bm_exp_inf_tail",
    "PathLaw",
    "McConfig",
    "McEstimate",
    "SimulationRecords",
    "simulate",
    "empirical_cdf",
]

_QUAD = dict(epsabs=1e-13, epsrel=1e-11, limit=1000)


class OracleError(RuntimeError):
    pass


class SpecUnsupported(ValueError):
    pass


def _quad(fn, a, b, **kw) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(fn, a, b, **{**_QUAD, **kw})
    if not np.isfinite(value) or err > 1e-8 * max(1.0, abs(value)):
        raise OracleError(f"quadrature did not converge (estimate {value}, error {err})")
    return float(value)


def brownian_drift_heat_kernel(b: float, t: float, x: float, y: float) -> float:
    """Killed transition density of ``W_t + b t`` on the positive half-line."""
    if not (t > 0 and x > 0 and y > 0):
        raise ValueError("t, x, y must be positive")
    reflection = (np.exp(-(x - y) ** 2 / (2 * t)) - np.exp(-(x + y) ** 2 / (2 * t))) / np.sqrt(2 * np.pi * t)
    return float(np.exp(b * (y - x) - t * b * b / 2) * reflection)


def risk_sup_cdf(t: float, y: float) -> float:
    """``P(sup_{s<=t} X_s < y)`` for the martingale risk process (unit drift and rate)."""
    if not (t > 0 and y > 0):
        raise ValueError("t and y must be positive")

    def integrand(a):
        one_minus_cos = 2 * np.sin(a / 2) ** 2
        return np.exp(-one_minus_cos * (2 * t + y)) * np.sin(y * np.sin(a) + a) * np.sin(a) / one_minus_cos

    return _quad(integrand, 0.0, np.pi) / np.pi


def risk_sup_cdf_R(R: float, t: float, y: float) -> float:
    """Small-drift risk process: rate ``R**2`` exponential jumps, unit negative drift (``R >= 1``)."""
    if R < 1:
        raise ValueError("R must be at least 1")
    if not (t > 0 and y > 0):
        raise ValueError("t and y must be positive")

    def integrand(a):
        rate = 1 + R * R - 2 * R * np.cos(a)
        return (np.exp(-rate * t - (1 - R * np.cos(a)) * y) * np.sin(R * y * np.sin(a) + a)
                * R * R * np.sin(a) / rate)

    return 2.0 / np.pi * _quad(integrand, 0.0, np.pi)


def bm_exp_inf_tail(t: float, x: float) -> float:
    """``P(inf_{s<=t} X_s > -x)`` for standard Brownian motion plus the martingale risk process."""
    if not (t > 0 and x > 0):
        raise ValueError("t and x must be positive")

    def integrand(b):
        if b <= 0.0:
            return 0.0
        expo = -t * (1 - b) * (1 + 2 * b) ** 2 / (2 * b) + (1 - b) * x
        return (np.exp(expo) * np.sin(np.sqrt(1 - b**3) / np.sqrt(b) * x)
                * (1 - 2 * b + 4 * b * b) / (2 * b * (1 + b - 2 * b * b)))

    return 2.0 / np.pi * _quad(integrand, 0.0, 1.0, points=[1e-3, 1e-2, 0.1, 0.5])


# ----- Monte Carlo -------------------------------------------------------------------

@dataclass(frozen=True)
class PathLaw:
    """What the simulator needs: ``X_t = path_drift t + sqrt(2 gaussian) W_t + jumps``.

    Unlike :class:`ProcessSpec` this allows a deterministic path (no noise,
    no jumps), which is a useful sanity case for the simulator.
    """

    gaussian: float
    path_drift: float
    jumps: tuple = ()

    def __post_init__(self) -> None:
        if not (np.isfinite(self.gaussian) and self.gaussian >= 0):
            raise ValueError("gaussian must be finite and non-negative")
        if not np.isfinite(self.path_drift):
            raise ValueError("path_drift must be finite")

    @classmethod
    def from_spec(cls, spec: ProcessSpec) -> "PathLaw":
        if not spec.is_mixture:
            raise SpecUnsupported("Monte Carlo needs a mixture specification (Gaussian, drift, exponential jumps)")
        if spec.killing != 0:
            raise SpecUnsupported("Monte Carlo does not simulate killing")
        return cls(spec.gaussian, spec.path_drift, tuple(spec.jumps))


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    t: float
    seed: int = 0
    horizons: tuple = ()
    chunk: int = 256

    def __post_init__(self) -> None:
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be at least 1")
        if not self.t > 0:
            raise ValueError("horizon t must be positive")
        if any(not (0 < h <= self.t) for h in self.horizons):
            raise ValueError("recording horizons must lie in (0, t]")


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    std_error: float
    n_effective: int


@dataclass(frozen=True)
class SimulationRecords:
    """Running extremes and terminal values, one row per recording horizon."""

    horizons: np.ndarray
    sup: np.ndarray
    inf: np.ndarray
    x_t: np.ndarray
    seed: int

    def row(self, horizon: float) -> int:
        k = np.nonzero(np.isclose(self.horizons, horizon))[0]
        if k.size == 0:
            raise KeyError(f"horizon {horizon} was not recorded")
        return int(k[0])

    def survived_half_line(self, x: float, horizon: float | None = None) -> np.ndarray:
        """Paths started at ``x > 0`` that stay positive up to the horizon."""
        k = self.row(horizon) if horizon is not None else -1
        return x + self.inf[k] > 0


def _jumps(spec: PathLaw):
    rates = np.array([j.intensity for j in spec.jumps], dtype=float)
    rho = np.array([j.rho for j in spec.jumps], dtype=float)
    sign = np.array([1.0 if j.side == "positive" else -1.0 for j in spec.jumps])
    return rates, rho, sign


def _sample_jumps(rng: np.random.Generator, n: int, T: float, rates, rho, sign):
    """Flat arrays ``(path, time, size)`` sorted by path then time."""
    total = float(rates.sum()) if rates.size else 0.0
    if total == 0.0:
        empty = np.empty(0)
        return empty.astype(int), empty, empty
    counts = rng.poisson(total * T, size=n)
    m = int(counts.sum())
    path = np.repeat(np.arange(n), counts)
    times = rng.uniform(0.0, T, size=m)
    comp = rng.choice(rates.size, size=m, p=rates / total)
    sizes = sign[comp] * rng.exponential(1.0, size=m) / rho[comp]
    order = np.lexsort((times, path))
    return path[order], times[order], sizes[order]


def _chunk_event_driven(spec: PathLaw, horizons: np.ndarray, n: int, rng, T: float):
    """Exact extremes when there is no Gaussian part: the path is linear between jumps."""
    d = spec.path_drift
    rates, rho, sign = _jumps(spec)
    path, times, sizes = _sample_jumps(rng, n, T, rates, rho, sign)
    # Jump total strictly before each jump, within its own path.
    csum = np.cumsum(sizes)
    first = np.searchsorted(path, np.arange(n))
    before = csum - sizes - np.where(first[path] > 0, csum[first[path] - 1], 0.0)
    pre = d * times + before
    post = pre + sizes
    sup = np.empty((horizons.size, n))
    inf = np.empty((horizons.size, n))
    xt = np.empty((horizons.size, n))
    for k, h in enumerate(horizons):
        mask = times <= h
        jump_sum = np.bincount(path[mask], weights=sizes[mask], minlength=n)
        end = d * h + jump_sum
        s = np.maximum(0.0, end)
        i = np.minimum(0.0, end)
        np.maximum.at(s, path[mask], np.maximum(pre[mask], post[mask]))
        np.minimum.at(i, path[mask], np.minimum(pre[mask], post[mask]))
        sup[k], inf[k], xt[k] = s, i, end
    return sup, inf, xt


def _chunk_skeleton(spec: PathLaw, horizons: np.ndarray, n: int, rng, T: float, n_steps: int):
    """Euler skeleton with exact jump times and Brownian-bridge values just before each jump."""
    dt = T / n_steps
    sd = np.sqrt(2.0 * spec.gaussian * dt)
    d = spec.path_drift
    cont = d * dt + sd * rng.standard_normal((n, n_steps))
    rates, rho, sign = _jumps(spec)
    path, times, sizes = _sample_jumps(rng, n, T, rates, rho, sign)
    step = np.minimum((times / dt).astype(int), n_steps - 1)

    incr = cont.copy()
    np.add.at(incr, (path, step), sizes)
    x = np.zeros((n, n_steps + 1))
    np.cumsum(incr, axis=1, out=x[:, 1:])

    # Continuous part at each jump time: bridge from the left anchor to the step end.
    pre = np.empty(times.size)
    if times.size:
        key = path * (n_steps + 1) + step
        rank = np.zeros(times.size, dtype=int)
        same = np.concatenate([[False], key[1:] == key[:-1]])
        for i in np.nonzero(same)[0]:
            rank[i] = rank[i - 1] + 1
        left_t = step * dt
        left_c = np.zeros(times.size)  # continuous displacement since the step start
        earlier = np.zeros(times.size)  # jumps already taken inside the step
        end_c = cont[path, step]
        pre_c = np.empty(times.size)
        for r in range(int(rank.max()) + 1):
            idx = np.nonzero(rank == r)[0]
            if r > 0:
                left_t[idx] = times[idx - 1]
                left_c[idx] = pre_c[idx - 1]
                earlier[idx] = earlier[idx - 1] + sizes[idx - 1]
            tau, lt = times[idx], left_t[idx]
            right_t = (step[idx] + 1) * dt
            frac = (tau - lt) / (right_t - lt)
            mean = left_c[idx] + frac * (end_c[idx] - left_c[idx])
            var = (2.0 * spec.gaussian) * (tau - lt) * (right_t - tau) / (right_t - lt)
            pre_c[idx] = mean + np.sqrt(np.maximum(var, 0.0)) * rng.standard_normal(idx.size)
        pre = x[path, step] + pre_c + earlier
    post = pre + sizes

    sup = np.empty((horizons.size, n))
    inf = np.empty((horizons.size, n))
    xt = np.empty((horizons.size, n))
    for k, h in enumerate(horizons):
        kh = int(round(h / dt))
        sup[k] = x[:, : kh + 1].max(axis=1)
        inf[k] = x[:, : kh + 1].min(axis=1)
        xt[k] = x[:, kh]
        mask = times < kh * dt
        if np.any(mask):
            np.maximum.at(sup[k], path[mask], np.maximum(pre[mask], post[mask]))
            np.minimum.at(inf[k], path[mask], np.minimum(pre[mask], post[mask]))
    return sup, inf, xt


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LEVY_SPINE_THREADS", "1")))
    except ValueError:
        return 1


def simulate(spec: "ProcessSpec | PathLaw", cfg: McConfig) -> SimulationRecords:
    """Simulate ``cfg.n_paths`` paths on ``[0, cfg.t]``.

    ``cfg.n_steps`` is the number of grid steps over the whole horizon.
    Each chunk of paths draws from its own child of ``SeedSequence(cfg.seed)``,
    so results do not depend on the thread count.  Processes without a
    Gaussian part are simulated exactly between jumps.
    """
    if isinstance(spec, ProcessSpec):
        spec = PathLaw.from_spec(spec)
    horizons = np.array(sorted(set(cfg.horizons) | {cfg.t}), dtype=float)
    sizes = [min(cfg.chunk, cfg.n_paths - s) for s in range(0, cfg.n_paths, cfg.chunk)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def run(k: int):
        rng = np.random.default_rng(seeds[k])
        if spec.gaussian == 0:
            return _chunk_event_driven(spec, horizons, sizes[k], rng, cfg.t)
        return _chunk_skeleton(spec, horizons, sizes[k], rng, cfg.t, cfg.n_steps)

    threads = _threads()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    sup, inf, xt = (np.concatenate([p[i] for p in parts], axis=1) for i in range(3))
    return SimulationRecords(horizons, sup, inf, xt, cfg.seed)


def empirical_cdf(samples, threshold: float) -> McEstimate:
    """Fraction of samples strictly below ``threshold`` with its binomial standard error."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("samples must be non-empty")
    p = float(np.mean(s < threshold))
    return McEstimate(p, float(np.sqrt(p * (1 - p) / s.size)), int(s.size))
