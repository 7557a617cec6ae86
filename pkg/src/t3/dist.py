"""Univariate component densities, their gamma-weighted mixture, analytic
tempering, exact sampling, and an adaptive-Simpson quadrature oracle.

Two component families are provided: Gaussians (the synthetic-experiment
world) and uniform intervals (the family on which the forget-error lower
bound is attained exactly).  All objects are immutable after construction
and safe to share across concurrent workers; rng state is always passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import _kernels
from ._kernels import as_array

WINDOW_STDDEVS = 12.0  # +-12 max-stddev window truncates Gaussian mass ~1e-30


class QuadratureError(RuntimeError):
    """Adaptive Simpson hit its subdivision limit without converging."""


@dataclass(frozen=True)
class GaussianComponent:
    """N(mean, variance) with exact sampling and analytic tempering."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    def density(self, z):
        return np.exp(self.log_density(z))

    def log_density(self, z):
        z = as_array(z)
        return _kernels.gauss_logpdf(z, float(self.mean), float(self.variance))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.variance), size=n)

    def entropy(self) -> float:
        return 0.5 * math.log(2.0 * math.pi * math.e * self.variance)

    def peak_density(self) -> float:
        return (2.0 * math.pi * self.variance) ** -0.5

    def stddev(self) -> float:
        return math.sqrt(self.variance)

    def temper(self, T: float) -> tuple["GaussianComponent", float]:
        """Tempered component and the constant C with N^(1/T) = C * tempered.

        Raising N(mu, v) to 1/T rescales the variance to T*v; the leftover
        constant is C = (2*pi*v)^((T-1)/(2T)) * sqrt(T).
        """
        if T < 1.0:
            raise ValueError(f"temperature must be >= 1, got {T}")
        normalizer = (2.0 * math.pi * self.variance) ** ((T - 1.0) / (2.0 * T)) * math.sqrt(T)
        return GaussianComponent(self.mean, T * self.variance), normalizer

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class UniformComponent:
    """Uniform density on [lo, hi]; log-density is -inf off the support."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def density(self, z):
        z = as_array(z)
        inside = (z >= self.lo) & (z <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def log_density(self, z):
        z = as_array(z)
        inside = (z >= self.lo) & (z <= self.hi)
        return np.where(inside, -math.log(self.hi - self.lo), -math.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)

    def entropy(self) -> float:
        return math.log(self.hi - self.lo)

    def peak_density(self) -> float:
        # equals the squared L2 norm of the density: width * (1/width)^2
        return 1.0 / (self.hi - self.lo)

    def stddev(self) -> float:
        return (self.hi - self.lo) / math.sqrt(12.0)

    def temper(self, T: float) -> tuple["UniformComponent", float]:
        """Tempering a flat density leaves it flat; only the constant moves."""
        if T < 1.0:
            raise ValueError(f"temperature must be >= 1, got {T}")
        width = self.hi - self.lo
        return self, width ** ((T - 1.0) / T)

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)


Component = Union[GaussianComponent, UniformComponent]


@dataclass(frozen=True)
class Mixture:
    """p = (1 - gamma) * retain + gamma * forget."""

    gamma: float
    retain: Component
    forget: Component

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.retain, GaussianComponent) and isinstance(
            self.forget, GaussianComponent
        )

    def density(self, z):
        return np.exp(self.log_density(z))

    def log_density(self, z):
        z = as_array(z)
        if self.is_gaussian:
            return _kernels.mix2_gauss_logpdf(
                z,
                math.log1p(-self.gamma),
                float(self.retain.mean),
                float(self.retain.variance),
                math.log(self.gamma),
                float(self.forget.mean),
                float(self.forget.variance),
            )
        a = math.log1p(-self.gamma) + self.retain.log_density(z)
        b = math.log(self.gamma) + self.forget.log_density(z)
        return np.logaddexp(a, b)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sample_labeled(rng, n)[0]

    def sample_labeled(self, rng: np.random.Generator, n: int):
        """Draw (z, s) pairs: the label s ~ Bernoulli(1 - gamma) first
        (s = 1 means retain), then z from the labeled component."""
        s = (rng.random(n) < 1.0 - self.gamma).astype(np.int64)
        z_r = self.retain.sample(rng, n)
        z_f = self.forget.sample(rng, n)
        z = np.where(s == 1, z_r, z_f)
        return z, s


# ---------------------------------------------------------------------------
# module-level operation surface
# ---------------------------------------------------------------------------

def log_density(c: Component, z):
    return c.log_density(z)


def sample(obj: Union[Component, Mixture], rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return obj.sample(rng, n)


def entropy(c: Component) -> float:
    return c.entropy()


def temper_gaussian(c: GaussianComponent, T: float) -> tuple[GaussianComponent, float]:
    if not isinstance(c, GaussianComponent):
        raise TypeError("temper_gaussian expects a GaussianComponent")
    return c.temper(T)


def integration_window(m: Mixture, T: float = 1.0) -> tuple[float, float]:
    """[min mean - 12*max stddev, max mean + 12*max stddev] of the mixture
    components after tempering by T, widened to cover uniform supports."""
    comps = (m.retain, m.forget)
    means, stds = [], []
    lo_edges, hi_edges = [], []
    for c in comps:
        if isinstance(c, GaussianComponent):
            means.append(c.mean)
            stds.append(math.sqrt(T * c.variance))
        else:
            means.append(0.5 * (c.lo + c.hi))
            stds.append(c.stddev())
            lo_edges.append(c.lo)
            hi_edges.append(c.hi)
    smax = max(stds)
    lo = min(means) - WINDOW_STDDEVS * smax
    hi = max(means) + WINDOW_STDDEVS * smax
    if lo_edges:
        lo = min(lo, min(lo_edges))
        hi = max(hi, max(hi_edges))
    return lo, hi


def quadrature_seeds(m: Mixture, T: float = 1.0) -> tuple[float, ...]:
    """Breakpoints that pre-split the integration interval: uniform support
    edges (where integrands jump) and Gaussian cores (where they spike)."""
    pts: list[float] = []
    for c in (m.retain, m.forget):
        if isinstance(c, UniformComponent):
            pts.extend((c.lo, c.hi))
        else:
            s = math.sqrt(T * c.variance)
            pts.extend((c.mean - 6.0 * s, c.mean - s, c.mean, c.mean + s, c.mean + 6.0 * s))
    return tuple(sorted(pts))


def _as_vectorized(f: Callable, lo: float, hi: float) -> Callable:
    """Return an array-in/array-out version of f, probing once whether f
    already broadcasts over arrays."""
    probe = np.array([lo, 0.5 * (lo + hi)])
    try:
        out = np.asarray(f(probe), dtype=np.float64)
        if out.shape == probe.shape:
            return f
    except Exception:
        pass

    def wrapped(x: np.ndarray) -> np.ndarray:
        return np.array([float(f(xi)) for xi in x], dtype=np.float64)

    return wrapped


def _eval_batch(f: Callable, x: np.ndarray) -> np.ndarray:
    out = np.asarray(f(x), dtype=np.float64)
    if out.shape != x.shape:  # constant-returning integrand
        out = np.broadcast_to(out, x.shape).astype(np.float64)
    return out


def quadrature(
    f: Callable,
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_depth: int = 20,
    breakpoints: Sequence[float] = (),
) -> float:
    """Adaptive composite Simpson integral of f over [lo, hi].

    ``tol`` is the absolute error target.  The interval is pre-split at any
    ``breakpoints`` lying strictly inside (lo, hi); each piece is then
    refined adaptively, halving its error budget per split, with Richardson
    extrapolation of the accepted panels.  Raises :class:`QuadratureError`
    if any panel is still unconverged after ``max_depth`` subdivisions.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    f = _as_vectorized(f, lo, hi)
    edges = [lo] + sorted({float(b) for b in breakpoints if lo < b < hi}) + [hi]
    edges = np.asarray(edges, dtype=np.float64)
    n_seg = len(edges) - 1

    a = edges[:-1].copy()
    b = edges[1:].copy()
    # Nudge interior edges one ulp inward so integrands with jumps at the
    # breakpoints (uniform supports) present their one-sided values to Simpson.
    a[1:] = np.nextafter(a[1:], np.inf)
    b[:-1] = np.nextafter(b[:-1], -np.inf)
    mid = 0.5 * (a + b)
    fa = _eval_batch(f, a)
    fm = _eval_batch(f, mid)
    fb = _eval_batch(f, b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    budget = np.full(n_seg, tol / n_seg)

    total = 0.0
    for _depth in range(max_depth + 1):
        lm = 0.5 * (a + mid)
        rm = 0.5 * (mid + b)
        flm = _eval_batch(f, lm)
        frm = _eval_batch(f, rm)
        left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
        s2 = left + right
        err = (s2 - whole) / 15.0
        done = np.abs(err) <= budget
        total += float(np.sum(s2[done] + err[done]))
        if bool(np.all(done)):
            return total
        keep = ~done
        # split surviving panels into their two halves
        a = np.concatenate([a[keep], mid[keep]])
        b = np.concatenate([mid[keep], b[keep]])
        fa = np.concatenate([fa[keep], fm[keep]])
        fb = np.concatenate([fm[keep], fb[keep]])
        mid = np.concatenate([lm[keep], rm[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        budget = np.concatenate([budget[keep] * 0.5, budget[keep] * 0.5])
    raise QuadratureError(
        f"adaptive Simpson did not converge to tol={tol} within {max_depth} levels "
        f"({a.size} panels still open)"
    )
