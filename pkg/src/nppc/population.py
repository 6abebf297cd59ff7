"""Cognition vectors, tuning curves and noisy population responses.

A population of ``n`` neurons with bell-shaped tuning curves encodes an
assumed stimulus ``s`` on a bounded rating scale.  Each neuron's mean rate is
its tuning curve evaluated at ``s``; observed rates are independent Poisson
draws around those means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .seeds import DOMAIN_SAMPLE, generator

SQRT_2PI = math.sqrt(2.0 * math.pi)

# rates above this fall back to numpy's transformed-rejection sampler; the
# default parameter grids stay far below it (max rate ~ 414 Hz)
POISSON_INVERSION_MAX = 1000.0


@dataclass(frozen=True)
class Scale:
    """Bounded rating scale with a fixed discretisation for grid argmax.

    ``grid_points`` controls the resolution used by likelihood-based
    decoders; the default gives a 0.01-star step on the 5-star scale.
    """

    lo: float = 1.0
    hi: float = 5.0
    grid_points: int = 401

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("scale requires lo < hi")
        if self.grid_points < 2:
            raise ValueError("scale requires at least 2 grid points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.grid_points)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class CognitionVector:
    """Population parameters (n, g, w, o, s).

    n -- population size (neurons)
    g -- tuning gain (Hz)
    w -- tuning width, the standard deviation of the bell shape (stars)
    o -- baseline rate offset (Hz)
    s -- assumed stimulus (stars)
    """

    n: int
    g: float
    w: float
    o: float
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("population size n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not self.g > 0:
            raise ValueError("gain g must be positive")
        if not self.w > 0:
            raise ValueError("width w must be positive")
        if not self.o > 0:
            raise ValueError("offset o must be positive")

    def validate_stimulus(self, scale: Scale) -> None:
        if not scale.contains(self.s):
            raise ValueError(
                f"stimulus {self.s} outside scale [{scale.lo}, {scale.hi}]"
            )

    def astuple(self) -> tuple:
        return (self.n, self.g, self.w, self.o, self.s)


@dataclass(frozen=True)
class PopulationResponse:
    """Per-neuron rates paired with the neurons' preferred stimuli."""

    rates: np.ndarray
    preferred: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        preferred = np.asarray(self.preferred, dtype=float)
        if rates.shape != preferred.shape or rates.ndim != 1:
            raise ValueError("rates and preferred must be 1-d arrays of equal length")
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "preferred", preferred)

    def __len__(self) -> int:
        return self.rates.size


def preferred_values(n: int, scale: Scale) -> np.ndarray:
    """Equidistant preferred stimuli covering the scale.

    Endpoints are included for n >= 2; the degenerate single-neuron
    population sits at the scale midpoint.
    """
    if n < 1:
        raise ValueError("population size must be >= 1")
    if n == 1:
        return np.array([scale.midpoint])
    return np.linspace(scale.lo, scale.hi, n)


def gaussian_density(x, mean: float, sd: float):
    """Gaussian pdf value(s); the bell shape behind every tuning curve."""
    x = np.asarray(x, dtype=float)
    z = (x - mean) / sd
    out = np.exp(-0.5 * z * z) / (sd * SQRT_2PI)
    return out if out.ndim else float(out)


def tuning_eval(xi: CognitionVector, p: float, stim: float) -> float:
    """Mean rate of the neuron preferring ``p`` when the stimulus is ``stim``:
    gain times the Gaussian bump plus the baseline offset."""
    return xi.g * gaussian_density(stim, p, xi.w) + xi.o


def tuning_matrix(xi: CognitionVector, preferred: np.ndarray, stimuli: np.ndarray) -> np.ndarray:
    """Tuning-curve values for every (neuron, stimulus) pair, shape (n, m)."""
    stimuli = np.asarray(stimuli, dtype=float)
    z = (stimuli[None, :] - np.asarray(preferred, dtype=float)[:, None]) / xi.w
    return xi.g * np.exp(-0.5 * z * z) / (xi.w * SQRT_2PI) + xi.o


def static_response(xi: CognitionVector, scale: Scale) -> PopulationResponse:
    """Noise-free population response: each neuron at its tuning-curve mean."""
    xi.validate_stimulus(scale)
    preferred = preferred_values(xi.n, scale)
    rates = xi.g * gaussian_density(preferred, xi.s, xi.w) + xi.o
    return PopulationResponse(rates=rates, preferred=preferred)


def response_means(xi: CognitionVector, scale: Scale) -> np.ndarray:
    """Per-neuron Poisson means for ``xi`` (the static rates)."""
    preferred = preferred_values(xi.n, scale)
    return xi.g * gaussian_density(preferred, xi.s, xi.w) + xi.o


def sample_response(xi: CognitionVector, scale: Scale, rng_seed) -> PopulationResponse:
    """One noisy population response: independent Poisson draws per neuron.

    ``rng_seed`` may be an int, a SeedSequence or a Generator; identical
    seeds reproduce identical responses.
    """
    xi.validate_stimulus(scale)
    preferred = preferred_values(xi.n, scale)
    lam = xi.g * gaussian_density(preferred, xi.s, xi.w) + xi.o
    rng = _as_generator(rng_seed)
    rates = poisson_matrix(lam, 1, rng)[0]
    return PopulationResponse(rates=rates, preferred=preferred)


def sample_response_matrix(xi: CognitionVector, scale: Scale, count: int, rng) -> np.ndarray:
    """``count`` stacked noisy responses, shape (count, n), integer-valued floats."""
    lam = response_means(xi, scale)
    return poisson_matrix(lam, count, rng)


def poisson_matrix(lam: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Exact Poisson draws, shape (count, len(lam)), as integer-valued floats.

    Sampling inverts per-rate CDF tables with one uniform per draw, which is
    both exact at the small rates the parameter grids cover and much faster
    than per-element rejection.  Rates beyond ``POISSON_INVERSION_MAX`` use
    numpy's rejection sampler instead (table size would grow linearly).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam > POISSON_INVERSION_MAX):
        return rng.poisson(lam, size=(count, lam.size)).astype(float)
    k_max = int(np.max(lam + 12.0 * np.sqrt(lam) + 30.0))
    k = np.arange(k_max + 1)
    log_pmf = k[None, :] * np.log(lam)[:, None] - lam[:, None] - gammaln(k + 1.0)[None, :]
    cdf = np.cumsum(np.exp(log_pmf), axis=1)
    # one uniform per draw, laid out row-per-neuron so the inversion scans
    # contiguous memory; the transpose below is a view
    u = rng.random((lam.size, count))
    return _cdf_invert(cdf, u).T


def _cdf_invert_numpy(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    last = float(cdf.shape[1] - 1)
    for j in range(cdf.shape[0]):
        out[j] = np.searchsorted(cdf[j], u[j], side="right")
    np.minimum(out, last, out=out)
    return out


try:  # the jitted inversion returns identical values, only faster
    import numba

    @numba.njit(cache=True)
    def _cdf_invert_numba(cdf, u):  # pragma: no cover - thin kernel
        n, k_len = cdf.shape
        out = np.empty_like(u)
        buckets = 128
        guide = np.empty(buckets + 1, np.int64)
        for j in range(n):
            row = cdf[j]
            idx = 0
            for b in range(buckets + 1):
                threshold = b / buckets
                while idx < k_len and row[idx] <= threshold:
                    idx += 1
                guide[b] = idx
            for i in range(u.shape[1]):
                x = u[j, i]
                pos = guide[int(x * buckets)]
                while pos < k_len and row[pos] <= x:
                    pos += 1
                if pos >= k_len:
                    pos = k_len - 1
                out[j, i] = pos
        return out

    _cdf_invert = _cdf_invert_numba
except ImportError:  # pragma: no cover
    _cdf_invert = _cdf_invert_numpy


def _as_generator(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return generator(rng_seed, DOMAIN_SAMPLE)
