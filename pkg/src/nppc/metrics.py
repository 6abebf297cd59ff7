"""Disparity metrics between observed re-ratings and model feedback.

Two fit objectives are provided: Cohen's kappa on exact 5-trial histogram
agreement, and the Jensen-Shannon divergence between maximum-likelihood
Gaussian fits discretised on the rating scale.  The MSE/MSE_max ratio used
by the reliability studies also lives here.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .decoders import DecoderSpec, decode_stream
from .population import CognitionVector, Scale
from .seeds import DOMAIN_CHANCE, DOMAIN_SAMPLE, DOMAIN_TIE, generator, substream

# Base-2 JSD with the half weights is bounded by 1 bit (attained on disjoint
# supports); that supremum is the default normaliser.  Some texts quote a
# 2*log(2) bound, which only applies without the half weights -- the
# constant is kept configurable rather than silently reconciled.
MAX_JSD_BITS = 1.0

# Replacement width (stars) for degenerate sigma=0 Gaussians before grid
# discretisation; point masses would otherwise be all discretisation
# artifact.
SIGMA_FLOOR = 0.05


class ScoreKind(str, enum.Enum):
    KAPPA_COMPLEMENT = "kappa_complement"
    NORMALIZED_JSD = "normalized_jsd"


@dataclass(frozen=True)
class MetricScore:
    kind: ScoreKind
    value: float

    def __post_init__(self):
        if self.kind is ScoreKind.NORMALIZED_JSD and not 0.0 <= self.value <= 1.0:
            raise ValueError("normalised JSD must lie in [0, 1]")


class GaussianFit(NamedTuple):
    mu: float
    sigma: float

    @property
    def degenerate(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class EmpiricalFeedback:
    """Observed re-ratings of one user-item pair plus their Gaussian fit."""

    ratings: np.ndarray
    histogram: np.ndarray
    gauss_mu: float
    gauss_sigma: float

    @classmethod
    def from_ratings(cls, ratings, scale: Scale = Scale()) -> "EmpiricalFeedback":
        ratings = np.asarray(ratings, dtype=int)
        if ratings.size < 2:
            raise ValueError("need at least 2 ratings")
        if ratings.min() < scale.lo or ratings.max() > scale.hi:
            raise ValueError("ratings outside the scale")
        levels = np.arange(int(scale.lo), int(scale.hi) + 1)
        histogram = np.array([(ratings == v).sum() for v in levels])
        mu, sigma = gaussian_ml_fit(ratings)
        return cls(ratings=ratings, histogram=histogram, gauss_mu=mu, gauss_sigma=sigma)


def gaussian_ml_fit(values) -> GaussianFit:
    """Maximum-likelihood Gaussian fit: sample mean and divide-by-N sigma.

    A zero sigma (all values identical) is a degenerate fit; callers that
    discretise the Gaussian replace it with ``SIGMA_FLOOR``.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least 2 values")
    mu = float(values.mean())
    sigma = float(np.sqrt(np.mean((values - mu) ** 2)))
    return GaussianFit(mu, sigma)


@dataclass(frozen=True)
class DiscretizedDensity:
    """Probability masses on a common stimulus grid (sums to 1)."""

    grid: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if grid.shape != mass.shape:
            raise ValueError("grid and mass must align")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mass", mass)


def discretize_gaussian(
    mu: float, sigma: float, scale: Scale, sigma_floor: float = SIGMA_FLOOR
) -> DiscretizedDensity:
    """Gaussian evaluated on the scale grid and renormalised to sum to 1.

    Off-scale tails are absorbed by the renormalisation; ``sigma_floor``
    widens degenerate (sigma=0) fits first.
    """
    sigma = max(sigma, sigma_floor)
    grid = scale.grid()
    mass = gaussian_grid_mass(grid, mu, sigma)
    return DiscretizedDensity(grid=grid, mass=mass)


def gaussian_grid_mass(grid: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    z = (grid - mu) / sigma
    # subtract the max exponent so narrow Gaussians cannot underflow to 0/0
    e = -0.5 * z * z
    mass = np.exp(e - e.max())
    return mass / mass.sum()


def jsd(p: DiscretizedDensity, q: DiscretizedDensity) -> float:
    """Jensen-Shannon divergence in bits between two grid densities."""
    if p.grid.shape != q.grid.shape or not np.array_equal(p.grid, q.grid):
        raise ValueError("densities must share one grid")
    for mass in (p.mass, q.mass):
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError("masses must sum to 1")
    return _jsd_mass(p.mass, q.mass)


def _jsd_mass(pm: np.ndarray, qm: np.ndarray) -> float:
    m = 0.5 * (pm + qm)
    return 0.5 * _kl_bits(pm, m) + 0.5 * _kl_bits(qm, m)


def _kl_bits(pm: np.ndarray, qm: np.ndarray) -> float:
    live = pm > 0
    return float(np.sum(pm[live] * np.log2(pm[live] / qm[live])))


def normalized_jsd(
    p: DiscretizedDensity, q: DiscretizedDensity, max_divergence: float = MAX_JSD_BITS
) -> float:
    """JSD scaled into [0, 1] by its supremum (1 bit by default)."""
    return jsd(p, q) / max_divergence


def mse_ratio(true_s: float, estimates, scale: Scale) -> float:
    """Mean squared error of the estimates, normalised by the worst MSE
    attainable on the scale for this stimulus.

    The normaliser max((s-lo)^2, (hi-s)^2) removes the bias a moving
    stimulus otherwise puts on raw MSE comparisons (mid-scale errors are
    bounded by 4 on a 5-star scale, boundary errors by 16).
    """
    estimates = np.asarray(estimates, dtype=float)
    if estimates.size == 0:
        raise ValueError("no estimates")
    worst = max((true_s - scale.lo) ** 2, (scale.hi - true_s) ** 2)
    return float(np.mean((estimates - true_s) ** 2) / worst)


def cohen_kappa(
    observed: EmpiricalFeedback,
    xi: CognitionVector,
    decoder: DecoderSpec,
    repeats: int = 1000,
    rng_seed=0,
    scale: Scale = Scale(),
) -> float:
    """Chance-corrected agreement between model and observed re-ratings.

    Each round draws as many model estimates as the observed pair has
    ratings, rounds them to stars, and counts a match when the rating
    histogram reproduces the observed one exactly.  Chance agreement uses
    uniform star draws instead of the model.  kappa = (p0 - pc) / (1 - pc).
    """
    draws = observed.ratings.size
    obs_code = _histogram_code(observed.histogram)
    base = substream(rng_seed)
    model_values = decode_stream(
        xi,
        decoder,
        scale,
        draws * repeats,
        generator(base, DOMAIN_SAMPLE),
        generator(base, DOMAIN_TIE),
    )
    model_codes = _pattern_codes(_round_to_stars(model_values, scale), repeats, draws, scale)
    chance = generator(base, DOMAIN_CHANCE).integers(
        int(scale.lo), int(scale.hi) + 1, size=draws * repeats
    )
    chance_codes = _pattern_codes(chance, repeats, draws, scale)
    p0 = float(np.mean(model_codes == obs_code))
    pc = float(np.mean(chance_codes == obs_code))
    return kappa_from_agreement(p0, pc)


def kappa_from_agreement(p0: float, pc: float) -> float:
    if pc == 1.0:
        raise ValueError("kappa undefined")
    return (p0 - pc) / (1.0 - pc)


def _round_to_stars(values: np.ndarray, scale: Scale) -> np.ndarray:
    # round half up, then clip into the star range
    return np.clip(np.floor(values + 0.5), scale.lo, scale.hi)


def _histogram_code(histogram) -> int:
    """Pack a star-count histogram into one comparable integer."""
    code = 0
    for count in histogram:
        code = code * 64 + int(count)
    return code


def _pattern_codes(stars: np.ndarray, repeats: int, draws: int, scale: Scale) -> np.ndarray:
    """Histogram-code per round for a flat array of ``repeats*draws`` stars."""
    levels = int(scale.hi) - int(scale.lo) + 1
    idx = stars.reshape(repeats, draws).astype(int) - int(scale.lo)
    codes = np.zeros(repeats, dtype=np.int64)
    for level in range(levels):
        codes = codes * 64 + (idx == level).sum(axis=1)
    return codes


def pattern_counter(stars: np.ndarray, repeats: int, draws: int, scale: Scale) -> Counter:
    """Histogram-code frequencies; lets one model sample score many pairs."""
    return Counter(_pattern_codes(stars, repeats, draws, scale).tolist())
