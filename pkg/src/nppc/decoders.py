"""Decoder functions translating population activity into stimulus estimates.

Four decoders are supported:

MVD  mode value: preferred stimulus of the most active neuron
WAD  weighted average of preferred stimuli, rates as weights
MLD  maximum likelihood under the Poisson response model
MAD  maximum a posteriori with a Gaussian prior over the stimulus

MLD/MAD maximise over the scale's discretisation grid; argmax ties break
toward the smaller stimulus.  MVD ties break uniformly at random under the
given seed, since any fixed rule would skew the feedback distribution toward
one end of the scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .population import (
    CognitionVector,
    PopulationResponse,
    Scale,
    sample_response_matrix,
    tuning_matrix,
)
from .seeds import DOMAIN_SAMPLE, DOMAIN_TIE, generator, substream

# samples decoded per block when vectorising large feedback draws; fixed so
# chunking can never change the random stream consumed
_BLOCK = 1 << 14


class DecoderKind(str, enum.Enum):
    MVD = "mvd"
    WAD = "wad"
    MLD = "mld"
    MAD = "mad"


@dataclass(frozen=True)
class GaussianPrior:
    """Gaussian prior over the stimulus.

    ``mean=None`` centres the prior on whatever stimulus the consumer is
    currently entertaining (the convention used when fitting, where each
    candidate's own ``s`` anchors the prior).  ``variance=inf`` is the flat
    prior, which reduces MAD to MLD exactly.
    """

    mean: Optional[float]
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("prior variance must be positive")

    def resolve_mean(self, stimulus: float) -> float:
        return stimulus if self.mean is None else self.mean


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder choice plus prior parameters (MAD only)."""

    kind: DecoderKind
    prior: Optional[GaussianPrior] = None

    def __post_init__(self):
        if self.kind is DecoderKind.MAD and self.prior is None:
            raise ValueError("MAD requires a prior")
        if self.kind is not DecoderKind.MAD and self.prior is not None:
            raise ValueError("only MAD takes a prior")

    @staticmethod
    def mvd() -> "DecoderSpec":
        return DecoderSpec(DecoderKind.MVD)

    @staticmethod
    def wad() -> "DecoderSpec":
        return DecoderSpec(DecoderKind.WAD)

    @staticmethod
    def mld() -> "DecoderSpec":
        return DecoderSpec(DecoderKind.MLD)

    @staticmethod
    def mad(mean: Optional[float] = None, variance: float = 0.75) -> "DecoderSpec":
        return DecoderSpec(DecoderKind.MAD, GaussianPrior(mean, variance))

    def label(self) -> str:
        return self.kind.value


DEFAULT_DECODERS = (
    DecoderSpec.mvd(),
    DecoderSpec.wad(),
    DecoderSpec.mld(),
    DecoderSpec.mad(),
)


@dataclass(frozen=True)
class FeedbackSample:
    """Decoded feedback values obtained from repeated noisy responses."""

    values: np.ndarray
    xi: CognitionVector
    decoder: DecoderSpec


class UndecodableResponseError(ValueError):
    pass


def decode_mvd(resp: PopulationResponse, rng_seed) -> float:
    """Preferred stimulus of the maximally firing neuron; ties uniform."""
    rates = resp.rates
    if rates.size == 0:
        raise ValueError("empty response")
    top = np.flatnonzero(rates == rates.max())
    if top.size == 1:
        return float(resp.preferred[top[0]])
    rng = _tie_rng(rng_seed)
    return float(resp.preferred[rng.choice(top)])


def decode_wad(resp: PopulationResponse) -> float:
    """Rate-weighted average of preferred stimuli."""
    total = resp.rates.sum()
    if total <= 0:
        raise UndecodableResponseError("undecodable: zero activity")
    return float(resp.rates @ resp.preferred / total)


def log_likelihood(resp: PopulationResponse, xi_shape: CognitionVector, candidate_s: float) -> float:
    """Log Poisson likelihood of the response if the stimulus were ``candidate_s``.

    Requires integer-valued rates (count data); the tuning-curve shape comes
    from ``xi_shape`` while the preferred values come from the response."""
    rates = _require_counts(resp.rates)
    f = xi_shape.g * np.exp(
        -0.5 * ((candidate_s - resp.preferred) / xi_shape.w) ** 2
    ) / (xi_shape.w * math.sqrt(2 * math.pi)) + xi_shape.o
    return float(np.sum(rates * np.log(f) - f - gammaln(rates + 1.0)))


def decode_mld(resp: PopulationResponse, xi_shape: CognitionVector, scale: Scale) -> float:
    """Grid argmax of the log likelihood; ties break toward smaller s."""
    rates = _require_counts(resp.rates)
    grid = scale.grid()
    loglik = _loglik_grid(rates[None, :], resp.preferred, xi_shape, grid)[0]
    return float(grid[int(np.argmax(loglik))])


def decode_mad(
    resp: PopulationResponse,
    xi_shape: CognitionVector,
    scale: Scale,
    prior: GaussianPrior,
) -> float:
    """Grid argmax of log likelihood plus unnormalised log prior density."""
    rates = _require_counts(resp.rates)
    grid = scale.grid()
    loglik = _loglik_grid(rates[None, :], resp.preferred, xi_shape, grid)[0]
    mean = prior.resolve_mean(xi_shape.s)
    posterior = loglik + _log_prior(grid, mean, prior.variance)
    return float(grid[int(np.argmax(posterior))])


def sample_feedback(
    xi: CognitionVector,
    decoder: DecoderSpec,
    scale: Scale,
    count: int,
    rng_seed,
) -> FeedbackSample:
    """Draw ``count`` noisy responses and decode each one.

    Sampling and MVD tie-breaking use separate substreams of ``rng_seed`` so
    the response draws are identical across decoders for a shared seed.
    """
    if count < 1:
        raise ValueError("count must be positive")
    xi.validate_stimulus(scale)
    base = substream(rng_seed) if not isinstance(rng_seed, np.random.SeedSequence) else rng_seed
    rng_sample = generator(base, DOMAIN_SAMPLE)
    rng_tie = generator(base, DOMAIN_TIE)
    values = decode_stream(xi, decoder, scale, count, rng_sample, rng_tie)
    return FeedbackSample(values=values, xi=xi, decoder=decoder)


def decode_stream(
    xi: CognitionVector,
    decoder: DecoderSpec,
    scale: Scale,
    count: int,
    rng_sample: np.random.Generator,
    rng_tie: np.random.Generator,
    on_undecodable: str = "raise",
) -> np.ndarray:
    """Vectorised sample-and-decode loop behind ``sample_feedback``."""
    return _decode_all(xi, (decoder,), scale, count, rng_sample, rng_tie, on_undecodable)[0]


def _decode_all(
    xi: CognitionVector,
    decoders,
    scale: Scale,
    count: int,
    rng_sample: np.random.Generator,
    rng_tie: np.random.Generator,
    on_undecodable: str = "raise",
) -> list[np.ndarray]:
    """Sample ``count`` responses once and decode them with every decoder.

    Sampling is blocked at a fixed size so the random stream consumed never
    depends on ``count`` batching; the response draws are shared by all
    decoders.  ``on_undecodable`` controls zero-activity WAD rows: ``raise``
    (the public contract) or ``nan`` (fitting engine, where a silent draw
    must not abort a whole grid search).
    """
    from .population import preferred_values  # local import, cycle-free

    preferred = preferred_values(xi.n, scale)
    needs_grid = any(d.kind in (DecoderKind.MLD, DecoderKind.MAD) for d in decoders)
    grid = scale.grid() if needs_grid else None
    f = tuning_matrix(xi, preferred, grid) if needs_grid else None
    log_f = np.log(f) if needs_grid else None
    f_total = f.sum(axis=0) if needs_grid else None

    out: list[list[np.ndarray]] = [[] for _ in decoders]
    done = 0
    while done < count:
        block = min(_BLOCK, count - done)
        rates = sample_response_matrix(xi, scale, block, rng_sample)
        loglik = rates @ log_f - f_total if needs_grid else None
        mvd_jitter = None
        for slot, decoder in enumerate(decoders):
            kind = decoder.kind
            if kind is DecoderKind.MVD:
                if mvd_jitter is None:
                    # rates are integer counts, so jitter < 1 keeps the max
                    # set intact while picking uniformly among tied maxima
                    mvd_jitter = rng_tie.random(rates.shape)
                values = preferred[np.argmax(rates + 0.5 * mvd_jitter, axis=1)]
            elif kind is DecoderKind.WAD:
                totals = rates.sum(axis=1)
                dead = totals == 0
                if np.any(dead) and on_undecodable == "raise":
                    raise UndecodableResponseError("undecodable: zero activity")
                with np.errstate(invalid="ignore"):
                    values = (rates @ preferred) / np.where(dead, np.nan, totals)
            elif kind is DecoderKind.MLD:
                values = grid[np.argmax(loglik, axis=1)]
            else:
                mean = decoder.prior.resolve_mean(xi.s)
                posterior = loglik + _log_prior(grid, mean, decoder.prior.variance)
                values = grid[np.argmax(posterior, axis=1)]
            out[slot].append(values)
        done += block
    return [np.concatenate(parts) if len(parts) > 1 else parts[0] for parts in out]


def _loglik_grid(rates, preferred, xi_shape, grid) -> np.ndarray:
    """Poisson log likelihood over the grid for each response row.

    The log-factorial term is constant in the stimulus and is omitted; it
    never moves the argmax.  Shape (count, grid_points).
    """
    f = tuning_matrix(xi_shape, preferred, grid)  # (n, grid)
    return rates @ np.log(f) - f.sum(axis=0)


def _log_prior(grid, mean, variance):
    # unnormalised: the normalisation constant never moves the argmax, and
    # an infinite variance yields exactly zero, making MAD bitwise MLD
    return -((grid - mean) ** 2) / (2.0 * variance)


def _require_counts(rates: np.ndarray) -> np.ndarray:
    if np.any(rates != np.floor(rates)) or np.any(rates < 0):
        raise ValueError("likelihood requires count data")
    return rates


def _tie_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return generator(rng_seed, DOMAIN_TIE)
