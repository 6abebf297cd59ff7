"""Model-property studies: feedback distributions and decoding-quality surfaces.

These reproduce the qualitative behaviour of the decoder family: how the
feedback distribution spreads per decoder, and how the normalised estimation
error falls as tuning gain rises, per stimulus value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .decoders import DecoderSpec, sample_feedback
from .metrics import mse_ratio
from .population import CognitionVector, Scale
from .seeds import substream

# the base vector reused across the property studies (gain and stimulus swept)
REFERENCE_XI = CognitionVector(n=100, g=1.0, w=1.0, o=5.0, s=3.0)


@dataclass(frozen=True)
class FeedbackHistogram:
    """Normalised histogram of decoded feedback values."""

    edges: np.ndarray
    mass: np.ndarray
    xi: CognitionVector
    decoder: DecoderSpec

    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass(frozen=True)
class ReliabilitySurface:
    """MSE/MSE_max per (stimulus, gain) cell for one decoder."""

    s_axis: np.ndarray
    g_axis: np.ndarray
    values: np.ndarray
    decoder: DecoderSpec
    base_xi: CognitionVector

    def __post_init__(self):
        if self.values.shape != (len(self.s_axis), len(self.g_axis)):
            raise ValueError("surface dimensions must match the axes")

    def column_means(self) -> np.ndarray:
        """Mean over stimuli per gain value."""
        return self.values.mean(axis=0)


def feedback_distribution(
    xi: CognitionVector,
    decoder: DecoderSpec,
    bins: int = 80,
    samples: int = 10_000,
    rng_seed=0,
    scale: Scale = Scale(),
) -> FeedbackHistogram:
    """Histogram of decoded feedback over the scale; mass sums to 1.

    80 bins on the 5-star scale give 0.05-star resolution, enough to resolve
    the boundary spikes of likelihood decoding.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    fb = sample_feedback(xi, decoder, scale, samples, rng_seed)
    counts, edges = np.histogram(fb.values, bins=bins, range=(scale.lo, scale.hi))
    return FeedbackHistogram(
        edges=edges, mass=counts / counts.sum(), xi=xi, decoder=decoder
    )


def reliability_sweep(
    base_xi: CognitionVector,
    decoder: DecoderSpec,
    s_axis,
    g_axis,
    trials: int = 10_000,
    rng_seed=0,
    scale: Scale = Scale(),
) -> ReliabilitySurface:
    """Normalised MSE of decoded estimates over a (stimulus, gain) lattice.

    ``base_xi`` fixes n, w and o; each cell replaces (g, s), draws ``trials``
    responses and decodes them.  Cells use independent substreams keyed by
    their lattice position, so the surface is reproducible under any
    parallel chunking.
    """
    s_axis = np.asarray(s_axis, dtype=float)
    g_axis = np.asarray(g_axis, dtype=float)
    values = np.empty((s_axis.size, g_axis.size))
    for i, s in enumerate(s_axis):
        for j, g in enumerate(g_axis):
            xi = replace(base_xi, g=float(g), s=float(s))
            cell_seed = substream(rng_seed, i, j)
            fb = sample_feedback(xi, decoder, scale, trials, cell_seed)
            values[i, j] = mse_ratio(s, fb.values, scale)
    return ReliabilitySurface(
        s_axis=s_axis, g_axis=g_axis, values=values, decoder=decoder, base_xi=base_xi
    )


def surface_filename(surface: ReliabilitySurface, seed) -> str:
    xi = surface.base_xi
    return "surface_%s_n%d_w%g_o%g_seed%s.csv" % (
        surface.decoder.label(), xi.n, xi.w, xi.o, seed
    )


def histogram_filename(hist: FeedbackHistogram, seed) -> str:
    xi = hist.xi
    return "feedback_%s_n%d_g%g_w%g_o%g_s%g_seed%s.csv" % (
        hist.decoder.label(), xi.n, xi.g, xi.w, xi.o, xi.s, seed
    )


def write_surface_csv(path: str, surface: ReliabilitySurface, manifest_hash=None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest_hash={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["s"] + [repr(float(g)) for g in surface.g_axis])
        for i, s in enumerate(surface.s_axis):
            writer.writerow([repr(float(s))] + [repr(float(v)) for v in surface.values[i]])


def write_histogram_csv(path: str, hist: FeedbackHistogram, manifest_hash=None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest_hash={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "mass"])
        for lo, hi, mass in zip(hist.edges[:-1], hist.edges[1:], hist.mass):
            writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(mass))])
