"""Compare the four decoders' feedback distributions for one population.

Samples feedback through each decoder at the reference cognition vector and
prints summary statistics plus a coarse text histogram, reproducing the
qualitative picture: mode decoding spreads widest, the weighted average
barely moves, likelihood decoding piles mass onto the scale boundaries and
the posterior decoder is its prior-stabilised version.
"""

import numpy as np

from nppc import CognitionVector, DecoderSpec, Scale, sample_feedback

scale = Scale()
xi = CognitionVector(100, 1.0, 1.0, 5.0, 3.0)
samples = 50_000

decoders = [
    DecoderSpec.mvd(),
    DecoderSpec.wad(),
    DecoderSpec.mld(),
    DecoderSpec.mad(mean=3.0, variance=0.75),
]

print(f"feedback from (n={xi.n}, g={xi.g}, w={xi.w}, o={xi.o}, s={xi.s}), {samples} draws\n")
edges = np.linspace(scale.lo, scale.hi, 21)
for spec in decoders:
    values = sample_feedback(xi, spec, scale, samples, rng_seed=7).values
    mass, _ = np.histogram(values, bins=edges)
    mass = mass / mass.sum()
    boundary = np.mean((values <= 1.05) | (values >= 4.95))
    print(f"{spec.kind.value.upper()}  mean {values.mean():+.3f}  sd {values.std():.3f}  "
          f"boundary mass {boundary:.3f}")
    bar = "".join("#" if m > 0.10 else "+" if m > 0.03 else "." if m > 0.003 else " "
                  for m in mass)
    print(f"      1 |{bar}| 5\n")
