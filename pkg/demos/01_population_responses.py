"""Walk through the response pipeline: tuning curves, static rates, noise.

Builds a small population, shows its tuning curves at a fixed stimulus, and
draws two noisy response realisations to demonstrate that one cognition
produces different activity on every trial.  Both parameterisations that
appear in the literature for this picture are shown side by side.
"""

import numpy as np

from nppc import CognitionVector, Scale, sample_response, static_response, tuning_eval
from nppc.population import preferred_values

scale = Scale()

for xi in (CognitionVector(11, 7.0, 1.0, 5.0, 3.0),
           CognitionVector(11, 10.0, 0.5, 5.0, 3.0)):
    print(f"\ncognition vector (n={xi.n}, g={xi.g}, w={xi.w}, o={xi.o}, s={xi.s})")
    preferred = preferred_values(xi.n, scale)
    print("preferred stimuli:", np.round(preferred, 2))

    static = static_response(xi, scale)
    print("static rates     :", np.round(static.rates, 2))
    peak = preferred[np.argmax(static.rates)]
    print(f"peak rate {static.rates.max():.4f} Hz at preferred stimulus {peak}")

    for trial, seed in enumerate((1, 2)):
        noisy = sample_response(xi, scale, seed)
        print(f"noisy trial {trial + 1}   :", noisy.rates.astype(int))

# a single tuning curve evaluated off-peak
xi = CognitionVector(11, 7.0, 1.0, 5.0, 3.0)
print("\ntuning curve of the neuron preferring 3 stars:")
for stim in (1.0, 2.0, 3.0, 4.0, 5.0):
    print(f"  f(s={stim}) = {tuning_eval(xi, 3.0, stim):.4f} Hz")
