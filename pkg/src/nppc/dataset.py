"""Rating-table ingestion, validation and synthetic dataset generation.

The expected schema is a CSV ``user,item,trial,rating`` with dense trial
indices per user-item pair and integer ratings on the scale.  Generators
produce synthetic re-rating tables with realistic statistics: a stochastic
mode that enforces a target consistency mix with exponentially distributed
per-pair variances, and a planted mode that rates through the neural model
itself and returns the generating parameters as ground truth.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .decoders import DecoderSpec, sample_feedback
from .population import CognitionVector, Scale
from .seeds import DOMAIN_SYNTH, generator, substream

log = logging.getLogger(__name__)


class DataValidationError(ValueError):
    pass


@dataclass
class RatingDataset:
    """All (user, item, trial, rating) records with per-pair statistics."""

    ratings: dict  # (user, item) -> np.ndarray of ratings in trial order
    scale: Scale = field(default_factory=Scale)

    @classmethod
    def from_records(cls, records, scale: Scale = Scale()) -> "RatingDataset":
        by_pair: dict = {}
        for user, item, trial, rating in records:
            user, item, trial = str(user), str(item), int(trial)
            if rating != int(rating):
                raise DataValidationError(f"non-integer rating {rating!r} for ({user}, {item})")
            rating = int(rating)
            if not scale.lo <= rating <= scale.hi:
                raise DataValidationError(f"rating {rating} outside scale for ({user}, {item})")
            slot = by_pair.setdefault((user, item), {})
            if trial in slot:
                raise DataValidationError(f"duplicate record ({user}, {item}, trial {trial})")
            slot[trial] = rating
        ratings = {}
        for pair, slot in by_pair.items():
            trials = sorted(slot)
            if trials != list(range(1, len(trials) + 1)):
                raise DataValidationError(f"non-dense trials for {pair}: {trials}")
            ratings[pair] = np.array([slot[t] for t in trials], dtype=float)
        return cls(ratings=ratings, scale=scale)

    def pairs(self) -> list:
        return sorted(self.ratings)

    def users(self) -> list:
        return sorted({u for u, _ in self.ratings})

    def items(self) -> list:
        return sorted({i for _, i in self.ratings})

    def pair_ratings(self, user, item) -> np.ndarray:
        return self.ratings[(user, item)]

    def rating(self, user, item, trial: int) -> float:
        return float(self.ratings[(user, item)][trial - 1])

    def trial_count(self) -> int:
        counts = {len(r) for r in self.ratings.values()}
        if len(counts) != 1:
            raise DataValidationError("pairs disagree on trial count")
        return counts.pop()

    def n_records(self) -> int:
        return sum(len(r) for r in self.ratings.values())

    def pair_mean(self, user, item) -> float:
        return float(self.ratings[(user, item)].mean())

    def pair_ml_variance(self, user, item) -> float:
        r = self.ratings[(user, item)]
        return float(np.mean((r - r.mean()) ** 2))


def ingest(path: str, scale: Scale = Scale()) -> RatingDataset:
    """Read and validate a ``user,item,trial,rating`` CSV."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        skipped = 0
        while header is not None and header and header[0].startswith("#"):
            header = next(reader, None)  # provenance comments, e.g. manifest hash
            skipped += 1
        if header is None or [h.strip() for h in header] != ["user", "item", "trial", "rating"]:
            raise DataValidationError(f"{path}: expected header user,item,trial,rating")
        for lineno, row in enumerate(reader, start=2 + skipped):
            if not row:
                continue
            if len(row) != 4:
                raise DataValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            user, item, trial, rating = row
            try:
                records.append((user, item, int(trial), float(rating)))
            except ValueError as exc:
                raise DataValidationError(f"{path}:{lineno}: {exc}") from exc
    return RatingDataset.from_records(records, scale)


def export(data: RatingDataset, path: str, manifest_hash: Optional[str] = None) -> None:
    """Write the dataset back out; ``ingest(export(d))`` round-trips."""
    with open(path, "w", newline="") as fh:
        if manifest_hash is not None:
            fh.write(f"# manifest_hash={manifest_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "trial", "rating"])
        for user, item in data.pairs():
            for trial, rating in enumerate(data.pair_ratings(user, item), start=1):
                writer.writerow([user, item, trial, int(rating)])


def round_to_stars(values, scale: Scale) -> np.ndarray:
    """Round halves away from the scale midpoint, then clip.

    Pushing halves outward preserves the boundary-rating mass that inward
    rounding would erode.
    """
    values = np.asarray(values, dtype=float)
    mid = scale.midpoint
    rounded = np.where(values >= mid, np.floor(values + 0.5), np.ceil(values - 0.5))
    return np.clip(rounded, scale.lo, scale.hi)


@dataclass(frozen=True)
class SynthSpec:
    """Shape and noise statistics of a synthetic re-rating study."""

    users: int = 67
    items: int = 5
    trials: int = 5
    consistency_mix: tuple = (0.35, 0.50, 0.15)
    variance_rate: float = 2.5

    def __post_init__(self):
        if abs(sum(self.consistency_mix) - 1.0) > 1e-9:
            raise ValueError("consistency mix must sum to 1")
        if min(self.consistency_mix) < 0:
            raise ValueError("consistency mix must be non-negative")
        if self.variance_rate <= 0:
            raise ValueError("variance rate must be positive")


@dataclass(frozen=True)
class NppcPlanted:
    """Planted-model synthesis: rate through the neural model itself.

    ``plan`` maps (rng, n_users, n_items) to {(u_idx, i_idx): (xi, decoder)};
    the default plants a few latent user types whose gain governs rating
    reliability, suitable for clustering-recovery experiments.
    """

    plan: Optional[Callable] = None
    scale: Scale = Scale()


def synthesize(spec: SynthSpec, mode="stochastic", rng_seed=0):
    """Generate a rating dataset plus its generating ground truth.

    Stochastic mode draws per-pair Gaussians (exponentially distributed
    variances, mix-constrained distinct-rating counts) and rounds to stars;
    planted mode samples the neural model.  Deterministic under the seed.
    """
    if mode == "stochastic":
        return _synthesize_stochastic(spec, rng_seed)
    if isinstance(mode, NppcPlanted):
        return _synthesize_planted(spec, mode, rng_seed)
    raise ValueError(f"unknown synthesis mode {mode!r}")


def _pair_ids(spec: SynthSpec):
    width_u = len(str(spec.users - 1))
    width_i = len(str(spec.items - 1))
    users = [f"u{u:0{width_u}d}" for u in range(spec.users)]
    items = [f"i{i:0{width_i}d}" for i in range(spec.items)]
    return users, items


def _synthesize_stochastic(spec: SynthSpec, rng_seed):
    scale = Scale()
    users, items = _pair_ids(spec)
    records, truth = [], []
    categories = ("constant", "two", "three_plus")
    for u in range(spec.users):
        for i in range(spec.items):
            rng = generator(substream(rng_seed, DOMAIN_SYNTH, u, i))
            category = categories[_pick(rng, spec.consistency_mix)]
            mu = scale.lo + rng.random() * (scale.hi - scale.lo)
            if category == "constant":
                sigma = 0.0
                stars = np.full(spec.trials, round_to_stars(mu, scale))
            else:
                want = 2 if category == "two" else 3
                sigma, stars = _rejection_draw(rng, mu, spec, scale, want)
            for t, star in enumerate(stars, start=1):
                records.append((users[u], items[i], t, int(star)))
            truth.append(
                {"user": users[u], "item": items[i], "category": category,
                 "mu": mu, "sigma": sigma}
            )
    return RatingDataset.from_records(records, scale), truth


def _pick(rng, probs) -> int:
    u = rng.random()
    acc = 0.0
    for idx, p in enumerate(probs):
        acc += p
        if u < acc:
            return idx
    return len(probs) - 1


def _rejection_draw(rng, mu, spec: SynthSpec, scale: Scale, want: int, max_tries: int = 1000):
    """Draw trials until the distinct-rating count matches the category.

    ``want=2`` demands exactly two distinct stars, ``want=3`` three or more;
    the per-attempt variance is exponential with rate ``variance_rate``.
    """
    sigma, stars = 0.0, None
    for _ in range(max_tries):
        var = rng.exponential(1.0 / spec.variance_rate)
        sigma = float(np.sqrt(var))
        stars = round_to_stars(rng.normal(mu, sigma, size=spec.trials), scale)
        distinct = np.unique(stars).size
        if (want == 2 and distinct == 2) or (want == 3 and distinct >= 3):
            return sigma, stars
    log.warning("rejection sampling exhausted; keeping last draw")
    return sigma, stars


def _synthesize_planted(spec: SynthSpec, mode: NppcPlanted, rng_seed):
    scale = mode.scale
    users, items = _pair_ids(spec)
    plan_fn = mode.plan or default_user_type_plan
    plan = plan_fn(generator(substream(rng_seed, DOMAIN_SYNTH)), spec.users, spec.items)
    records, truth = [], []
    for u in range(spec.users):
        for i in range(spec.items):
            xi, decoder = plan[(u, i)]
            fb = sample_feedback(
                xi, decoder, scale, spec.trials, substream(rng_seed, DOMAIN_SYNTH, u, i)
            )
            stars = round_to_stars(fb.values, scale)
            for t, star in enumerate(stars, start=1):
                records.append((users[u], items[i], t, int(star)))
            prior = decoder.prior
            truth.append(
                {"user": users[u], "item": items[i],
                 "n": xi.n, "g": xi.g, "w": xi.w, "o": xi.o, "s": xi.s,
                 "decoder": decoder.kind.value,
                 "prior_mean": None if prior is None else prior.mean,
                 "prior_variance": None if prior is None else prior.variance}
            )
    return RatingDataset.from_records(records, scale), truth


# latent user types for the default planted plan: population size, gain and
# decoder separate the types cleanly in neural space and set how reliably
# each type rates (mode decoding at low gain scatters ratings widely, a
# high-gain weighted average barely at all).  Taste profiles differ across
# types so ratings carry group structure, but the trail the uncertain types
# leave is blurred by their own noise.  Width and offset are common noise
# dimensions with no rating-relevant signal at all.
_TYPE_PARAMS = (
    # (n, g, w, o), last-item gain, decoder factory, item appeal profile
    # (the weighted-average decoder drags estimates toward mid-scale, so the
    # reliable type's last-item appeal sits high enough to survive rounding)
    ((30, 2.0, 1.0, 5.0), 15.0, DecoderSpec.mvd, (4.0, 2.0, 3.0, 4.0, 2.5)),
    ((90, 2.2, 1.0, 5.0), 8.0, DecoderSpec.mad, (2.0, 4.0, 2.0, 3.0, 3.5)),
    ((180, 30.0, 1.0, 5.0), 40.0, DecoderSpec.wad, (3.0, 3.0, 4.0, 2.0, 4.8)),
)


def default_user_type_plan(rng, n_users: int, n_items: int) -> dict:
    """Assign each user a latent type and jitter its parameters slightly.

    The last item doubles as a prediction target in the filtering studies,
    so its pairs get the type's higher gain: its ratings stay informative
    while the remaining items carry the type's full trial noise.
    """
    plan = {}
    for u in range(n_users):
        base, g_last, make_decoder, appeal = _TYPE_PARAMS[u % len(_TYPE_PARAMS)]
        n0, g0, w0, o0 = base
        n = max(1, int(round(n0 * (1.0 + 0.04 * rng.standard_normal()))))
        g = max(0.5, g0 * (1.0 + 0.04 * rng.standard_normal()))
        w = max(0.2, w0 * (1.0 + 0.04 * rng.standard_normal()))
        o = max(0.5, o0 * (1.0 + 0.04 * rng.standard_normal()))
        g_target = max(0.5, g_last * (1.0 + 0.04 * rng.standard_normal()))
        for i in range(n_items):
            s = float(np.clip(appeal[i % len(appeal)] + 0.06 * rng.standard_normal(), 1.0, 5.0))
            gain = g_target if i == n_items - 1 else g
            plan[(u, i)] = (CognitionVector(n=n, g=gain, w=w, o=o, s=s), make_decoder())
    return plan


def write_ground_truth(path: str, truth: list, manifest_hash: Optional[str] = None) -> None:
    """Sidecar JSON-lines keyed by (user, item); never mixed into the CSV."""
    with open(path, "w") as fh:
        if manifest_hash is not None:
            fh.write(json.dumps({"manifest_hash": manifest_hash}, sort_keys=True) + "\n")
        for row in truth:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
