"""Clustering-based collaborative filtering comparison and the magic barrier.

Seven prediction methods share one protocol: cluster entities, hold out 30%
of the users per cluster, predict the held-out users' last-item rating from
the retained members, and score with RMSE.  Five trials times five holdout
repetitions yield 25 scores per method.  All methods derive their holdout
randomness from the same per-(trial, repeat) substream and their k-means
initialisation from one shared stream, so the resulting distributions are
paired across methods.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decoders import DecoderKind, decode_stream
from .fitting import FitResult
from .population import CognitionVector, Scale
from .seeds import (
    DOMAIN_BOOTSTRAP,
    DOMAIN_KMEANS,
    DOMAIN_SAMPLE,
    DOMAIN_SPLIT,
    DOMAIN_TIE,
    generator,
    substream,
)

log = logging.getLogger(__name__)

DEFAULT_K = 4  # 67 users only admit a handful of groups; override per run


class FeatureSpace(str, enum.Enum):
    RATING = "rating"
    XI_FULL = "xi_full"
    N = "n"
    G = "g"
    W = "w"
    O = "o"


@dataclass(frozen=True)
class ClusterModel:
    k: int
    assignments: dict
    centroids: np.ndarray
    feature_space: FeatureSpace

    def labels(self, order: Sequence) -> np.ndarray:
        return np.array([self.assignments[key] for key in order])


@dataclass(frozen=True)
class RmseDistribution:
    scores: np.ndarray
    method: str

    def median(self) -> float:
        return float(np.median(self.scores))

    def quartiles(self) -> tuple[float, float, float]:
        q1, q2, q3 = np.percentile(self.scores, [25, 50, 75])
        return float(q1), float(q2), float(q3)


def rmse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ValueError("predictions and targets must be equal-length and non-empty")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


# ---------------------------------------------------------------------------
# k-means


def kmeans(
    points,
    k: int,
    rng_seed,
    feature_space: FeatureSpace = FeatureSpace.RATING,
    max_iter: int = 100,
) -> ClusterModel:
    """Plain alternating k-means with seeded distance-weighted initialisation.

    The first centroid is a uniform pick; later ones are quantile picks
    proportional to squared distance from the chosen set.  Empty clusters
    re-seed from the point farthest from its own centroid.  Deterministic
    under the seed; argmin ties go to the lowest index.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= number of points")
    rng = generator(substream(rng_seed))
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[int(rng.random() * n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0:
            centroids[c] = X[int(rng.random() * n)]
            continue
        target = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
        centroids[c] = X[min(idx, n - 1)]
        d2 = np.minimum(d2, ((X - centroids[c]) ** 2).sum(axis=1))

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dist2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist2, axis=1)
        own = dist2[np.arange(n), new_labels]
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(own))
                centroids[c] = X[far]
                new_labels[far] = c
                own[far] = 0.0
        for c in range(k):
            centroids[c] = X[new_labels == c].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusterModel(
        k=k,
        assignments={i: int(lab) for i, lab in enumerate(labels)},
        centroids=centroids,
        feature_space=feature_space,
    )


def elbow_report(points, ks: Sequence[int], rng_seed) -> dict[int, float]:
    """Within-cluster sum of squares per k, for choosing the cluster count."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    out = {}
    for k in ks:
        model = kmeans(X, k, rng_seed)
        labels = np.array([model.assignments[i] for i in range(len(X))])
        inertia = sum(
            float(((X[labels == c] - model.centroids[c]) ** 2).sum()) for c in range(k)
        )
        out[int(k)] = inertia
    return out


def standardize(X: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance columns; constant columns stay zero."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (X - mu) / sd


# ---------------------------------------------------------------------------
# shared protocol machinery


def _split_ranks(rng_seed, trial: int, rep: int, n_users: int) -> np.ndarray:
    """Holdout priority per user for one (trial, repeat) cell.

    Every method consults the same ranks, which is what makes the 25-score
    distributions paired across methods.
    """
    perm = generator(substream(rng_seed, DOMAIN_SPLIT, trial, rep)).permutation(n_users)
    ranks = np.empty(n_users, dtype=int)
    ranks[perm] = np.arange(n_users)
    return ranks


def _holdout(group: Sequence[int], ranks: np.ndarray, frac: float) -> set:
    """First 30% of the group's users in priority order (at least one)."""
    if not group:
        return set()
    ordered = sorted(group, key=lambda u: ranks[u])
    n_test = max(1, int(len(ordered) * frac + 0.5))
    return set(ordered[:n_test])


def _score_cell(groups, values, targets, ranks, frac) -> float:
    """One holdout evaluation: ``groups`` maps cluster -> member users,
    ``values`` maps user -> list of (group, predictor value) contributions."""
    test_users: set = set()
    for group in groups.values():
        test_users |= _holdout(group, ranks, frac)
    retained_values: dict = {}
    all_retained = []
    for user, contributions in values.items():
        if user in test_users:
            continue
        for group_id, value in contributions:
            retained_values.setdefault(group_id, []).append(value)
            all_retained.append(value)
    if not all_retained:
        raise ValueError("holdout removed every user")
    global_mean = float(np.mean(all_retained))
    predictions, truth = [], []
    for user in sorted(test_users):
        contribs = values[user]
        per_group = []
        for group_id, _value in contribs:
            pool = retained_values.get(group_id)
            if pool:
                per_group.append(float(np.mean(pool)))
            else:
                log.info("cluster %s lost all retained ratings; global fallback", group_id)
                per_group.append(global_mean)
        predictions.append(float(np.mean(per_group)))
        truth.append(targets[user])
    return rmse(predictions, truth)


def _protocol_scores(data, clusterings, targets_per_trial, holdout_frac,
                     repeats, rng_seed, method) -> RmseDistribution:
    """Run the (trial x repeat) holdout lattice for one method."""
    trials = data.trial_count()
    n_users = len(data.users())
    scores = np.empty(trials * repeats)
    pos = 0
    for t in range(1, trials + 1):
        groups, values = clusterings(t)
        targets = targets_per_trial(t)
        for rep in range(repeats):
            ranks = _split_ranks(rng_seed, t, rep, n_users)
            scores[pos] = _score_cell(groups, values, targets, ranks, holdout_frac)
            pos += 1
    return RmseDistribution(scores=scores, method=method)


def _target_item(data) -> str:
    items = data.items()
    if len(items) < 2:
        raise ValueError("need at least 2 items")
    return items[-1]


# ---------------------------------------------------------------------------
# reference methods


def noiseless_reference(data, k: int = DEFAULT_K, holdout_frac: float = 0.3,
                        repeats: int = 5, rng_seed=0) -> RmseDistribution:
    """Per-trial rating clustering, judged against the same trial's ratings.

    Users are clustered on their trial-t item-rating vectors; held-out users'
    last-item ratings are predicted by their cluster's retained mean.
    """
    users, items = data.users(), data.items()
    target = _target_item(data)
    u_index = {u: idx for idx, u in enumerate(users)}
    cache: dict = {}

    def clusterings(t):
        if t not in cache:
            X = np.array([[data.rating(u, i, t) for i in items] for u in users])
            model = kmeans(X, k, substream(rng_seed, DOMAIN_KMEANS), FeatureSpace.RATING)
            groups: dict = {}
            values: dict = {}
            for u in users:
                lab = model.assignments[u_index[u]]
                groups.setdefault(lab, []).append(u_index[u])
                values[u_index[u]] = [(lab, data.rating(u, target, t))]
            cache[t] = (groups, values)
        return cache[t]

    def targets(t):
        return {u_index[u]: data.rating(u, target, t) for u in users}

    return _protocol_scores(data, clusterings, targets, holdout_frac,
                            repeats, rng_seed, "noiseless")


def noisy_reference(data, k: int = DEFAULT_K, holdout_frac: float = 0.3,
                    repeats: int = 5, rng_seed=0) -> RmseDistribution:
    """Clustering on the union of all trials (one copy per user per trial),
    judged against per-pair mean ratings."""
    users, items = data.users(), data.items()
    target = _target_item(data)
    trials = data.trial_count()
    u_index = {u: idx for idx, u in enumerate(users)}
    # copies ordered user-major so identical trials keep duplicates adjacent
    rows = [(u, t) for u in users for t in range(1, trials + 1)]
    X = np.array([[data.rating(u, i, t) for i in items] for u, t in rows])
    model = kmeans(X, k, substream(rng_seed, DOMAIN_KMEANS), FeatureSpace.RATING)
    groups: dict = {}
    values: dict = {}
    for row_idx, (u, t) in enumerate(rows):
        lab = model.assignments[row_idx]
        uid = u_index[u]
        groups.setdefault(lab, set()).add(uid)
        values.setdefault(uid, []).append((lab, data.rating(u, target, t)))
    groups = {lab: sorted(members) for lab, members in groups.items()}
    target_means = {u_index[u]: data.pair_mean(u, target) for u in users}

    return _protocol_scores(
        data, lambda t: (groups, values), lambda t: target_means,
        holdout_frac, repeats, rng_seed, "noisy",
    )


# ---------------------------------------------------------------------------
# neural-feature methods


def _pair_feature_method(data, features_by_pair: dict, method: str, space: FeatureSpace,
                         k, holdout_frac, repeats, rng_seed) -> RmseDistribution:
    """Cluster user-item pairs on neural features; predict via the cluster
    holding each user's target-item pair, against per-pair mean ratings."""
    users = data.users()
    target = _target_item(data)
    u_index = {u: idx for idx, u in enumerate(users)}
    pair_order = sorted(features_by_pair)
    X = standardize(np.array([features_by_pair[p] for p in pair_order]))
    model = kmeans(X, k, substream(rng_seed, DOMAIN_KMEANS), space)
    label_of = {pair: model.assignments[idx] for idx, pair in enumerate(pair_order)}

    groups: dict = {}
    values: dict = {}
    for u in users:
        pair = (u, target)
        if pair not in label_of:
            raise ValueError(f"missing fit for target pair {pair}")
        lab = label_of[pair]
        groups.setdefault(lab, []).append(u_index[u])
        values[u_index[u]] = [(lab, data.pair_mean(u, target))]
    target_means = {u_index[u]: data.pair_mean(u, target) for u in users}

    return _protocol_scores(
        data, lambda t: (groups, values), lambda t: target_means,
        holdout_frac, repeats, rng_seed, method,
    )


def xi_clustering(data, fits: Sequence[FitResult], k: int = DEFAULT_K,
                  holdout_frac: float = 0.3, repeats: int = 5, rng_seed=0) -> RmseDistribution:
    """k-means over the full fitted cognition vectors (n, g, w, o, s)."""
    features = {
        (f.user, f.item): (f.xi.n, f.xi.g, f.xi.w, f.xi.o, f.xi.s) for f in fits
    }
    _require_cover(data, features)
    return _pair_feature_method(data, features, "xi", FeatureSpace.XI_FULL,
                                k, holdout_frac, repeats, rng_seed)


class SubspaceDim(str, enum.Enum):
    N = "n"
    G = "g"
    W = "w"
    O = "o"


def subspace_clustering(data, fits: Sequence[FitResult], dim: SubspaceDim,
                        k: int = DEFAULT_K, holdout_frac: float = 0.3,
                        repeats: int = 5, rng_seed=0) -> RmseDistribution:
    """k-means over a single fitted neural dimension (n, g, w or o)."""
    dim = SubspaceDim(dim)
    features = {
        (f.user, f.item): (getattr(f.xi, dim.value),) for f in fits
    }
    _require_cover(data, features)
    return _pair_feature_method(
        data, features, f"subspace_{dim.value}", FeatureSpace(dim.value),
        k, holdout_frac, repeats, rng_seed,
    )


def _require_cover(data, features: dict) -> None:
    missing = [p for p in data.pairs() if p not in features]
    if missing:
        raise ValueError(f"fits do not cover {len(missing)} pairs, e.g. {missing[0]}")


def noise_profiling(data, fits: Sequence[FitResult], k: int = DEFAULT_K,
                    holdout_frac: float = 0.3, repeats: int = 5, rng_seed=0,
                    profile_scale: Scale = Scale(grid_points=41),
                    variance_budget: int = 1500) -> RmseDistribution:
    """Per-user mean cognition vector with a variance-matched stimulus.

    Each user's fitted vectors over the non-target items are averaged; the
    profile's stimulus component is then chosen from the grid so the model
    feedback variance best matches the user's average observed rating
    variance.  Users are clustered on the resulting profile vectors.
    """
    users = data.users()
    items = data.items()
    target = _target_item(data)
    source_items = [i for i in items if i != target]
    by_user: dict = {}
    for f in fits:
        if f.item != target:
            by_user.setdefault(f.user, []).append(f)

    profiles, kept_users = [], []
    for u in users:
        ufits = by_user.get(u, [])
        if len(ufits) < len(source_items):
            log.warning("user %s lacks fits for all source items; excluded", u)
            continue
        obs_var = float(np.mean([data.pair_ml_variance(u, i) for i in source_items]))
        profile = _variance_matched_profile(
            ufits, obs_var, profile_scale, variance_budget,
            substream(rng_seed, DOMAIN_SAMPLE, users.index(u)),
        )
        profiles.append(profile)
        kept_users.append(u)
    if not kept_users:
        raise ValueError("no user has complete fits")

    u_index = {u: idx for idx, u in enumerate(users)}
    # raw profile vectors: the profile's population size and gain carry the
    # neural character, and flattening them to unit variance would let the
    # near-constant width/offset components drown that signal
    X = np.array(profiles, dtype=float)
    model = kmeans(X, k, substream(rng_seed, DOMAIN_KMEANS), FeatureSpace.XI_FULL)
    groups: dict = {}
    values: dict = {}
    for row, u in enumerate(kept_users):
        lab = model.assignments[row]
        groups.setdefault(lab, []).append(u_index[u])
        values[u_index[u]] = [(lab, data.pair_mean(u, target))]
    target_means = {u_index[u]: data.pair_mean(u, target) for u in kept_users}

    return _protocol_scores(
        data, lambda t: (groups, values), lambda t: target_means,
        holdout_frac, repeats, rng_seed, "noise_profiling",
    )


def _variance_matched_profile(ufits, obs_var: float, scale: Scale, budget: int, seed) -> tuple:
    """(n, g, w, o, s*) with s* minimising |model feedback variance - obs_var|."""
    n_bar = max(1, int(round(float(np.mean([f.xi.n for f in ufits])))))
    g_bar = float(np.mean([f.xi.g for f in ufits]))
    w_bar = float(np.mean([f.xi.w for f in ufits]))
    o_bar = float(np.mean([f.xi.o for f in ufits]))
    decoder = _majority_decoder(ufits)
    best_s, best_gap = scale.lo, math.inf
    for s_idx, s in enumerate(scale.grid()):
        xi = CognitionVector(n=n_bar, g=g_bar, w=w_bar, o=o_bar, s=float(s))
        cell = substream(seed, s_idx)
        values = decode_stream(
            xi, decoder, scale, budget,
            generator(cell, DOMAIN_SAMPLE), generator(cell, DOMAIN_TIE),
            on_undecodable="nan",
        )
        values = values[np.isfinite(values)]
        if values.size < 2:
            continue
        gap = abs(float(values.var()) - obs_var)
        if gap < best_gap:
            best_gap, best_s = gap, float(s)
    return (n_bar, g_bar, w_bar, o_bar, best_s)


def _majority_decoder(ufits):
    counts: dict = {}
    for f in ufits:
        counts[f.decoder] = counts.get(f.decoder, 0) + 1
    order = [DecoderKind.MVD, DecoderKind.WAD, DecoderKind.MLD, DecoderKind.MAD]
    return max(counts, key=lambda d: (counts[d], -order.index(d.kind)))


# ---------------------------------------------------------------------------
# magic barrier


def magic_barrier(data, bootstrap: int = 1000, rng_seed=0) -> tuple[float, tuple[float, float]]:
    """RMSE floor implied by rating noise, with a bootstrap 95% CI.

    The barrier is the root of the mean per-pair maximum-likelihood variance;
    prediction errors below it are indistinguishable from re-rating noise.
    """
    pairs = data.pairs()
    variances = []
    for u, i in pairs:
        if data.pair_ratings(u, i).size < 2:
            raise ValueError("barrier undefined: single-trial data")
        variances.append(data.pair_ml_variance(u, i))
    variances = np.array(variances)
    barrier = float(np.sqrt(variances.mean()))
    rng = generator(substream(rng_seed, DOMAIN_BOOTSTRAP))
    stats = np.sqrt(
        variances[rng.integers(0, len(variances), size=(bootstrap, len(variances)))].mean(axis=1)
    )
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return barrier, (float(lo), float(hi))
