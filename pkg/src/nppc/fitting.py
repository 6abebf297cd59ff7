"""Brute-force grid search for per-pair cognition vectors and decoders.

Every grid candidate's randomness is keyed by the candidate's parameter
values (not its position), so scores are identical no matter how the grid is
chunked, ordered, parallelised or embedded in a larger grid.  One model
sample per candidate serves all decoders and all pairs, which is what makes
desk-scale brute force tractable.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .decoders import (
    DEFAULT_DECODERS,
    DecoderKind,
    DecoderSpec,
    GaussianPrior,
    _decode_all,
)
from .metrics import (
    MAX_JSD_BITS,
    SIGMA_FLOOR,
    EmpiricalFeedback,
    MetricScore,
    ScoreKind,
    _histogram_code,
    gaussian_grid_mass,
    kappa_from_agreement,
    pattern_counter,
)
from .population import CognitionVector, Scale
from .seeds import (
    DOMAIN_CHANCE,
    DOMAIN_SAMPLE,
    DOMAIN_TIE,
    generator,
    substream,
    value_key,
)

log = logging.getLogger(__name__)

# scores closer than this count as tied before the energy rule applies;
# kappa scores are exact rationals so they tie only on equality
JSD_TIE_TOL = 1e-9


class Objective(str, enum.Enum):
    KAPPA = "kappa"
    JSD = "jsd"


@dataclass(frozen=True)
class SamplingBudget:
    """Monte Carlo effort per grid candidate.

    ``samples`` sizes the model feedback sample for the JSD objective;
    ``repeats`` is the number of histogram rounds for the kappa objective.
    The defaults are desk-scale; raise ``samples`` to 10**6 to reproduce
    cluster-scale runs.
    """

    samples: int = 10_000
    repeats: int = 1000


@dataclass(frozen=True)
class GridSpec:
    """Axis ranges (min, max, count) per cognition-vector component.

    Values are spread equidistantly over each range; population sizes are
    rounded to integers and deduplicated.  The default is the full-scale
    search space: 100 values per axis.
    """

    n_range: tuple = (1.0, 250.0, 100)
    g_range: tuple = (1.0, 100.0, 100)
    w_range: tuple = (0.1, 2.0, 100)
    o_range: tuple = (1.0, 15.0, 100)
    s_range: tuple = (1.0, 5.0, 100)
    decoders: tuple = DEFAULT_DECODERS

    def __post_init__(self):
        for rng in (self.n_range, self.g_range, self.w_range, self.o_range, self.s_range):
            lo, hi, count = rng
            if lo > hi or count < 1:
                raise ValueError(f"bad axis range {rng}")
        if not self.decoders:
            raise ValueError("need at least one decoder")

    def axes(self) -> tuple[np.ndarray, ...]:
        n_vals = _axis(self.n_range)
        n_vals = _dedup(np.round(n_vals))
        return (
            n_vals,
            _axis(self.g_range),
            _axis(self.w_range),
            _axis(self.o_range),
            _axis(self.s_range),
        )

    def cardinality(self) -> int:
        """True number of grid points (after integer deduplication of n)."""
        return int(np.prod([len(a) for a in self.axes()]))

    def vector(self, index: int, axes=None) -> CognitionVector:
        axes = self.axes() if axes is None else axes
        sizes = [len(a) for a in axes]
        coords = []
        for size in reversed(sizes):
            index, r = divmod(index, size)
            coords.append(r)
        i_n, i_g, i_w, i_o, i_s = reversed(coords)
        return CognitionVector(
            n=int(axes[0][i_n]), g=float(axes[1][i_g]), w=float(axes[2][i_w]),
            o=float(axes[3][i_o]), s=float(axes[4][i_s]),
        )


def _axis(rng: tuple) -> np.ndarray:
    lo, hi, count = rng
    return np.linspace(float(lo), float(hi), int(count))


def _dedup(values: np.ndarray) -> np.ndarray:
    seen: list[float] = []
    for v in values:
        if not seen or v != seen[-1]:
            seen.append(float(v))
    return np.array(seen)


def enumerate_grid(spec: GridSpec) -> Iterator[CognitionVector]:
    """Yield every grid point once, lexicographic in (n, g, w, o, s)."""
    axes = spec.axes()
    for index in range(spec.cardinality()):
        yield spec.vector(index, axes)


def population_energy(xi: CognitionVector) -> float:
    """Energy cost of running the population: n * (g + o).

    Among equally fitting candidates the brain-plausible choice is the one
    spiking most sparsely, so ties resolve toward minimal energy.
    """
    return xi.n * (xi.g + xi.o)


@dataclass(frozen=True)
class FitResult:
    xi: CognitionVector
    decoder: DecoderSpec
    score: MetricScore
    ambiguity: int
    energy: float
    user: Optional[str] = None
    item: Optional[str] = None


# ---------------------------------------------------------------------------
# candidate statistics


def _candidate_streams(rng_seed, xi: CognitionVector):
    base = substream(rng_seed, *value_key(xi.n, xi.g, xi.w, xi.o, xi.s))
    return (
        generator(base, DOMAIN_SAMPLE),
        generator(base, DOMAIN_TIE),
        generator(base, DOMAIN_CHANCE),
    )


def _candidate_stats(xi, decoders, objective, budget, scale, rng_seed):
    """Per-decoder sufficient statistics of one candidate's model feedback.

    JSD: ML Gaussian (mu, sigma) of the decoded sample, or None when no
    response was decodable.  Kappa: histogram-pattern counters plus the
    shared uniform-chance counter.
    """
    rng_sample, rng_tie, rng_chance = _candidate_streams(rng_seed, xi)
    if objective is Objective.JSD:
        count = budget.samples
    else:
        count = _KAPPA_DRAWS * budget.repeats
    decoded = _decode_all(xi, decoders, scale, count, rng_sample, rng_tie, on_undecodable="nan")
    if objective is Objective.JSD:
        stats = []
        for values in decoded:
            values = values[np.isfinite(values)]
            if values.size < 2:
                stats.append(None)
                continue
            mu = float(values.mean())
            sigma = float(np.sqrt(np.mean((values - mu) ** 2)))
            stats.append((mu, sigma))
        return stats, None
    counters = []
    for values in decoded:
        stars = np.where(np.isfinite(values), np.clip(np.floor(values + 0.5), scale.lo, scale.hi), -1.0)
        counters.append(pattern_counter(stars, budget.repeats, _KAPPA_DRAWS, scale))
    chance = rng_chance.integers(int(scale.lo), int(scale.hi) + 1, size=_KAPPA_DRAWS * budget.repeats)
    chance_counter = pattern_counter(chance.astype(float), budget.repeats, _KAPPA_DRAWS, scale)
    return counters, chance_counter


_KAPPA_DRAWS = 5  # the agreement metric presumes five-trial re-rating pairs


def _jsd_scores(obs_mass: np.ndarray, mu: float, sigma: float, grid: np.ndarray) -> np.ndarray:
    """Normalised JSD of each observed-density row against one model Gaussian."""
    mod = gaussian_grid_mass(grid, mu, max(sigma, SIGMA_FLOOR))
    m = 0.5 * (obs_mass + mod[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        t_obs = obs_mass * np.log2(obs_mass / m)
        t_mod = mod[None, :] * np.log2(mod[None, :] / m)
    t_obs[obs_mass == 0.0] = 0.0
    t_mod[np.broadcast_to(mod[None, :], m.shape) == 0.0] = 0.0
    return (0.5 * t_obs.sum(axis=1) + 0.5 * t_mod.sum(axis=1)) / MAX_JSD_BITS


def _kappa_scores(counter, chance_counter, obs_codes: Sequence[int], repeats: int) -> np.ndarray:
    out = np.empty(len(obs_codes))
    for i, code in enumerate(obs_codes):
        p0 = counter.get(code, 0) / repeats
        pc = chance_counter.get(code, 0) / repeats
        out[i] = 1.0 - kappa_from_agreement(p0, pc)
    return out


# ---------------------------------------------------------------------------
# streaming argmin reduction with exact tie tracking


class _Reducer:
    """Running argmin plus the set of entries within tolerance of the min.

    Entries pruned along the way were above some intermediate minimum plus
    tolerance, hence above the final minimum plus tolerance: pruning is
    exact, so merging chunk reducers in any order gives the same tie set.
    """

    __slots__ = ("tol", "best", "entries")

    def __init__(self, tol: float):
        self.tol = tol
        self.best = math.inf
        self.entries: list[tuple] = []  # (score, energy, order, cand_index, dec_index)

    def add(self, score, energy, order, cand_index, dec_index):
        if score <= self.best + self.tol:
            if score < self.best:
                self.best = score
                self.entries = [e for e in self.entries if e[0] <= score + self.tol]
            self.entries.append((score, energy, order, cand_index, dec_index))

    def merge(self, other: "_Reducer"):
        if other.best < self.best:
            self.best = other.best
            self.entries = [e for e in self.entries if e[0] <= self.best + self.tol]
        for e in other.entries:
            if e[0] <= self.best + self.tol:
                self.entries.append(e)

    def finish(self) -> tuple[tuple, int]:
        if not self.entries:
            raise RuntimeError("empty grid")
        winner = min(self.entries, key=lambda e: (e[1], e[2]))
        return winner, len(self.entries)


def _score_chunk(args):
    """Score one slice of candidate indices against every pair; picklable.

    BLAS is pinned to one thread regardless of worker count: thread count
    changes dgemm bit patterns, and scores must be identical whether chunks
    run in the main process or in a pool.
    """
    with threadpool_limits(limits=1):
        return _score_chunk_pinned(args)


def _score_chunk_pinned(args):
    (spec, objective, budget, scale, rng_seed, start, stop, obs_payload) = args
    axes = spec.axes()
    grid = scale.grid()
    decoders = spec.decoders
    n_dec = len(decoders)
    tol = JSD_TIE_TOL if objective is Objective.JSD else 0.0
    if objective is Objective.JSD:
        obs_mass = obs_payload
        n_pairs = obs_mass.shape[0]
    else:
        obs_codes = obs_payload
        n_pairs = len(obs_codes)
    reducers = [_Reducer(tol) for _ in range(n_pairs)]
    for cand in range(start, stop):
        xi = spec.vector(cand, axes)
        energy = population_energy(xi)
        stats, chance = _candidate_stats(xi, decoders, objective, budget, scale, rng_seed)
        for d in range(n_dec):
            if objective is Objective.JSD:
                if stats[d] is None:
                    continue
                mu, sigma = stats[d]
                scores = _jsd_scores(obs_mass, mu, sigma, grid)
            else:
                scores = _kappa_scores(stats[d], chance, obs_codes, budget.repeats)
            order = cand * n_dec + d
            for p in range(n_pairs):
                reducers[p].add(float(scores[p]), energy, order, cand, d)
    return [(r.best, r.entries) for r in reducers]


def _fit_many(
    observations: Sequence[EmpiricalFeedback],
    spec: GridSpec,
    objective: Objective,
    budget: SamplingBudget,
    workers: int,
    rng_seed,
    scale: Scale,
) -> list[FitResult]:
    total = spec.cardinality()
    if total == 0:
        raise ValueError("empty grid")
    if objective is Objective.JSD:
        grid = scale.grid()
        obs_payload = np.stack(
            [
                gaussian_grid_mass(grid, ob.gauss_mu, max(ob.gauss_sigma, SIGMA_FLOOR))
                for ob in observations
            ]
        )
    else:
        for ob in observations:
            if ob.ratings.size != _KAPPA_DRAWS:
                raise ValueError("kappa objective requires exactly 5 ratings per pair")
        obs_payload = [_histogram_code(ob.histogram) for ob in observations]

    n_chunks = 1 if workers <= 1 else workers * 8
    bounds = np.linspace(0, total, n_chunks + 1).astype(int)
    chunk_args = [
        (spec, objective, budget, scale, rng_seed, int(a), int(b), obs_payload)
        for a, b in zip(bounds[:-1], bounds[1:])
        if a < b
    ]
    tol = JSD_TIE_TOL if objective is Objective.JSD else 0.0
    reducers = [_Reducer(tol) for _ in observations]
    if workers <= 1:
        chunk_results = map(_score_chunk, chunk_args)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk_results = list(pool.map(_score_chunk, chunk_args))
    for result in chunk_results:
        for reducer, (best, entries) in zip(reducers, result):
            other = _Reducer(tol)
            other.best, other.entries = best, entries
            reducer.merge(other)

    axes = spec.axes()
    kind = ScoreKind.NORMALIZED_JSD if objective is Objective.JSD else ScoreKind.KAPPA_COMPLEMENT
    out = []
    for reducer in reducers:
        (score, energy, _order, cand, dec), ambiguity = reducer.finish()
        out.append(
            FitResult(
                xi=spec.vector(cand, axes),
                decoder=spec.decoders[dec],
                score=MetricScore(kind, score),
                ambiguity=ambiguity,
                energy=energy,
            )
        )
    return out


# ---------------------------------------------------------------------------
# public operations


def score_candidate(
    observed: EmpiricalFeedback,
    xi: CognitionVector,
    decoder: DecoderSpec,
    objective: Objective,
    budget: SamplingBudget = SamplingBudget(),
    rng_seed=0,
    scale: Scale = Scale(),
) -> float:
    """Disparity of one candidate against one observed pair; lower is better.

    JSD objective: normalised JSD between the observed ML Gaussian and the
    ML Gaussian of a model feedback sample.  Kappa objective: 1 - kappa so
    both objectives minimise.  Bit-for-bit reproducible under ``rng_seed``:
    the candidate's randomness depends only on the seed and its parameter
    values.
    """
    stats, chance = _candidate_stats(xi, (decoder,), objective, budget, scale, rng_seed)
    if objective is Objective.JSD:
        if stats[0] is None:
            return math.inf
        grid = scale.grid()
        obs_mass = gaussian_grid_mass(
            grid, observed.gauss_mu, max(observed.gauss_sigma, SIGMA_FLOOR)
        )[None, :]
        mu, sigma = stats[0]
        return float(_jsd_scores(obs_mass, mu, sigma, grid)[0])
    if observed.ratings.size != _KAPPA_DRAWS:
        raise ValueError("kappa objective requires exactly 5 ratings per pair")
    code = _histogram_code(observed.histogram)
    return float(_kappa_scores(stats[0], chance, [code], budget.repeats)[0])


def fit_pair(
    observed: EmpiricalFeedback,
    spec: GridSpec,
    objective: Objective,
    budget: SamplingBudget = SamplingBudget(),
    workers: int = 1,
    rng_seed=0,
    scale: Scale = Scale(),
    user: Optional[str] = None,
    item: Optional[str] = None,
) -> FitResult:
    """Best (cognition vector, decoder) for one pair over the full grid.

    Ties within the score tolerance resolve to the lowest population energy,
    then to canonical enumeration order; ``ambiguity`` reports the tie-set
    size.  The result does not depend on ``workers``.
    """
    result = _fit_many([observed], spec, objective, budget, workers, rng_seed, scale)[0]
    return FitResult(
        xi=result.xi, decoder=result.decoder, score=result.score,
        ambiguity=result.ambiguity, energy=result.energy, user=user, item=item,
    )


def fit_dataset(
    data,
    spec: GridSpec,
    objective: Objective,
    budget: SamplingBudget = SamplingBudget(),
    workers: int = 1,
    rng_seed=0,
    scale: Scale = Scale(),
    checkpoint_dir: Optional[str] = None,
    pair_batch: Optional[int] = None,
) -> list[FitResult]:
    """Fit every user-item pair of a rating dataset.

    Pairs lacking the objective's minimum trial count are skipped with a
    warning.  With ``checkpoint_dir`` completed pairs are recorded in
    ``results.jsonl``/``checkpoint.json`` and skipped on resume; because
    candidate randomness is independent of the pair set, a resumed run
    reproduces exactly the results of an uninterrupted one.
    """
    min_trials = _KAPPA_DRAWS if objective is Objective.KAPPA else 2
    eligible: list[tuple[str, str, EmpiricalFeedback]] = []
    for user, item in data.pairs():
        ratings = data.pair_ratings(user, item)
        if (objective is Objective.KAPPA and ratings.size != _KAPPA_DRAWS) or ratings.size < min_trials:
            log.warning("skipping under-sampled pair (%s, %s): %d trials", user, item, ratings.size)
            continue
        eligible.append((user, item, EmpiricalFeedback.from_ratings(ratings, scale)))

    done: dict[tuple[str, str], FitResult] = {}
    if checkpoint_dir:
        done = _load_checkpoint(checkpoint_dir, objective)
    todo = [(u, i, ob) for u, i, ob in eligible if (u, i) not in done]

    batch_size = pair_batch or max(len(todo), 1)
    for lo in range(0, len(todo), batch_size):
        batch = todo[lo : lo + batch_size]
        fitted = _fit_many([ob for _, _, ob in batch], spec, objective, budget, workers, rng_seed, scale)
        for (user, item, _), res in zip(batch, fitted):
            res = FitResult(
                xi=res.xi, decoder=res.decoder, score=res.score,
                ambiguity=res.ambiguity, energy=res.energy, user=user, item=item,
            )
            done[(user, item)] = res
        if checkpoint_dir:
            _append_checkpoint(checkpoint_dir, [done[(u, i)] for u, i, _ in batch], objective)
    return [done[(u, i)] for u, i, _ in eligible]


# ---------------------------------------------------------------------------
# serialisation


def fit_result_to_dict(result: FitResult, objective: Objective) -> dict:
    prior = result.decoder.prior
    return {
        "user": result.user,
        "item": result.item,
        "n": result.xi.n,
        "g": result.xi.g,
        "w": result.xi.w,
        "o": result.xi.o,
        "s": result.xi.s,
        "decoder": result.decoder.kind.value,
        "prior_mean": None if prior is None else prior.mean,
        "prior_variance": None if prior is None else prior.variance,
        "objective": objective.value,
        "score": result.score.value,
        "ambiguity": result.ambiguity,
        "energy": result.energy,
    }


def fit_result_from_dict(row: dict) -> FitResult:
    kind = DecoderKind(row["decoder"])
    prior = None
    if kind is DecoderKind.MAD:
        prior = GaussianPrior(row.get("prior_mean"), row.get("prior_variance", 0.75))
    objective = Objective(row.get("objective", "jsd"))
    score_kind = (
        ScoreKind.NORMALIZED_JSD if objective is Objective.JSD else ScoreKind.KAPPA_COMPLEMENT
    )
    return FitResult(
        xi=CognitionVector(n=int(row["n"]), g=row["g"], w=row["w"], o=row["o"], s=row["s"]),
        decoder=DecoderSpec(kind, prior),
        score=MetricScore(score_kind, row["score"]),
        ambiguity=int(row["ambiguity"]),
        energy=row["energy"],
        user=row.get("user"),
        item=row.get("item"),
    )


def write_fit_results(path: str, results: Sequence[FitResult], objective: Objective, manifest_hash: Optional[str] = None) -> None:
    with open(path, "w") as fh:
        if manifest_hash is not None:
            fh.write(json.dumps({"manifest_hash": manifest_hash}, sort_keys=True) + "\n")
        for res in results:
            fh.write(json.dumps(fit_result_to_dict(res, objective), sort_keys=True) + "\n")


def read_fit_results(path: str) -> list[FitResult]:
    out = []
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            if "manifest_hash" in row and "decoder" not in row:
                continue
            out.append(fit_result_from_dict(row))
    return out


def _load_checkpoint(checkpoint_dir: str, objective: Objective) -> dict:
    path = os.path.join(checkpoint_dir, "results.jsonl")
    if not os.path.exists(path):
        return {}
    return {(r.user, r.item): r for r in read_fit_results(path)}


def _append_checkpoint(checkpoint_dir: str, results: Sequence[FitResult], objective: Objective) -> None:
    os.makedirs(checkpoint_dir, exist_ok=True)
    path = os.path.join(checkpoint_dir, "results.jsonl")
    with open(path, "a") as fh:
        for res in results:
            fh.write(json.dumps(fit_result_to_dict(res, objective), sort_keys=True) + "\n")
    completed = sorted({(r.user, r.item) for r in read_fit_results(path)})
    with open(os.path.join(checkpoint_dir, "checkpoint.json"), "w") as fh:
        json.dump({"completed": [list(p) for p in completed]}, fh, sort_keys=True)
