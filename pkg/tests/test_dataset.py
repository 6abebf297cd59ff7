import numpy as np
import pytest

from nppc import (
    CognitionVector,
    DataValidationError,
    DecoderSpec,
    NppcPlanted,
    Scale,
    SynthSpec,
    export,
    ingest,
    round_to_stars,
    synthesize,
    write_ground_truth,
)
from nppc.dataset import RatingDataset


class TestRoundToStars:
    def test_halves_move_away_from_midpoint(self):
        assert round_to_stars(3.5, Scale()) == 4.0
        assert round_to_stars(2.5, Scale()) == 2.0
        assert round_to_stars(4.5, Scale()) == 5.0
        assert round_to_stars(1.5, Scale()) == 1.0

    def test_clipping(self):
        assert round_to_stars(0.2, Scale()) == 1.0
        assert round_to_stars(6.8, Scale()) == 5.0


class TestIngest:
    def test_round_trip(self, tmp_path):
        data, _ = synthesize(SynthSpec(users=5, items=3, trials=5), "stochastic", rng_seed=1)
        path = tmp_path / "ratings.csv"
        export(data, path)
        again = ingest(path)
        assert again.pairs() == data.pairs()
        for pair in data.pairs():
            assert np.array_equal(again.ratings[pair], data.ratings[pair])

    def test_rating_out_of_scale(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("user,item,trial,rating\nu,i,1,6\n")
        with pytest.raises(DataValidationError, match="outside scale"):
            ingest(path)

    def test_duplicate_record(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("user,item,trial,rating\nu,i,1,3\nu,i,1,4\n")
        with pytest.raises(DataValidationError, match="duplicate"):
            ingest(path)

    def test_non_dense_trials(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("user,item,trial,rating\nu,i,1,3\nu,i,3,4\n")
        with pytest.raises(DataValidationError, match="non-dense"):
            ingest(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "mal.csv"
        path.write_text("user,item,trial,rating\nu,i,1,3\nu,i,two,4\n")
        with pytest.raises(DataValidationError, match=":3"):
            ingest(path)

    def test_header_required(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b,c,d\nu,i,1,3\n")
        with pytest.raises(DataValidationError, match="header"):
            ingest(path)


class TestStochasticSynthesis:
    def test_default_shape(self):
        data, truth = synthesize(SynthSpec(), "stochastic", rng_seed=0)
        assert data.n_records() == 1675
        assert len(data.users()) == 67 and len(data.items()) == 5
        assert data.trial_count() == 5
        assert len(truth) == 335

    def test_deterministic(self):
        a, _ = synthesize(SynthSpec(users=6, items=3), "stochastic", rng_seed=9)
        b, _ = synthesize(SynthSpec(users=6, items=3), "stochastic", rng_seed=9)
        assert a.pairs() == b.pairs()
        for pair in a.pairs():
            assert np.array_equal(a.ratings[pair], b.ratings[pair])

    def test_ratings_are_valid_stars(self):
        data, _ = synthesize(SynthSpec(users=10, items=4), "stochastic", rng_seed=2)
        for pair in data.pairs():
            r = data.ratings[pair]
            assert np.all(r == np.floor(r)) and r.min() >= 1 and r.max() <= 5

    def test_mix_roughly_matches_single_seed(self):
        data, truth = synthesize(SynthSpec(), "stochastic", rng_seed=4)
        distinct = np.array([np.unique(data.ratings[p]).size for p in data.pairs()])
        mix = [np.mean(distinct == 1), np.mean(distinct == 2), np.mean(distinct >= 3)]
        assert abs(mix[0] - 0.35) < 0.08
        assert abs(mix[1] - 0.50) < 0.08
        assert abs(mix[2] - 0.15) < 0.08

    def test_categories_match_realised_counts(self):
        data, truth = synthesize(SynthSpec(users=8, items=3), "stochastic", rng_seed=6)
        for row in truth:
            distinct = np.unique(data.ratings[(row["user"], row["item"])]).size
            if row["category"] == "constant":
                assert distinct == 1
            elif row["category"] == "two":
                assert distinct == 2
            else:
                assert distinct >= 3


class TestPlantedSynthesis:
    def test_high_gain_wad_is_nearly_constant(self):
        plan = lambda rng, users, items: {
            (u, i): (CognitionVector(100, 100.0, 1.0, 1.0, 3.0), DecoderSpec.wad())
            for u in range(users) for i in range(items)
        }
        data, truth = synthesize(SynthSpec(users=4, items=2, trials=5), NppcPlanted(plan=plan), rng_seed=3)
        for pair in data.pairs():
            assert np.unique(data.ratings[pair]).size == 1
        assert truth[0]["decoder"] == "wad"

    def test_default_plan_covers_all_pairs(self):
        data, truth = synthesize(SynthSpec(users=6, items=5, trials=5), NppcPlanted(), rng_seed=1)
        assert len(truth) == 30
        assert data.n_records() == 150

    def test_ground_truth_sidecar(self, tmp_path):
        _, truth = synthesize(SynthSpec(users=2, items=2, trials=5), NppcPlanted(), rng_seed=1)
        path = tmp_path / "truth.jsonl"
        write_ground_truth(path, truth)
        lines = path.read_text().splitlines()
        assert len(lines) == 4


class TestRatingDataset:
    def test_pair_statistics(self):
        data = RatingDataset.from_records(
            [("u", "i", 1, 2), ("u", "i", 2, 4)], Scale()
        )
        assert data.pair_mean("u", "i") == 3.0
        assert data.pair_ml_variance("u", "i") == 1.0

    def test_non_integer_rating_rejected(self):
        with pytest.raises(DataValidationError, match="non-integer"):
            RatingDataset.from_records([("u", "i", 1, 3.5)], Scale())
