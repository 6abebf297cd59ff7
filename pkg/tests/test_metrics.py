import math

import mpmath
import numpy as np
import pytest

from nppc import (
    CognitionVector,
    DecoderSpec,
    DiscretizedDensity,
    EmpiricalFeedback,
    MAX_JSD_BITS,
    Scale,
    cohen_kappa,
    discretize_gaussian,
    gaussian_ml_fit,
    jsd,
    mse_ratio,
    normalized_jsd,
    sample_feedback,
)
from nppc.metrics import SIGMA_FLOOR, _pattern_codes, kappa_from_agreement

SCALE = Scale()


class TestEmpiricalFeedback:
    def test_histogram_and_moments(self):
        fb = EmpiricalFeedback.from_ratings([2, 3, 3, 4, 3])
        assert fb.histogram.tolist() == [0, 1, 3, 1, 0]
        assert fb.gauss_mu == pytest.approx(3.0)
        assert fb.gauss_sigma == pytest.approx(math.sqrt(0.4))

    def test_rejects_out_of_scale(self):
        with pytest.raises(ValueError):
            EmpiricalFeedback.from_ratings([2, 3, 6, 4, 3])


class TestGaussianMlFit:
    def test_degenerate(self):
        fit = gaussian_ml_fit([3, 3, 3, 3, 3])
        assert fit == (3.0, 0.0) and fit.degenerate

    def test_two_points(self):
        assert gaussian_ml_fit([1, 5]) == pytest.approx((3.0, 2.0))

    def test_ml_variance_divides_by_n(self):
        fit = gaussian_ml_fit([2, 3, 3, 4, 3])
        assert fit.mu == pytest.approx(3.0)
        assert fit.sigma == pytest.approx(math.sqrt(2 / 5))

    def test_consistency_on_model_feedback(self):
        xi = CognitionVector(100, 5.0, 1.0, 5.0, 3.0)
        values = sample_feedback(xi, DecoderSpec.wad(), SCALE, 200_000, 13).values
        fit = gaussian_ml_fit(values)
        assert fit.mu == pytest.approx(values.mean(), abs=1e-2)
        assert fit.sigma == pytest.approx(values.std(), abs=1e-2)


class TestCohenKappa:
    def test_perfect_agreement(self):
        # a single neuron at the midpoint decodes to 3.0 every time under MVD
        observed = EmpiricalFeedback.from_ratings([3, 3, 3, 3, 3])
        xi = CognitionVector(1, 5.0, 1.0, 5.0, 3.0)
        kappa = cohen_kappa(observed, xi, DecoderSpec.mvd(), repeats=500, rng_seed=1)
        assert kappa == 1.0

    def test_chance_level_is_zero(self):
        assert kappa_from_agreement(0.3, 0.3) == 0.0

    def test_undefined_when_chance_is_certain(self):
        with pytest.raises(ValueError, match="kappa undefined"):
            kappa_from_agreement(1.0, 1.0)

    def test_uniform_model_matches_multinomial_oracle(self):
        # both raters uniform: the exact-match probability for the observed
        # histogram (0,0,5,0,0) is (1/5)^5, so kappa sits at chance level
        repeats = 100_000
        rng = np.random.default_rng(42)
        obs_code = 0
        for count in (0, 0, 5, 0, 0):
            obs_code = obs_code * 64 + count
        p_codes = _pattern_codes(rng.integers(1, 6, size=5 * repeats).astype(float), repeats, 5, SCALE)
        c_codes = _pattern_codes(rng.integers(1, 6, size=5 * repeats).astype(float), repeats, 5, SCALE)
        p0 = float(np.mean(p_codes == obs_code))
        pc = float(np.mean(c_codes == obs_code))
        analytic = (1 / 5) ** 5
        assert p0 == pytest.approx(analytic, abs=1e-4)
        assert abs(kappa_from_agreement(p0, pc)) < 0.01

    def test_kappa_at_most_one(self):
        observed = EmpiricalFeedback.from_ratings([2, 3, 3, 4, 3])
        xi = CognitionVector(40, 8.0, 1.0, 5.0, 3.0)
        kappa = cohen_kappa(observed, xi, DecoderSpec.wad(), repeats=300, rng_seed=5)
        assert kappa <= 1.0


class TestJsd:
    def test_identical_is_zero(self):
        p = discretize_gaussian(3.0, 0.5, SCALE)
        assert jsd(p, p) == 0.0

    def test_disjoint_supports_reach_bound(self):
        grid = SCALE.grid()
        a = np.zeros_like(grid)
        b = np.zeros_like(grid)
        a[:10] = 0.1
        b[-10:] = 0.1
        value = jsd(DiscretizedDensity(grid, a), DiscretizedDensity(grid, b))
        assert value == pytest.approx(MAX_JSD_BITS, abs=1e-12)

    def test_grid_mismatch_errors(self):
        p = discretize_gaussian(3.0, 0.5, SCALE)
        q = discretize_gaussian(3.0, 0.5, Scale(grid_points=101))
        with pytest.raises(ValueError):
            jsd(p, q)

    def test_unnormalised_mass_errors(self):
        grid = SCALE.grid()
        bad = DiscretizedDensity(grid, np.full_like(grid, 0.5))
        good = discretize_gaussian(3.0, 0.5, SCALE)
        with pytest.raises(ValueError):
            jsd(good, bad)

    def test_matches_extended_precision_oracle(self):
        value = jsd(discretize_gaussian(3.0, 0.5, SCALE), discretize_gaussian(3.0, 1.0, SCALE))
        oracle = _jsd_oracle(3.0, 0.5, 3.0, 1.0, SCALE)
        assert value == pytest.approx(oracle, abs=1e-6)

    def test_normalized_range_and_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p = discretize_gaussian(rng.uniform(1, 5), rng.uniform(0.05, 2), SCALE)
            q = discretize_gaussian(rng.uniform(1, 5), rng.uniform(0.05, 2), SCALE)
            v = normalized_jsd(p, q)
            assert 0.0 <= v <= 1.0
            assert v == normalized_jsd(q, p)

    def test_sigma_floor_applied(self):
        d = discretize_gaussian(3.0, 0.0, SCALE)
        reference = discretize_gaussian(3.0, SIGMA_FLOOR, SCALE)
        assert np.array_equal(d.mass, reference.mass)


def _jsd_oracle(mu1, sd1, mu2, sd2, scale):
    """Independent JSD evaluation in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    grid = [mpmath.mpf(scale.lo) + (mpmath.mpf(scale.hi) - scale.lo) * i / (scale.grid_points - 1)
            for i in range(scale.grid_points)]

    def masses(mu, sd):
        vals = [mpmath.exp(-((x - mu) ** 2) / (2 * mpmath.mpf(sd) ** 2)) for x in grid]
        total = mpmath.fsum(vals)
        return [v / total for v in vals]

    p = masses(mu1, sd1)
    q = masses(mu2, sd2)
    m = [(a + b) / 2 for a, b in zip(p, q)]
    kl_p = mpmath.fsum(a * mpmath.log(a / c) / mpmath.log(2) for a, c in zip(p, m) if a > 0)
    kl_q = mpmath.fsum(b * mpmath.log(b / c) / mpmath.log(2) for b, c in zip(q, m) if b > 0)
    return float(kl_p / 2 + kl_q / 2)


class TestMseRatio:
    def test_mid_scale_normaliser(self):
        # worst squared error at s=3 on a 5-star scale is 4
        assert mse_ratio(3.0, [1.0], SCALE) == pytest.approx(1.0)

    def test_boundary_normaliser(self):
        # worst squared error at s=1 is 16
        assert mse_ratio(1.0, [5.0], SCALE) == pytest.approx(1.0)
        assert mse_ratio(1.0, [3.0], SCALE) == pytest.approx(4 / 16)

    def test_exact_estimates_zero(self):
        assert mse_ratio(2.5, [2.5, 2.5, 2.5], SCALE) == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            s = rng.uniform(1, 5)
            est = rng.uniform(1, 5, size=50)
            assert 0.0 <= mse_ratio(s, est, SCALE) <= 1.0
