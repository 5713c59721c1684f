import math

import numpy as np
import pytest
from scipy import integrate as sint
from scipy import stats

from gmmpef.errors import EnvelopeError, ValidationError
from gmmpef.gmm import Gmm, log_pdf
from gmmpef.ped import Interval, PedNatural, log_partition, log_unnormalized, moments_numeric
from gmmpef.sampling import (
    auto_envelope,
    default_proposal,
    log_envelope,
    rejection_sample,
    sample_ped,
    theta_to_eta_mc,
)

BIMODAL = PedNatural([0.0, 1.0, 0.0, -0.25])


def ped_cdf(p):
    F = log_partition(p)

    def cdf(x):
        return np.array([sint.quad(lambda t: math.exp(log_unnormalized(p, t) - F), -np.inf, xi)[0] for xi in np.atleast_1d(x)])

    return cdf


class TestProposal:
    def test_moments(self):
        g = default_proposal(PedNatural([0, -0.5]))
        np.testing.assert_allclose(g.mus, [-1, 1], atol=1e-8)
        np.testing.assert_allclose(g.sigmas, 1.5, rtol=1e-8)


class TestEnvelope:
    def test_normal_target_normal_proposal(self):
        # exp(-x^2/2) / N(x; 0, 1) = sqrt(2 pi) everywhere
        c = auto_envelope(PedNatural([0, -0.5]), Gmm.single(), margin=0.0)
        assert c == pytest.approx(math.sqrt(2 * math.pi), rel=1e-10)

    def test_margin_inflates(self):
        a = log_envelope(BIMODAL, default_proposal(BIMODAL), margin=0.0)
        b = log_envelope(BIMODAL, default_proposal(BIMODAL), margin=0.01)
        assert b - a == pytest.approx(math.log(1.01))

    def test_dominates_on_grid(self):
        g = default_proposal(BIMODAL)
        lc = log_envelope(BIMODAL, g)
        x = np.linspace(-6, 6, 20_001)
        assert np.all(log_unnormalized(BIMODAL, x) <= lc + log_pdf(g, x))

    def test_light_tails_rejected(self):
        with pytest.raises(EnvelopeError, match="tails"):
            auto_envelope(PedNatural([0, -0.5]), Gmm.single(0.0, 0.5))


class TestRejection:
    def test_acceptance_rate_matches_theory(self):
        g = default_proposal(BIMODAL)
        lc = log_envelope(BIMODAL, g)
        res = rejection_sample(BIMODAL, g, None, np.random.default_rng(1), 50_000, log_c=lc)
        expected = math.exp(log_partition(BIMODAL) - lc)
        se = math.sqrt(expected * (1 - expected) / res.proposals)
        assert abs(res.acceptance_rate - expected) < 5 * se

    def test_ks(self):
        xs = sample_ped(BIMODAL, np.random.default_rng(2), 4000).samples
        assert stats.kstest(xs, ped_cdf(BIMODAL)).pvalue > 1e-3

    def test_interval_support(self):
        p = PedNatural([2.0], Interval(0.0, 1.0))
        xs = sample_ped(p, np.random.default_rng(3), 20_000, proposal=Gmm.single(0.5, 1.0)).samples
        assert np.all((xs > 0) & (xs < 1))
        mean = (math.exp(2) + 1) / (2 * (math.exp(2) - 1))  # E[X] for density ~ e^{2x} on (0, 1)
        assert abs(xs.mean() - mean) < 5 * xs.std() / math.sqrt(xs.size)

    def test_bad_envelope_detected(self):
        with pytest.raises(EnvelopeError, match="violated"):
            rejection_sample(PedNatural([0, -0.5]), Gmm.single(), 1.0, np.random.default_rng(0), 100)

    @pytest.mark.parametrize("c,n", [(None, 10), (-1.0, 10), (1.0, 0)])
    def test_validation(self, c, n):
        with pytest.raises(ValidationError):
            rejection_sample(PedNatural([0, -0.5]), Gmm.single(), c, np.random.default_rng(0), n)

    def test_seeded(self):
        a = sample_ped(BIMODAL, np.random.default_rng(7), 500).samples
        b = sample_ped(BIMODAL, np.random.default_rng(7), 500).samples
        np.testing.assert_array_equal(a, b)


class TestMcMoments:
    def test_within_standard_errors(self):
        n = 100_000
        rng = np.random.default_rng(11)
        eta = theta_to_eta_mc(BIMODAL, None, rng, n).eta
        mu = moments_numeric(BIMODAL, 8)
        for i in range(1, 5):
            se = math.sqrt((mu[2 * i] - mu[i] ** 2) / n)
            assert abs(eta[i - 1] - mu[i]) < 4 * se
