"""Benchmark markets and household sampling."""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from market.errors import ParameterError, ValidationError
from market.models import Matching
from services.options import SolveOptions
from services.simulation import gen_benchmark, make_rng, sample_households, simulate_sample


class TestBenchmark:
    def test_deterministic(self):
        a = gen_benchmark(6, 42)
        b = gen_benchmark(6, 42)
        assert_array_equal(a.margins.n, b.margins.n)
        assert_array_equal(a.phi.phi, b.phi.phi)
        assert not np.array_equal(a.phi.phi, gen_benchmark(6, 43).phi.phi)

    def test_ranges(self):
        instance = gen_benchmark(50, 0)
        for side in (instance.margins.n, instance.margins.m):
            assert side.min() >= 1 and side.max() <= 100
            assert_array_equal(side, np.round(side))
        assert instance.phi.shape == (50, 50)
        assert not instance.phi.has_forbidden

    def test_invalid_size(self):
        with pytest.raises(ParameterError):
            gen_benchmark(0, 1)

    def test_seed_types(self):
        assert make_rng(np.random.SeedSequence(5)).random() == make_rng(np.random.SeedSequence(5)).random()
        rng = make_rng(3)
        assert make_rng(rng) is rng


class TestSampling:
    def test_counts_sum_to_households(self):
        mu = Matching([[1.0, 2.0], [0.5, 0.5]], [1.0, 0.0], [0.25, 0.75])
        data = sample_households(mu, 1000, seed=9)
        assert data.H == 1000
        assert data.muhat_x0[1] == 0

    def test_deterministic(self):
        mu = Matching([[1.0, 2.0]], [1.0], [0.5, 0.5])
        a = sample_households(mu, 500, seed=1)
        b = sample_households(mu, 500, seed=1)
        assert_array_equal(a.cells(), b.cells())

    def test_single_cell(self):
        mu = Matching([[0.0, 3.0]], [0.0], [0.0, 0.0])
        data = sample_households(mu, 77, seed=0)
        assert data.muhat.tolist() == [[0, 77]]

    def test_invalid_inputs(self):
        mu = Matching([[0.0]], [0.0], [0.0])
        with pytest.raises(ValidationError):
            sample_households(mu, 10, seed=0)
        with pytest.raises(ParameterError):
            sample_households(Matching([[1.0]], [1.0], [1.0]), 0, seed=0)

    @pytest.mark.slow
    def test_frequencies_converge(self):
        mu = Matching([[1.0, 2.0], [0.5, 0.5]], [1.0, 0.5], [0.25, 0.75])
        H = 2_000_000
        data = sample_households(mu, H, seed=3)
        assert_allclose(data.cells() / H, mu.cells() / mu.total_households, atol=1e-3)


class TestSimulateSample:
    def test_counts_follow_the_equilibrium(self, small_market, logit_sides):
        r, phi = small_market
        eq, data = simulate_sample(*logit_sides, phi, r, 5000, seed=2, opts=SolveOptions(tol=1e-10))
        assert eq.report.converged
        assert data.shape == r.shape
        assert data.H == 5000
