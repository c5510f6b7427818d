import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eucrates.errors import ConfigError, UsageError
from eucrates.sampling import (
    AffineDensity,
    BlockDensity,
    HolderDensity,
    SeedSpec,
    approximate_block,
    density_power_integral,
    l1_gap,
    lemma_bound,
    parse_sampler,
    poisson_count,
    sample_block,
    sample_holder,
    sample_poisson,
    sample_uniform,
)


def test_seedspec_streams():
    ss = SeedSpec(42)
    a = ss.stream(10, 3).random(5)
    assert np.array_equal(a, SeedSpec(42).stream(10, 3).random(5))
    assert not np.array_equal(a, ss.stream(10, 4).random(5))
    assert not np.array_equal(a, ss.stream(11, 3).random(5))
    for bad in (-1, 2**64, 1.5, True):
        with pytest.raises(UsageError):
            SeedSpec(bad)


def test_uniform_basics():
    assert len(sample_uniform(0, 2, 1)) == 0
    x = sample_uniform(10_000, 2, SeedSpec(1).stream(0, 0)).coords
    assert np.all((x >= 0) & (x < 1))
    assert np.all(np.abs(x.mean(axis=0) - 0.5) <= 4 / math.sqrt(12 * 10_000) * math.sqrt(12))
    assert sample_uniform(7, 3, 5) == sample_uniform(7, 3, 5)


def test_uniform_prefix_property():
    ss = SeedSpec(3)
    small = sample_uniform(50, 2, ss.stream(1, 1)).coords
    big = sample_uniform(80, 2, ss.stream(1, 1)).coords
    assert np.array_equal(big[:50], small)


def test_poisson_counts():
    ss = SeedSpec(8)
    counts = np.array([poisson_count(50, ss.stream(50, t)) for t in range(10_000)])
    assert abs(counts.mean() - 50) <= 4 * math.sqrt(50 / 10_000)
    counts = np.array([poisson_count(100, ss.stream(100, t)) for t in range(10_000)])
    assert 0.9 <= counts.var(ddof=1) / counts.mean() <= 1.1


def test_poisson_degenerate_and_errors():
    ps = sample_poisson(1e-9, 2, 3)
    assert len(ps) == 0 and ps.dim == 2
    with pytest.raises(UsageError):
        sample_poisson(0, 2, 1)


def test_poisson_is_prefix_of_uniform_stream():
    ss = SeedSpec(4)
    ps = sample_poisson(30, 2, ss.stream(30, 0), ss.stream(30, 0, 1))
    uni = sample_uniform(len(ps), 2, ss.stream(30, 0))
    assert ps == uni


def test_block_uniform_chi_square():
    phi = BlockDensity.uniform(3, 2)
    x = sample_block(10_000, phi, 12).coords
    counts = np.bincount(np.clip((x * 3).astype(int), 0, 2) @ np.array([3, 1]), minlength=9)
    expected = 10_000 / 9
    stat = float(((counts - expected) ** 2 / expected).sum())
    df = 8
    assert stat <= df + 4 * math.sqrt(2 * df)


def test_block_single_cell():
    w = np.zeros(4)
    w[2] = 4.0
    x = sample_block(500, BlockDensity(2, 2, w), 1).coords
    assert np.all((x[:, 0] >= 0.5) & (x[:, 1] < 0.5))


def test_block_cell_frequencies():
    phi = BlockDensity(2, 2, np.array([2, 2 / 3, 2 / 3, 2 / 3]))
    n = 10_000
    x = sample_block(n, phi, 99).coords
    cell = np.minimum((x * 2).astype(int), 1) @ np.array([2, 1])
    freq = np.bincount(cell, minlength=4) / n
    target = np.array([0.5, 1 / 6, 1 / 6, 1 / 6])
    assert np.all(np.abs(freq - target) <= 4 * np.sqrt(target * (1 - target) / n))


def test_block_validation_and_io(tmp_path):
    with pytest.raises(UsageError):
        BlockDensity(2, 2, np.array([1, 1, 1, 0.5]))
    with pytest.raises(UsageError):
        BlockDensity(2, 2, np.array([3, -1, 1, 1]))
    with pytest.raises(UsageError):
        BlockDensity(2, 2, np.ones(3))
    phi = BlockDensity(2, 2, np.array([2, 2 / 3, 2 / 3, 2 / 3]))
    path = tmp_path / "phi.txt"
    phi.write(path)
    assert path.read_text().splitlines()[0] == "2 2"
    back = BlockDensity.read(path)
    assert np.array_equal(back.weights, phi.weights)


def test_approximate_block_examples():
    assert np.allclose(approximate_block(AffineDensity(0.0), 4).weights, 1.0)
    phi = approximate_block(AffineDensity(1.0), 2)
    assert phi.weights == pytest.approx([0.75, 0.75, 1.25, 1.25], abs=1e-15)


def test_l1_gap_examples():
    f = AffineDensity(2.0)
    assert l1_gap(f, approximate_block(f, 2)) == pytest.approx(0.25, abs=1e-9)
    g = AffineDensity(0.0)
    assert l1_gap(g, approximate_block(g, 3)) == 0.0
    assert lemma_bound(f, 2) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_l1_gap_bound_and_monotone(a):
    f = AffineDensity(a)
    gaps = [l1_gap(f, approximate_block(f, m)) for m in (1, 2, 4, 8, 16, 32)]
    for m, g in zip((1, 2, 4, 8, 16), gaps):
        assert g <= lemma_bound(f, m)
    assert all(b <= a_ + 1e-15 for a_, b in zip(gaps, gaps[1:]))
    # affine gap is exactly a / (4m)
    assert gaps[1] == pytest.approx(a / 8, abs=1e-12)


def test_density_power_integral_examples():
    assert density_power_integral(BlockDensity.uniform(3, 2), 0.5) == pytest.approx(1.0)
    phi = BlockDensity(2, 2, np.array([2.0, 2.0, 0.0, 0.0]))
    assert density_power_integral(phi, 0.5) == pytest.approx(0.70710678, abs=1e-8)
    closed = (2 / 3) * (1.5**1.5 - 0.5**1.5)
    assert density_power_integral(AffineDensity(1.0), 0.5) == pytest.approx(closed, abs=1e-12)


def test_generic_holder_quadrature_agrees_with_closed_form():
    aff = AffineDensity(1.0)
    gen = HolderDensity(lambda x: 1.0 + (np.atleast_2d(x)[:, 0] - 0.5), 2, 1.0, 1.0)
    assert density_power_integral(gen, 0.5) == pytest.approx(density_power_integral(aff, 0.5), abs=1e-6)
    assert approximate_block(gen, 4).weights == pytest.approx(approximate_block(aff, 4).weights, abs=1e-12)
    assert l1_gap(gen, approximate_block(gen, 2)) == pytest.approx(l1_gap(aff, approximate_block(aff, 2)), abs=1e-6)


def test_holder_sampler_marginal():
    f = AffineDensity(1.5)
    x = sample_holder(20_000, f, 5).coords
    # E x_1 = 1/2 + a/12
    assert abs(x[:, 0].mean() - (0.5 + 1.5 / 12)) <= 4 * x[:, 0].std() / math.sqrt(20_000)
    assert abs(x[:, 1].mean() - 0.5) <= 4 / math.sqrt(12 * 20_000)
    with pytest.raises(UsageError):
        AffineDensity(2.5)


def test_parse_sampler(tmp_path):
    assert parse_sampler("uniform", 2).kind == "uniform"
    assert parse_sampler("poisson", 2).kind == "poisson"
    h = parse_sampler("holder(a=1)", 2)
    assert h.kind == "holder" and h.density.a == 1.0
    b = parse_sampler("block(weights=2 0.6666666666666666 0.6666666666666666 0.6666666666666667)", 2)
    assert b.density.m == 2
    path = tmp_path / "phi.txt"
    BlockDensity.uniform(2, 2).write(path)
    assert parse_sampler(f"block(path={path})", 2).density.m == 2
    for bad in ("holder", "uniform(a=1)", "block()", "gauss"):
        with pytest.raises((ConfigError, UsageError)):
            parse_sampler(bad, 2)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.integers(1, 12), st.integers(1, 3))
def test_block_approx_preserves_mass(a, m, d):
    phi = approximate_block(AffineDensity(a, d), m)
    assert abs(math.fsum(phi.probabilities) - 1.0) <= 1e-12
    assert density_power_integral(phi, 1.0) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=4, max_size=4).filter(lambda w: sum(w) > 0.1), st.integers(0, 2**32))
def test_block_density_samples_stay_in_support(w, seed):
    w = np.array(w) * 4 / sum(w)
    phi = BlockDensity(2, 2, w)
    x = sample_block(200, phi, seed).coords
    assert np.all(phi.pdf(x) > 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 1.0))
def test_power_integral_at_most_one(a, q):
    # Jensen: integral of f^q <= (integral f)^q = 1
    assert density_power_integral(AffineDensity(a), q) <= 1 + 1e-12
