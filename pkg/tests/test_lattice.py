import numpy as np
import pytest

from defectchain.lattice import (LatticeSpec, cosine_weighted_sum,
                                 distance_power_sum, periodic_distance,
                                 periodic_distances, site_index)


def test_lattice_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(2, 1.0, 0)
    with pytest.raises(ValueError):
        LatticeSpec(10, -1.0, 0)
    spec = LatticeSpec(10, 1.0, 13)
    assert spec.n0 == 3          # reduced at the boundary


def test_periodic_distance_examples():
    assert periodic_distance(0, 0, 50) == 0
    assert periodic_distance(2, 27, 50) == 25
    assert periodic_distance(1, 48, 50) == 3


def test_periodic_distance_symmetry_and_translation():
    rng = np.random.default_rng(1)
    for _ in range(200):
        N = int(rng.integers(3, 100))
        a, b, s = (int(v) for v in rng.integers(-200, 200, size=3))
        a, b = site_index(a, N), site_index(b, N)
        assert periodic_distance(a, b, N) == periodic_distance(b, a, N)
        assert periodic_distance(a + s, b + s, N) == periodic_distance(a, b, N)
        assert 0 <= periodic_distance(a, b, N) <= N // 2


@pytest.mark.parametrize("N", list(range(3, 66)) + [128, 501, 1000])
def test_distance_power_sum_exact(N):
    d = periodic_distances(N).astype(float)
    assert distance_power_sum(1, N) == d.sum()
    assert distance_power_sum(2, N) == (d * d).sum()


def test_distance_power_sum_examples_and_errors():
    assert distance_power_sum(1, 4) == 4.0
    assert distance_power_sum(2, 5) == 10.0
    assert distance_power_sum(2, 4) == 6.0       # [n] values {0,1,2,1}
    with pytest.raises(ValueError):
        distance_power_sum(3, 10)


def test_cosine_weighted_sum_examples():
    assert abs(cosine_weighted_sum(2, 1, 4) - (-4.0)) < 1e-14
    assert abs(cosine_weighted_sum(1, 1, 4) - (-2.0)) < 1e-14
    direct = sum(periodic_distances(5)[n] ** 2 * np.cos(4 * np.pi * n / 5)
                 for n in range(1, 5))
    assert abs(cosine_weighted_sum(2, 2, 5) - direct) < 1e-13


@pytest.mark.parametrize("N", range(3, 65))
def test_cosine_weighted_sum_matches_direct(N):
    # the oracle runs in extended precision with exactly reduced angles:
    # in float64 its own cancellation noise would exceed the 1e-12 target
    d = periodic_distances(N).astype(np.longdouble)
    n = np.arange(1, N)
    two_pi = 8 * np.arctan(np.longdouble(1))
    for p in (1, 2):
        for y in range(1, N):
            direct = float(d[1:] ** p @ np.cos(two_pi * ((y * n) % N) / N))
            closed = cosine_weighted_sum(p, y, N)
            assert abs(direct - closed) <= 1e-12 * max(1.0, abs(direct))


def test_cosine_weighted_sum_rejects_zero_class():
    with pytest.raises(ValueError):
        cosine_weighted_sum(1, 0, 8)
    with pytest.raises(ValueError):
        cosine_weighted_sum(2, 16, 8)
