import numpy as np
from scipy import stats

from ucsma.rng import exponential, make_streams, uniform


def test_streams_prefix_stable():
    a = make_streams(7, 5)
    b = make_streams(7, 9)
    assert np.array_equal(a, b[:, :5])


def test_streams_distinct_per_seed():
    assert not np.array_equal(make_streams(1, 4), make_streams(2, 4))


def test_uniform_range_and_distribution():
    rs = make_streams(0, 1)
    u = np.array([uniform(rs, 0, 0) for _ in range(20000)])
    assert u.min() > 0 and u.max() <= 1
    assert stats.kstest(u, "uniform").pvalue > 0.001


def test_exponential_mean():
    rs = make_streams(3, 2)
    x = np.array([exponential(rs, 2, 1, 4.0) for _ in range(20000)])
    assert stats.kstest(x, "expon", args=(0, 0.25)).pvalue > 0.001
