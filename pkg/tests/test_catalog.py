import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vehcache.catalog import CacheVector, Catalog, project_cache_vector, validate_cache_vector, zipf_popularity
from vehcache.errors import DimensionMismatch, DomainError


def test_zipf_examples():
    np.testing.assert_allclose(zipf_popularity(4, 1.0), [0.48, 0.24, 0.16, 0.12], rtol=1e-14)
    np.testing.assert_allclose(zipf_popularity(5, 0.0), [0.2] * 5, rtol=1e-14)
    np.testing.assert_array_equal(zipf_popularity(1, 2.5), [1.0])


@pytest.mark.parametrize("args", [(0, 1.0), (5, -0.1)])
def test_zipf_domain(args):
    with pytest.raises(DomainError):
        zipf_popularity(*args)


@given(st.integers(1, 2000), st.one_of(st.just(0.0), st.floats(0.01, 3.0)))
def test_zipf_normalized_and_ordered(n, phi):
    p = zipf_popularity(n, phi)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    if phi > 0 and n > 1:
        assert np.all(np.diff(p) < 0)
    if phi == 0:
        np.testing.assert_allclose(p, 1.0 / n)


def test_validate_examples():
    cat2 = Catalog.zipf(2, 1e6, 0.7)
    assert validate_cache_vector(CacheVector(np.array([1.0, 1.0]), 2e6), cat2)
    cat3 = Catalog.zipf(3, 1e6, 0.7)
    res = validate_cache_vector(CacheVector(np.array([1.0, 1.0, 0.5]), 2e6), cat3)
    assert not res and res.constraint == "C2"
    res = validate_cache_vector(CacheVector(np.array([1.2, 0.0]), 2e6), cat2)
    assert not res and res.constraint == "C3" and res.index == 0


def test_validate_reports_first_box_violation():
    cat = Catalog.zipf(4, 1.0, 0.7)
    res = validate_cache_vector(CacheVector(np.array([0.5, -0.2, 2.0, 0.0]), 10.0), cat)
    assert res.constraint == "C3" and res.index == 1


def test_validate_length_mismatch():
    with pytest.raises(DimensionMismatch):
        validate_cache_vector(CacheVector(np.zeros(3), 1.0), Catalog.zipf(4, 1.0, 0.7))


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-2, 3)), st.floats(0.0, 40.0))
def test_projection_is_always_feasible(q, budget):
    cat = Catalog.zipf(q.size, 1e6, 0.7)
    proj = project_cache_vector(q, 1e6, budget * 1e6)
    assert validate_cache_vector(CacheVector(proj, budget * 1e6), cat)


def test_projection_keeps_feasible_points():
    q = np.array([0.2, 0.5, 0.0])
    np.testing.assert_array_equal(project_cache_vector(q, 1.0, 1.0), q)
