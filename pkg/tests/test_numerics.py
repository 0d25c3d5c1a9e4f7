import numpy as np
import pytest

from chocosim.numerics import (RandomStream, gaussian, require_finite,
                               sym_eigenvalues)


# -------------------------------------------------------------- eigenvalues

def test_identity_matrix_eigenvalues():
    vals = sym_eigenvalues(np.eye(3))
    np.testing.assert_allclose(vals, [1.0, 1.0, 1.0], atol=1e-14)


def test_rank_one_averaging_matrix():
    vals = sym_eigenvalues(np.full((2, 2), 0.5))
    np.testing.assert_allclose(vals, [1.0, 0.0], atol=1e-14)


def test_two_by_two_closed_form():
    # [[2,1],[1,2]] has eigenvalues 3 and 1
    vals = sym_eigenvalues(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 17, 40, 64])
def test_matches_reference_solver(n):
    # oracle: numpy's LAPACK-backed eigvalsh on random symmetric matrices
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n))
    a = (a + a.T) / 2
    expected = np.linalg.eigvalsh(a)[::-1]
    got = sym_eigenvalues(a)
    scale = max(1.0, float(np.max(np.abs(expected))))
    np.testing.assert_allclose(got, expected, atol=1e-10 * scale)


@pytest.mark.parametrize("n", [4, 16, 64])
def test_eigenvalue_sum_equals_trace(n):
    rng = np.random.default_rng(100 + n)
    a = rng.standard_normal((n, n))
    a = a + a.T
    vals = sym_eigenvalues(a)
    trace = float(np.trace(a))
    assert abs(np.sum(vals) - trace) <= 1e-9 * max(1.0, abs(trace))
    # second moment identity pins the whole spectrum, not just its sum
    assert np.isclose(np.sum(vals ** 2), np.sum(a * a), rtol=1e-9)


def test_descending_order():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((12, 12))
    vals = sym_eigenvalues(a + a.T)
    assert np.all(np.diff(vals) <= 1e-12)


def test_rejects_bad_matrices():
    with pytest.raises(ValueError):
        sym_eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        sym_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(FloatingPointError):
        sym_eigenvalues(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        sym_eigenvalues(np.zeros((300, 300)))


# ------------------------------------------------------------ random streams

def test_stream_determinism():
    a = RandomStream(42, worker=3, purpose="grad").normal(16)
    b = RandomStream(42, worker=3, purpose="grad").normal(16)
    np.testing.assert_array_equal(a, b)


def test_streams_differ_across_workers_and_purposes():
    base = RandomStream(42, worker=0, purpose="grad").normal(16)
    other_worker = RandomStream(42, worker=1, purpose="grad").normal(16)
    other_purpose = RandomStream(42, worker=0, purpose="compress").normal(16)
    other_seed = RandomStream(43, worker=0, purpose="grad").normal(16)
    assert not np.array_equal(base, other_worker)
    assert not np.array_equal(base, other_purpose)
    assert not np.array_equal(base, other_seed)


def test_per_iteration_substreams_are_order_independent():
    s1 = RandomStream(5, 0, "grad")
    s2 = RandomStream(5, 0, "grad")
    early_then_late = (s1.at(1).standard_normal(4), s1.at(9).standard_normal(4))
    late_then_early = (s2.at(9).standard_normal(4), s2.at(1).standard_normal(4))
    np.testing.assert_array_equal(early_then_late[0], late_then_early[1])
    np.testing.assert_array_equal(early_then_late[1], late_then_early[0])


def test_substream_distinct_from_base_stream():
    s = RandomStream(5, 0, "grad")
    base = s.clone().normal(8)
    sub = s.at(0).standard_normal(8)
    assert not np.array_equal(base, sub)


def test_zero_std_draw_is_exact_zero_and_advances():
    s = RandomStream(1, 0, "noise")
    z = s.normal(6, std=0.0)
    np.testing.assert_array_equal(z, np.zeros(6))
    # the draw still consumed randomness: next values differ from a fresh stream
    fresh = RandomStream(1, 0, "noise").normal(6)
    assert not np.array_equal(s.normal(6), fresh)


def test_gaussian_helper_statistics():
    s = RandomStream(11, 0, "noise")
    draws = gaussian(s, 100_000, std=1.0)
    assert abs(float(draws.mean())) < 0.02  # 3 sigma / sqrt(N) bound
    assert abs(float(draws.std()) - 1.0) < 0.02


def test_uniform_and_integer_ranges():
    s = RandomStream(3, 2, "aux")
    u = s.uniform(1000)
    assert np.all((u >= 0.0) & (u < 1.0))
    ints = s.integers(0, 10, 1000)
    assert ints.min() >= 0 and ints.max() <= 9
    picked = s.choice(20, 5)
    assert len(set(picked.tolist())) == 5


def test_draw_sizes_are_scalar_counts():
    s = RandomStream(3, 0, "aux")
    assert s.normal(0).shape == (0,)
    with pytest.raises(TypeError):
        s.normal((2, 3))  # shaped draws are out of contract, not silently cast
    with pytest.raises(TypeError):
        s.integers(0, 10, (4,))
    with pytest.raises(ValueError):
        s.uniform(-1)
    with pytest.raises(ValueError):
        s.normal(4, std=-1.0)


def test_require_finite():
    require_finite(np.ones(3), "ok")
    with pytest.raises(FloatingPointError):
        require_finite(np.array([1.0, np.inf]), "bad")
    with pytest.raises(FloatingPointError):
        require_finite(np.array([np.nan]), "bad")
