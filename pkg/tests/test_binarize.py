import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbvla.binarize import (dequantize_band, dequantize_group, group_sse,
                            quantize_band_grouped, quantize_band_shared_mean,
                            quantize_group, split_band)
from hbvla.tensor import make_rng


def grid_best_alpha(u, mu, signs, n_points=10_000):
    """Grid-search oracle for the optimal scale given fixed mu and signs."""
    dev = u - mu
    s = np.where(signs, 1.0, -1.0)
    hi = 2.0 * np.max(np.abs(dev)) if np.max(np.abs(dev)) > 0 else 1.0
    grid = np.linspace(0.0, hi, n_points)
    errs = [np.sum((dev - a * s) ** 2) for a in grid]
    k = int(np.argmin(errs))
    return grid[k], grid[1] - grid[0]


def exhaustive_two_group_error(u, mu_override=None):
    """Best total error over every deviation-ordered two-way split."""
    u = np.asarray(u, dtype=np.float64)
    center = np.mean(u) if mu_override is None else mu_override
    order = np.argsort(np.abs(u - center), kind="stable")
    best = group_sse(u, mu_override)
    for k in range(1, u.size):
        err = (group_sse(u[order[:k]], mu_override)
               + group_sse(u[order[k:]], mu_override))
        best = min(best, err)
    return best


def test_quantize_group_example():
    p = quantize_group([1.0, 2.0, 3.0, 4.0])
    assert p.mu == 2.5
    assert p.alpha == 1.0
    assert p.signs.tolist() == [False, False, True, True]
    assert dequantize_group(p).tolist() == [1.5, 1.5, 3.5, 3.5]


def test_quantize_group_constant_exact():
    p = quantize_group([3.0, 3.0, 3.0])
    assert p.mu == 3.0 and p.alpha == 0.0
    assert dequantize_group(p).tolist() == [3.0, 3.0, 3.0]


def test_quantize_group_symmetric_pair_exact():
    p = quantize_group([-1.0, 1.0])
    assert p.mu == 0.0 and p.alpha == 1.0
    assert dequantize_group(p).tolist() == [-1.0, 1.0]


def test_sign_zero_is_positive():
    p = quantize_group([0.0, 0.0, 2.0, -2.0])
    assert p.signs.tolist() == [True, True, True, False]


def test_alpha_matches_grid_oracle():
    rng = make_rng(21)
    for trial in range(30):
        u = rng.normal(size=rng.integers(2, 12)) * rng.uniform(0.1, 5.0)
        p = quantize_group(u)
        best, step = grid_best_alpha(u, p.mu, p.signs)
        assert abs(p.alpha - best) <= step


def test_alpha_optimal_with_override():
    rng = make_rng(22)
    u = rng.normal(size=8)
    p = quantize_group(u, mu_override=0.3)
    best, step = grid_best_alpha(u, 0.3, p.signs)
    assert abs(p.alpha - best) <= step


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=16),
       st.one_of(st.none(), st.floats(-10, 10)))
def test_dequantize_round_trip_is_exact_layout(u, override):
    p = quantize_group(u, mu_override=override)
    vals = dequantize_group(p)
    expect = p.mu + p.alpha * np.where(p.signs, 1.0, -1.0)
    assert np.array_equal(vals, expect)


def test_group_sse_matches_direct():
    rng = make_rng(23)
    u = rng.normal(size=10)
    p = quantize_group(u)
    direct = float(np.sum((u - dequantize_group(p)) ** 2))
    assert abs(group_sse(u) - direct) < 1e-12


def test_zero_error_iff_two_symmetric_values():
    # Balanced two-value groups reconstruct exactly; unbalanced ones (mean
    # off the midpoint) and three-valued groups cannot.
    assert group_sse([2.0, 6.0, 2.0, 6.0]) < 1e-12
    assert group_sse([-3.0, 3.0]) < 1e-12
    assert group_sse([2.0, 2.0, 2.0, 6.0]) > 0.1
    assert group_sse([1.0, 2.0, 3.0]) > 0.1
    rng = make_rng(99)
    for _ in range(20):
        vals = rng.normal(size=2) * 5
        u = np.repeat(vals, 4)
        assert group_sse(u) < 1e-10  # balanced placement around the mean


def test_split_band_outlier():
    specs = split_band(np.array([0.1, 0.1, 0.1, 10.0]))
    assert len(specs) == 2
    dense, sparse = specs
    assert dense.member_indices.tolist() == [0, 1, 2]
    assert sparse.member_indices.tolist() == [3]


def test_split_band_constant_single_group():
    specs = split_band(np.full(6, 1.5))
    assert len(specs) == 1


def test_split_band_symmetric_exact_single_group():
    specs = split_band(np.array([-1.0, -1.0, 1.0, 1.0]))
    assert len(specs) == 1


def test_split_band_max_groups_one():
    specs = split_band(np.array([0.1, 0.1, 10.0]), max_groups=1)
    assert len(specs) == 1


def test_split_band_never_worse_than_single():
    rng = make_rng(24)
    for trial in range(50):
        u = rng.normal(size=rng.integers(2, 24))
        specs = split_band(u)
        total = sum(group_sse(u[s.member_indices]) for s in specs)
        assert total <= group_sse(u) + 1e-12


def test_split_band_matches_exhaustive_oracle():
    rng = make_rng(25)
    for trial in range(40):
        u = rng.normal(size=rng.integers(2, 16))
        if trial % 3 == 0:
            u[rng.integers(u.size)] *= 25.0
        specs = split_band(u)
        total = sum(group_sse(u[s.member_indices]) for s in specs)
        assert total == pytest.approx(exhaustive_two_group_error(u), abs=1e-10)


def test_split_band_min_gain_blocks_marginal_splits():
    rng = make_rng(26)
    u = rng.normal(size=32)  # generic data: split helps but not by 99%
    assert len(split_band(u)) == 2
    assert len(split_band(u, min_gain=0.99)) == 1
    # An extreme outlier clears a high gain threshold.
    u2 = np.concatenate([np.full(31, 0.01), [50.0]])
    assert len(split_band(u2, min_gain=0.99)) == 2


def test_dequantize_band_scatter():
    u = np.array([0.1, 0.2, 0.1, 9.0])
    specs = split_band(u)
    params = [quantize_group(u[s.member_indices]) for s in specs]
    out = dequantize_band(specs, params)
    direct = np.empty(4)
    for s, p in zip(specs, params):
        direct[s.member_indices] = dequantize_group(p)
    assert np.array_equal(out, direct)


def test_shared_mean_hand_example():
    band = np.array([[1.0, 2.0, 3.0, 4.0]])
    bq = quantize_band_shared_mean(band, window=2, max_groups=1)
    assert bq.shared_mu.tolist() == [2.5]
    assert bq.alpha_dense.tolist() == [[1.0, 1.0]]
    assert bq.reconstruct().tolist() == [[1.5, 1.5, 3.5, 3.5]]


def test_shared_mean_single_group_matches_quantize_group():
    rng = make_rng(27)
    row = rng.normal(size=10)
    bq = quantize_band_shared_mean(row[None, :], window=10, max_groups=1)
    p = quantize_group(row)
    assert bq.shared_mu[0] == pytest.approx(p.mu)
    assert bq.alpha_dense[0, 0] == pytest.approx(p.alpha)
    assert np.array_equal(bq.signs[0], p.signs)


def test_shared_mean_error_at_least_per_group_mean():
    # Fewer free parameters: over many random rows the shared-mean path
    # cannot beat per-group means in aggregate.  (Individual rows can go
    # either way because the group mean is not the optimal center for a
    # sign quantizer.)
    rng = make_rng(28)
    shared_total = grouped_total = 0.0
    grouped_wins = 0
    for trial in range(100):
        band = rng.normal(size=(1, 16))
        band[0, 8:] += rng.uniform(2.0, 4.0)  # windows carry distinct means
        shared = quantize_band_shared_mean(band, window=8, max_groups=1)
        err_shared = float(np.sum((shared.reconstruct() - band) ** 2))
        grouped = quantize_band_grouped(band, window=8, max_groups=1)
        err_grouped = float(np.sum((grouped.reconstruct() - band) ** 2))
        shared_total += err_shared
        grouped_total += err_grouped
        grouped_wins += err_grouped <= err_shared + 1e-12
    assert grouped_total < shared_total
    assert grouped_wins >= 90


def test_shared_mean_matches_scalar_split_band():
    rng = make_rng(29)
    for trial in range(20):
        band = rng.normal(size=(3, 13))
        band[rng.integers(3), rng.integers(13)] *= 30.0
        window = 5
        bq = quantize_band_shared_mean(band, window=window)
        for r in range(3):
            mu = band[r].mean()
            assert bq.shared_mu[r] == pytest.approx(mu)
            for wi, lo in enumerate(range(0, 13, window)):
                hi = min(lo + window, 13)
                u = band[r, lo:hi]
                specs = split_band(u, mu_override=mu)
                assert bq.split[r, wi] == (len(specs) == 2)
                if len(specs) == 2:
                    sparse_local = np.flatnonzero(bq.membership[r, lo:hi])
                    assert sparse_local.tolist() == specs[1].member_indices.tolist()
                    p_dense = quantize_group(u[specs[0].member_indices], mu)
                    p_sparse = quantize_group(u[specs[1].member_indices], mu)
                    assert bq.alpha_dense[r, wi] == pytest.approx(p_dense.alpha)
                    assert bq.alpha_sparse[r, wi] == pytest.approx(p_sparse.alpha)


def test_grouped_matches_scalar_split_band():
    rng = make_rng(30)
    for trial in range(20):
        band = rng.normal(size=(2, 11))
        band[rng.integers(2), rng.integers(11)] *= 40.0
        window = 6
        bq = quantize_band_grouped(band, window=window)
        for r in range(2):
            for wi, lo in enumerate(range(0, 11, window)):
                hi = min(lo + window, 11)
                u = band[r, lo:hi]
                specs = split_band(u)
                assert bq.split[r, wi] == (len(specs) == 2)
                recon = bq.reconstruct()[r, lo:hi]
                params = [quantize_group(u[s.member_indices]) for s in specs]
                direct = dequantize_band(specs, params, width=hi - lo)
                assert np.max(np.abs(recon - direct)) < 1e-12


def test_round_params_half_quantizes_metadata():
    band = make_rng(31).normal(size=(2, 8))
    bq = quantize_band_shared_mean(band, window=4).round_params_half()
    assert np.array_equal(bq.shared_mu, np.float16(bq.shared_mu).astype(np.float64))
    assert np.array_equal(bq.alpha_dense,
                          np.float16(bq.alpha_dense).astype(np.float64))
