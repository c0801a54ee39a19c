"""Window container, functional evaluation, nilpotent shift algebra,
conditional truncation error, and window CSV round trips."""

import io
import math

import numpy as np
import pytest

import rcuniv as rc
from rcuniv.core import NilpotentShift, nilpotent_product


# ---------------------------------------------------------------------------
# Window


def test_window_copies_and_validates():
    raw = np.ones((3, 2))
    w = rc.Window(raw)
    raw[0, 0] = 99.0
    assert w.data[0, 0] == 1.0
    with pytest.raises(ValueError):
        rc.Window(np.ones(4))
    with pytest.raises(ValueError):
        rc.Window(np.array([[np.nan], [1.0]]))
    with pytest.raises(ValueError):
        rc.Window(np.array([[np.inf], [1.0]]))


def test_window_is_read_only():
    w = rc.Window(np.zeros((2, 1)))
    with pytest.raises(ValueError):
        w.data[0, 0] = 1.0


# ---------------------------------------------------------------------------
# functional evaluation


def test_constant_functional():
    spec = rc.constant(3.5).spec
    w = rc.Window(np.random.default_rng(0).normal(size=(5, 1)))
    assert rc.evaluate_functional(spec, w) == 3.5


def test_peak_hold_example():
    spec = rc.peak_hold(0.0, 1.0).spec
    w = rc.Window(np.array([[0.2], [0.9], [0.4]]))
    assert rc.evaluate_functional(spec, w) == 0.9


def test_finite_poly_product_example():
    # q(z) = z_0 * z_{-1} on the window (2, 3)
    spec = rc.finite_poly(1, 1, 2, {(1, 1): 1.0}).spec
    w = rc.Window(np.array([[2.0], [3.0]]))
    assert rc.evaluate_functional(spec, w) == 6.0


def test_window_too_short_for_memory():
    spec = rc.finite_poly(1, 3, 2, {(1, 0, 0, 0): 1.0}).spec
    with pytest.raises(ValueError):
        rc.evaluate_functional(spec, rc.Window(np.ones((2, 1))))


def test_channel_mismatch_rejected():
    spec = rc.geometric_ma(0.5).spec
    with pytest.raises(ValueError):
        rc.evaluate_functional(spec, rc.Window(np.ones((4, 2))))


def test_batch_matches_single():
    spec = rc.geometric_ma(0.7).spec
    data = np.random.default_rng(1).normal(size=(16, 10, 1))
    batch = rc.evaluate_functional_batch(spec, data)
    single = np.array([rc.evaluate_functional(spec, rc.Window(d)) for d in data])
    np.testing.assert_allclose(batch, single, rtol=1e-13)


def test_causality_beyond_memory():
    # rows deeper than the declared memory must not affect the value
    spec = rc.finite_poly(1, 1, 2, {(1, 1): 1.0, (2, 0): 0.5}).spec
    rng = np.random.default_rng(2)
    base = rng.normal(size=(6, 1))
    tweaked = base.copy()
    tweaked[2:] = rng.normal(size=(4, 1))
    v0 = rc.evaluate_functional(spec, rc.Window(base))
    v1 = rc.evaluate_functional(spec, rc.Window(tweaked))
    assert v0 == v1


# ---------------------------------------------------------------------------
# nilpotent shift algebra


def _dense_product(N, indices):
    out = np.eye(N)
    for j in indices:
        out = NilpotentShift(N, j).matrix() @ out
    return out


def test_shift_matrix_entries():
    A1 = NilpotentShift(3, 1).matrix()
    expected = np.zeros((3, 3))
    expected[1, 0] = 1.0
    np.testing.assert_array_equal(A1, expected)
    with pytest.raises(ValueError):
        NilpotentShift(3, 3)
    with pytest.raises(ValueError):
        NilpotentShift(3, 0)


def test_product_consecutive_run_hits_single_entry():
    # A_2 A_1 in dimension 3: one at row 3, column 1 (1-indexed)
    got = nilpotent_product(3, [1, 2])
    expected = np.zeros((3, 3))
    expected[2, 0] = 1.0
    np.testing.assert_array_equal(got, expected)


def test_product_non_consecutive_vanishes():
    np.testing.assert_array_equal(nilpotent_product(4, [2, 2]), np.zeros((4, 4)))
    np.testing.assert_array_equal(nilpotent_product(4, [1, 3]), np.zeros((4, 4)))


def test_product_single_factor():
    got = nilpotent_product(4, [2])
    np.testing.assert_array_equal(got, NilpotentShift(4, 2).matrix())


def test_product_matches_dense_oracle_exhaustive_small():
    from itertools import product as iproduct

    for N in (2, 3, 4):
        for L in (1, 2, 3, 4):
            for idx in iproduct(range(1, N), repeat=L):
                got = nilpotent_product(N, list(idx))
                np.testing.assert_array_equal(got, _dense_product(N, idx))
                consecutive = all(
                    idx[i] == idx[0] + i for i in range(L)
                ) and idx[-1] <= N - 1
                assert got.any() == consecutive


def test_product_rejects_bad_indices():
    with pytest.raises(ValueError):
        nilpotent_product(3, [0])
    with pytest.raises(ValueError):
        nilpotent_product(3, [3])
    with pytest.raises(ValueError):
        nilpotent_product(3, [])


# ---------------------------------------------------------------------------
# conditional truncation error


def test_truncation_error_zero_for_finite_memory():
    spec = rc.finite_poly(1, 1, 2, {(1, 1): 1.0}).spec
    samp = rc.iid_gaussian(1)
    est = rc.truncated_conditional_error(spec, K=1, sampler=samp, p=2.0, M=64, seed=3)
    assert est.value == 0.0 and est.stderr == 0.0
    est = rc.truncated_conditional_error(spec, K=3, sampler=samp, p=2.0, M=64, seed=3)
    assert est.value == 0.0


def test_truncation_error_matches_geometric_closed_form():
    # E[(H - E[H | lags 0..K])^2]^(1/2) = decay^(K+1) / sqrt(1 - decay^2)
    decay = 0.5
    spec = rc.geometric_ma(decay, step_std=1.0).spec
    samp = rc.iid_gaussian(1)
    est = rc.truncated_conditional_error(
        spec, K=3, sampler=samp, p=2.0, M=4000, seed=9, window_length=40
    )
    exact = decay**4 / math.sqrt(1.0 - decay**2)
    assert abs(est.value - exact) <= 3.0 * est.stderr


def test_truncation_error_monotone_in_cutoff():
    spec = rc.geometric_ma(0.6, step_std=1.0).spec
    samp = rc.iid_gaussian(1)
    kw = dict(sampler=samp, p=2.0, M=3000, seed=4, window_length=36)
    e2 = rc.truncated_conditional_error(spec, K=2, **kw)
    e5 = rc.truncated_conditional_error(spec, K=5, **kw)
    assert e5.value <= e2.value + 3.0 * (e2.stderr + e5.stderr)


def test_truncation_error_rejects_dependent_sampler():
    spec = rc.geometric_ma(0.5).spec
    with pytest.raises(ValueError):
        rc.truncated_conditional_error(
            spec, K=1, sampler=rc.garch11(0.1, 0.1, 0.8), p=2.0, M=16, seed=0
        )


def test_truncation_error_input_validation():
    spec = rc.geometric_ma(0.5).spec
    samp = rc.iid_gaussian(1)
    with pytest.raises(ValueError):
        rc.truncated_conditional_error(spec, K=-1, sampler=samp, p=2.0, M=16, seed=0)
    with pytest.raises(ValueError):
        rc.truncated_conditional_error(spec, K=1, sampler=samp, p=2.0, M=1, seed=0)


# ---------------------------------------------------------------------------
# CSV round trip


def test_window_csv_round_trip_exact(tmp_path):
    vals = np.array(
        [
            [math.pi, 1.0 / 3.0],
            [-0.0, 1e-300],
            [12345.6789, -2.5e17],
        ]
    )
    w = rc.Window(vals)
    path = tmp_path / "w.csv"
    rc.write_window_csv(w, path)
    back = rc.read_window_csv(path)
    np.testing.assert_array_equal(back.data, vals)
    assert np.signbit(back.data[1, 0])
    header = path.read_text().splitlines()[0]
    assert header == "lag,ch0,ch1"


def test_window_csv_rejects_bad_lag_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("lag,ch0\n0,1.0\n2,2.0\n")
    with pytest.raises(ValueError):
        rc.read_window_csv(path)
