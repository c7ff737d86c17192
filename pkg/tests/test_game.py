import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import channel_set, crandn, random_beams, random_channels
from mcbeam.game import (compute_interference, compute_leakage, compute_prices, compute_sinr,
                         network_utility, payoff, state_prices, user_utilities)
from mcbeam.utility import Utility

LN2 = math.log(2.0)


def _interference_oracle(W, h):
    M, _, N, Q, T = h.shape
    I_in = np.zeros((M, N, Q))
    by_src = np.zeros((M, N, Q, M))
    for m in range(M):
        for n in range(N):
            for k in range(Q):
                victim = h[m, m, n, k]
                for kk in range(Q):
                    if kk != k:
                        I_in[m, n, k] += abs(np.vdot(victim, W[m, n, kk])) ** 2
                for j in range(M):
                    if j == m:
                        continue
                    for u in range(Q):
                        by_src[m, n, k, j] += abs(np.vdot(h[j, m, n, k], W[j, n, u])) ** 2
    return I_in, by_src


def test_interference_matches_direct_summation():
    rng = np.random.default_rng(0)
    ch = random_channels(rng, M=2, N=1, Q=2, T=3)
    W = random_beams(rng, 2, 1, 2, 3)
    rep = compute_interference(W, ch)
    I_in, by_src = _interference_oracle(W, ch.h)
    np.testing.assert_allclose(rep.I_in, I_in, rtol=1e-12)
    np.testing.assert_allclose(rep.I_out_by_source, by_src, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(rep.I_out, by_src.sum(-1), rtol=1e-12)
    np.testing.assert_allclose(rep.I_total, rep.I_in + rep.I_out, rtol=0)
    sig = np.array([[[abs(np.vdot(ch.h[m, m, 0, k], W[m, 0, k])) ** 2 for k in range(2)]]
                    for m in range(2)])
    np.testing.assert_allclose(compute_sinr(W, ch), sig / (1 + I_in + by_src.sum(-1)), rtol=1e-12)


def test_single_user_network_no_interference():
    h = np.array([1.0, 0.0]).reshape(1, 1, 1, 1, 2)
    ch = channel_set(h)
    W = np.array([2.0, 0.0]).reshape(1, 1, 1, 2).astype(complex)
    rep = compute_interference(W, ch)
    assert rep.I_total.item() == 0.0
    assert compute_sinr(W, ch).item() == 4.0
    assert compute_sinr(np.zeros_like(W), ch).item() == 0.0


def test_orthogonal_peer_adds_no_in_cell_interference():
    h = np.zeros((1, 1, 1, 2, 2), complex)
    h[0, 0, 0, 0] = [1, 0]
    h[0, 0, 0, 1] = [0, 1]
    W = np.zeros((1, 1, 2, 2), complex)
    W[0, 0, 0] = [1, 0]
    W[0, 0, 1] = [0, 3]
    rep = compute_interference(W, channel_set(h))
    np.testing.assert_array_equal(rep.I_in, 0.0)


def test_price_examples():
    assert compute_prices(Utility.prop_fair(), 3.0, 0.0, 3.0) == pytest.approx(1.0)
    assert compute_prices(Utility.rate(), 0.0, 2.0, 0.0) == 0.0
    assert compute_prices(Utility.alpha_fair(2.0), 2.0, 1.0, 4.0) == pytest.approx(0.25)
    # zero beam under a log utility: price 0 rather than an error
    assert compute_prices(Utility.prop_fair(), 0.0, 1.0, 0.0) == 0.0


def _leakage_oracle(prices, h, m):
    M, _, N, Q, T = h.shape
    L = np.zeros((N, Q, T, T), complex)
    for n in range(N):
        for k in range(Q):
            for kk in range(Q):
                if kk != k:
                    v = h[m, m, n, kk]
                    L[n, k] += prices[m, n, kk] * np.outer(v, v.conj())
            for j in range(M):
                if j != m:
                    for u in range(Q):
                        v = h[m, j, n, u]
                        L[n, k] += prices[j, n, u] * np.outer(v, v.conj())
    return L


def test_leakage_matches_direct_sum_and_is_psd():
    rng = np.random.default_rng(1)
    ch = random_channels(rng, M=2, N=2, Q=2, T=3)
    W = random_beams(rng, 2, 2, 2, 3)
    u = Utility.rate()
    prices = state_prices(u, W, ch)
    assert np.all(prices >= 0)
    for m in range(2):
        L, L_in, L_out = compute_leakage(prices, ch, m)
        np.testing.assert_allclose(L, _leakage_oracle(prices, ch.h, m), atol=1e-13)
        np.testing.assert_array_equal(L, L_in + L_out[:, None])
        assert np.max(np.abs(L - np.conj(np.swapaxes(L, -1, -2)))) == 0.0
        assert np.linalg.eigvalsh(L).min() >= -1e-9


def test_leakage_zero_cases():
    rng = np.random.default_rng(2)
    ch = random_channels(rng, M=1, N=1, Q=1, T=3)
    L, _, _ = compute_leakage(np.ones((1, 1, 1)), ch, 0)
    np.testing.assert_array_equal(L, 0.0)
    ch = random_channels(rng, M=2, N=1, Q=2, T=3)
    L, _, _ = compute_leakage(np.zeros((2, 1, 2)), ch, 1)
    np.testing.assert_array_equal(L, 0.0)


def test_payoff_matches_independent_evaluation():
    rng = np.random.default_rng(3)
    ch = random_channels(rng, M=3, N=2, Q=2, T=3)
    W = random_beams(rng, 3, 2, 2, 3, P=2.0)
    u = Utility.prop_fair(0.7)
    prices = rng.random((3, 2, 2))
    h = ch.h
    for m in range(3):
        sinr = compute_sinr(W, ch)[m]
        L = _leakage_oracle(prices, h, m)
        cost = sum(np.vdot(W[m, n, k], L[n, k] @ W[m, n, k]).real
                   for n in range(2) for k in range(2))
        ref = float(np.sum(0.7 * np.log(sinr))) - cost
        assert payoff(u, W, ch, prices, m) == pytest.approx(ref, rel=1e-12)
        assert payoff(u, W, ch, np.zeros_like(prices), m) == pytest.approx(
            float(np.sum(u.value(sinr))), rel=1e-14)


def test_single_cell_payoff_only_in_cell_cost():
    rng = np.random.default_rng(4)
    ch = random_channels(rng, M=1, N=2, Q=2, T=3)
    W = random_beams(rng, 1, 2, 2, 3)
    u = Utility.rate()
    prices = state_prices(u, W, ch)
    full = payoff(u, W, ch, prices, 0)
    in_only = payoff(u, W, ch, prices, 0, out_cell=False)
    assert full == pytest.approx(in_only, rel=1e-15)


def test_network_utility_examples():
    u = Utility.rate(1.0, weight=1 / LN2)
    h = np.array([1.0, 0.0]).reshape(1, 1, 1, 1, 2)
    W = np.array([1.0, 0.0]).reshape(1, 1, 1, 2).astype(complex)
    assert network_utility(u, W, channel_set(h)) == pytest.approx(1.0, rel=1e-15)
    # two non-interacting users with the same SINR
    h2 = np.zeros((1, 1, 2, 1, 2), complex)
    h2[0, 0, :, 0] = [1.0, 0.0]
    W2 = np.zeros((1, 2, 1, 2), complex)
    W2[0, :, 0] = [1.0, 0.0]
    assert network_utility(u, W2, channel_set(h2)) == 2 * network_utility(u, W, channel_set(h))


def test_zero_beam_log_utility_sentinel():
    h = np.array([1.0, 0.0]).reshape(1, 1, 1, 1, 2)
    W = np.zeros((1, 1, 1, 2), complex)
    assert network_utility(Utility.prop_fair(), W, channel_set(h)) == -np.inf
    assert user_utilities(Utility.rate(), np.array([0.0]))[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_sinr_scale_law(seed, c):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, M=3, N=2, Q=2, T=3)
    W = random_beams(rng, 3, 2, 2, 3)
    rep = compute_interference(W, ch)
    W2 = W.copy()
    W2[1] *= c
    rep2 = compute_interference(W2, ch)
    np.testing.assert_allclose(rep2.signal[1], c * c * rep.signal[1], rtol=1e-12)
    np.testing.assert_allclose(rep2.signal[[0, 2]], rep.signal[[0, 2]], rtol=0)
    assert np.all(rep2.I_in >= 0) and np.all(rep2.I_out >= 0)
