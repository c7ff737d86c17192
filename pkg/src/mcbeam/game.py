"""Evaluation of the beamforming game from a beam assignment.

Array layout used throughout the package (0-based, coordinated cells only):

* channels ``h``: ``(M, M, N, Q, T)``; ``h[m, j, n, k]`` is BS ``m`` to user
  ``k`` of cell ``j`` on sub-channel ``n``
* beams ``W``: ``(M, N, Q, T)``; ``W[m, n, k]`` serves user ``k`` of cell ``m``
* per-user quantities (SINR, interference, prices): ``(M, N, Q)``
"""

from dataclasses import dataclass

import numpy as np

from .linalg import hermitize, quad_form, weighted_outer_sum

NEG_INF = -np.inf


def cross_gains(W, h):
    """``G[m, j, n, k, u] = |h[m, j, n, k]^H W[m, n, u]|^2``."""
    amp = np.einsum("mjnkt,mnut->mjnku", np.conj(h), W)
    return amp.real**2 + amp.imag**2


@dataclass
class InterferenceReport:
    signal: np.ndarray           # (M, N, Q) |h^H w|^2 of the served beam
    I_in: np.ndarray             # (M, N, Q)
    I_out: np.ndarray            # (M, N, Q)
    I_out_by_source: np.ndarray  # (M, N, Q, M); [..., j] from coordinated BS j

    @property
    def I_total(self):
        return self.I_in + self.I_out


def compute_interference(W, ch):
    h = ch.h if hasattr(ch, "h") else ch
    G = cross_gains(W, h)
    M = h.shape[0]
    idx = np.arange(M)
    own = G[idx, idx]                                      # (M, N, Q, Q)
    signal = np.diagonal(own, axis1=-2, axis2=-1).copy()
    Q = own.shape[-1]
    I_in = np.sum(own * (1.0 - np.eye(Q)), axis=-1)
    by_src = np.moveaxis(G.sum(axis=-1), 0, -1).copy()     # (M_victim, N, Q, M_source)
    by_src[idx, :, :, idx] = 0.0
    return InterferenceReport(signal, I_in, by_src.sum(axis=-1), by_src)


def compute_sinr(W, ch, report=None):
    if report is None:
        report = compute_interference(W, ch)
    return report.signal / (1.0 + report.I_total)


def compute_prices(u, sinr, I, signal):
    """Interference pricing rates ``U'(sinr) * signal / (1 + I)^2``.

    Users with zero signal get price 0.
    """
    sinr = np.asarray(sinr, dtype=float)
    signal = np.asarray(signal, dtype=float)
    on = signal > 0
    safe = np.where(on, sinr, 1.0)
    pi = u.derivative(safe) * signal / (1.0 + np.asarray(I, dtype=float)) ** 2
    return np.where(on, pi, 0.0)


def state_prices(u, W, ch, report=None):
    if report is None:
        report = compute_interference(W, ch)
    sinr = report.signal / (1.0 + report.I_total)
    return compute_prices(u, sinr, report.I_total, report.signal)


def out_cell_leakage(prices, ch, m):
    """``L_out[n] = sum_{j != m} sum_u pi[j, n, u] h[m, j, n, u] h[m, j, n, u]^H``."""
    h = ch.h if hasattr(ch, "h") else ch
    M, _, N, Q, T = h.shape
    others = [j for j in range(M) if j != m]
    if not others:
        return np.zeros((N, T, T), dtype=complex)
    vec = np.moveaxis(h[m, others], 0, 1).reshape(N, len(others) * Q, T)
    pw = np.moveaxis(prices[others], 0, 1).reshape(N, len(others) * Q)
    return weighted_outer_sum(pw, vec)


def in_cell_leakage(prices_m, h_direct):
    """``L_in[n, k] = sum_{k' != k} pi[n, k'] h[n, k'] h[n, k']^H`` for one cell.

    ``prices_m`` is ``(N, Q)`` and ``h_direct`` is ``(N, Q, T)``.
    """
    N, Q, T = h_direct.shape
    mask = 1.0 - np.eye(Q)
    # weights[n, k, k'] = pi[n, k'] for k' != k
    weights = prices_m[:, None, :] * mask[None]
    a = np.einsum("nkq,nqi,nqj->nkij", weights, h_direct, np.conj(h_direct))
    return hermitize(a)


def compute_leakage(prices, ch, m, include_out=True):
    """Leakage matrices of every user of cell ``m``: ``(N, Q, T, T)``.

    Returns ``(L, L_in, L_out)`` with ``L = L_in + L_out[:, None]``.
    """
    h = ch.h if hasattr(ch, "h") else ch
    L_in = in_cell_leakage(prices[m], h[m, m])
    N, Q, T = h.shape[2:]
    if include_out:
        L_out = out_cell_leakage(prices, h, m)
    else:
        L_out = np.zeros((N, T, T), dtype=complex)
    return L_in + L_out[:, None], L_in, L_out


def user_utilities(u, sinr):
    """Per-user utility values; ``-inf`` marks a zero SINR under a log-type utility."""
    sinr = np.asarray(sinr, dtype=float)
    if u.needs_positive_sinr:
        on = sinr > 0
        vals = u.value(np.where(on, sinr, 1.0))
        return np.where(on, vals, NEG_INF)
    return u.value(sinr)


def network_utility(u, W, ch, report=None):
    sinr = compute_sinr(W, ch, report)
    return float(np.sum(user_utilities(u, sinr)))


def cell_cost(W, ch, prices, m, in_cell=True, out_cell=True):
    """Pricing cost ``sum_{n,k} w^H L w`` paid by BS ``m``."""
    h = ch.h if hasattr(ch, "h") else ch
    Wm = W[m]
    cost = 0.0
    if in_cell:
        L_in = in_cell_leakage(prices[m], h[m, m])
        cost += float(np.sum(quad_form(Wm, L_in)))
    if out_cell:
        L_out = out_cell_leakage(prices, h, m)
        cost += float(np.sum(quad_form(Wm, L_out[:, None])))
    return cost


def payoff(u, W, ch, prices, m, in_cell=True, out_cell=True):
    """Priced payoff of BS ``m``: own users' utility minus its pricing cost.

    ``prices`` is held fixed (the table current when the payoff is evaluated).
    """
    sinr = compute_sinr(W, ch)
    own = float(np.sum(user_utilities(u, sinr[m])))
    if own == NEG_INF:
        return NEG_INF
    return own - cell_cost(W, ch, prices, m, in_cell=in_cell, out_cell=out_cell)


def cell_powers(W):
    """Total transmit power of every BS, ``(M,)``."""
    return np.sum(np.abs(W) ** 2, axis=(1, 2, 3))
