"""Reference beamformers: channel matching, in-cell zero forcing, TDMA."""

import numpy as np

from .game import compute_sinr, user_utilities


def _equal_power(directions, P):
    M, N, Q, T = directions.shape
    return directions * np.sqrt(P / (N * Q))


def channel_matched(ch, P):
    """Every beam along its own channel, equal power ``P / (N Q)`` per beam."""
    hd = ch.direct()
    norms = np.linalg.norm(hd, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero channel: channel-matched beam undefined")
    return _equal_power(hd / norms, P)


def in_cell_zero_forcing(ch, P, rel_tol=1e-10):
    """Beams orthogonal to the other co-scheduled users of the same cell.

    The direction of user ``k`` is column ``k`` of ``H (H^H H)^{-1}`` where
    the columns of ``H`` are the cell's channels on that sub-channel.
    """
    hd = ch.direct()                       # (M, N, Q, T)
    M, N, Q, T = hd.shape
    if Q > T:
        raise ValueError(f"in-cell zero forcing needs Q <= T (Q={Q}, T={T})")
    dirs = np.empty_like(hd)
    for m in range(M):
        for n in range(N):
            H = hd[m, n].T                 # (T, Q), column k = h_k
            gram = np.conj(H.T) @ H
            s = np.linalg.svd(gram, compute_uv=False)
            if s[-1] <= rel_tol * s[0]:
                raise ValueError(f"in-cell channels of cell {m}, sub-channel {n} are rank deficient")
            V = H @ np.linalg.inv(gram)
            dirs[m, n] = (V / np.linalg.norm(V, axis=0)).T
    return _equal_power(dirs, P)


def time_sharing_rate(ch, P, u):
    """Utility of per-sub-channel TDMA among the ``Q`` users of each cell.

    In slot ``s`` every cell serves only its user ``s`` on each sub-channel,
    with a matched-filter beam of power ``P / N``; the other cells' slot-``s``
    beams interfere. Each user is active a ``1 / Q`` fraction of the time.
    """
    Q = ch.shape[2]
    total = 0.0
    for s in range(Q):
        sinr = compute_sinr(time_sharing_beams(ch, P, s), ch)[:, :, s]
        total += float(np.sum(user_utilities(u, sinr))) / Q
    return total


def time_sharing_beams(ch, P, slot):
    """Beams of TDMA slot ``slot``: user ``slot`` alone, matched filter, ``P / N``."""
    hd = ch.direct()
    N = hd.shape[1]
    norms = np.linalg.norm(hd[:, :, slot], axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero channel: matched-filter beam undefined")
    W = np.zeros_like(hd)
    W[:, :, slot] = hd[:, :, slot] / norms * np.sqrt(P / N)
    return W


def non_cooperative(ch, u, P, params=None, init="cm", max_outer=50, rel_utility_tol=1e-4):
    """Run the game with every out-cell price forced to zero.

    Each BS then maximizes its own users' utility; in-cell prices stay
    active inside the per-BS solver.
    """
    from .distributed import BeamformingGame

    game = BeamformingGame(ch, u, P, params=params, pricing=False)
    return game.run(game.initialize(init), max_outer, rel_utility_tol)
