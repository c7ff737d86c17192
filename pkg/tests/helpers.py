"""Small builders shared by the test modules."""

import numpy as np

from mcbeam.network import ChannelSet


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_psd(rng, T, rank=None, scale=1.0):
    rank = T if rank is None else rank
    B = crandn(rng, T, rank)
    A = scale * (B @ B.conj().T)
    return (A + A.conj().T) / 2


def channel_set(h):
    """Wrap a raw ``(M, M, N, Q, T)`` array with unit noise."""
    h = np.asarray(h, dtype=complex)
    M, _, N, Q, _ = h.shape
    return ChannelSet(h=h, eta=np.ones((M, N, Q)))


def random_channels(rng, M=2, N=1, Q=2, T=3, scale=1.0):
    return channel_set(scale * crandn(rng, M, M, N, Q, T))


def random_beams(rng, M, N, Q, T, P=1.0):
    W = crandn(rng, M, N, Q, T)
    power = np.sum(np.abs(W) ** 2, axis=(1, 2, 3), keepdims=True)
    return W * np.sqrt(P / power)


def subproblem_objective(w, h, L, I, u, lam):
    """``U(|h^H w|^2 / (1 + I)) - w^H (L + lam I) w`` for a stack of beams ``w``."""
    w = np.asarray(w, dtype=complex)
    s = np.abs(w @ np.conj(h)) ** 2 / (1.0 + I)
    quad = np.real(np.einsum("...i,ij,...j->...", np.conj(w), L, w)) + lam * np.sum(np.abs(w) ** 2, -1)
    if u.needs_positive_sinr:
        on = s > 0
        val = np.where(on, u.value(np.where(on, s, 1.0)), -np.inf)
    else:
        val = u.value(s)
    return val - quad


def subproblem_oracle(h, L, I, u, lam, radius, grid=21):
    """Best objective of the T = 2 single-user subproblem found by search.

    Takes the maximum of a golden-section line search along
    ``(L + lam I)^{-1} h``, a dense grid over the 4 real coordinates of the
    power ball, and a Nelder-Mead polish from the best grid point.
    """
    from scipy.optimize import minimize, minimize_scalar

    T = h.shape[0]
    assert T == 2
    d = np.linalg.solve(L + lam * np.eye(T), h)
    d = d / np.linalg.norm(d)

    def line(t):
        return -float(subproblem_objective(t * d, h, L, I, u, lam))

    cands = []
    r = minimize_scalar(line, bounds=(1e-12, radius), method="bounded",
                        options={"xatol": 1e-12 * radius, "maxiter": 500})
    cands.append(-r.fun)
    cands.append(float(subproblem_objective(np.zeros(T), h, L, I, u, lam)))

    ax = np.linspace(-radius, radius, grid)
    g = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), -1).reshape(-1, 4)
    g = g[np.sum(g * g, -1) <= radius * radius]
    vals = subproblem_objective(g[:, :2] + 1j * g[:, 2:], h, L, I, u, lam)
    best = int(np.argmax(vals))
    cands.append(float(vals[best]))

    def neg(x):
        v = float(subproblem_objective(x[:2] + 1j * x[2:], h, L, I, u, lam))
        return -v if np.isfinite(v) else 1e300

    nm = minimize(neg, g[best], method="Nelder-Mead",
                  options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000, "maxfev": 40000})
    cands.append(-nm.fun)
    return max(cands)


def random_subproblem(rng, u_kind):
    """Random T = 2 instance for one of the built-in utility families."""
    from mcbeam.utility import Utility

    h = crandn(rng, 2) * rng.uniform(0.3, 3.0)
    L = random_psd(rng, 2, rank=int(rng.integers(0, 3)), scale=rng.uniform(0.05, 2.0)) \
        if rng.random() < 0.8 else np.zeros((2, 2), complex)
    I = float(rng.uniform(0.0, 3.0))
    lam = float(rng.uniform(0.05, 2.0))
    if u_kind == "prop_fair":
        u = Utility.prop_fair(rng.uniform(0.2, 2.0))
    elif u_kind == "alpha_fair":
        u = Utility.alpha_fair(float(rng.choice([0.5, 2.0])), rng.uniform(0.2, 2.0))
    else:
        u = Utility.rate(rng.uniform(0.1, 1.0), rng.uniform(0.2, 2.0))
    return h, L, I, u, lam
