"""Per-BS beam optimization by dual decomposition.

For a fixed power price ``lam`` every user's beam has a closed form
(``kkt_beam_update``); users of one cell are coupled through in-cell
interference and in-cell prices, which ``inner_sweep`` resolves by a
Gauss-Seidel pass over the user slots (all sub-channels at once).
``bisect_lambda`` then searches ``lam`` until the cell meets its power
budget.
"""

from dataclasses import dataclass, field

import numpy as np

from .game import compute_prices, in_cell_leakage, out_cell_leakage, user_utilities
from .linalg import RANK_TOL, psd_pseudo_inverse, quad_form


@dataclass(frozen=True)
class SolverParams:
    lambda_min_init: float = 1e-6
    lambda_max_init: float = 1.0
    lambda_tol: float = 1e-6
    inner_max_sweeps: int = 50
    inner_tol: float = 1e-5
    rank_tol: float = RANK_TOL
    lambda_floor: float = 1e-12
    max_doublings: int = 60
    # extra sweeps at the returned multiplier, to this tolerance
    polish_tol: float = 1e-10
    polish_max_sweeps: int = 200
    # final power match: P - power(lam) <= power_tol * P
    power_tol: float = 1e-10
    refine_max: int = 30

    def __post_init__(self):
        if not (0 < self.lambda_floor <= self.lambda_min_init < self.lambda_max_init):
            raise ValueError("need 0 < lambda_floor <= lambda_min_init < lambda_max_init")
        for name in ("lambda_tol", "inner_tol", "rank_tol", "polish_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_max_sweeps < 1 or self.max_doublings < 1:
            raise ValueError("sweep and doubling limits must be >= 1")


class SolverError(ValueError):
    pass


def kkt_beam_update(h, L, I, u, lam, rank_tol=RANK_TOL, lambda_floor=0.0):
    """Closed-form KKT beam of one user for a fixed multiplier ``lam``.

    Returns ``(w, p)``. With ``g = (L + lam I)^+ h`` and ``a = h^H g`` the
    beam is ``g * sqrt((1 + I) * Phi) / a`` where ``Phi`` solves
    ``U'(Phi) = (1 + I) / a``; its SINR ``|h^H w|^2 / (1 + I)`` is ``Phi``.
    """
    h = np.asarray(h, dtype=complex)
    L = np.asarray(L, dtype=complex)
    T = h.shape[0]
    if I < 0:
        raise SolverError("interference must be non-negative")
    if lam < 0:
        raise SolverError("lam must be non-negative")
    try:
        Lp = psd_pseudo_inverse(L, rank_tol)
    except ValueError as exc:
        raise SolverError(f"leakage matrix rejected: {exc}") from exc
    if lam < lambda_floor:
        # lam = 0 only admissible with h in the column span of L
        resid = np.linalg.norm(L @ (Lp @ h) - h)
        if resid > 1e-8 * max(np.linalg.norm(h), 1e-300):
            raise SolverError("lam below floor with h outside the span of L")
    Tm = L + lam * np.eye(T)
    g = psd_pseudo_inverse(Tm, rank_tol) @ h
    a = float(np.real(np.vdot(h, g)))
    hh = float(np.real(np.vdot(h, h)))
    tnorm = max(np.linalg.norm(Tm, 2), 1e-300)
    if hh == 0.0 or a <= rank_tol * hh / tnorm:
        return np.zeros(T, dtype=complex), 0.0
    phi = float(u.inverse_derivative((1.0 + I) / a))
    w = g * np.sqrt((1.0 + I) * phi) / a
    return w, float(np.real(np.vdot(w, w)))


def _kkt_batch(h, L, I, u, lam, rank_tol):
    """Vectorized ``kkt_beam_update`` over a leading axis; ``lam > 0``."""
    T = h.shape[-1]
    Tm = L + lam * np.eye(T)
    g = np.linalg.solve(Tm, h[..., None])[..., 0]
    a = np.real(np.sum(np.conj(h) * g, axis=-1))
    hh = np.real(np.sum(np.conj(h) * h, axis=-1))
    tnorm = np.real(np.trace(Tm, axis1=-2, axis2=-1))
    ok = (hh > 0) & (a > rank_tol * hh / np.maximum(tnorm, 1e-300))
    a_safe = np.where(ok, a, 1.0)
    phi = np.where(ok, u.inverse_derivative((1.0 + I) / a_safe), 0.0)
    scale = np.sqrt((1.0 + I) * phi) / a_safe
    return g * scale[..., None]


def stationarity_residual(h, L, I, u, lam, w):
    """``|U'(sinr) h h^H w / (1 + I) - (L + lam I) w| / (|T| |w| + eps)``."""
    h = np.asarray(h, dtype=complex)
    w = np.asarray(w, dtype=complex)
    T = h.shape[-1]
    Tm = L + lam * np.eye(T)
    s = np.vdot(h, w)
    if abs(s) == 0.0:
        return 0.0 if np.linalg.norm(w) == 0.0 else float("inf")
    sinr = abs(s) ** 2 / (1.0 + I)
    lhs = u.derivative(sinr) * h * s / (1.0 + I)
    r = np.linalg.norm(lhs - Tm @ w)
    return float(r / (np.linalg.norm(Tm, 2) * np.linalg.norm(w) + 1e-300))


@dataclass
class CellProblem:
    """Data BS ``m`` holds fixed while it re-optimizes its own beams."""

    h: np.ndarray          # (N, Q, T) direct channels
    I_out: np.ndarray      # (N, Q) out-cell interference at its users
    L_out: np.ndarray      # (N, T, T) out-cell leakage
    u: object
    P: float

    @property
    def shape(self):
        return self.h.shape

    def in_cell_state(self, W):
        """Signal, total interference and in-cell prices for cell beams ``W``."""
        amp = np.einsum("nkt,nut->nku", np.conj(self.h), W)
        G = amp.real**2 + amp.imag**2
        Q = G.shape[-1]
        sig = np.diagonal(G, axis1=-2, axis2=-1)
        I = np.sum(G * (1.0 - np.eye(Q)), axis=-1) + self.I_out
        pi = compute_prices(self.u, sig / (1.0 + I), I, sig)
        return sig, I, pi


def cell_problem(u, W, ch, prices, m, P, out_prices=True):
    from .game import compute_interference

    h = ch.h if hasattr(ch, "h") else ch
    rep = compute_interference(W, h)
    N, Q, T = h.shape[2:]
    if out_prices:
        L_out = out_cell_leakage(prices, h, m)
    else:
        L_out = np.zeros((N, T, T), dtype=complex)
    return CellProblem(h[m, m], rep.I_out[m].copy(), L_out, u, float(P))


@dataclass
class InnerResult:
    W: np.ndarray
    converged: bool
    sweeps: int
    change: float


def _max_rel_change(new, old):
    dn = np.linalg.norm(new - old, axis=-1)
    ref = np.maximum(np.linalg.norm(new, axis=-1), np.linalg.norm(old, axis=-1))
    rel = np.where(ref > 0, dn / np.where(ref > 0, ref, 1.0), 0.0)
    return float(rel.max(initial=0.0))


def inner_sweep(prob, W0, lam, params=SolverParams(), tol=None, max_sweeps=None):
    """Gauss-Seidel fixed point over user slots at fixed ``lam``.

    Each visit of slot ``k`` refreshes the in-cell interference and in-cell
    prices from the current iterate, then applies the closed-form update to
    user ``k`` on every sub-channel simultaneously.
    """
    tol = params.inner_tol if tol is None else tol
    max_sweeps = params.inner_max_sweeps if max_sweeps is None else max_sweeps
    W = np.array(W0, dtype=complex, copy=True)
    N, Q, T = prob.h.shape
    mask = 1.0 - np.eye(Q)
    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        W_old = W.copy()
        for k in range(Q):
            _, I, pi = prob.in_cell_state(W)
            wts = pi * mask[k]
            L = prob.L_out + np.einsum("nq,nqi,nqj->nij", wts, prob.h, np.conj(prob.h))
            W[:, k] = _kkt_batch(prob.h[:, k], L, I[:, k], prob.u, lam, params.rank_tol)
        change = _max_rel_change(W, W_old)
        if change <= tol:
            return InnerResult(W, True, sweep, change)
    return InnerResult(W, False, max_sweeps, change)


@dataclass
class BisectResult:
    lam: float
    W: np.ndarray
    power: float
    at_floor: bool
    inner_converged: bool
    evaluations: int = 0
    trace: list = field(default_factory=list)   # (lam, power) per evaluation


def bisect_lambda(prob, W0, params=SolverParams(), lambda_hint=None):
    """Search the power multiplier so that the cell uses at most ``P``.

    Keeps ``power(lam_min) > P`` (or ``lam_min`` at the floor) and
    ``power(lam_max) <= P``, halves the bracket to ``lambda_tol`` and then
    tightens ``power(lam_max)`` towards ``P`` with Illinois steps at full
    inner-loop accuracy. Returns the beams found at ``lam_max``.
    """
    P = prob.P
    floor = params.lambda_floor
    trace = []
    cur = {"W": np.array(W0, dtype=complex, copy=True)}

    def evaluate(lam, fine=False):
        if fine:
            res = inner_sweep(prob, cur["W"], lam, params, tol=params.polish_tol,
                              max_sweeps=params.polish_max_sweeps)
        else:
            res = inner_sweep(prob, cur["W"], lam, params)
        cur["W"] = res.W
        p = float(np.sum(np.abs(res.W) ** 2))
        trace.append((lam, p))
        return res, p

    if lambda_hint is not None and lambda_hint > floor:
        lo = max(lambda_hint / 2.0, floor)
        hi = max(lambda_hint * 2.0, 2.0 * lo)
    elif lambda_hint is not None:
        lo, hi = floor, max(params.lambda_min_init, 2.0 * floor)
    else:
        lo, hi = params.lambda_min_init, params.lambda_max_init

    res_hi, p_hi = evaluate(hi)
    p_lo = None
    doublings = 0
    while p_hi > P:
        if doublings >= params.max_doublings:
            raise SolverError("could not bracket the power multiplier from above")
        lo, p_lo = hi, p_hi
        hi *= 2.0
        doublings += 1
        res_hi, p_hi = evaluate(hi)

    if p_lo is None:
        lo = min(lo, max(hi / 2.0, floor))
        res_lo, p_lo = evaluate(lo)
        while p_lo <= P:
            # lo is feasible too: it becomes the new upper end
            res_hi, p_hi, hi = res_lo, p_lo, lo
            if lo <= floor:
                return _finish(prob, res_hi.W, hi, True, trace, params, polish=True)
            lo = max(lo / 2.0, floor)
            res_lo, p_lo = evaluate(lo)

    while hi - lo > params.lambda_tol * hi:
        mid = 0.5 * (lo + hi)
        res, p = evaluate(mid)
        if p > P:
            lo, p_lo = mid, p
        else:
            res_hi, p_hi, hi = res, p, mid

    # regula falsi (Illinois) on power(lam) - P at polished accuracy
    res_hi, p_hi = evaluate(hi, fine=True)
    f_lo, f_hi = p_lo - P, p_hi - P
    best = (res_hi, hi) if f_hi <= 0 else None
    last = 0
    for _ in range(params.refine_max):
        if best is not None and -f_hi <= params.power_tol * P and f_hi <= 0:
            break
        if not (f_lo > 0 >= f_hi):
            break
        lam = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        if not lo < lam < hi:
            lam = 0.5 * (lo + hi)
        res, p = evaluate(lam, fine=True)
        f = p - P
        if f > 0:
            lo, f_lo = lam, f
            if last == -1:
                f_hi *= 0.5
            last = -1
        else:
            hi, f_hi = lam, f
            best = (res, lam)
            if last == 1:
                f_lo *= 0.5
            last = 1
    res, lam = best if best is not None else (res_hi, hi)
    return _finish(prob, res.W, lam, False, trace, params, polish=False,
                   converged=res.converged)


def _finish(prob, W, lam, at_floor, trace, params, polish, converged=True):
    if polish:
        pol = inner_sweep(prob, W, lam, params, tol=params.polish_tol,
                          max_sweeps=params.polish_max_sweeps)
        W, converged = pol.W, pol.converged
    power = float(np.sum(np.abs(W) ** 2))
    # an active budget (lambda above the floor) is met with equality
    if power > prob.P or (not at_floor and power > 0):
        W = W * np.sqrt(prob.P / power)
        power = float(np.sum(np.abs(W) ** 2))
    return BisectResult(lam, W, power, at_floor, converged, len(trace), trace)


def kkt_residual(prob, W, lam):
    """``(stationarity, power_gap, slackness)`` of cell beams ``W`` at ``lam``."""
    W = np.asarray(W, dtype=complex)
    N, Q, T = prob.h.shape
    power = float(np.sum(np.abs(W) ** 2))
    gap = max(0.0, power - prob.P)
    slack = abs(lam * (power - prob.P))
    if not np.any(W):
        return 0.0, gap, slack
    _, I, pi = prob.in_cell_state(W)
    L_in = in_cell_leakage(pi, prob.h)
    stat = 0.0
    for n in range(N):
        for k in range(Q):
            L = L_in[n, k] + prob.L_out[n]
            stat = max(stat, stationarity_residual(prob.h[n, k], L, I[n, k], prob.u, lam, W[n, k]))
    return stat, gap, slack


def lagrangian_value(prob, W, lam):
    """Per-BS Lagrangian ``sum U - w^H L w - lam * p + lam * P`` at beams ``W``.

    In-cell prices and interference are evaluated at ``W`` itself.
    """
    sig, I, pi = prob.in_cell_state(W)
    L = in_cell_leakage(pi, prob.h) + prob.L_out[:, None]
    util = float(np.sum(user_utilities(prob.u, sig / (1.0 + I))))
    cost = float(np.sum(quad_form(W, L)))
    return util - cost - lam * float(np.sum(np.abs(W) ** 2)) + lam * prob.P
