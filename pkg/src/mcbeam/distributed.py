"""Round-robin priced beamforming game between base stations.

One BS at a time re-optimizes its beams against frozen prices and
interference of the others, and keeps the candidate only if its priced
payoff does not drop. Messages that BSs would exchange are counted in a
:class:`MessageLog`.
"""

from collections import defaultdict
from dataclasses import dataclass, field
import copy

import numpy as np

from . import baselines
from .game import (cell_cost, compute_interference, network_utility, state_prices,
                   user_utilities)
from .solver import SolverParams, bisect_lambda, cell_problem

PRICE, INTERFERENCE, CHANNEL = 0, 1, 2


class MessageLog:
    """Counts scalars sent between BSs, keyed by ``(sender, receiver, round)``.

    Round 0 is the setup phase (channel vectors, counted as complex scalars).
    """

    def __init__(self):
        self.counts = defaultdict(lambda: np.zeros(3, dtype=np.int64))

    def send(self, sender, receiver, rnd, price=0, interference=0, channel=0):
        self.counts[(sender, receiver, rnd)] += (price, interference, channel)

    def totals(self):
        tot = np.zeros(3, dtype=np.int64)
        for v in self.counts.values():
            tot += v
        return {"price": int(tot[PRICE]), "interference": int(tot[INTERFERENCE]),
                "channel_complex": int(tot[CHANNEL])}

    def per_round(self):
        out = defaultdict(lambda: np.zeros(3, dtype=np.int64))
        for (_, _, rnd), v in self.counts.items():
            out[rnd] += v
        return {r: {"price": int(v[PRICE]), "interference": int(v[INTERFERENCE]),
                    "channel_complex": int(v[CHANNEL])} for r, v in sorted(out.items())}

    def round_scalars(self):
        """Real scalars exchanged during the game rounds (setup excluded)."""
        return sum(int(v[PRICE] + v[INTERFERENCE]) for (_, _, r), v in self.counts.items() if r > 0)

    def copy(self):
        new = MessageLog()
        for key, v in self.counts.items():
            new.counts[key] = v.copy()
        return new


def overhead_report(log, Q, T):
    """Traffic summary and the price-vector versus leakage-matrix comparison.

    Sending the ``Q`` real prices of a cell and sub-channel replaces sending
    a ``T x T`` complex leakage matrix (``2 T^2`` reals).
    """
    tot = log.totals()
    ratio = Q / (2.0 * T * T)
    price = tot["price"]
    return {
        "totals": tot,
        "round_scalars": log.round_scalars(),
        "per_round": log.per_round(),
        "price_to_matrix_ratio": ratio,
        "price_vector_scalars": price,
        "matrix_scheme_scalars": int(round(price / ratio)) if price else 0,
    }


@dataclass
class GameState:
    W: np.ndarray
    report: object
    prices: np.ndarray
    utility: float
    lambdas: np.ndarray
    messages: MessageLog
    outer_iteration: int = 0
    accepted_updates: int = 0
    utility_trace: list = field(default_factory=list)   # (round, bs, accepted, utility)
    inner_trace: list = field(default_factory=list)     # (round, bs, event, utility)
    stop_reason: str = ""

    @property
    def converged(self):
        return self.stop_reason in ("converged", "no_accepted")


@dataclass
class StepInfo:
    accepted: bool
    changed: bool
    payoff_old: float
    payoff_new: float
    lam: float
    candidate: np.ndarray


@dataclass
class NashReport:
    payoffs: np.ndarray
    improvements: np.ndarray
    relative: np.ndarray
    eps: float

    @property
    def certified(self):
        return bool(np.all(self.relative <= self.eps))


class BeamformingGame:
    """Pricing-based distributed beamforming over a fixed channel set.

    ``pricing=False`` zeroes every out-cell price (the pure non-cooperative
    game); in-cell prices stay active inside the per-BS solver.
    ``acceptance`` selects the payoff of the better-response test:
    ``"out_cell"`` (own utility minus the out-cell pricing cost) or
    ``"full"`` (also subtracting the in-cell cost at the current prices).
    """

    def __init__(self, ch, u, P, params=None, pricing=True, acceptance="out_cell",
                 tie_tol=1e-12):
        if acceptance not in ("out_cell", "full"):
            raise ValueError(f"unknown acceptance rule {acceptance!r}")
        self.ch = ch
        self.u = u
        self.P = float(P)
        self.params = params or SolverParams()
        self.pricing = pricing
        self.acceptance = acceptance
        self.tie_tol = tie_tol
        self.M, self.N, self.Q, self.T = ch.shape

    # -- state -----------------------------------------------------------
    def initialize(self, init="cm"):
        if init == "cm":
            W = baselines.channel_matched(self.ch, self.P)
        elif init == "iczf":
            W = baselines.in_cell_zero_forcing(self.ch, self.P)
        else:
            raise ValueError(f"unknown initialization {init!r}")
        return self.state_from_beams(W)

    def state_from_beams(self, W):
        W = np.array(W, dtype=complex, copy=True)
        report = compute_interference(W, self.ch)
        prices = state_prices(self.u, W, self.ch, report)
        util = network_utility(self.u, W, self.ch, report)
        log = MessageLog()
        self._log_setup(log)
        st = GameState(W, report, prices, util, np.full(self.M, np.nan), log)
        st.utility_trace.append((0, -1, True, util))
        return st

    def _log_setup(self, log):
        # user u of cell j reports h_{m,u} (T complex) to BS j, which forwards it to m
        for j in range(self.M):
            for m in range(self.M):
                if m != j:
                    log.send(j, m, 0, channel=self.N * self.Q * self.T)

    # -- payoffs ---------------------------------------------------------
    def acceptance_payoff(self, W, prices, m):
        sinr = self._sinr(W)
        own = float(np.sum(user_utilities(self.u, sinr[m])))
        if own == -np.inf:
            return own
        cost = cell_cost(W, self.ch, prices, m, in_cell=self.acceptance == "full",
                         out_cell=self.pricing)
        return own - cost

    def _sinr(self, W):
        rep = compute_interference(W, self.ch)
        return rep.signal / (1.0 + rep.I_total)

    # -- better-response steps ------------------------------------------
    def solve_cell(self, state, m):
        prob = cell_problem(self.u, state.W, self.ch, state.prices, m, self.P,
                            out_prices=self.pricing)
        hint = state.lambdas[m]
        return bisect_lambda(prob, state.W[m], self.params,
                             lambda_hint=None if np.isnan(hint) else hint)

    def step(self, state, m, rnd=None):
        """One better-response attempt by BS ``m``; returns ``(accepted, state, info)``.

        A rejected candidate returns the very same state object.
        """
        res = self.solve_cell(state, m)
        W_new = state.W.copy()
        W_new[m] = res.W
        old = self.acceptance_payoff(state.W, state.prices, m)
        new = self.acceptance_payoff(W_new, state.prices, m)
        changed = not np.array_equal(res.W, state.W[m])
        info = StepInfo(new >= old, changed, old, new, res.lam, res.W)
        if not info.accepted:
            return False, state, info
        st = copy.copy(state)
        st.W = W_new
        st.report = compute_interference(W_new, self.ch)
        st.prices = state_prices(self.u, W_new, self.ch, st.report)
        st.utility = network_utility(self.u, W_new, self.ch, st.report)
        st.lambdas = state.lambdas.copy()
        st.lambdas[m] = res.lam
        st.messages = state.messages.copy()
        st.utility_trace = list(state.utility_trace)
        st.inner_trace = list(state.inner_trace)
        st.accepted_updates = state.accepted_updates + 1
        rnd = state.outer_iteration if rnd is None else rnd
        nq = self.N * self.Q
        for j in range(self.M):
            if j != m:
                state_price = nq if self.pricing else 0
                st.messages.send(m, j, rnd, price=state_price, interference=nq)
        return True, st, info

    def _inner_events(self, W_before, m, candidate, rnd):
        # network utility as the candidate replaces one user slot at a time
        W = W_before.copy()
        events = []
        for k in range(self.Q):
            W[m, :, k] = candidate[:, k]
            events.append((rnd, m, k + 1, network_utility(self.u, W, self.ch)))
        return events

    def run(self, state, max_outer=50, rel_utility_tol=1e-4, record_inner=False):
        """Round-robin updates until a round changes the network utility by
        at most ``rel_utility_tol`` (relative) or has no effective update."""
        st = copy.copy(state)
        st.utility_trace = list(state.utility_trace)
        st.inner_trace = list(state.inner_trace)
        if max_outer <= 0:
            st.stop_reason = "max_outer"
            return st
        first = state.outer_iteration + 1
        for rnd in range(first, first + max_outer):
            u_start = st.utility
            effective = 0
            for m in range(self.M):
                W_before = st.W
                accepted, st, info = self.step(st, m, rnd)
                if accepted:
                    tie = (not info.changed) or abs(info.payoff_new - info.payoff_old) < self.tie_tol
                    effective += not tie
                if record_inner:
                    st.inner_trace.extend(self._inner_events(W_before, m, info.candidate, rnd))
                st.utility_trace.append((rnd, m, accepted, st.utility))
            st.outer_iteration = rnd
            if effective == 0:
                st.stop_reason = "no_accepted"
                return st
            scale = max(abs(u_start), abs(st.utility), 1e-12)
            if abs(st.utility - u_start) <= rel_utility_tol * scale:
                st.stop_reason = "converged"
                return st
        st.stop_reason = "max_outer"
        return st

    def verify_nash(self, state, eps=1e-4):
        """Re-solve every BS with the others frozen and report the payoff gain."""
        pay = np.empty(self.M)
        imp = np.empty(self.M)
        for m in range(self.M):
            res = self.solve_cell(state, m)
            W_new = state.W.copy()
            W_new[m] = res.W
            pay[m] = self.acceptance_payoff(state.W, state.prices, m)
            imp[m] = self.acceptance_payoff(W_new, state.prices, m) - pay[m]
        rel = imp / (1.0 + np.abs(pay))
        return NashReport(pay, imp, rel, eps)
