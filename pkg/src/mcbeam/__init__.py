"""Pricing-based distributed beamforming for multi-cell OFDMA downlinks."""

__version__ = "0.1.0"

from .baselines import channel_matched, in_cell_zero_forcing, non_cooperative, time_sharing_rate
from .distributed import BeamformingGame, GameState, MessageLog, overhead_report
from .game import compute_interference, compute_prices, compute_sinr, network_utility
from .network import ScenarioConfig, make_scenario
from .solver import SolverParams, bisect_lambda, kkt_beam_update
from .utility import Utility, default_utility

__all__ = [
    "BeamformingGame", "GameState", "MessageLog", "ScenarioConfig", "SolverParams", "Utility",
    "bisect_lambda", "channel_matched", "compute_interference", "compute_prices", "compute_sinr",
    "in_cell_zero_forcing", "kkt_beam_update", "make_scenario", "network_utility",
    "non_cooperative", "overhead_report", "default_utility", "time_sharing_rate",
]
