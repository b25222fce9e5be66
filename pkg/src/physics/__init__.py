"""
Physics of the discrete-phase twin-field setup.

Photon-number statistics of the sources, the analytic honest channel and the trial-level Monte Carlo.
"""

from .channel_model import ChannelParams, ObservedStats, ProtocolParams, click_probs, observed_stats
from .photon_stats import fidelity, tail_distribution, tail_prob, trace_bound
from .protocol_mc import McEstimate, run_trials

__all__ = [
    "ChannelParams",
    "ObservedStats",
    "ProtocolParams",
    "click_probs",
    "observed_stats",
    "fidelity",
    "tail_distribution",
    "tail_prob",
    "trace_bound",
    "McEstimate",
    "run_trials",
]
