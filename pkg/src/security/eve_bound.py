"""
Upper bound on Eve's information from the decoy statistics.

The unknown yields Y_k^xi of the approximated k-photon states are constrained by
the observed gains, by the fidelity bound between intensities, and by the cap
sum_{k even} P^mu(k) Y_k^mu <= Q^mu / 2. The even-photon weight is maximized as
a linear program; since the cap keeps its ratio to Q^mu in [0, 1/2], where H is
increasing, H of the optimum is the bound I_AE^mu.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Mapping

import numpy as np

from src.physics.channel_model import ObservedStats, ProtocolParams
from src.physics.photon_stats import FidelityTable, TailDistribution, fidelity_table, tail_distribution
from src.security.key_rate import binary_entropy
from src.security.lp_core import LinearProgram, LpStatus, solve_lp
from src.utils.constants import IntensityLabel

logger = logging.getLogger(__name__)


class EveBoundError(Exception):
    """Base class for failures to bound Eve's information."""

    pass


class InfeasibleStatisticsError(EveBoundError):
    """No yield assignment reproduces the observed gains."""

    pass


class ZeroGainError(EveBoundError):
    """The signal gain Q^mu is zero, so the bound is undefined."""

    pass


@dataclass(frozen=True)
class YieldVector:
    """Yields Y[xi][k], stored as one row per intensity label."""

    labels: List[IntensityLabel]
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.labels):
            raise ValueError(f"Yield array shape {self.values.shape} does not match {len(self.labels)} labels")

    @classmethod
    def from_flat(cls, x: np.ndarray, labels: List[IntensityLabel]) -> "YieldVector":
        values = np.clip(np.asarray(x, dtype=float).reshape(len(labels), -1), 0.0, 1.0)
        return cls(labels=list(labels), values=values)

    def __getitem__(self, label: IntensityLabel) -> np.ndarray:
        return self.values[self.labels.index(IntensityLabel(label))]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class EveBound:
    """Solved bound on Eve's information at the signal intensity.

    Attributes:
        lp_value: Maximized sum_{k even} P^mu(k) Y_k^mu
        holevo: I_AE^mu = H(lp_value / Q^mu)
        solution: Maximizing yields
        status: LP status
        residual: Largest constraint violation of the solution (in the scaled program)
    """

    lp_value: float
    holevo: float
    solution: YieldVector
    status: LpStatus
    residual: float = 0.0


def _row_scale(stats: ObservedStats) -> float:
    return stats.q_mu if stats.q_mu > 0 else 1.0


def _gain(stats: ObservedStats, label: IntensityLabel) -> float:
    return stats.q_mu if label == IntensityLabel.MU else stats.test_gain[label]


def build_lp(stats: ObservedStats, dists: Mapping[IntensityLabel, TailDistribution], fids: FidelityTable) -> LinearProgram:
    """Assemble the yield program.

    Variables are Y[xi][k] in label order of dists, each in [0, 1] (pinned to 0 for classes the source never
    emits). Equality, cap and objective rows are divided by Q^mu when it is positive.

    Args:
        stats: Observed gains; Q^mu is used for the signal intensity
        dists: Tail distribution per intensity label, must include mu
        fids: Fidelity table over the same labels

    Returns:
        LinearProgram maximizing the even-photon weight of the signal

    Raises:
        ValueError: On inconsistent phase counts or missing labels
    """
    labels = [IntensityLabel(label) for label in dists]
    if IntensityLabel.MU not in labels:
        raise ValueError("Tail distributions must include the signal intensity mu")
    num_phases = fids.num_phases
    for label in labels:
        if dists[label].num_phases != num_phases:
            raise ValueError(f"Tail distribution for {label.value} has M={dists[label].num_phases}, fidelity table has M={num_phases}")
        if label != IntensityLabel.MU and label not in stats.test_gain:
            raise ValueError(f"No test-mode gain observed for intensity {label.value}")

    n = len(labels) * num_phases
    scale = _row_scale(stats)
    offset = {label: i * num_phases for i, label in enumerate(labels)}
    probs = {label: dists[label].probs for label in labels}

    a_eq, b_eq = [], []
    for label in labels:
        row = np.zeros(n)
        row[offset[label] : offset[label] + num_phases] = probs[label] / scale
        a_eq.append(row)
        b_eq.append(_gain(stats, label) / scale)

    a_in, b_in = [], []
    for a, b in combinations(labels, 2):
        traces = fids.trace(a, b)
        for k in range(num_phases):
            if np.isnan(traces[k]) or probs[a][k] == 0.0 or probs[b][k] == 0.0:
                continue
            row = np.zeros(n)
            row[offset[a] + k], row[offset[b] + k] = 1.0, -1.0
            a_in.extend([row, -row])
            b_in.extend([traces[k], traces[k]])

    mu_probs = probs[IntensityLabel.MU]
    even = np.arange(num_phases) % 2 == 0
    objective = np.zeros(n)
    objective[offset[IntensityLabel.MU] : offset[IntensityLabel.MU] + num_phases] = np.where(even, mu_probs, 0.0) / scale
    a_in.append(objective.copy())
    b_in.append(stats.q_mu / 2.0 / scale)

    hi = np.concatenate([np.where(probs[label] > 0.0, 1.0, 0.0) for label in labels])
    return LinearProgram(c=objective, lo=np.zeros(n), hi=hi, a_eq=np.array(a_eq), b_eq=np.array(b_eq), a_in=np.array(a_in), b_in=np.array(b_in))


def max_holevo(stats: ObservedStats, p: ProtocolParams) -> EveBound:
    """Bound Eve's information I_AE^mu for the given statistics.

    Args:
        stats: Observed statistics
        p: Protocol parameters (M and the intensity set)

    Returns:
        EveBound with holevo in [0, 1]

    Raises:
        ZeroGainError: If Q^mu is not positive
        InfeasibleStatisticsError: If no yields reproduce the observed gains
        LpNumericalError: If the solver fails
    """
    if not stats.q_mu > 0.0:
        raise ZeroGainError(f"Signal gain must be positive to bound Eve's information, got Q^mu={stats.q_mu}")

    intensities = p.intensities
    dists: Dict[IntensityLabel, TailDistribution] = {label: tail_distribution(xi, p.num_phases) for label, xi in intensities.items()}
    lp = build_lp(stats, dists, fidelity_table(intensities, p.num_phases))
    solution = solve_lp(lp)

    if solution.status == LpStatus.INFEASIBLE:
        raise InfeasibleStatisticsError(f"Observed statistics admit no yields (M={p.num_phases}, mu={p.mu}, nu={p.nu}, Q^mu={stats.q_mu:.6e})")
    if solution.status != LpStatus.OPTIMAL:
        raise EveBoundError(f"Yield program ended with status {solution.status.value}")

    lp_value = solution.objective * _row_scale(stats)
    ratio = min(max(lp_value / stats.q_mu, 0.0), 0.5)
    holevo = binary_entropy(ratio)
    logger.debug(f"Eve bound M={p.num_phases}, mu={p.mu:.4g}, nu={p.nu:.4g}: ratio={ratio:.6e}, I_AE={holevo:.6e}")
    return EveBound(
        lp_value=lp_value,
        holevo=holevo,
        solution=YieldVector.from_flat(solution.x, list(dists)),
        status=solution.status,
        residual=solution.residual,
    )
