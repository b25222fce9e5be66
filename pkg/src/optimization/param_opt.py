"""
Signal and decoy intensity search.

A coarse logarithmic grid over (mu, nu) is followed by refinement rounds that
re-center a finer grid on the best point so far, each round shrinking the
window. omega stays fixed and mu > nu is enforced by filtering grid points.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.physics.channel_model import ChannelParams, ProtocolParams, observed_stats
from src.security.eve_bound import InfeasibleStatisticsError, ZeroGainError, max_holevo
from src.security.key_rate import RatePoint, secret_key_rate
from src.utils.constants import DEFAULT_GRID_SIZE, DEFAULT_MU_RANGE, DEFAULT_NU_RANGE, DEFAULT_REFINE_ROUNDS, DEFAULT_SHRINK

logger = logging.getLogger(__name__)

Range = Tuple[float, float]


@dataclass(frozen=True)
class SearchSpec:
    """Search space and schedule for the intensity optimization.

    Attributes:
        mu_range: (low, high) for the signal intensity
        nu_range: (low, high) for the decoy intensity
        grid_size: Points per axis on every grid, at least 4
        refine_rounds: Number of refinement rounds after the coarse grid
        shrink: Factor by which the window (in decades) narrows each round
    """

    mu_range: Range = DEFAULT_MU_RANGE
    nu_range: Range = DEFAULT_NU_RANGE
    grid_size: int = DEFAULT_GRID_SIZE
    refine_rounds: int = DEFAULT_REFINE_ROUNDS
    shrink: float = DEFAULT_SHRINK

    def __post_init__(self):
        for name in ("mu_range", "nu_range"):
            low, high = getattr(self, name)
            if not (0.0 < low <= high and math.isfinite(high)):
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({low}, {high})")
        if self.mu_range[1] <= self.nu_range[0]:
            raise ValueError(f"No intensity pair satisfies mu > nu with mu_range={self.mu_range} and nu_range={self.nu_range}")
        if int(self.grid_size) != self.grid_size or self.grid_size < 4:
            raise ValueError(f"grid_size must be an integer >= 4, got {self.grid_size}")
        if int(self.refine_rounds) != self.refine_rounds or self.refine_rounds < 0:
            raise ValueError(f"refine_rounds must be a nonnegative integer, got {self.refine_rounds}")
        if not self.shrink > 1.0:
            raise ValueError(f"shrink must exceed 1, got {self.shrink}")


def log_grid(low: float, high: float, size: int) -> np.ndarray:
    """size log-spaced points from low to high inclusive; a degenerate range gives one point."""
    if low == high:
        return np.array([float(low)])
    return np.unique(np.geomspace(low, high, size))


def _window(center: float, bounds: Range, half_decades: float, size: int) -> np.ndarray:
    low = max(bounds[0], center * 10.0 ** (-half_decades))
    high = min(bounds[1], center * 10.0**half_decades)
    return log_grid(low, high, size)


def evaluate_point(mu: float, nu: float, loss_db: float, p: ProtocolParams, ch: ChannelParams) -> RatePoint:
    """Key rate of one intensity pair at one loss.

    Statistics that cannot be bounded (zero gain, infeasible program) give a zero-rate point
    whose status names the reason.
    """
    params = p.with_intensities(mu, nu)
    channel = ch.at_loss(loss_db)
    stats = observed_stats(params, channel)
    try:
        bound = max_holevo(stats, params)
    except ZeroGainError:
        return replace(secret_key_rate(stats, None, params, loss_db), status="zero gain")
    except InfeasibleStatisticsError as e:
        logger.warning(f"Infeasible yield program at {loss_db} dB, mu={mu:.4g}, nu={nu:.4g}: {e}")
        return replace(secret_key_rate(stats, None, params, loss_db), status="infeasible")
    return secret_key_rate(stats, bound, params, loss_db)


def _rank(point: RatePoint) -> Tuple[float, float, float, float]:
    """Sort key: best rate first, then best unclamped rate, then smallest mu and nu.

    Among points tied at a clamped rate of 0 this prefers the one closest to a positive rate
    over the smallest (mu, nu). Positive-rate ties still fall back to the smallest mu, then nu.
    """
    unclamped = -math.inf if math.isnan(point.rate_unclamped) else point.rate_unclamped
    return (-point.rate, -unclamped, point.mu, point.nu)


def _evaluate_grid(
    pairs: List[Tuple[float, float]], loss_db: float, p: ProtocolParams, ch: ChannelParams, n_jobs: Optional[int]
) -> List[RatePoint]:
    if n_jobs is None or n_jobs == 1:
        return [evaluate_point(mu, nu, loss_db, p, ch) for mu, nu in pairs]
    return Parallel(n_jobs=n_jobs)(delayed(evaluate_point)(mu, nu, loss_db, p, ch) for mu, nu in pairs)


def _pairs(mus: Iterable[float], nus: Iterable[float]) -> List[Tuple[float, float]]:
    return [(float(mu), float(nu)) for mu in mus for nu in nus if mu > nu]


def optimize_intensities(
    loss_db: float, p: ProtocolParams, ch: ChannelParams, spec: SearchSpec, n_jobs: Optional[int] = None
) -> Tuple[float, float, RatePoint]:
    """Maximize the key rate over (mu, nu) at one loss.

    Args:
        loss_db: Channel loss
        p: Protocol parameters; its mu and nu are ignored
        ch: Channel parameters; its loss is replaced by loss_db
        spec: Search space and schedule
        n_jobs: joblib worker count for grid evaluations

    Returns:
        (mu*, nu*, RatePoint at the optimum); the point has zero rate when no positive rate was found
    """
    mus = log_grid(*spec.mu_range, spec.grid_size)
    nus = log_grid(*spec.nu_range, spec.grid_size)
    best = min(_evaluate_grid(_pairs(mus, nus), loss_db, p, ch, n_jobs), key=_rank)
    logger.debug(f"Coarse grid at {loss_db} dB, M={p.num_phases}: mu={best.mu:.4g}, nu={best.nu:.4g}, rate={best.rate:.6e}")

    mu_half = math.log10(spec.mu_range[1] / spec.mu_range[0]) / 2.0
    nu_half = math.log10(spec.nu_range[1] / spec.nu_range[0]) / 2.0
    for round_index in range(1, spec.refine_rounds + 1):
        factor = spec.shrink**round_index
        mus = _window(best.mu, spec.mu_range, mu_half / factor, spec.grid_size)
        nus = _window(best.nu, spec.nu_range, nu_half / factor, spec.grid_size)
        pairs = _pairs(mus, nus)
        if not pairs:
            break
        candidate = min(_evaluate_grid(pairs, loss_db, p, ch, n_jobs), key=_rank)
        if _rank(candidate) < _rank(best):
            best = candidate
        logger.debug(f"Refinement round {round_index} at {loss_db} dB: mu={best.mu:.4g}, nu={best.nu:.4g}, rate={best.rate:.6e}")

    if best.rate <= 0.0:
        logger.debug(f"No positive key rate at {loss_db} dB for M={p.num_phases}")
    return best.mu, best.nu, best
