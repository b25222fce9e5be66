"""
Asymptotic secret-key rate and the repeaterless (PLOB) benchmark.

R = (2/M) Q^mu (1 - f H(e^mu) - I_AE^mu), where 2/M is the sifting factor of
matched and opposite phase announcements.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any, Dict, Optional

from scipy.special import entr

from src.physics.channel_model import ObservedStats, ProtocolParams

if TYPE_CHECKING:
    from src.security.eve_bound import EveBound

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1-x) log2(1-x), with H(0) = H(1) = 0.

    Raises:
        ValueError: If x lies outside [0, 1]
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"Binary entropy argument must lie in [0, 1], got {x}")
    return float((entr(x) + entr(1.0 - x)) / LN2)


def plob_bound(loss_db: float) -> float:
    """Repeaterless secret-key capacity -log2(1 - eta), eta = 10^(-loss_db/10).

    Returns +inf at 0 dB.
    """
    loss_db = float(loss_db)
    if not loss_db >= 0.0:
        raise ValueError(f"loss_db must be nonnegative, got {loss_db}")
    eta = 10.0 ** (-loss_db / 10.0)
    if eta >= 1.0:
        return math.inf
    return -math.log1p(-eta) / LN2


@dataclass(frozen=True)
class RatePoint:
    """Key rate at one channel point with the quantities that produced it.

    Attributes:
        loss_db: Total channel loss
        m: Number of discrete phases
        mu, nu: Signal and decoy intensities
        q_mu, e_mu: Code-mode gain and error rate
        i_ae: Bound on Eve's information, NaN when no bound could be computed
        rate: Key rate clamped at 0
        plob: PLOB bound at loss_db
        rate_unclamped: The rate before clamping, NaN when i_ae is NaN
        status: LP status text of the bound
    """

    loss_db: float
    m: int
    mu: float
    nu: float
    q_mu: float
    e_mu: float
    i_ae: float
    rate: float
    plob: float
    rate_unclamped: float = float("nan")
    status: str = "optimal"

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


def secret_key_rate(
    stats: ObservedStats, bound: Optional["EveBound"], p: ProtocolParams, loss_db: float = float("nan")
) -> RatePoint:
    """Evaluate R = max(0, (2/M) Q^mu (1 - f H(e^mu) - I_AE^mu)).

    Args:
        stats: Observed statistics at the signal intensity
        bound: Bound on Eve's information, or None when none exists (zero gain, infeasible statistics)
        p: Protocol parameters
        loss_db: Channel loss, used for the PLOB column

    Returns:
        RatePoint; without a bound the rate is 0 and i_ae is NaN
    """
    plob = plob_bound(loss_db) if not math.isnan(loss_db) else float("nan")
    common = dict(loss_db=loss_db, m=p.num_phases, mu=p.mu, nu=p.nu, q_mu=stats.q_mu, e_mu=stats.e_mu, plob=plob)

    if bound is None:
        return RatePoint(**common, i_ae=float("nan"), rate=0.0, rate_unclamped=float("nan"), status="no bound")

    sifting = 2.0 / p.num_phases
    unclamped = sifting * stats.q_mu * (1.0 - p.f * binary_entropy(stats.e_mu) - bound.holevo)
    return RatePoint(**common, i_ae=bound.holevo, rate=max(0.0, unclamped), rate_unclamped=unclamped, status=bound.status.value)
