"""
Analytic honest-channel model of the twin-field measurement.

Alice and Bob send coherent pulses to a midpoint 50:50 beam splitter followed by
two threshold detectors L and R. Each arm carries half of the total loss. The
phase difference decides which detector the light interferes into, and
misalignment lowers the interference visibility to (1 - 2*misalign).
Double clicks are treated as no click.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

import numpy as np

from src.physics.photon_stats import photon_class, tail_prob, validate_intensity, validate_phase_count
from src.utils.constants import DEFAULT_DARK_COUNT, DEFAULT_DET_EFF, DEFAULT_MISALIGN, DEFAULT_OMEGA, DEFAULT_RECONCILIATION_F, IntensityLabel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _check_probability(value: float, name: str, upper: float = 1.0) -> float:
    value = float(value)
    if not math.isfinite(value) or not 0.0 <= value <= upper:
        raise ValueError(f"{name} must lie in [0, {upper}], got {value}")
    return value


@dataclass(frozen=True)
class ChannelParams:
    """Loss and detector parameters of the symmetric Alice-Eve-Bob channel.

    Attributes:
        loss_db: Total Alice-Bob loss in dB, split evenly between the two arms
        det_eff: Detector efficiency
        dark: Dark-count probability per pulse per detector
        misalign: Misalignment error fraction, at most 0.5
    """

    loss_db: float
    det_eff: float = DEFAULT_DET_EFF
    dark: float = DEFAULT_DARK_COUNT
    misalign: float = DEFAULT_MISALIGN

    def __post_init__(self):
        loss = float(self.loss_db)
        if not math.isfinite(loss) or loss < 0:
            raise ValueError(f"loss_db must be a finite nonnegative number, got {self.loss_db}")
        _check_probability(self.det_eff, "det_eff")
        _check_probability(self.dark, "dark")
        _check_probability(self.misalign, "misalign", upper=0.5)

    @property
    def arm_transmittance(self) -> float:
        return 10.0 ** (-self.loss_db / 20.0)

    @property
    def eta(self) -> float:
        """Effective per-arm efficiency det_eff * 10^(-loss_db/20)."""
        return self.det_eff * self.arm_transmittance

    @property
    def visibility(self) -> float:
        return 1.0 - 2.0 * self.misalign

    def at_loss(self, loss_db: float) -> "ChannelParams":
        return ChannelParams(loss_db=loss_db, det_eff=self.det_eff, dark=self.dark, misalign=self.misalign)


@dataclass(frozen=True)
class ProtocolParams:
    """Phase count, intensity set and reconciliation inefficiency.

    Only nonnegativity is checked here. The strict ordering mu > nu > omega is a
    convention enforced by the intensity search and the run configuration.
    """

    num_phases: int
    mu: float
    nu: float
    omega: float = DEFAULT_OMEGA
    f: float = DEFAULT_RECONCILIATION_F

    def __post_init__(self):
        validate_phase_count(self.num_phases)
        for name in ("mu", "nu", "omega"):
            validate_intensity(getattr(self, name), name)
        if not math.isfinite(self.f) or self.f < 1.0:
            raise ValueError(f"Reconciliation inefficiency f must be >= 1, got {self.f}")

    @property
    def intensities(self) -> Dict[IntensityLabel, float]:
        return {IntensityLabel.MU: self.mu, IntensityLabel.NU: self.nu, IntensityLabel.OMEGA: self.omega}

    def with_intensities(self, mu: float, nu: float) -> "ProtocolParams":
        return ProtocolParams(num_phases=self.num_phases, mu=mu, nu=nu, omega=self.omega, f=self.f)


@dataclass(frozen=True)
class ObservedStats:
    """Gains and error rates seen by Alice and Bob after sifting.

    Attributes:
        test_gain: Test-mode gain Q^xi per intensity label
        q_mu: Code-mode gain, the mean of the matched and opposite gains
        e_mu: Code-mode error rate
        q_matched, e_matched: Gain and error rate of matched trials (x = y)
        q_opposite, e_opposite: Gain and error rate of opposite trials (x = y +- M/2)
    """

    test_gain: Dict[IntensityLabel, float]
    q_mu: float
    e_mu: float
    q_matched: float = field(default=float("nan"))
    e_matched: float = field(default=float("nan"))
    q_opposite: float = field(default=float("nan"))
    e_opposite: float = field(default=float("nan"))

    def __post_init__(self):
        for name, value in self.as_fields().items():
            if math.isnan(value) and name in ("q_matched", "e_matched", "q_opposite", "e_opposite"):
                continue
            _check_probability(value, name)

    @classmethod
    def from_breakdown(
        cls, test_gain: Dict[IntensityLabel, float], q_matched: float, e_matched: float, q_opposite: float, e_opposite: float
    ) -> "ObservedStats":
        """Combine matched/opposite statistics into Q^mu and e^mu."""
        q_total = q_matched + q_opposite
        e_mu = (q_matched * e_matched + q_opposite * e_opposite) / q_total if q_total > 0 else 0.0
        return cls(
            test_gain=dict(test_gain),
            q_mu=q_total / 2.0,
            e_mu=e_mu,
            q_matched=q_matched,
            e_matched=e_matched,
            q_opposite=q_opposite,
            e_opposite=e_opposite,
        )

    def as_fields(self) -> Dict[str, float]:
        """Flat name -> value view, test gains keyed as test_gain_<label>."""
        fields = {
            "q_mu": self.q_mu,
            "e_mu": self.e_mu,
            "q_matched": self.q_matched,
            "e_matched": self.e_matched,
            "q_opposite": self.q_opposite,
            "e_opposite": self.e_opposite,
        }
        for label, gain in self.test_gain.items():
            fields[f"test_gain_{IntensityLabel(label).value}"] = gain
        return fields


def apply_flips(k_a, k_b, outcome_is_r, opposite):
    """Whether a sifted code-mode trial ends in a bit error.

    Bob flips his bit on an R click and flips again on an opposite (x = y +- M/2) trial;
    the trial is an error when his reconciled bit differs from k_a. Works elementwise on numpy arrays.
    """
    return (k_b ^ outcome_is_r ^ opposite) != k_a


def detector_probs(xi_a: ArrayLike, xi_b: ArrayLike, cos_dphi: ArrayLike, ch: ChannelParams) -> Tuple[ArrayLike, ArrayLike]:
    """Click probabilities of detectors L and R given cos of the phase difference.

    n_{L/R} = eta (xi_a + xi_b +- 2 sqrt(xi_a xi_b) V cos dphi) / 2, p = 1 - (1 - dark) e^{-n}
    """
    interference = 2.0 * np.sqrt(np.multiply(xi_a, xi_b)) * ch.visibility * cos_dphi
    total = np.add(xi_a, xi_b)
    n_l = np.maximum(ch.eta * (total + interference) / 2.0, 0.0)
    n_r = np.maximum(ch.eta * (total - interference) / 2.0, 0.0)
    p_l = -np.expm1(-n_l) + ch.dark * np.exp(-n_l)
    p_r = -np.expm1(-n_r) + ch.dark * np.exp(-n_r)
    return p_l, p_r


def click_probs(xi_a: float, xi_b: float, dphi: float, ch: ChannelParams) -> Tuple[float, float]:
    """Click probabilities (pL, pR) for intensities xi_a, xi_b and phase difference dphi.

    Args:
        xi_a: Alice's intensity
        xi_b: Bob's intensity
        dphi: Phase difference in radians
        ch: Channel parameters

    Returns:
        Tuple of the L and R detector click probabilities
    """
    xi_a = validate_intensity(xi_a, "xi_a")
    xi_b = validate_intensity(xi_b, "xi_b")
    p_l, p_r = detector_probs(xi_a, xi_b, math.cos(dphi), ch)
    return float(p_l), float(p_r)


def single_click(p_l: ArrayLike, p_r: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Probabilities of an L-only and an R-only click."""
    return p_l * (1.0 - p_r), p_r * (1.0 - p_l)


def _code_mode_stats(mu: float, ch: ChannelParams, opposite: int) -> Tuple[float, float]:
    """Gain and error rate of code-mode trials of one sifting class."""
    clicks, errors = [], []
    for k_a in (0, 1):
        for k_b in (0, 1):
            # phase difference is pi*(k_a - k_b), plus pi on opposite trials
            cos_dphi = -1.0 if (k_a ^ k_b ^ opposite) else 1.0
            p_l, p_r = detector_probs(mu, mu, cos_dphi, ch)
            only_l, only_r = single_click(float(p_l), float(p_r))
            clicks.extend([only_l / 4.0, only_r / 4.0])
            if apply_flips(k_a, k_b, 0, opposite):
                errors.append(only_l / 4.0)
            if apply_flips(k_a, k_b, 1, opposite):
                errors.append(only_r / 4.0)
    gain = math.fsum(clicks)
    return gain, (math.fsum(errors) / gain if gain > 0 else 0.0)


def mode_gain(xi: float, ch: ChannelParams) -> float:
    """Single-click probability of a kept test-mode trial at equal intensities xi.

    Kept trials are matched (dphi = 0) or opposite (dphi = pi) with equal weight.
    """
    xi = validate_intensity(xi, "xi")
    clicks = []
    for cos_dphi in (1.0, -1.0):
        p_l, p_r = detector_probs(xi, xi, cos_dphi, ch)
        only_l, only_r = single_click(float(p_l), float(p_r))
        clicks.extend([only_l / 2.0, only_r / 2.0])
    return math.fsum(clicks)


def observed_stats(p: ProtocolParams, ch: ChannelParams) -> ObservedStats:
    """Expected statistics of the protocol run over the honest channel.

    Args:
        p: Protocol parameters (M enters only through sifting, not through the expected values)
        ch: Channel parameters

    Returns:
        ObservedStats with the matched/opposite breakdown
    """
    q_matched, e_matched = _code_mode_stats(p.mu, ch, opposite=0)
    q_opposite, e_opposite = _code_mode_stats(p.mu, ch, opposite=1)
    gains = {label: mode_gain(xi, ch) for label, xi in p.intensities.items()}

    stats = ObservedStats.from_breakdown(gains, q_matched, e_matched, q_opposite, e_opposite)
    logger.debug(f"Observed stats at {ch.loss_db} dB, mu={p.mu}: Q={stats.q_mu:.6e}, e={stats.e_mu:.6e}")
    return stats


def fock_yields(n: np.ndarray, ch: ChannelParams) -> np.ndarray:
    """Single-click probability for n photons in the interfering mode.

    Each photon is detected with probability eta and lands in the wrong detector with probability misalign.
    """
    n = np.asarray(n, dtype=float)
    keep_dark = 1.0 - ch.dark
    no_wrong = np.power(1.0 - ch.eta * ch.misalign, n)
    no_right = np.power(1.0 - ch.eta * (1.0 - ch.misalign), n)
    none = np.power(1.0 - ch.eta, n)
    return keep_dark * (no_wrong + no_right) - 2.0 * keep_dark**2 * none


def honest_yields(xi: float, num_phases: int, ch: ChannelParams) -> np.ndarray:
    """Per-class yields Y_k^xi of the honest channel, k = 0..M-1.

    Zero-probability classes (vacuum source, k > 0) report 0.
    """
    xi = validate_intensity(xi, "xi")
    num_phases = validate_phase_count(num_phases)

    yields = np.zeros(num_phases)
    for k in range(num_phases):
        if tail_prob(xi, num_phases, k) == 0.0:
            continue
        n, weights = photon_class(xi, num_phases, k)
        yields[k] = float(np.dot(weights, fock_yields(n, ch)))
    return yields
