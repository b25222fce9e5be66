"""
Photon-number statistics of discrete-phase-randomized coherent states.

Alice and Bob each pick one of M phases 2*pi*x/M. After keeping the matched
(x = y) or opposite (x = y +- M/2) trials at equal intensity xi, the joint state
is a mixture of approximated k-photon states |lambda_k^xi,+->, k = 0..M-1, each
a superposition of Fock states |lM + k,+-> drawn from a Poisson law of mean 2*xi.

This module evaluates the mixture weights P_M^xi(k), the overlaps between
approximated k-photon states prepared at two intensities, and the trace-distance
bound sqrt(1 - F^2) that limits how far their yields can differ.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Mapping, Tuple

import numpy as np

from src.utils.constants import IntensityLabel, NORMALIZATION_TOL, SERIES_MAX_TERMS, SERIES_REL_TOL

logger = logging.getLogger(__name__)


class UndefinedFidelityError(ValueError):
    """Raised when a fidelity involves a photon class that is never emitted (zero tail probability)."""

    pass


def validate_phase_count(num_phases: int) -> int:
    """Check that M is a positive even integer (M >= 2)."""
    if isinstance(num_phases, bool) or int(num_phases) != num_phases:
        raise ValueError(f"Phase count must be an integer, got {num_phases!r}")
    num_phases = int(num_phases)
    if num_phases < 2 or num_phases % 2:
        raise ValueError(f"Phase count must be even and >= 2, got {num_phases}")
    return num_phases


def validate_intensity(xi: float, name: str = "intensity") -> float:
    """Check that a mean photon number is finite and nonnegative."""
    xi = float(xi)
    if not math.isfinite(xi) or xi < 0:
        raise ValueError(f"{name} must be a finite nonnegative number, got {xi}")
    return xi


def _validate_index(k: int, num_phases: int) -> int:
    if int(k) != k or not 0 <= k < num_phases:
        raise ValueError(f"Photon class index must satisfy 0 <= k < M={num_phases}, got {k}")
    return int(k)


def _class_ratios(x: float, num_phases: int, k: int) -> np.ndarray:
    """Terms x^(lM+k)/(lM+k)! of one photon class, divided by the l = 0 term.

    The series stops once a term falls below SERIES_REL_TOL relative to the running sum.
    """
    ratios = [1.0]
    if x == 0.0:
        return np.asarray(ratios)

    term, total, n = 1.0, 1.0, k
    for _ in range(SERIES_MAX_TERMS):
        for _step in range(num_phases):
            n += 1
            term *= x / n
        ratios.append(term)
        total += term
        if term < SERIES_REL_TOL * total:
            break
    else:
        logger.warning(f"Photon class series for x={x}, M={num_phases}, k={k} hit the term cap without converging")
    return np.asarray(ratios)


def _leading_term(xi: float, k: int) -> float:
    """e^{-2xi} (2xi)^k / k!, the l = 0 contribution to P_M^xi(k)."""
    if xi == 0.0:
        return 1.0 if k == 0 else 0.0
    x = 2.0 * xi
    return math.exp(-x + k * math.log(x) - math.lgamma(k + 1))


def tail_prob(xi: float, num_phases: int, k: int) -> float:
    """Probability P_M^xi(k) of the approximated k-photon state.

    P_M^xi(k) = sum_l e^{-2xi} (2xi)^{lM+k} / (lM+k)!

    Args:
        xi: Intensity (mean photon number per source pulse)
        num_phases: Number of discrete phases M (even)
        k: Photon class index, 0 <= k < M

    Returns:
        The series value

    Raises:
        ValueError: If k is out of range or xi is negative
    """
    xi = validate_intensity(xi, "xi")
    num_phases = validate_phase_count(num_phases)
    k = _validate_index(k, num_phases)

    head = _leading_term(xi, k)
    if head == 0.0:
        return 0.0
    return head * float(np.sum(_class_ratios(2.0 * xi, num_phases, k)))


@dataclass(frozen=True)
class TailDistribution:
    """The M probabilities P_M^xi(k) for one intensity."""

    intensity: float
    num_phases: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.probs.shape != (self.num_phases,):
            raise ValueError(f"Tail distribution must hold M={self.num_phases} entries, got shape {self.probs.shape}")

    @property
    def even_mask(self) -> np.ndarray:
        return np.arange(self.num_phases) % 2 == 0


def tail_distribution(xi: float, num_phases: int) -> TailDistribution:
    """All M tail probabilities of intensity xi."""
    xi = validate_intensity(xi, "xi")
    num_phases = validate_phase_count(num_phases)

    probs = np.array([tail_prob(xi, num_phases, k) for k in range(num_phases)])
    total = float(np.sum(probs))
    if abs(total - 1.0) > NORMALIZATION_TOL:
        logger.warning(f"Tail distribution for xi={xi}, M={num_phases} sums to {total!r}")
    return TailDistribution(intensity=xi, num_phases=num_phases, probs=probs)


def photon_class(xi: float, num_phases: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Photon numbers and normalised weights making up |lambda_k^xi>.

    Returns:
        (n, w) where n[l] = lM + k and w[l] is the probability of |lM + k> within the class.
        For a vacuum source the class collapses onto the single Fock state |k>.
    """
    xi = validate_intensity(xi, "xi")
    num_phases = validate_phase_count(num_phases)
    k = _validate_index(k, num_phases)

    ratios = _class_ratios(2.0 * xi, num_phases, k)
    n = k + num_phases * np.arange(len(ratios))
    return n, ratios / np.sum(ratios)


def _overlap_series(xi_a: float, xi_b: float, num_phases: int, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ratio series of both classes and of their overlap, padded to a common length.

    The e^{-xi} prefactors and the l = 0 terms cancel in F, so only ratios are needed.
    """
    ra = _class_ratios(2.0 * xi_a, num_phases, k)
    rb = _class_ratios(2.0 * xi_b, num_phases, k)
    rt = _class_ratios(2.0 * math.sqrt(xi_a * xi_b), num_phases, k)
    size = max(len(ra), len(rb), len(rt))
    pad = lambda r: np.pad(r, (0, size - len(r)))  # noqa: E731
    return pad(ra), pad(rb), pad(rt)


def _check_defined(xi_a: float, xi_b: float, k: int) -> None:
    if k > 0 and (xi_a == 0.0 or xi_b == 0.0):
        raise UndefinedFidelityError(f"Fidelity undefined for k={k}: a vacuum source never emits this photon class")


def fidelity(xi_a: float, xi_b: float, num_phases: int, k: int) -> float:
    """Overlap F between |lambda_k^xi_a> and |lambda_k^xi_b>.

    F = e^{-(xi_a+xi_b)} / sqrt(P_a P_b) * sum_l (2 sqrt(xi_a xi_b))^{lM+k} / (lM+k)!

    Raises:
        UndefinedFidelityError: If either tail probability is zero (vacuum intensity with k > 0)
    """
    xi_a = validate_intensity(xi_a, "xi_a")
    xi_b = validate_intensity(xi_b, "xi_b")
    num_phases = validate_phase_count(num_phases)
    k = _validate_index(k, num_phases)
    _check_defined(xi_a, xi_b, k)

    if xi_a == xi_b:
        return 1.0
    ra, rb, rt = _overlap_series(xi_a, xi_b, num_phases, k)
    value = float(np.sum(rt)) / math.sqrt(float(np.sum(ra)) * float(np.sum(rb)))
    return min(value, 1.0)


def trace_bound(fid: float) -> float:
    """Trace-distance bound sqrt(1 - F^2) for pure states of fidelity F."""
    fid = float(fid)
    if not 0.0 <= fid <= 1.0:
        raise ValueError(f"Fidelity must lie in [0, 1], got {fid}")
    return math.sqrt((1.0 - fid) * (1.0 + fid))


def trace_gap(xi_a: float, xi_b: float, num_phases: int, k: int) -> float:
    """sqrt(1 - F^2) for the pair, evaluated without cancellation.

    1 - F^2 = sum_{l<m} (u_l v_m - u_m v_l)^2 / (|u|^2 |v|^2) with u_l^2, v_l^2 the class ratios,
    which stays accurate when F is within rounding of 1 (large M).

    Raises:
        UndefinedFidelityError: As for fidelity()
    """
    xi_a = validate_intensity(xi_a, "xi_a")
    xi_b = validate_intensity(xi_b, "xi_b")
    num_phases = validate_phase_count(num_phases)
    k = _validate_index(k, num_phases)
    _check_defined(xi_a, xi_b, k)

    if xi_a == xi_b:
        return 0.0
    ra, rb, _ = _overlap_series(xi_a, xi_b, num_phases, k)
    u, v = np.sqrt(ra), np.sqrt(rb)
    cross = np.outer(u, v) - np.outer(v, u)
    gap_sq = float(np.sum(np.triu(cross, k=1) ** 2)) / (float(np.sum(ra)) * float(np.sum(rb)))
    return min(math.sqrt(gap_sq), 1.0)


@dataclass
class FidelityTable:
    """Fidelities F[a][b][k] and trace bounds T[a][b][k] for each unordered intensity pair.

    Entries are NaN where the fidelity is undefined (zero-probability photon class).
    """

    num_phases: int
    fidelities: Dict[Tuple[IntensityLabel, IntensityLabel], np.ndarray] = field(default_factory=dict)
    traces: Dict[Tuple[IntensityLabel, IntensityLabel], np.ndarray] = field(default_factory=dict)

    def _key(self, a: IntensityLabel, b: IntensityLabel) -> Tuple[IntensityLabel, IntensityLabel]:
        if (a, b) in self.fidelities:
            return (a, b)
        if (b, a) in self.fidelities:
            return (b, a)
        raise KeyError(f"No fidelity entries for intensity pair ({a}, {b})")

    def fidelity(self, a: IntensityLabel, b: IntensityLabel) -> np.ndarray:
        return self.fidelities[self._key(a, b)]

    def trace(self, a: IntensityLabel, b: IntensityLabel) -> np.ndarray:
        return self.traces[self._key(a, b)]

    def pairs(self):
        return list(self.fidelities.keys())

    def set_pair(self, a: IntensityLabel, b: IntensityLabel, fids: np.ndarray, traces: np.ndarray = None) -> None:
        """Store entries for a pair; trace bounds default to sqrt(1 - F^2)."""
        fids = np.asarray(fids, dtype=float)
        if fids.shape != (self.num_phases,):
            raise ValueError(f"Fidelity row for ({a}, {b}) must have M={self.num_phases} entries")
        if traces is None:
            traces = np.array([np.nan if np.isnan(f) else trace_bound(f) for f in fids])
        self.fidelities[(a, b)] = fids
        self.traces[(a, b)] = np.asarray(traces, dtype=float)


def fidelity_table(intensities: Mapping[IntensityLabel, float], num_phases: int) -> FidelityTable:
    """Fidelity table over all unordered pairs of the given intensities."""
    num_phases = validate_phase_count(num_phases)
    table = FidelityTable(num_phases=num_phases)

    for a, b in combinations(list(intensities), 2):
        xi_a, xi_b = intensities[a], intensities[b]
        fids = np.full(num_phases, np.nan)
        traces = np.full(num_phases, np.nan)
        for k in range(num_phases):
            try:
                fids[k] = fidelity(xi_a, xi_b, num_phases, k)
                traces[k] = trace_gap(xi_a, xi_b, num_phases, k)
            except UndefinedFidelityError:
                continue
        table.set_pair(a, b, fids, traces)
    return table
