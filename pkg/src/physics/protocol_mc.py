"""
Trial-level Monte Carlo of the twin-field protocol.

Each trial picks a mode, phases and bits or intensities, samples both threshold
detectors from the channel model, and applies the announcement, sifting and
flip rules. Trials are split into fixed-size shards, each driven by its own
Philox substream spawned from the run seed, so a run gives the same numbers
whether shards are executed serially or in parallel.
"""

import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.physics.channel_model import ChannelParams, ObservedStats, ProtocolParams, apply_flips, detector_probs
from src.utils.constants import MC_SHARD_SIZE, MC_Z_WARN, OUTCOME, TRIAL_LOG_FIELDS, TRIAL_MODE, IntensityLabel

logger = logging.getLogger(__name__)

LABELS = list(IntensityLabel)


@dataclass(frozen=True)
class TrialRecord:
    """One simulated trial as written to the trial log.

    Bits are None in test mode; error is None unless the trial is a kept code-mode trial.
    """

    mode: TRIAL_MODE
    x: int
    y: int
    k_a: Optional[int]
    k_b: Optional[int]
    xi_a: float
    xi_b: float
    outcome: OUTCOME
    kept: bool
    error: Optional[bool]

    def is_consistent(self, num_phases: int) -> bool:
        """Check the sifting rule: kept iff clicked, matched or opposite, and equal intensities in test mode."""
        diff = (self.x - self.y) % num_phases
        sifted = diff in (0, num_phases // 2)
        same_intensity = self.mode == "code" or self.xi_a == self.xi_b
        return self.kept == (self.outcome != "N" and sifted and same_intensity)


@dataclass
class McCounts:
    """Integer tallies of a batch of trials. Addition merges batches."""

    trials: int = 0
    code_trials: int = 0
    code_clicks: int = 0
    matched_trials: int = 0
    matched_clicks: int = 0
    matched_errors: int = 0
    opposite_trials: int = 0
    opposite_clicks: int = 0
    opposite_errors: int = 0
    test_trials: Dict[str, int] = field(default_factory=lambda: {label.value: 0 for label in LABELS})
    test_clicks: Dict[str, int] = field(default_factory=lambda: {label.value: 0 for label in LABELS})

    def __add__(self, other: "McCounts") -> "McCounts":
        merged = {}
        for f in fields(self):
            mine, theirs = getattr(self, f.name), getattr(other, f.name)
            merged[f.name] = {key: mine[key] + theirs[key] for key in mine} if isinstance(mine, dict) else mine + theirs
        return McCounts(**merged)

    @property
    def kept_code_clicks(self) -> int:
        return self.matched_clicks + self.opposite_clicks

    def denominators(self) -> Dict[str, int]:
        """Number of Bernoulli samples behind each statistic of ObservedStats.as_fields()."""
        counts = {
            "q_mu": self.matched_trials + self.opposite_trials,
            "e_mu": self.kept_code_clicks,
            "q_matched": self.matched_trials,
            "e_matched": self.matched_clicks,
            "q_opposite": self.opposite_trials,
            "e_opposite": self.opposite_clicks,
        }
        for label, n in self.test_trials.items():
            counts[f"test_gain_{label}"] = n
        return counts


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def _binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else float("nan")


@dataclass
class McEstimate:
    """Monte Carlo estimate of the observed statistics.

    Attributes:
        stats: Estimated statistics in the same shape as the analytic model
        counts: Underlying trial tallies
        stderr: Binomial standard error per field of stats.as_fields()
    """

    stats: ObservedStats
    counts: McCounts
    stderr: Dict[str, float]

    @classmethod
    def from_counts(cls, counts: McCounts) -> "McEstimate":
        test_gain = {IntensityLabel(label): _ratio(counts.test_clicks[label], n) for label, n in counts.test_trials.items()}
        stats = ObservedStats(
            test_gain=test_gain,
            q_mu=_ratio(counts.kept_code_clicks, counts.matched_trials + counts.opposite_trials),
            e_mu=_ratio(counts.matched_errors + counts.opposite_errors, counts.kept_code_clicks),
            q_matched=_ratio(counts.matched_clicks, counts.matched_trials),
            e_matched=_ratio(counts.matched_errors, counts.matched_clicks),
            q_opposite=_ratio(counts.opposite_clicks, counts.opposite_trials),
            e_opposite=_ratio(counts.opposite_errors, counts.opposite_clicks),
        )
        denominators = counts.denominators()
        stderr = {name: _binomial_stderr(value, denominators[name]) for name, value in stats.as_fields().items()}
        return cls(stats=stats, counts=counts, stderr=stderr)

    @property
    def sifting_fraction(self) -> float:
        """Fraction of clicked code-mode trials that survive sifting; tends to 2/M."""
        return _ratio(self.counts.kept_code_clicks, self.counts.code_clicks)

    @property
    def sifting_stderr(self) -> float:
        return _binomial_stderr(self.sifting_fraction, self.counts.code_clicks)

    def z_scores(self, reference: ObservedStats) -> Dict[str, float]:
        """Per-field (estimate - reference) / stderr, with the stderr taken at the reference probability.

        Fields without samples, or missing from the reference, score 0.
        """
        denominators = self.counts.denominators()
        expected = reference.as_fields()
        scores = {}
        for name, value in self.stats.as_fields().items():
            ref, n = expected.get(name, float("nan")), denominators[name]
            if n == 0 or math.isnan(ref):
                scores[name] = 0.0
                continue
            sigma = _binomial_stderr(ref, n)
            diff = value - ref
            scores[name] = diff / sigma if sigma > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        return scores

    def comparison(self, reference: ObservedStats) -> pd.DataFrame:
        """Table of analytic value, MC value, standard error and z-score per field."""
        scores = self.z_scores(reference)
        expected = reference.as_fields()
        rows = [
            {"field": name, "analytic": expected.get(name, float("nan")), "mc": value, "stderr": self.stderr[name], "z": scores[name]}
            for name, value in self.stats.as_fields().items()
        ]
        frame = pd.DataFrame(rows)
        outliers = frame[frame["z"].abs() > MC_Z_WARN]
        for _, row in outliers.iterrows():
            logger.warning(f"MC field {row['field']} deviates from the analytic value by z={row['z']:.2f}")
        return frame


def _draw_shard(p: ProtocolParams, ch: ChannelParams, size: int, seed: np.random.SeedSequence) -> Dict[str, np.ndarray]:
    """Draw one shard of trials. The order of draws is part of the reproducibility contract."""
    rng = np.random.Generator(np.random.Philox(seed))
    num_phases = p.num_phases

    code = rng.random(size) < 0.5
    x = rng.integers(0, num_phases, size)
    y = rng.integers(0, num_phases, size)
    k_a = rng.integers(0, 2, size)
    k_b = rng.integers(0, 2, size)
    i_a = rng.integers(0, len(LABELS), size)
    i_b = rng.integers(0, len(LABELS), size)
    u_l = rng.random(size)
    u_r = rng.random(size)

    levels = np.array([p.intensities[label] for label in LABELS])
    xi_a = np.where(code, p.mu, levels[i_a])
    xi_b = np.where(code, p.mu, levels[i_b])
    dphi = 2.0 * np.pi * (x - y) / num_phases + np.where(code, np.pi * (k_a - k_b), 0.0)

    p_l, p_r = detector_probs(xi_a, xi_b, np.cos(dphi), ch)
    click_l = u_l < p_l
    click_r = u_r < p_r
    only_l = click_l & ~click_r
    only_r = click_r & ~click_l

    diff = (x - y) % num_phases
    matched = diff == 0
    opposite = diff == num_phases // 2
    single = only_l | only_r
    kept = single & (matched | opposite) & (code | (i_a == i_b))
    errors = kept & code & apply_flips(k_a, k_b, only_r.astype(np.int64), opposite.astype(np.int64))

    return {
        "code": code, "x": x, "y": y, "k_a": k_a, "k_b": k_b, "i_a": i_a, "i_b": i_b,
        "xi_a": xi_a, "xi_b": xi_b, "only_l": only_l, "only_r": only_r,
        "matched": matched, "opposite": opposite, "single": single, "kept": kept, "error": errors,
    }  # fmt: skip


def _tally(draw: Dict[str, np.ndarray]) -> McCounts:
    code, single = draw["code"], draw["single"]
    matched, opposite, errors = draw["matched"], draw["opposite"], draw["error"]
    counts = McCounts(
        trials=int(code.size),
        code_trials=int(np.count_nonzero(code)),
        code_clicks=int(np.count_nonzero(code & single)),
        matched_trials=int(np.count_nonzero(code & matched)),
        matched_clicks=int(np.count_nonzero(code & matched & single)),
        matched_errors=int(np.count_nonzero(errors & matched)),
        opposite_trials=int(np.count_nonzero(code & opposite)),
        opposite_clicks=int(np.count_nonzero(code & opposite & single)),
        opposite_errors=int(np.count_nonzero(errors & opposite)),
    )
    test_sifted = ~code & (matched | opposite) & (draw["i_a"] == draw["i_b"])
    for index, label in enumerate(LABELS):
        chosen = test_sifted & (draw["i_a"] == index)
        counts.test_trials[label.value] = int(np.count_nonzero(chosen))
        counts.test_clicks[label.value] = int(np.count_nonzero(chosen & single))
    return counts


def _trial_frame(draw: Dict[str, np.ndarray]) -> pd.DataFrame:
    code = draw["code"]
    outcome = np.where(draw["only_l"], "L", np.where(draw["only_r"], "R", "N"))
    frame = pd.DataFrame(
        {
            "mode": np.where(code, "code", "test"),
            "x": draw["x"],
            "y": draw["y"],
            "k_a": pd.array(np.where(code, draw["k_a"], 0), dtype="Int8"),
            "k_b": pd.array(np.where(code, draw["k_b"], 0), dtype="Int8"),
            "xi_a": draw["xi_a"],
            "xi_b": draw["xi_b"],
            "outcome": outcome,
            "kept": draw["kept"],
            "error": pd.array(draw["error"], dtype="boolean"),
        }
    )
    frame.loc[~code, ["k_a", "k_b"]] = pd.NA
    frame.loc[~(code & draw["kept"]), "error"] = pd.NA
    return frame[list(TRIAL_LOG_FIELDS)]


def _run_shard(
    p: ProtocolParams, ch: ChannelParams, size: int, seed: np.random.SeedSequence, keep_records: bool
) -> Tuple[McCounts, Optional[pd.DataFrame]]:
    draw = _draw_shard(p, ch, size, seed)
    return _tally(draw), (_trial_frame(draw) if keep_records else None)


def shard_sizes(n: int, shard_size: int = MC_SHARD_SIZE) -> List[int]:
    full, rest = divmod(n, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def run_trials(
    p: ProtocolParams,
    ch: ChannelParams,
    n: int,
    seed: int,
    n_jobs: int = 1,
    trial_log: Optional[Union[str, Path]] = None,
) -> McEstimate:
    """Simulate n protocol trials and estimate the observed statistics.

    Args:
        p: Protocol parameters
        ch: Channel parameters
        n: Number of trials, at least 1
        seed: Run seed; shard substreams are spawned from it
        n_jobs: joblib worker count for the shards
        trial_log: Optional CSV path receiving one record per trial (fields in TRIAL_LOG_FIELDS order)

    Returns:
        McEstimate aggregated over all shards in shard order
    """
    if int(n) != n or n < 1:
        raise ValueError(f"Trial count must be a positive integer, got {n}")
    sizes = shard_sizes(int(n))
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    keep_records = trial_log is not None
    logger.debug(f"Running {n} trials in {len(sizes)} shards (M={p.num_phases}, loss={ch.loss_db} dB, seed={seed})")

    results = Parallel(n_jobs=n_jobs)(delayed(_run_shard)(p, ch, size, child, keep_records) for size, child in zip(sizes, seeds))

    total = McCounts()
    for counts, _ in results:
        total = total + counts

    if keep_records:
        path = Path(trial_log)
        path.parent.mkdir(parents=True, exist_ok=True)
        for index, (_, frame) in enumerate(results):
            frame.to_csv(path, mode="w" if index == 0 else "a", header=index == 0, index=False)
        logger.info(f"Wrote {total.trials} trial records to {path}")

    return McEstimate.from_counts(total)


def read_trial_log(path: Union[str, Path]) -> List[TrialRecord]:
    """Load a trial log written by run_trials."""
    frame = pd.read_csv(path, keep_default_na=False, na_values=[""])
    records = []
    for row in frame.itertuples(index=False):
        data = row._asdict()
        for name in ("k_a", "k_b"):
            data[name] = None if pd.isna(data[name]) else int(data[name])
        data["error"] = None if pd.isna(data["error"]) else str(data["error"]) == "True"
        data["kept"] = str(data["kept"]) == "True"
        data["x"], data["y"] = int(data["x"]), int(data["y"])
        records.append(TrialRecord(**data))
    return records
