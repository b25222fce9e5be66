"""
Loss scans: optimized key rate per (M, loss) point, optional Monte Carlo cross-checks, CSV output.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from src.optimization.param_opt import optimize_intensities
from src.physics.channel_model import ProtocolParams, observed_stats
from src.physics.protocol_mc import run_trials
from src.scan.config import RunConfig
from src.security.key_rate import RatePoint
from src.utils.constants import FLOAT_FORMAT, MC_COLUMNS, RESULT_COLUMNS

logger = logging.getLogger(__name__)


def _protocol(cfg: RunConfig, m: int, mu: float, nu: float) -> ProtocolParams:
    return ProtocolParams(num_phases=m, mu=mu, nu=nu, omega=cfg.omega, f=cfg.f)


def scan_point(cfg: RunConfig, m: int, loss_db: float) -> RatePoint:
    """Optimized rate at one (M, loss) point."""
    p = _protocol(cfg, m, cfg.search.mu_range[1], cfg.search.nu_range[0])
    _, _, point = optimize_intensities(loss_db, p, cfg.channel, cfg.search)
    return point


def scan_tasks(cfg: RunConfig) -> List[Tuple[int, float]]:
    return [(m, loss_db) for m in cfg.m_list for loss_db in cfg.losses]


def run_scan(cfg: RunConfig, progress: bool = True) -> pd.DataFrame:
    """Scan every (M, loss) point of the configuration.

    Args:
        cfg: Run configuration
        progress: Show a progress bar

    Returns:
        DataFrame with RESULT_COLUMNS, one row per point, sorted by (m, loss_db)
    """
    tasks = scan_tasks(cfg)
    logger.info(f"Scanning {len(tasks)} points ({len(cfg.m_list)} phase counts x {len(cfg.losses)} losses) with {cfg.workers} worker(s)")

    results = Parallel(n_jobs=cfg.workers, return_as="generator")(delayed(scan_point)(cfg, m, loss_db) for m, loss_db in tasks)
    points = list(tqdm(results, total=len(tasks), desc="Rate scan", disable=not progress))

    for point in points:
        if point.status != "optimal":
            logger.warning(f"No bound at M={point.m}, {point.loss_db} dB ({point.status}); rate recorded as 0")

    table = pd.DataFrame([point.as_row() for point in points], columns=list(RatePoint.__dataclass_fields__))
    table = table.sort_values(["m", "loss_db"], kind="stable").reset_index(drop=True)
    logger.info(f"Scan finished: {len(table)} rows")
    return table[RESULT_COLUMNS]


def mc_seed(base_seed: int, m: int, index: int) -> int:
    """Deterministic per-row Monte Carlo seed."""
    return int(np.random.SeedSequence([base_seed, m, index]).generate_state(1, dtype=np.uint64)[0])


def validate_scan(cfg: RunConfig, table: pd.DataFrame, n_jobs: Optional[int] = None, progress: bool = True) -> pd.DataFrame:
    """Compare every row's analytic statistics with a Monte Carlo run at the same point.

    Returns:
        DataFrame with MC_COLUMNS, one row per (scan row, statistic)
    """
    frames = []
    rows = table.itertuples(index=False)
    for index, row in enumerate(tqdm(rows, total=len(table), desc="MC validation", disable=not progress)):
        p = _protocol(cfg, int(row.m), row.mu, row.nu)
        channel = cfg.channel.at_loss(row.loss_db)
        estimate = run_trials(p, channel, cfg.mc_trials, mc_seed(cfg.seed, int(row.m), index), n_jobs=n_jobs or cfg.workers)
        comparison = estimate.comparison(observed_stats(p, channel))
        comparison.insert(0, "loss_db", row.loss_db)
        comparison.insert(0, "m", int(row.m))
        frames.append(comparison)

    checks = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=MC_COLUMNS)
    worst = checks["z"].abs().max() if len(checks) else 0.0
    logger.info(f"MC validation: {len(table)} rows x {cfg.mc_trials} trials, largest |z| = {worst:.2f}")
    return checks[MC_COLUMNS]


def summarize_scan(table: pd.DataFrame) -> pd.DataFrame:
    """Per-M summary: largest loss with positive rate and whether the curve beats the PLOB bound.

    Returns:
        DataFrame with columns m, max_loss_db (NaN if never positive), beats_plob, first_plob_crossing_db
    """
    summary = []
    for m, curve in table.groupby("m", sort=True):
        positive = curve[curve["rate"] > 0.0]
        above = curve[curve["rate"] > curve["plob"]]
        summary.append(
            {
                "m": int(m),
                "max_loss_db": float(positive["loss_db"].max()) if len(positive) else float("nan"),
                "beats_plob": bool(len(above)),
                "first_plob_crossing_db": float(above["loss_db"].min()) if len(above) else float("nan"),
            }
        )
    frame = pd.DataFrame(summary, columns=["m", "max_loss_db", "beats_plob", "first_plob_crossing_db"])
    for row in frame.itertuples(index=False):
        crossing = f"beats PLOB from {row.first_plob_crossing_db} dB" if row.beats_plob else "stays below PLOB"
        logger.info(f"M={row.m}: positive rate up to {row.max_loss_db} dB, {crossing}")
    return frame


def mc_output_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_mc.csv")


def write_table(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a result table as CSV with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path
