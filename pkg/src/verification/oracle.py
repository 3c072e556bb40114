"""
Brute-force oracles for capture probabilities and capture sets

Monte Carlo draws uniform points with one numpy Generator per chunk, each
seeded from a SeedSequence substream, so estimates are bit-stable for a fixed
seed and chunk size. The grid oracle classifies a uniform grid directly.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm
from loguru import logger

from src.analysis.capture_set import CaptureSet
from src.maps.unimodal_map import MapFamily
from src.orbits.orbit_finder import CaptureIntervalSet
from src.utils.intervals import Interval, symmetric_difference_length

DEFAULT_SEED = 0xC0FFEE


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run parameters"""
    n_samples: int = 1_000_000
    rng_seed: int = DEFAULT_SEED
    q: int = 0
    chunk_size: int = 65_536

    def __post_init__(self):
        if self.n_samples < 1_000:
            raise ValueError(f"n_samples must be at least 1000, got {self.n_samples}")
        if self.q < 0:
            raise ValueError(f"q must be non-negative, got {self.q}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size}")


@dataclass(frozen=True)
class VerificationReport:
    q: int
    analytic_p: float
    mc_estimate: float
    mc_halfwidth: float
    grid_symmdiff: float
    grid_tolerance: float
    grid_intervals: int
    analytic_intervals: int
    resolvable_intervals: int
    subgrid_intervals: int
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "analytic_P": self.analytic_p,
            "mc_estimate": self.mc_estimate,
            "mc_halfwidth": self.mc_halfwidth,
            "grid_symmdiff": self.grid_symmdiff,
            "grid_tolerance": self.grid_tolerance,
            "grid_intervals": self.grid_intervals,
            "analytic_intervals": self.analytic_intervals,
            "resolvable_intervals": self.resolvable_intervals,
            "subgrid_intervals": self.subgrid_intervals,
            "pass": self.passed,
        }


class CaptureOracle:
    """Monte Carlo and dense-grid checks of analytic capture sets"""

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize capture oracle

        Args:
            config: Configuration dictionary
        """
        self.config = config
        oracle_config = config.get("oracle", {})
        self.n_samples = oracle_config.get("n_samples", 1_000_000)
        self.rng_seed = oracle_config.get("rng_seed", DEFAULT_SEED)
        self.chunk_size = oracle_config.get("chunk_size", 65_536)
        self.grid_resolution = oracle_config.get("grid_resolution", 1_000_000)
        self.min_grid_resolution = oracle_config.get("min_grid_resolution", 100_000)
        self.progress = oracle_config.get("progress", False)
        self.cushion = config.get("extrema", {}).get("tol_root", 1e-12)

        logger.info(f"Capture Oracle initialized (seed={self.rng_seed:#x}, samples={self.n_samples})")

    def mc_config(self, q: int, n_samples: Optional[int] = None, rng_seed: Optional[int] = None) -> McConfig:
        return McConfig(
            n_samples=n_samples or self.n_samples,
            rng_seed=self.rng_seed if rng_seed is None else rng_seed,
            q=q,
            chunk_size=self.chunk_size,
        )

    def _captured(self, map_family: MapFamily, xs: np.ndarray, q: int, intervals: Sequence[Interval]) -> np.ndarray:
        """Whether each orbit enters an open interval (shrunk by the cushion) within q steps"""
        cushion = self.cushion * map_family.length
        bounds = np.array(intervals, dtype=float).reshape(-1, 2)
        lo = bounds[:, 0] + cushion
        hi = bounds[:, 1] - cushion

        def inside(points: np.ndarray) -> np.ndarray:
            return np.any((points[:, None] > lo) & (points[:, None] < hi), axis=1)

        captured = inside(xs)
        for _ in range(q):
            xs = map_family.iterate_array(xs, 1)
            captured |= inside(xs)
        return captured

    def mc_capture_probability(
        self,
        map_family: MapFamily,
        q: int,
        intervals: Sequence[Interval],
        cfg: Optional[McConfig] = None,
    ) -> Tuple[float, float]:
        """
        Fraction of uniform samples whose orbit enters I_P within q iterations

        Args:
            map_family: Map
            q: Iteration budget
            intervals: Capture intervals I_Pi
            cfg: Run parameters (config defaults if omitted)

        Returns:
            (estimate, 3-sigma binomial halfwidth)
        """
        cfg = cfg or self.mc_config(q)
        intervals = list(intervals)
        if not intervals:
            return 0.0, 0.0

        a, b = map_family.domain
        n_chunks = math.ceil(cfg.n_samples / cfg.chunk_size)
        streams = np.random.SeedSequence(cfg.rng_seed).spawn(n_chunks)

        hits = 0
        for k, stream in enumerate(tqdm(streams, desc=f"Monte Carlo q={q}", disable=not self.progress)):
            size = min(cfg.chunk_size, cfg.n_samples - k * cfg.chunk_size)
            rng = np.random.default_rng(stream)
            xs = rng.uniform(a, b, size)
            hits += int(np.count_nonzero(self._captured(map_family, xs, q, intervals)))

        estimate = hits / cfg.n_samples
        halfwidth = 3.0 * math.sqrt(estimate * (1.0 - estimate) / cfg.n_samples)
        logger.debug(f"Monte Carlo q={q}: {hits}/{cfg.n_samples} captured")
        return estimate, halfwidth

    def grid_capture_set(
        self,
        map_family: MapFamily,
        q: int,
        intervals: Sequence[Interval],
        resolution: Optional[int] = None,
    ) -> List[Interval]:
        """
        Maximal runs of captured grid points, each widened by half a grid step

        Args:
            map_family: Map
            q: Iteration budget
            intervals: Capture intervals I_Pi
            resolution: Number of grid points (at least min_grid_resolution)

        Returns:
            Sorted disjoint intervals
        """
        resolution = resolution or self.grid_resolution
        if resolution < self.min_grid_resolution:
            raise ValueError(f"Grid resolution must be at least {self.min_grid_resolution}, got {resolution}")
        intervals = list(intervals)
        if not intervals:
            return []

        a, b = map_family.domain
        xs = np.linspace(a, b, resolution)
        half = 0.5 * (b - a) / (resolution - 1)
        captured = self._captured(map_family, xs, q, intervals)

        edges = np.diff(np.concatenate(([0], captured.astype(np.int8), [0])))
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0] - 1
        runs = [(max(a, xs[s] - half), min(b, xs[e] + half)) for s, e in zip(starts, stops)]

        single = int(np.count_nonzero(starts == stops))
        if single:
            logger.warning(f"Grid q={q}: {single} captured runs are a single grid point wide")
        return [(float(lo), float(hi)) for lo, hi in runs]

    def resolvable_count(
        self,
        map_family: MapFamily,
        merged: Sequence[Interval],
        resolution: Optional[int] = None,
    ) -> Tuple[int, int]:
        """
        Runs a grid reconstruction can show for a union of intervals

        An interval shows up only if it holds a grid point, and two intervals
        whose gap holds none show up as a single run.

        Returns:
            (expected number of grid runs, number of intervals no wider than one grid step)
        """
        resolution = resolution or self.grid_resolution
        merged = list(merged)
        if not merged:
            return 0, 0

        a, b = map_family.domain
        step = (b - a) / (resolution - 1)
        bounds = np.array(merged, dtype=float).reshape(-1, 2)
        subgrid = int(np.count_nonzero(bounds[:, 1] - bounds[:, 0] <= step))

        first = np.ceil((bounds[:, 0] - a) / step)
        last = np.floor((bounds[:, 1] - a) / step)
        hit = first <= last
        first, last = first[hit], last[hit]
        if not len(first):
            return 0, subgrid
        runs = 1 + int(np.count_nonzero(first[1:] > last[:-1] + 1))
        return runs, subgrid

    def verify(
        self,
        map_family: MapFamily,
        captures: CaptureIntervalSet,
        capture_set: CaptureSet,
        cfg: Optional[McConfig] = None,
        resolution: Optional[int] = None,
    ) -> VerificationReport:
        """
        Compare an analytic capture set against both oracles

        Passes when the analytic P_q lies within the Monte Carlo halfwidth, the
        grid reconstruction differs from W_R by at most 2 (b - a) n / resolution + 1e-6
        (n merged analytic intervals), and the grid shows the number of runs
        predicted by resolvable_count to within 2.
        """
        q = capture_set.q
        resolution = resolution or self.grid_resolution
        analytic_p = capture_set.measure / map_family.length

        estimate, halfwidth = self.mc_capture_probability(map_family, q, captures.intervals, cfg or self.mc_config(q))
        grid = self.grid_capture_set(map_family, q, captures.intervals, resolution)
        symmdiff = symmetric_difference_length(grid, capture_set.merged)
        tolerance = 2.0 * map_family.length * len(capture_set.merged) / resolution + 1e-6

        resolvable, subgrid = self.resolvable_count(map_family, capture_set.merged, resolution)
        if subgrid:
            logger.info(f"q={q}: {subgrid} of {len(capture_set.merged)} intervals are narrower than the grid step")
        counts_agree = abs(len(grid) - resolvable) <= 2
        if not counts_agree:
            logger.warning(
                f"q={q}: grid shows {len(grid)} intervals, {resolvable} expected from W_R "
                f"({len(capture_set.merged)} merged, {subgrid} sub-grid)"
            )

        passed = abs(analytic_p - estimate) <= halfwidth and symmdiff <= tolerance and counts_agree
        report = VerificationReport(
            q=q,
            analytic_p=analytic_p,
            mc_estimate=estimate,
            mc_halfwidth=halfwidth,
            grid_symmdiff=symmdiff,
            grid_tolerance=tolerance,
            grid_intervals=len(grid),
            analytic_intervals=len(capture_set.merged),
            resolvable_intervals=resolvable,
            subgrid_intervals=subgrid,
            passed=passed,
        )
        log = logger.info if passed else logger.warning
        log(
            f"Verification q={q}: P={analytic_p:.6f}, MC={estimate:.6f}±{halfwidth:.6f}, "
            f"grid symmdiff={symmdiff:.3e} (tol {tolerance:.3e}) -> {'pass' if passed else 'FAIL'}"
        )
        return report
