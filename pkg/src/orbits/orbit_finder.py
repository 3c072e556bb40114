"""
Stable periodic orbits, their saddle partners and capture intervals
"""
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq, newton
from loguru import logger

from src.analysis.extrema_engine import ExtremaEngine, Segment
from src.maps.unimodal_map import MapFamily, MapFamilyId
from src.utils.errors import (
    BracketError,
    CaptureOverlapError,
    NoInflectionError,
    PartnerNotFoundError,
    PolishDivergenceError,
    WrongPeriodError,
)

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class PeriodicOrbit:
    """Stable p-cycle S_1..S_p, with S_1 the point nearest C"""
    p: int
    points: Tuple[float, ...]
    multiplier: float
    saddles: Tuple[float, ...] = ()
    companions: Tuple[float, ...] = ()

    def with_partners(self, saddles: Sequence[float], companions: Sequence[float]) -> "PeriodicOrbit":
        return replace(self, saddles=tuple(saddles), companions=tuple(companions))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "points": list(self.points),
            "multiplier": self.multiplier,
            "saddles": list(self.saddles),
            "companions": list(self.companions),
        }


class IntervalMode(str, Enum):
    """How the second endpoint of a capture interval is read"""
    FIGURE = "figure"  # endpoints U_i and U_i'
    TEXT = "text"      # endpoints U_i and a preimage of U_i' under f^p


@dataclass(frozen=True)
class CaptureIntervalSet:
    """Open capture intervals I_Pi, one per orbit point"""
    orbit: PeriodicOrbit
    intervals: Tuple[Tuple[float, float], ...]
    critical_index: Optional[int]
    measure: float
    mode: IntervalMode = IntervalMode.FIGURE

    @property
    def critical_interval(self) -> Optional[Tuple[float, float]]:
        return None if self.critical_index is None else self.intervals[self.critical_index]

    def index_of(self, x: float, cushion: float = 0.0) -> Optional[int]:
        for i, (lo, hi) in enumerate(self.intervals):
            if lo + cushion < x < hi - cushion:
                return i
        return None

    def contains(self, x: float, cushion: float = 0.0) -> bool:
        return self.index_of(x, cushion) is not None

    def to_report(self, map_family: MapFamily) -> Dict[str, Any]:
        report = {"family": map_family.family_id.value, "r": map_family.r}
        report.update(self.orbit.to_dict())
        report["capture_intervals"] = [list(iv) for iv in self.intervals]
        report["critical_index"] = self.critical_index
        report["measure"] = self.measure
        report["interval_mode"] = self.mode.value
        return report


class OrbitFinder:
    """Finds the stable orbit attracting C and builds its capture intervals"""

    def __init__(self, config: Dict[str, Any], extrema_engine: Optional[ExtremaEngine] = None):
        """
        Initialize orbit finder

        Args:
            config: Configuration dictionary
            extrema_engine: Shared extrema engine (built from config if omitted)
        """
        self.config = config
        orbit_config = config.get("orbit", {})
        self.p_max = orbit_config.get("p_max", 64)
        self.burn_in = orbit_config.get("burn_in", 10_000)
        self.recurrence_tol = orbit_config.get("recurrence_tol", 1e-8)
        self.tol_orbit = orbit_config.get("tol_orbit", 1e-11)
        self.interval_mode = IntervalMode(orbit_config.get("interval_mode", "figure"))
        self.cache_maps = orbit_config.get("cache_maps", 8)

        bifurcation_config = config.get("bifurcation", {})
        self.bifurcation_burn_in = bifurcation_config.get("burn_in", 10_000)
        self.bifurcation_samples = bifurcation_config.get("samples", 200)

        self.extrema_engine = extrema_engine or ExtremaEngine(config)
        self._fixed_points: "OrderedDict[Tuple[MapFamily, int], List[float]]" = OrderedDict()

        logger.info("Orbit Finder initialized")

    # ------------------------------------------------------------------
    # Stable orbit

    def find_stable_orbit(
        self,
        map_family: MapFamily,
        p_max: Optional[int] = None,
        tol_orbit: Optional[float] = None,
    ) -> Optional[PeriodicOrbit]:
        """
        Detect the stable orbit by iterating the critical point

        Args:
            map_family: Map to analyse
            p_max: Largest period to look for
            tol_orbit: Orbit tolerance (must be positive)

        Returns:
            Polished PeriodicOrbit, or None when no stable period <= p_max shows up

        Raises:
            PolishDivergenceError: if polishing a point leaves its neighbourhood
        """
        p_max = p_max or self.p_max
        tol_orbit = tol_orbit if tol_orbit is not None else self.tol_orbit
        if tol_orbit <= 0.0:
            raise ValueError(f"tol_orbit must be positive, got {tol_orbit}")

        x = map_family.iterate(map_family.critical, self.burn_in)
        trajectory = map_family.orbit(x, p_max)
        gaps = np.abs(trajectory[1:] - trajectory[0])
        hits = np.nonzero(gaps <= self.recurrence_tol)[0]
        if hits.size == 0:
            logger.info(f"No stable orbit with period <= {p_max} at r={map_family.r}")
            return None
        p = int(hits[0]) + 1

        start = int(np.argmin(np.abs(trajectory[:p] - map_family.critical)))
        seeds = [float(s) for s in np.roll(trajectory[:p], -start)]

        seed_multiplier = map_family.multiplier(seeds)
        if abs(seed_multiplier) >= 1.0:
            logger.info(f"Period-{p} recurrence at r={map_family.r} is unstable (multiplier {seed_multiplier:.4g})")
            return None

        points = tuple(self._polish(map_family, p, s) for s in seeds)
        for k, s in enumerate(points):
            drift = abs(map_family.evaluate(s) - points[(k + 1) % p])
            if drift > max(tol_orbit, 1e3 * EPS):
                raise PolishDivergenceError(f"Polished orbit is not a cycle: |f(S_{k + 1}) - S_{k + 2}| = {drift:.3e}")

        orbit = PeriodicOrbit(p, points, map_family.multiplier(points))
        logger.info(f"Stable period-{p} orbit at r={map_family.r}, multiplier {orbit.multiplier:.6g}")
        return orbit

    def _polish(self, map_family: MapFamily, p: int, seed: float) -> float:
        """Newton on f^p(x) - x from a detected orbit point"""
        if not map_family.is_smooth:
            return seed

        def residual(x: float) -> float:
            return map_family.iterate_unchecked(x, p) - x

        def slope(x: float) -> float:
            return map_family.iterate_jet(x, p, check=False)[1] - 1.0

        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                root = float(newton(residual, seed, fprime=slope, tol=4.0 * EPS, maxiter=50))
        except (RuntimeError, ArithmeticError) as e:
            logger.error(f"Orbit polish from {seed!r} failed: {e}")
            raise PolishDivergenceError(f"Polishing orbit point {seed!r} failed: {e}") from e

        if not math.isfinite(root) or abs(root - seed) > 1e3 * self.recurrence_tol or slope(root) >= 0.0:
            raise PolishDivergenceError(f"Polish of orbit point {seed!r} left its neighbourhood (got {root!r})")
        return root

    # ------------------------------------------------------------------
    # Supercycles

    def find_supercycle_parameter(
        self,
        family: Union[MapFamilyId, str, MapFamily],
        p: int,
        r_bracket: Tuple[float, float],
    ) -> float:
        """
        Parameter r with f^p(C; r) = C and minimal period p

        Args:
            family: Family id, or a MapFamily template (needed for custom maps)
            p: Period
            r_bracket: (r_lo, r_hi) containing exactly one such root

        Returns:
            r with |f^p(C; r) - C| as small as double precision allows

        Raises:
            BracketError: if the residual has equal signs at both ends
            WrongPeriodError: if the root has a smaller minimal period
        """
        r_lo, r_hi = float(min(r_bracket)), float(max(r_bracket))
        if isinstance(family, MapFamily):
            template = family
        else:
            template = MapFamily(MapFamilyId(family), 0.5 * (r_lo + r_hi), validate=False)
        c = template.critical

        def residual(r: float, period: int = p) -> float:
            return template.with_parameter(r).iterate_unchecked(c, period) - c

        g_lo, g_hi = residual(r_lo), residual(r_hi)
        if g_lo * g_hi > 0.0:
            raise BracketError(
                f"f^{p}(C; r) - C has the same sign at r={r_lo} ({g_lo:.3e}) and r={r_hi} ({g_hi:.3e})"
            )

        root = r_lo if g_lo == 0.0 else r_hi if g_hi == 0.0 else brentq(
            residual, r_lo, r_hi, xtol=1e-15, rtol=4.0 * EPS, maxiter=500
        )

        # Brent leaves the root within a few ulps; keep the neighbour with the smallest residual
        candidates = [root]
        for direction in (r_lo, r_hi):
            r = root
            for _ in range(16):
                r = float(np.nextafter(r, direction))
                candidates.append(r)
        root = min(candidates, key=lambda r: abs(residual(r)))

        for d in range(1, p):
            if p % d == 0 and abs(residual(root, d)) <= 1e-9:
                raise WrongPeriodError(f"Root r={root!r} has minimal period {d}, which divides {p}")

        logger.info(f"Period-{p} supercycle at r={root!r} (residual {residual(root):.2e})")
        return root

    # ------------------------------------------------------------------
    # Saddle partners and companions

    def fixed_points(self, map_family: MapFamily, p: int) -> List[float]:
        """
        All solutions of f^p(x) = x, scanned branch by branch

        Each monotone branch of f^p is split where (f^p)' = 1, so that
        f^p(x) - x is monotone on every piece.
        """
        key = (map_family, p)
        if key in self._fixed_points:
            self._fixed_points.move_to_end(key)
            return self._fixed_points[key]

        table = self.extrema_engine.build_table(map_family, p)
        model = self.extrema_engine.build_segment_model(table, map_family)

        def residual(x: float) -> float:
            return map_family.iterate_unchecked(x, p) - x

        roots: List[float] = []
        for segment in model:
            for lo, hi in self._monotone_pieces(map_family, p, segment):
                r_lo, r_hi = residual(lo), residual(hi)
                if r_lo == 0.0:
                    roots.append(lo)
                if r_hi == 0.0:
                    roots.append(hi)
                if r_lo * r_hi < 0.0:
                    roots.append(brentq(residual, lo, hi, xtol=4.0 * EPS, rtol=4.0 * EPS))

        roots.sort()
        unique: List[float] = []
        for x in roots:
            if not unique or x - unique[-1] > self.tol_orbit:
                unique.append(x)
        self._fixed_points[key] = unique
        while len(self._fixed_points) > max(1, self.cache_maps):
            self._fixed_points.popitem(last=False)
        logger.debug(f"f^{p} has {len(unique)} fixed points")
        return unique

    def clear_cache(self):
        """Drop cached fixed points and the shared engine's extrema tables"""
        self._fixed_points.clear()
        self.extrema_engine.clear_cache()

    def _monotone_pieces(self, map_family: MapFamily, p: int, segment: Segment) -> List[Tuple[float, float]]:
        lo, hi = segment.x_left, segment.x_right
        if not segment.increasing or not map_family.is_smooth:
            return [(lo, hi)]

        def excess_slope(x: float) -> float:
            return map_family.iterate_jet(x, p, check=False)[1] - 1.0

        try:
            peak = self.extrema_engine.inflection_point(map_family, p, segment)
            halves = [(lo, peak), (peak, hi)]
        except NoInflectionError:
            halves = [(lo, hi)]

        cuts = [lo]
        for u, v in halves:
            d_u, d_v = excess_slope(u), excess_slope(v)
            if d_u * d_v < 0.0:
                cuts.append(brentq(excess_slope, u, v, xtol=4.0 * EPS, rtol=4.0 * EPS))
            if v != hi:
                cuts.append(v)
        cuts.append(hi)
        return [(u, v) for u, v in zip(cuts, cuts[1:]) if v > u]

    def find_saddle_partner(self, map_family: MapFamily, orbit: PeriodicOrbit, i: int) -> float:
        """
        Unstable fixed point of f^p nearest S_i

        Raises:
            PartnerNotFoundError: if f^p has no unstable fixed point
        """
        s = orbit.points[i]
        unstable = [
            x for x in self.fixed_points(map_family, orbit.p)
            if abs(x - s) > self.tol_orbit and abs(map_family.iterate_jet(x, orbit.p)[1]) > 1.0
        ]
        if not unstable:
            raise PartnerNotFoundError(f"No unstable fixed point of f^{orbit.p} near S_{i + 1}={s!r}")
        return min(unstable, key=lambda x: abs(x - s))

    def _preimages(self, map_family: MapFamily, p: int, target: float) -> List[float]:
        """Every solution of f^p(x) = target, one per monotone branch crossing"""
        table = self.extrema_engine.build_table(map_family, p)
        model = self.extrema_engine.build_segment_model(table, map_family)
        solutions = []
        for segment in model:
            root = self.extrema_engine.solve_in_segment(map_family, p, segment, target)
            if root is not None:
                solutions.append(root)
            for x, y in ((segment.x_left, segment.y_left), (segment.x_right, segment.y_right)):
                if abs(y - target) <= self.tol_orbit:
                    solutions.append(x)
        return sorted(set(solutions))

    def find_companion(self, map_family: MapFamily, orbit: PeriodicOrbit, i: int) -> float:
        """
        Solution of f^p(x) = U_i nearest S_i on the side of S_i opposite to U_i

        Raises:
            PartnerNotFoundError: if no such solution exists
        """
        if not orbit.saddles:
            raise ValueError("Saddle partners must be found before companions")
        s, u = orbit.points[i], orbit.saddles[i]
        opposite = [
            x for x in self._preimages(map_family, orbit.p, u)
            if (x - s) * (u - s) < 0.0 and abs(x - u) > self.tol_orbit
        ]
        if not opposite:
            raise PartnerNotFoundError(
                f"f^{orbit.p}(x) = U_{i + 1} has no solution across S_{i + 1}={s!r} from U_{i + 1}={u!r}"
            )
        return min(opposite, key=lambda x: abs(x - s))

    def companion_preimage(self, map_family: MapFamily, orbit: PeriodicOrbit, i: int) -> float:
        """Solution of f^p(x) = U_i' nearest S_i on the side of U_i' (text reading)"""
        s, companion = orbit.points[i], orbit.companions[i]
        same_side = [
            x for x in self._preimages(map_family, orbit.p, companion)
            if (x - s) * (companion - s) > 0.0
        ]
        if not same_side:
            raise PartnerNotFoundError(f"f^{orbit.p}(x) = U_{i + 1}' has no solution on its side of S_{i + 1}")
        return min(same_side, key=lambda x: abs(x - s))

    # ------------------------------------------------------------------
    # Capture intervals

    def capture_intervals(
        self,
        map_family: MapFamily,
        orbit: PeriodicOrbit,
        mode: Optional[IntervalMode] = None,
    ) -> CaptureIntervalSet:
        """
        Open intervals bounded by U_i and U_i' (or its preimage in text mode)

        Raises:
            CaptureOverlapError: if two intervals intersect
        """
        mode = IntervalMode(mode or self.interval_mode)
        intervals = []
        for i in range(orbit.p):
            far = orbit.companions[i] if mode is IntervalMode.FIGURE else self.companion_preimage(map_family, orbit, i)
            intervals.append(tuple(sorted((orbit.saddles[i], far))))

        ordered = sorted(intervals)
        for left, right in zip(ordered, ordered[1:]):
            if right[0] < left[1] - self.tol_orbit:
                logger.error(f"Capture intervals {left} and {right} overlap")
                raise CaptureOverlapError(f"Capture intervals {left} and {right} overlap")

        c = map_family.critical
        critical_index = next((i for i, (lo, hi) in enumerate(intervals) if lo < c < hi), None)
        measure = math.fsum(hi - lo for lo, hi in intervals)
        return CaptureIntervalSet(orbit, tuple(intervals), critical_index, measure, mode)

    def resolve(self, map_family: MapFamily, p_max: Optional[int] = None) -> Optional[CaptureIntervalSet]:
        """
        Orbit, saddle partners, companions and capture intervals in one pass

        Returns:
            CaptureIntervalSet, or None when no stable orbit is detected
        """
        try:
            orbit = self.find_stable_orbit(map_family, p_max)
            if orbit is None:
                return None
            saddles = [self.find_saddle_partner(map_family, orbit, i) for i in range(orbit.p)]
            orbit = orbit.with_partners(saddles, ())
            companions = [self.find_companion(map_family, orbit, i) for i in range(orbit.p)]
            orbit = orbit.with_partners(saddles, companions)
            captures = self.capture_intervals(map_family, orbit)
            logger.info(f"Capture intervals resolved: measure {captures.measure:.6g}, critical index {captures.critical_index}")
            return captures
        except Exception as e:
            logger.error(f"Error resolving capture intervals at r={map_family.r}: {e}")
            raise

    def repulsion_report(
        self,
        map_family: MapFamily,
        captures: CaptureIntervalSet,
        epsilon: float = 1e-6,
        cycles: int = 200,
    ) -> List[Dict[str, Any]]:
        """
        Whether points just outside each capture interval still converge to S_i

        Diagnostic only: re-entry after a long excursion is legitimate.
        """
        orbit = captures.orbit
        rows = []
        for i, (lo, hi) in enumerate(captures.intervals):
            for x in (lo - epsilon * map_family.length, hi + epsilon * map_family.length):
                if not map_family.a <= x <= map_family.b:
                    continue
                end = map_family.iterate(x, cycles * orbit.p)
                converged = abs(end - orbit.points[i]) < 1e-9
                rows.append({"i": i, "x": x, "converged": converged})
                logger.debug(f"I_P{i + 1} outer point {x!r}: converged={converged}")
        return rows

    # ------------------------------------------------------------------
    # Bifurcation data

    def attractor_samples(
        self,
        map_family: MapFamily,
        r_values: Sequence[float],
        burn_in: Optional[int] = None,
        samples: Optional[int] = None,
    ) -> np.ndarray:
        """
        Critical-orbit samples after a burn-in, one row per parameter value

        Args:
            map_family: Family template (its own r is ignored)
            r_values: Parameter values
            burn_in: Iterations discarded first
            samples: Iterations recorded

        Returns:
            Array of shape (len(r_values), samples)
        """
        burn_in = self.bifurcation_burn_in if burn_in is None else burn_in
        samples = samples or self.bifurcation_samples
        r = np.asarray(r_values, dtype=float)
        x = np.full_like(r, map_family.critical)
        for _ in range(burn_in):
            x = map_family.value_at_parameter(x, r)
        out = np.empty((r.size, samples))
        for k in range(samples):
            x = map_family.value_at_parameter(x, r)
            out[:, k] = x
        return out
