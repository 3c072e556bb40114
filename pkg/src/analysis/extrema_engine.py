"""
Extrema of iterates f^q, monotonicity partition and the chord model of f^q

The extrema of f^q are the extrema of f^(q-1) plus the solutions of
f^(q-1)(x) = C. Solutions are seeded by intersecting the chord between
consecutive extrema of f^(q-1) with y = C and refined inside that chord's
monotone bracket.
"""
import bisect
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, newton
from loguru import logger

from src.maps.unimodal_map import MapFamily, central_difference
from src.utils.errors import (
    DuplicateRootError,
    ExtremaOrderError,
    MapDomainError,
    NoInflectionError,
    NonDifferentiableError,
    RefineEscapeError,
)

EPS = float(np.finfo(float).eps)


class ExtremumKind(str, Enum):
    MAX = "max"
    MIN = "min"

    def flipped(self) -> "ExtremumKind":
        return ExtremumKind.MIN if self is ExtremumKind.MAX else ExtremumKind.MAX


@dataclass(frozen=True)
class Extremum:
    """Local extremum of f^q; depth is the i with f^i(x) = C"""
    x: float
    y: float
    kind: ExtremumKind
    depth: int


@dataclass(frozen=True)
class SeedRecord:
    """Chord seed against refined root for one solution of f^q(x) = C"""
    segment_index: int
    seed: float
    root: float

    def error(self, length: float) -> float:
        """|seed - root| relative to the domain length"""
        return abs(self.seed - self.root) / length


@dataclass(frozen=True)
class ExtremaTable:
    """Sorted extrema of f^q on [a, b]"""
    q: int
    entries: Tuple[Extremum, ...]
    domain: Tuple[float, float]
    new_roots: int = 0
    seeds: Tuple[SeedRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def abscissas(self) -> np.ndarray:
        return np.array([e.x for e in self.entries])

    @property
    def ordinates(self) -> np.ndarray:
        return np.array([e.y for e in self.entries])

    def partition_points(self) -> List[float]:
        return [self.domain[0]] + [e.x for e in self.entries] + [self.domain[1]]

    def entry_at(self, x: float, tol: float = 0.0) -> Optional[Extremum]:
        """Extremum whose abscissa equals x within tol"""
        xs = [e.x for e in self.entries]
        k = bisect.bisect_left(xs, x - tol)
        if k < len(xs) and abs(xs[k] - x) <= tol:
            return self.entries[k]
        return None

    def between(self, lo: float, hi: float) -> List[Extremum]:
        """Extrema strictly inside (lo, hi)"""
        return [e for e in self.entries if lo < e.x < hi]

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {"q": self.q, "x": e.x, "y": e.y, "kind": e.kind.value, "depth": e.depth}
            for e in self.entries
        ]


@dataclass(frozen=True)
class Segment:
    """Chord of f^q between two consecutive partition points"""
    index: int
    x_left: float
    y_left: float
    x_right: float
    y_right: float
    left_kind: Optional[ExtremumKind] = None
    right_kind: Optional[ExtremumKind] = None

    @property
    def slope(self) -> float:
        return (self.y_right - self.y_left) / (self.x_right - self.x_left)

    @property
    def intercept(self) -> float:
        return self.y_left - self.slope * self.x_left

    @property
    def width(self) -> float:
        return self.x_right - self.x_left

    @property
    def increasing(self) -> bool:
        return self.y_right > self.y_left

    @property
    def is_boundary(self) -> bool:
        return self.left_kind is None or self.right_kind is None

    def interpolate(self, y: float) -> float:
        """Abscissa where the chord takes the value y"""
        return self.x_left + (y - self.y_left) * self.width / (self.y_right - self.y_left)

    def straddles(self, y: float, margin: float = 0.0) -> bool:
        """True when y lies strictly between the endpoint ordinates, at least margin inside"""
        lo, hi = min(self.y_left, self.y_right), max(self.y_left, self.y_right)
        return lo + margin < y < hi - margin

    def contains(self, x: float) -> bool:
        return self.x_left <= x <= self.x_right


@dataclass(frozen=True)
class SegmentModel:
    """Chords of f^q joining consecutive partition points"""
    q: int
    segments: Tuple[Segment, ...]

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, j: int) -> Segment:
        return self.segments[j]

    def locate(self, x: float) -> int:
        """Index of the segment whose interval contains x"""
        lefts = [s.x_left for s in self.segments]
        return max(0, min(len(self.segments) - 1, bisect.bisect_right(lefts, x) - 1))


class ExtremaEngine:
    """Builds extrema tables of f^q and solves f^q(x) = y on monotone branches"""

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize extrema engine

        Args:
            config: Configuration dictionary
        """
        self.config = config
        extrema_config = config.get("extrema", {})
        self.tol_root = extrema_config.get("tol_root", 1e-12)
        self.touch_tol = extrema_config.get("touch_tol", 1e-10)
        self.max_q = extrema_config.get("max_q", 20)
        self.seed_strategy = extrema_config.get("seed_strategy", "chord")
        self.newton_maxiter = extrema_config.get("newton_maxiter", 50)
        self.bisect_maxiter = extrema_config.get("bisect_maxiter", 200)
        self.monotone_probes = extrema_config.get("monotone_probes", 16)
        self.inflection_slope_floor = extrema_config.get("inflection_slope_floor", 1e-8)
        self.cache_maps = extrema_config.get("cache_maps", 8)

        if self.seed_strategy not in ("chord", "inflection_tangent"):
            raise ValueError(f"Unknown seed strategy: {self.seed_strategy}")

        self._tables: "OrderedDict[MapFamily, List[ExtremaTable]]" = OrderedDict()

        logger.info(f"Extrema Engine initialized (tol_root={self.tol_root}, seeds={self.seed_strategy})")

    # ------------------------------------------------------------------
    # Tables

    def base_table(self, map_family: MapFamily) -> ExtremaTable:
        """f itself: the single maximum (C, f(C)) of depth 0"""
        c = map_family.critical
        entry = Extremum(c, map_family.evaluate(c), ExtremumKind.MAX, 0)
        return ExtremaTable(1, (entry,), map_family.domain, new_roots=1)

    def extrema_step(self, map_family: MapFamily, table_prev: ExtremaTable) -> ExtremaTable:
        """
        Extrema of f^q from those of f^(q-1)

        Args:
            map_family: Map whose iterates are analysed
            table_prev: Extrema table of f^(q-1)

        Returns:
            Extrema table of f^q

        Raises:
            RefineEscapeError: if a refined root leaves its bracket
            DuplicateRootError: if two extrema collide within tol_root
        """
        q = table_prev.q + 1
        if q > self.max_q:
            raise ValueError(f"q={q} exceeds the supported maximum {self.max_q}")

        c = map_family.critical
        model = self.build_segment_model(table_prev, map_family)

        entries: List[Extremum] = []
        for e in table_prev.entries:
            if abs(e.y - c) <= self.touch_tol:
                kind = ExtremumKind.MAX
            elif e.y < c:
                kind = e.kind
            else:
                kind = e.kind.flipped()
            entries.append(Extremum(e.x, float(map_family._value(e.y)), kind, e.depth))

        peak = float(map_family._value(c))
        seeds: List[SeedRecord] = []
        for segment in model:
            if not segment.straddles(c, margin=self.touch_tol):
                continue
            seed, root = self._seed_and_refine(map_family, table_prev.q, segment, c)
            entries.append(Extremum(root, peak, ExtremumKind.MAX, table_prev.q))
            seeds.append(SeedRecord(segment.index, seed, root))

        entries.sort(key=lambda e: e.x)
        self._check_order(entries, q)

        logger.debug(f"q={q}: {len(entries)} extrema ({len(seeds)} new)")
        return ExtremaTable(q, tuple(entries), map_family.domain, new_roots=len(seeds), seeds=tuple(seeds))

    def _check_order(self, entries: List[Extremum], q: int):
        for left, right in zip(entries, entries[1:]):
            if right.x - left.x <= self.tol_root:
                logger.error(f"q={q}: extrema at {left.x} and {right.x} collide")
                raise DuplicateRootError(
                    f"Extrema of f^{q} at {left.x!r} and {right.x!r} coincide within {self.tol_root}"
                )
            if left.kind is right.kind:
                logger.error(f"q={q}: two consecutive {left.kind.value} at {left.x} and {right.x}")
                raise ExtremaOrderError(f"Extremum kinds of f^{q} do not alternate at x={right.x!r}")

    def build_tables(self, map_family: MapFamily, q: int) -> List[ExtremaTable]:
        """
        Tables for f^1 .. f^q; cached per map

        Args:
            map_family: Map whose iterates are analysed
            q: Highest iterate

        Returns:
            List whose k-th element is the table of f^(k+1)
        """
        if q < 1:
            raise ValueError(f"q must be positive, got {q}")
        if q > self.max_q:
            raise ValueError(f"q={q} exceeds the supported maximum {self.max_q}")

        try:
            tables = self._cached_tables(map_family)
            while len(tables) < q:
                tables.append(self.extrema_step(map_family, tables[-1]))
            return tables[:q]
        except Exception as e:
            logger.error(f"Error building extrema tables up to q={q}: {e}")
            raise

    def _cached_tables(self, map_family: MapFamily) -> List[ExtremaTable]:
        """Table list of a map, evicting the least recently used map past cache_maps"""
        if map_family in self._tables:
            self._tables.move_to_end(map_family)
            return self._tables[map_family]
        tables = [self.base_table(map_family)]
        self._tables[map_family] = tables
        while len(self._tables) > max(1, self.cache_maps):
            evicted, _ = self._tables.popitem(last=False)
            logger.debug(f"Evicted extrema tables of {evicted.family_id.value} r={evicted.r!r}")
        return tables

    def clear_cache(self):
        self._tables.clear()

    def build_table(self, map_family: MapFamily, q: int) -> ExtremaTable:
        return self.build_tables(map_family, q)[-1]

    def monotonicity_partition(self, table: ExtremaTable) -> List[Tuple[float, float]]:
        """Consecutive closed intervals [q_j, q_j+1] between partition points"""
        points = table.partition_points()
        return [(lo, hi) for lo, hi in zip(points, points[1:]) if hi > lo]

    def build_segment_model(self, table: ExtremaTable, map_family: MapFamily) -> SegmentModel:
        """One chord per monotonicity interval, boundary chords at a and b included"""
        a, b = map_family.domain
        nodes = [(a, map_family.iterate_unchecked(a, table.q), None)]
        nodes += [(e.x, e.y, e.kind) for e in table.entries]
        nodes.append((b, map_family.iterate_unchecked(b, table.q), None))

        segments = []
        for (x0, y0, k0), (x1, y1, k1) in zip(nodes, nodes[1:]):
            if x1 <= x0:
                continue
            segments.append(Segment(len(segments), x0, y0, x1, y1, k0, k1))
        return SegmentModel(table.q, tuple(segments))

    # ------------------------------------------------------------------
    # Root solving on monotone branches

    def solve_in_segment(
        self,
        map_family: MapFamily,
        q: int,
        segment: Segment,
        y_target: float,
        seed: Optional[float] = None,
    ) -> Optional[float]:
        """
        Solve f^q(x) = y_target inside a monotone segment

        Args:
            map_family: Map
            q: Iterate
            segment: Chord of f^q over a monotonicity interval
            y_target: Target ordinate
            seed: Optional starting point; the chord intersection otherwise

        Returns:
            Refined root, or None when y_target is not strictly between the
            segment's endpoint ordinates
        """
        if not segment.straddles(y_target):
            return None
        if seed is None:
            seed = self.seed(map_family, q, segment, y_target)
        return self.refine(map_family, q, segment.x_left, segment.x_right, y_target, seed)

    def _seed_and_refine(
        self, map_family: MapFamily, q: int, segment: Segment, y_target: float
    ) -> Tuple[float, float]:
        seed = self.seed(map_family, q, segment, y_target)
        return seed, self.refine(map_family, q, segment.x_left, segment.x_right, y_target, seed)

    def seed(self, map_family: MapFamily, q: int, segment: Segment, y_target: float) -> float:
        """Starting point for f^q(x) = y_target from the segment model"""
        chord = segment.interpolate(y_target)
        if self.seed_strategy != "inflection_tangent" or not map_family.is_smooth:
            return chord
        try:
            x_inf = self.inflection_point(map_family, q, segment)
        except NoInflectionError:
            return chord
        value, slope, _, _ = map_family.iterate_jet(x_inf, q, check=False)
        if slope == 0.0:
            return chord
        tangent = x_inf + (y_target - value) / slope
        return tangent if segment.x_left < tangent < segment.x_right else chord

    def refine(
        self,
        map_family: MapFamily,
        q: int,
        lo: float,
        hi: float,
        y_target: float,
        seed: float,
    ) -> float:
        """
        Safeguarded root of f^q(x) = y_target on the monotone bracket [lo, hi]

        Newton from the seed is accepted only if it stays in the bracket and
        meets the residual tolerance; otherwise Brent's method on the bracket.

        Raises:
            RefineEscapeError: if the bracket does not contain a sign change
        """

        def residual(x: float) -> float:
            return map_family.iterate_unchecked(x, q) - y_target

        if map_family.is_smooth:
            root = self._newton(map_family, q, residual, seed, lo, hi)
            if root is not None:
                return root

        r_lo, r_hi = residual(lo), residual(hi)
        if r_lo == 0.0:
            return lo
        if r_hi == 0.0:
            return hi
        if r_lo * r_hi > 0.0:
            if min(abs(r_lo), abs(r_hi)) <= self.touch_tol:
                return lo if abs(r_lo) < abs(r_hi) else hi
            raise RefineEscapeError(
                f"f^{q}(x) = {y_target!r} has no root in [{lo!r}, {hi!r}] "
                f"(residuals {r_lo:.3e}, {r_hi:.3e})"
            )
        scale = max(1.0, abs(lo), abs(hi))
        return brentq(residual, lo, hi, xtol=4.0 * EPS * scale, rtol=4.0 * EPS, maxiter=self.bisect_maxiter)

    def _newton(self, map_family, q, residual, seed, lo, hi) -> Optional[float]:
        def slope(x: float) -> float:
            return map_family.iterate_jet(x, q, check=False)[1]

        scale = max(1.0, abs(lo), abs(hi))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                root = float(newton(residual, seed, fprime=slope, tol=4.0 * EPS * scale, maxiter=self.newton_maxiter))
        except (RuntimeError, ArithmeticError, MapDomainError, NonDifferentiableError):
            return None

        if not (lo <= root <= hi) or not math.isfinite(root):
            return None
        if abs(residual(root)) > self.tol_root * max(1.0, abs(slope(root))):
            return None
        return root

    def is_monotone_on(self, map_family: MapFamily, q: int, segment: Segment, probes: Optional[int] = None) -> bool:
        """Spot-check strict monotonicity of f^q on a segment by sampling"""
        n = probes or self.monotone_probes
        xs = np.linspace(segment.x_left, segment.x_right, n + 2)
        ys = map_family.iterate_array(xs, q)
        steps = np.diff(ys)
        return bool(np.all(steps > 0.0) or np.all(steps < 0.0))

    # ------------------------------------------------------------------
    # Error of the chord model

    def inflection_point(self, map_family: MapFamily, q: int, segment: Segment) -> float:
        """
        Zero of (f^q)'' inside the segment where |(f^q)'| is largest

        Next to a flat extremum (f^q)'' is dominated by rounding and changes
        sign spuriously, so every sign change is refined and the candidate on
        the steepest part of the branch is kept.

        Raises:
            NonDifferentiableError: for non-smooth families
            NoInflectionError: if (f^q)'' keeps its sign on the segment
        """
        if not map_family.is_smooth:
            raise NonDifferentiableError(f"{map_family.family_id.value} map has no second derivative")

        def curvature(x: float) -> float:
            return map_family.iterate_jet(x, q, check=False)[2]

        inset = 1e-9 * segment.width
        samples = np.linspace(segment.x_left + inset, segment.x_right - inset, self.monotone_probes + 2)
        values = [curvature(x) for x in samples]
        candidates = []
        for k in range(len(samples) - 1):
            if values[k] == 0.0:
                candidates.append(float(samples[k]))
            elif values[k] * values[k + 1] < 0.0:
                candidates.append(brentq(curvature, samples[k], samples[k + 1], xtol=4.0 * EPS, rtol=4.0 * EPS))

        slope_floor = self.inflection_slope_floor * abs(segment.slope)
        best, best_slope = None, slope_floor
        for x in candidates:
            slope = abs(map_family.iterate_jet(x, q, check=False)[1])
            if slope > best_slope:
                best, best_slope = x, slope
        if best is None:
            raise NoInflectionError(
                f"(f^{q})'' keeps its sign on [{segment.x_left!r}, {segment.x_right!r}]"
            )
        if len(candidates) > 1:
            logger.debug(f"q={q} segment {segment.index}: {len(candidates)} curvature sign changes, kept x={best:.12g}")
        return float(best)

    def segment_error_bound(self, map_family: MapFamily, q: int, segment: Segment) -> float:
        """
        Ordinate error bound of the chord: |f^q'''(x_inf)| / 6 * ((b - a) / 2^q)^3

        The third derivative is a central difference of the chain-rule second
        derivative at the inflection point.
        """
        x_inf = self.inflection_point(map_family, q, segment)
        third = central_difference(lambda t: map_family.iterate_jet(t, q, check=False)[2], x_inf)
        return abs(third) / 6.0 * (map_family.length / 2 ** q) ** 3

    def abscissa_error_bound(self, map_family: MapFamily, q: int, segment: Segment) -> float:
        """Ordinate bound divided by the slope of f^q at the inflection point"""
        x_inf = self.inflection_point(map_family, q, segment)
        slope = abs(map_family.iterate_jet(x_inf, q, check=False)[1])
        return self.segment_error_bound(map_family, q, segment) / slope

    def segment_rows(self, map_family: MapFamily, model: SegmentModel) -> List[Dict[str, Any]]:
        """Export rows of a segment model with error bounds (None where undefined)"""
        rows = []
        for s in model:
            try:
                bound = self.segment_error_bound(map_family, model.q, s)
                abscissa_bound = self.abscissa_error_bound(map_family, model.q, s)
            except (NoInflectionError, NonDifferentiableError):
                bound = abscissa_bound = None
            rows.append({
                "x_L": s.x_left, "y_L": s.y_left, "x_R": s.x_right, "y_R": s.y_right,
                "slope": s.slope, "intercept": s.intercept,
                "error_bound": bound, "abscissa_error_bound": abscissa_bound,
            })
        return rows

    # ------------------------------------------------------------------
    # Diagnostics

    def seed_records(self, map_family: MapFamily, q: int) -> Tuple[SeedRecord, ...]:
        """Seeds and refined roots of every solution of f^q(x) = C"""
        return self.build_table(map_family, q + 1).seeds

    def worst_seed_error(self, map_family: MapFamily, q: int) -> float:
        """Largest |seed - root| / (b - a) over the solutions of f^q(x) = C"""
        records = self.seed_records(map_family, q)
        return max((r.error(map_family.length) for r in records), default=0.0)

    def coordinate_deviation(self, map_family: MapFamily, table: ExtremaTable, p: int) -> float:
        """
        Largest |y - f^((q - depth) mod p)(C)| over the table

        Zero up to rounding at supercycle parameters; reported otherwise.
        """
        c = map_family.critical
        cycle = map_family.orbit(c, p - 1)
        deviation = max(abs(e.y - cycle[(table.q - e.depth) % p]) for e in table.entries)
        if deviation > 1e-9:
            logger.warning(f"q={table.q}: extrema ordinates deviate from the critical cycle by {deviation:.3e}")
        return float(deviation)
