"""
Capture sets W_R: the points that reach a capture interval within q iterations

For each capture interval I_Pi and each monotonicity interval of f^q the
preimage of I_Pi is either empty, a full branch preimage (monotone case) or a
half-open interval ending at an extremum of f^q (critical case). Critical
pieces are seeded by pulling the critical capture interval back through the
tangent maps of f along the extremum's path to C.
"""
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from loguru import logger

from src.analysis.extrema_engine import ExtremaEngine, ExtremaTable, Extremum, Segment, SegmentModel
from src.maps.unimodal_map import MapFamily
from src.orbits.orbit_finder import CaptureIntervalSet
from src.utils.errors import InconsistentCaseError, NonDifferentiableError, ZeroSlopeError
from src.utils.intervals import Interval, merge_intervals, total_length


class CaptureCase(str, Enum):
    MONOTONE = "monotone"
    CRITICAL = "critical"


@dataclass(frozen=True)
class BackpullResult:
    """Linearized and exact pull-back of the critical capture interval to an extremum"""
    x_critical: float
    depth: int
    approximate: Interval
    exact: Interval
    linearized: bool
    agreement: float


@dataclass(frozen=True)
class CaptureSubinterval:
    """One W_qij: points of partition interval j that f^q maps into I_Pi"""
    lo: float
    hi: float
    orbit_index: int
    partition_index: int
    case: CaptureCase
    q: int
    closed_lo: bool = False
    closed_hi: bool = False
    backpull: Optional[BackpullResult] = None

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "i": self.orbit_index,
            "j": self.partition_index,
            "case": self.case.value,
        }


@dataclass(frozen=True)
class CaptureSet:
    """W_R at a fixed q: provenance-tagged pieces and their disjoint union"""
    q: int
    subintervals: Tuple[CaptureSubinterval, ...]
    merged: Tuple[Interval, ...]
    measure: float
    per_orbit: Tuple[Tuple[Interval, ...], ...]
    domain: Tuple[float, float]
    approximate: bool = False

    def contains(self, x: float) -> bool:
        return any(lo < x < hi for lo, hi in self.merged)

    def to_dict(self, report: Optional["ProbabilityReport"] = None) -> Dict[str, Any]:
        data: Dict[str, Any] = {"q": self.q}
        if report is not None:
            data["P_q"] = report.p_q
            data["P_exact_q"] = report.p_exact_q
        data["measure"] = self.measure
        data["approximate"] = self.approximate
        data["intervals"] = [s.to_dict() for s in self.subintervals]
        return data


@dataclass(frozen=True)
class ProbabilityReport:
    """Capture probability within q iterations, and in exactly q iterations"""
    q: int
    p_q: float
    p_exact_q: Optional[float] = None
    mc_estimate: Optional[float] = None
    mc_halfwidth: Optional[float] = None

    def with_monte_carlo(self, estimate: float, halfwidth: float) -> "ProbabilityReport":
        return replace(self, mc_estimate=estimate, mc_halfwidth=halfwidth)

    @property
    def mc_agrees(self) -> Optional[bool]:
        if self.mc_estimate is None:
            return None
        return abs(self.p_q - self.mc_estimate) <= self.mc_halfwidth

    def to_row(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "P_q": self.p_q,
            "P_exact_q": self.p_exact_q,
            "mc_estimate": self.mc_estimate,
            "mc_halfwidth": self.mc_halfwidth,
        }


class CaptureSetBuilder:
    """Assembles W_R from extrema tables and capture intervals"""

    def __init__(self, config: Dict[str, Any], extrema_engine: Optional[ExtremaEngine] = None):
        """
        Initialize capture set builder

        Args:
            config: Configuration dictionary
            extrema_engine: Shared extrema engine (built from config if omitted)
        """
        self.config = config
        capture_config = config.get("capture", {})
        self.slope_floor = capture_config.get("slope_floor", 1e-8)
        self.backpull_gate = capture_config.get("backpull_gate", 0.10)
        self.tol_measure = capture_config.get("tol_measure", 1e-12)
        self.refine_crossings = capture_config.get("refine_crossings", True)

        self.extrema_engine = extrema_engine or ExtremaEngine(config)

        logger.info(f"Capture Set Builder initialized (refine_crossings={self.refine_crossings})")

    # ------------------------------------------------------------------
    # Back-pull of the critical capture interval

    def linearized_backpull(
        self,
        map_family: MapFamily,
        x_critical: float,
        depth: int,
        critical_interval: Interval,
        partition: Optional[Interval] = None,
    ) -> Interval:
        """
        Pull I_P(i,C) back to x_critical through the tangent maps of f

        The tangent map at x_k = f^k(x_critical) is y = f(x_k) + f'(x_k) (x - x_k);
        the inverses are applied from k = depth - 1 down to k = 0.

        Args:
            map_family: Map
            x_critical: Point with f^depth(x_critical) = C
            depth: Preimage depth of x_critical
            critical_interval: Capture interval containing C
            partition: Optional interval to clip the result to

        Returns:
            Approximate interval around x_critical

        Raises:
            ZeroSlopeError: if |f'(x_k)| <= slope_floor for some k
            NonDifferentiableError: if f' does not exist along the chain
        """
        if depth == 0:
            lo, hi = critical_interval
        else:
            chain = [float(x_critical)]
            for _ in range(depth - 1):
                chain.append(float(map_family._value(chain[-1])))
            tangents = []
            for x_k in chain:
                value, slope, _, _ = map_family.derivatives(x_k)
                if abs(slope) <= self.slope_floor:
                    raise ZeroSlopeError(f"|f'({x_k!r})| = {abs(slope):.3e} is below the slope floor")
                tangents.append((x_k, value, slope))

            ends = []
            for y in critical_interval:
                for x_k, value, slope in reversed(tangents):
                    y = x_k + (y - value) / slope
                ends.append(y)
            lo, hi = min(ends), max(ends)

        if partition is not None:
            lo, hi = max(lo, partition[0]), min(hi, partition[1])
        return lo, hi

    def exact_backpull(
        self,
        map_family: MapFamily,
        extremum: Extremum,
        critical_interval: Interval,
        partition: Interval,
    ) -> Interval:
        """
        Points of the partition interval next to the extremum that f^depth maps into I_P(i,C)

        f^depth is monotone on the partition interval, so the far endpoint is a
        bracketed root of f^depth(x) = endpoint of I_P(i,C).
        """
        x_e, depth = extremum.x, extremum.depth
        p_lo, p_hi = partition
        lo_c, hi_c = critical_interval
        if depth == 0:
            return max(lo_c, p_lo), min(hi_c, p_hi)

        other = p_hi if x_e <= p_lo else p_lo
        y_other = map_family.iterate_unchecked(other, depth)
        target = hi_c if y_other > map_family.critical else lo_c
        if (y_other - target) * (map_family.critical - target) >= 0.0:
            far = other
        else:
            far = self.extrema_engine.refine(
                map_family, depth, min(x_e, other), max(x_e, other), target, 0.5 * (x_e + other)
            )
        return min(x_e, far), max(x_e, far)

    def _backpull(
        self,
        map_family: MapFamily,
        extremum: Extremum,
        captures: CaptureIntervalSet,
        partition: Interval,
    ) -> Optional[BackpullResult]:
        critical_interval = captures.critical_interval
        if critical_interval is None:
            return None

        exact = self.exact_backpull(map_family, extremum, critical_interval, partition)
        try:
            approximate = self.linearized_backpull(
                map_family, extremum.x, extremum.depth, critical_interval, partition
            )
            linearized = True
        except (ZeroSlopeError, NonDifferentiableError) as e:
            logger.debug(f"Back-pull at x={extremum.x!r} falls back to the exact solve: {e}")
            approximate, linearized = exact, False

        width = exact[1] - exact[0]
        far_exact = exact[1] if extremum.x <= exact[0] else exact[0]
        far_approx = approximate[1] if extremum.x <= exact[0] else approximate[0]
        agreement = abs(far_approx - far_exact) / width if width > 0.0 else 0.0
        return BackpullResult(extremum.x, extremum.depth, approximate, exact, linearized, agreement)

    # ------------------------------------------------------------------
    # W_qij

    def compute_W_qij(
        self,
        map_family: MapFamily,
        q: int,
        table: ExtremaTable,
        captures: CaptureIntervalSet,
        i: int,
        j: int,
        model: Optional[SegmentModel] = None,
    ) -> Optional[CaptureSubinterval]:
        """
        Points of the j-th monotonicity interval of f^q mapped into I_Pi

        Args:
            map_family: Map
            q: Iterate
            table: Extrema table of f^q
            captures: Capture intervals
            i: Capture interval index
            j: Partition interval index
            model: Segment model of table (built if omitted)

        Returns:
            CaptureSubinterval, or None if f^q misses I_Pi on this interval

        Raises:
            RefineEscapeError: propagated from root refinement
            InconsistentCaseError: if a single crossing ends at an unknown extremum
        """
        model = model or self.extrema_engine.build_segment_model(table, map_family)
        segment = model[j]
        lo_i, hi_i = captures.intervals[i]
        crossings = [t for t in (lo_i, hi_i) if segment.straddles(t)]

        if len(crossings) == 2:
            ends = sorted(self._crossing(map_family, q, segment, t) for t in crossings)
            return CaptureSubinterval(ends[0], ends[1], i, j, CaptureCase.MONOTONE, q)

        if len(crossings) == 1:
            return self._single_crossing(map_family, q, table, captures, i, segment, crossings[0])

        y_min, y_max = sorted((segment.y_left, segment.y_right))
        if lo_i <= y_min and y_max <= hi_i:
            ends_at_extremum = segment.left_kind is not None or segment.right_kind is not None
            case = CaptureCase.CRITICAL if ends_at_extremum else CaptureCase.MONOTONE
            return CaptureSubinterval(
                segment.x_left, segment.x_right, i, j, case, q, closed_lo=True, closed_hi=True
            )
        return None

    def _crossing(
        self,
        map_family: MapFamily,
        q: int,
        segment: Segment,
        target: float,
        seed: Optional[float] = None,
    ) -> float:
        if not self.refine_crossings:
            return segment.interpolate(target)
        if seed is not None:
            seed = min(max(seed, segment.x_left), segment.x_right)
        return self.extrema_engine.solve_in_segment(map_family, q, segment, target, seed=seed)

    def _single_crossing(
        self,
        map_family: MapFamily,
        q: int,
        table: ExtremaTable,
        captures: CaptureIntervalSet,
        i: int,
        segment: Segment,
        target: float,
    ) -> CaptureSubinterval:
        lo_i, _ = captures.intervals[i]
        # the inside end is where f^q moves from the crossed endpoint into I_Pi
        inward_up = target == lo_i
        left_inside = (segment.y_left > target) == inward_up
        x_end, kind = (segment.x_left, segment.left_kind) if left_inside else (segment.x_right, segment.right_kind)

        if kind is None:
            # f^q maps the domain boundary into I_Pi: the piece is cut by the boundary
            x_cross = self._crossing(map_family, q, segment, target)
            lo, hi = sorted((x_cross, x_end))
            return CaptureSubinterval(
                lo, hi, i, segment.index, CaptureCase.MONOTONE, q,
                closed_lo=lo == x_end, closed_hi=hi == x_end,
            )

        extremum = table.entry_at(x_end)
        if extremum is None:
            logger.error(f"q={q}: single crossing of I_P{i + 1} without an extremum at x={x_end!r}")
            raise InconsistentCaseError(
                f"f^{q} crosses one end of I_P{i + 1} on segment {segment.index} but no extremum ends it"
            )

        backpull = self._backpull(map_family, extremum, captures, (segment.x_left, segment.x_right))
        seed = None
        if backpull is not None:
            if backpull.agreement > self.backpull_gate:
                logger.warning(
                    f"Back-pull at x={extremum.x!r} (depth {extremum.depth}) disagrees by "
                    f"{100 * backpull.agreement:.2f}%, seeding from the exact solve"
                )
                source = backpull.exact
            else:
                source = backpull.approximate
            seed = source[1] if extremum.x <= source[0] else source[0]

        x_cross = self._crossing(map_family, q, segment, target, seed=seed)
        lo, hi = sorted((x_cross, extremum.x))
        return CaptureSubinterval(
            lo, hi, i, segment.index, CaptureCase.CRITICAL, q,
            closed_lo=lo == extremum.x, closed_hi=hi == extremum.x, backpull=backpull,
        )

    # ------------------------------------------------------------------
    # W_R and probabilities

    def assemble_W_R(
        self,
        map_family: MapFamily,
        q: int,
        captures: CaptureIntervalSet,
        table: Optional[ExtremaTable] = None,
    ) -> CaptureSet:
        """
        Union over all capture intervals and partition intervals of W_qij

        Args:
            map_family: Map
            q: Iteration budget (q = 0 gives I_P itself)
            captures: Capture intervals
            table: Extrema table of f^q (built if omitted)

        Returns:
            CaptureSet with merged disjoint intervals and their measure
        """
        try:
            subintervals: List[CaptureSubinterval] = []
            if q == 0:
                subintervals = [
                    CaptureSubinterval(lo, hi, i, 0, CaptureCase.MONOTONE, 0)
                    for i, (lo, hi) in enumerate(captures.intervals)
                ]
            else:
                table = table or self.extrema_engine.build_table(map_family, q)
                model = self.extrema_engine.build_segment_model(table, map_family)
                for i in range(len(captures.intervals)):
                    for j in range(len(model)):
                        piece = self.compute_W_qij(map_family, q, table, captures, i, j, model)
                        if piece is not None:
                            subintervals.append(piece)

            subintervals.sort(key=lambda s: (s.lo, s.orbit_index))
            merged = merge_intervals(((s.lo, s.hi) for s in subintervals), tol=self.tol_measure)
            per_orbit = tuple(
                tuple(merge_intervals(((s.lo, s.hi) for s in subintervals if s.orbit_index == i), tol=self.tol_measure))
                for i in range(len(captures.intervals))
            )
            capture_set = CaptureSet(
                q=q,
                subintervals=tuple(subintervals),
                merged=tuple(merged),
                measure=min(total_length(merged), map_family.length),
                per_orbit=per_orbit,
                domain=map_family.domain,
                approximate=not self.refine_crossings,
            )
            logger.info(
                f"W_R at q={q}: {len(subintervals)} pieces, {len(merged)} merged intervals, "
                f"measure {capture_set.measure:.6g}"
            )
            return capture_set
        except Exception as e:
            logger.error(f"Error assembling W_R at q={q}: {e}")
            raise

    def probability(
        self,
        capture_set: CaptureSet,
        domain: Optional[Tuple[float, float]] = None,
        previous: Optional[ProbabilityReport] = None,
    ) -> ProbabilityReport:
        """
        P_q = measure(W_R) / (b - a); with the previous report also P_q - P_(q-1)
        """
        a, b = domain or capture_set.domain
        p_q = capture_set.measure / (b - a)
        p_exact = p_q - previous.p_q if previous is not None else None
        if p_exact is not None and p_exact < -self.tol_measure / (b - a):
            logger.warning(f"P_q decreased from q={previous.q} to q={capture_set.q} by {-p_exact:.3e}")
        return ProbabilityReport(capture_set.q, p_q, p_exact)

    def probability_series(
        self,
        map_family: MapFamily,
        captures: CaptureIntervalSet,
        q_values: Sequence[int],
    ) -> List[ProbabilityReport]:
        """
        Reports for consecutive q values; each P_exact_q comes from a separate run at q - 1
        """
        reports = []
        previous: Optional[ProbabilityReport] = None
        for q in q_values:
            if previous is None or previous.q != q - 1:
                previous = None
                if q >= 1:
                    previous = self.probability(self.assemble_W_R(map_family, q - 1, captures))
            report = self.probability(self.assemble_W_R(map_family, q, captures), previous=previous)
            reports.append(report)
            previous = report
        return reports


def capture_time_summary(reports: Sequence[ProbabilityReport]) -> Dict[str, Any]:
    """
    Truncated mean capture time over a series of reports

    Mass at the first q is P_q itself; later masses are the exact-q probabilities.
    """
    if not reports:
        return {"q_max": None, "P_q_max": 0.0, "mean_steps": None, "residual": 1.0}
    masses = [(reports[0].q, reports[0].p_q)]
    masses += [(r.q, max(r.p_exact_q or 0.0, 0.0)) for r in reports[1:]]
    total = math.fsum(m for _, m in masses)
    mean = math.fsum(q * m for q, m in masses) / total if total > 0.0 else None
    last = reports[-1]
    return {"q_max": last.q, "P_q_max": last.p_q, "mean_steps": mean, "residual": 1.0 - last.p_q}
