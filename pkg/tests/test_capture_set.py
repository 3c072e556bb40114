"""Tests for capture sets W_R and capture probabilities."""
from __future__ import annotations

import numpy as np
import pytest

from src.analysis.capture_set import (
    CaptureCase,
    CaptureSetBuilder,
    ProbabilityReport,
    capture_time_summary,
)
from src.maps.unimodal_map import MapFamily
from src.utils.config_loader import get_default_config, merge_config
from src.utils.intervals import total_length

# dense-grid reconstruction of P_q at the period-3 supercycle, q = 0..9
GRID_P3 = [0.084999, 0.112770, 0.149022, 0.176222, 0.205222, 0.232530, 0.257976, 0.282602, 0.306356, 0.328940]


def _enters(map_family, captures, x: float, q: int) -> bool:
    for _ in range(q + 1):
        if captures.contains(x):
            return True
        x = map_family(x)
    return False


class TestAssembly:
    def test_zero_steps_is_capture_set_itself(self, builder, logistic_r3, captures_r3):
        capture_set = builder.assemble_W_R(logistic_r3, 0, captures_r3)
        assert capture_set.merged == tuple(sorted(captures_r3.intervals))
        assert capture_set.measure == pytest.approx(captures_r3.measure)

    @pytest.mark.parametrize("q, expected", list(enumerate(GRID_P3)))
    def test_probabilities_match_grid(self, builder, logistic_r3, captures_r3, q, expected):
        capture_set = builder.assemble_W_R(logistic_r3, q, captures_r3)
        assert capture_set.measure == pytest.approx(expected, abs=3e-4)

    def test_merged_intervals_are_disjoint(self, builder, logistic_r3, captures_r3):
        merged = builder.assemble_W_R(logistic_r3, 5, captures_r3).merged
        assert all(left[1] < right[0] for left, right in zip(merged, merged[1:]))
        assert all(lo < hi for lo, hi in merged)

    def test_measure_is_merged_length(self, builder, logistic_r3, captures_r3):
        capture_set = builder.assemble_W_R(logistic_r3, 4, captures_r3)
        assert capture_set.measure == pytest.approx(total_length(capture_set.merged))
        assert 0.0 <= capture_set.measure <= logistic_r3.length

    def test_provenance(self, builder, logistic_r3, captures_r3):
        capture_set = builder.assemble_W_R(logistic_r3, 3, captures_r3)
        cases = {piece.case for piece in capture_set.subintervals}
        assert cases == {CaptureCase.MONOTONE, CaptureCase.CRITICAL}
        for piece in capture_set.subintervals:
            assert 0 <= piece.orbit_index < 3
            assert piece.q == 3
            assert piece.lo < piece.hi

    def test_per_orbit_sets_cover_union(self, builder, logistic_r3, captures_r3):
        capture_set = builder.assemble_W_R(logistic_r3, 4, captures_r3)
        assert len(capture_set.per_orbit) == 3
        per_orbit = sum(total_length(part) for part in capture_set.per_orbit)
        assert per_orbit >= capture_set.measure - 1e-12

    @pytest.mark.parametrize("p, q", [(3, 6), (3, 9), (6, 8)])
    def test_samples_enter_capture_set(self, builder, request, p, q):
        map_family = request.getfixturevalue(f"logistic_r{p}")
        captures = request.getfixturevalue(f"captures_r{p}")
        capture_set = builder.assemble_W_R(map_family, q, captures)
        rng = np.random.default_rng(2024)
        for lo, hi in capture_set.merged:
            for u in rng.uniform(0.01, 0.99, 100):
                assert _enters(map_family, captures, lo + u * (hi - lo), q)

    @pytest.mark.parametrize("p, q", [(3, 6), (3, 9), (6, 8)])
    def test_points_just_outside_are_not_captured(self, builder, request, p, q):
        map_family = request.getfixturevalue(f"logistic_r{p}")
        captures = request.getfixturevalue(f"captures_r{p}")
        capture_set = builder.assemble_W_R(map_family, q, captures)
        step = 1e-5 * map_family.length
        fixed = (map_family.a, map_family.b, map_family.critical)

        outside = []
        for lo, hi in capture_set.merged:
            for e, x in ((lo, lo - step), (hi, hi + step)):
                if any(abs(e - v) <= 1e-12 for v in fixed):
                    continue
                if map_family.a <= x <= map_family.b and not capture_set.contains(x):
                    outside.append(x)

        assert outside
        escaped = sum(not _enters(map_family, captures, x, q) for x in outside)
        assert escaped >= 0.95 * len(outside)

    def test_chord_crossings_are_flagged_approximate(self, logistic_r3, captures_r3, builder):
        chord = CaptureSetBuilder(merge_config(get_default_config(), {"capture": {"refine_crossings": False}}))
        rough = chord.assemble_W_R(logistic_r3, 5, captures_r3)
        exact = builder.assemble_W_R(logistic_r3, 5, captures_r3)
        assert rough.approximate and not exact.approximate
        assert 0.0 <= rough.measure <= logistic_r3.length
        assert sorted((s.orbit_index, s.partition_index, s.case.value) for s in rough.subintervals) == sorted(
            (s.orbit_index, s.partition_index, s.case.value) for s in exact.subintervals
        )

    def test_whole_domain_capture(self, finder, builder):
        f = MapFamily.logistic(2.5)
        captures = finder.resolve(f)
        assert builder.assemble_W_R(f, 3, captures).measure == pytest.approx(1.0)

    def test_to_dict(self, builder, logistic_r3, captures_r3):
        capture_set = builder.assemble_W_R(logistic_r3, 2, captures_r3)
        report = builder.probability(capture_set)
        data = capture_set.to_dict(report)
        assert data["q"] == 2
        assert data["P_q"] == pytest.approx(capture_set.measure)
        assert {"lo", "hi", "i", "j", "case"} == set(data["intervals"][0])


class TestBackpull:
    def test_depth_zero_returns_critical_interval(self, builder, logistic_r3, captures_r3):
        interval = builder.linearized_backpull(logistic_r3, 0.5, 0, captures_r3.critical_interval)
        assert interval == captures_r3.critical_interval

    def test_linearized_matches_exact_at_period_six(self, builder, logistic_r6, captures_r6):
        lo_c, hi_c = captures_r6.critical_interval
        width = hi_c - lo_c
        checked = 0
        for q in (6, 7, 8):
            capture_set = builder.assemble_W_R(logistic_r6, q, captures_r6)
            for piece in capture_set.subintervals:
                backpull = piece.backpull
                if backpull is None or not backpull.linearized or backpull.depth == 0:
                    continue
                assert backpull.agreement <= 0.10
                far = backpull.approximate[1] if backpull.x_critical <= backpull.exact[0] else backpull.approximate[0]
                landed = logistic_r6.iterate(far, backpull.depth)
                assert lo_c - 0.05 * width <= landed <= hi_c + 0.05 * width
                checked += 1
        assert checked > 0


class TestProbability:
    def test_series_is_monotone(self, builder, logistic_r3, captures_r3):
        reports = builder.probability_series(logistic_r3, captures_r3, range(0, 10))
        values = [r.p_q for r in reports]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert all(r.p_exact_q >= -1e-9 for r in reports[1:])
        assert reports[0].p_exact_q is None

    def test_series_from_later_start(self, builder, logistic_r3, captures_r3):
        (report,) = builder.probability_series(logistic_r3, captures_r3, [4])
        assert report.p_exact_q == pytest.approx(GRID_P3[4] - GRID_P3[3], abs=6e-4)

    def test_monte_carlo_agreement(self):
        report = ProbabilityReport(3, 0.2).with_monte_carlo(0.201, 0.002)
        assert report.mc_agrees
        assert not ProbabilityReport(3, 0.2).with_monte_carlo(0.21, 0.002).mc_agrees
        assert ProbabilityReport(3, 0.2).mc_agrees is None

    def test_row(self):
        row = ProbabilityReport(2, 0.15, 0.03).to_row()
        assert list(row) == ["q", "P_q", "P_exact_q", "mc_estimate", "mc_halfwidth"]

    def test_capture_time_summary(self):
        reports = [ProbabilityReport(0, 0.5), ProbabilityReport(1, 0.75, 0.25)]
        summary = capture_time_summary(reports)
        assert summary["q_max"] == 1
        assert summary["residual"] == pytest.approx(0.25)
        # (0 * 0.5 + 1 * 0.25) / 0.75
        assert summary["mean_steps"] == pytest.approx(1 / 3)

    def test_empty_summary(self):
        assert capture_time_summary([])["residual"] == 1.0
