"""Tests for stable orbits, saddle partners, companions and capture intervals."""
from __future__ import annotations

import numpy as np
import pytest

from src.maps.unimodal_map import MapFamily, MapFamilyId
from src.orbits.orbit_finder import OrbitFinder
from src.utils.config_loader import merge_config
from src.utils.errors import BracketError, PartnerNotFoundError, WrongPeriodError

from tests.conftest import R3, R6


def _distinct(values: np.ndarray, tol: float = 1e-6) -> int:
    ordered = np.sort(values)
    return 1 + int(np.count_nonzero(np.diff(ordered) > tol))


class TestStableOrbit:
    def test_period_two(self, finder):
        orbit = finder.find_stable_orbit(MapFamily.logistic(3.2))
        assert orbit.p == 2
        # (r + 1 -+ sqrt((r + 1)(r - 3))) / 2r, nearest C first
        np.testing.assert_allclose(orbit.points, [0.513045, 0.799455], atol=1e-6)
        assert abs(orbit.multiplier) < 1.0

    def test_fixed_point(self, finder):
        orbit = finder.find_stable_orbit(MapFamily.logistic(2.5))
        assert orbit.p == 1
        assert orbit.points[0] == pytest.approx(0.6, abs=1e-12)

    def test_period_three_supercycle(self, finder, logistic_r3):
        orbit = finder.find_stable_orbit(logistic_r3)
        assert orbit.p == 3
        np.testing.assert_allclose(orbit.points, [0.5, 0.95796851, 0.15428980], atol=1e-8)
        assert abs(orbit.multiplier) < 1e-6

    def test_chaotic_parameter_has_no_orbit(self, finder):
        assert finder.find_stable_orbit(MapFamily.logistic(4.0)) is None

    def test_points_form_a_cycle(self, finder, logistic_r6):
        orbit = finder.find_stable_orbit(logistic_r6)
        assert orbit.p == 6
        for k, s in enumerate(orbit.points):
            assert logistic_r6(s) == pytest.approx(orbit.points[(k + 1) % 6], abs=1e-11)

    def test_non_positive_tolerance(self, finder):
        with pytest.raises(ValueError):
            finder.find_stable_orbit(MapFamily.logistic(3.2), tol_orbit=0.0)


class TestSupercycles:
    @pytest.mark.parametrize(
        "p, bracket, expected",
        [(3, (3.8, 3.87), R3), (6, (3.99, 4.0), R6), (1, (1.9, 2.1), 2.0)],
    )
    def test_supercycle_parameter(self, finder, p, bracket, expected):
        r = finder.find_supercycle_parameter(MapFamilyId.LOGISTIC, p, bracket)
        assert r == pytest.approx(expected, abs=1e-11)
        f = MapFamily.logistic(r)
        assert abs(f.iterate(0.5, p) - 0.5) <= 1e-13

    def test_family_name_is_accepted(self, finder):
        assert finder.find_supercycle_parameter("logistic", 3, (3.8, 3.87)) == pytest.approx(R3, abs=1e-11)

    def test_bad_bracket(self, finder):
        with pytest.raises(BracketError):
            finder.find_supercycle_parameter("logistic", 3, (3.0, 3.1))

    def test_divisor_period_is_rejected(self, finder):
        # the only root of f^6(C) = C here is the period-3 supercycle
        with pytest.raises(WrongPeriodError):
            finder.find_supercycle_parameter("logistic", 6, (3.82, 3.84))


class TestPartners:
    def test_fixed_points_of_second_iterate(self, finder):
        f = MapFamily.logistic(3.2)
        np.testing.assert_allclose(finder.fixed_points(f, 2), [0.0, 0.513045, 0.6875, 0.799455], atol=1e-6)

    def test_fixed_point_cache_is_bounded(self, config):
        small = OrbitFinder(merge_config(config, {"orbit": {"cache_maps": 2}, "extrema": {"cache_maps": 2}}))
        for r in (2.5, 3.2, 3.5):
            small.fixed_points(MapFamily.logistic(r), 2)
        assert len(small._fixed_points) == 2
        assert (MapFamily.logistic(2.5), 2) not in small._fixed_points
        small.clear_cache()
        assert not small._fixed_points
        assert not small.extrema_engine._tables

    def test_saddle_and_companion_period_two(self, finder):
        f = MapFamily.logistic(3.2)
        captures = finder.resolve(f)
        orbit = captures.orbit
        np.testing.assert_allclose(orbit.saddles, [0.6875, 0.6875], atol=1e-12)
        np.testing.assert_allclose(orbit.companions, [0.3125, 0.8903], atol=1e-4)
        for u in orbit.saddles:
            assert abs(f.iterate_derivative(u, 2)) > 1.0

    def test_fixed_point_partners_are_domain_ends(self, finder):
        captures = finder.resolve(MapFamily.logistic(2.5))
        assert captures.orbit.saddles[0] == pytest.approx(0.0, abs=1e-12)
        assert captures.orbit.companions[0] == pytest.approx(1.0, abs=1e-12)
        assert captures.intervals[0] == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_period_three_partners(self, captures_r3):
        orbit = captures_r3.orbit
        np.testing.assert_allclose(orbit.saddles, [0.52861525, 0.95483085, 0.16526450], atol=1e-7)
        np.testing.assert_allclose(orbit.companions, [0.47138475, 0.96098921, 0.14365293], atol=1e-7)

    def test_text_reading_preimage(self, finder):
        f = MapFamily.logistic(3.2)
        orbit = finder.resolve(f).orbit
        assert finder.companion_preimage(f, orbit, 0) == pytest.approx(0.03553, abs=1e-4)
        # f^2(x) = U_2' has no solution at all
        with pytest.raises(PartnerNotFoundError):
            finder.companion_preimage(f, orbit, 1)


class TestCaptureIntervals:
    def test_period_three_intervals(self, captures_r3):
        assert captures_r3.critical_index == 0
        assert captures_r3.critical_interval[0] < 0.5 < captures_r3.critical_interval[1]
        assert captures_r3.measure == pytest.approx(0.0850, abs=1e-4)
        for (lo, hi), s in zip(captures_r3.intervals, captures_r3.orbit.points):
            assert lo < s < hi

    def test_period_six_intervals(self, captures_r6):
        expected = [
            (0.49961499, 0.50038501),
            (0.99939519, 0.99939637),
            (0.00241160, 0.00241633),
            (0.00961731, 0.00963613),
            (0.03807625, 0.03815004),
            (0.14641728, 0.14668977),
        ]
        assert len(captures_r6.intervals) == 6
        np.testing.assert_allclose(sorted(captures_r6.intervals), sorted(expected), atol=1e-8)
        assert captures_r6.contains(0.5)

    def test_intervals_are_disjoint(self, captures_r6):
        ordered = sorted(captures_r6.intervals)
        assert all(left[1] <= right[0] for left, right in zip(ordered, ordered[1:]))

    def test_report(self, logistic_r3, captures_r3):
        report = captures_r3.to_report(logistic_r3)
        assert report["family"] == "logistic"
        assert report["p"] == 3
        assert report["points"][0] == pytest.approx(0.5, abs=1e-12)
        assert len(report["capture_intervals"]) == 3
        assert report["interval_mode"] == "figure"

    def test_repulsion_report_covers_every_interval(self, finder, logistic_r3, captures_r3):
        rows = finder.repulsion_report(logistic_r3, captures_r3)
        assert {row["i"] for row in rows} == {0, 1, 2}
        assert len(rows) == 6
        assert all(isinstance(row["converged"], bool) for row in rows)
        for row in rows:
            lo, hi = captures_r3.intervals[row["i"]]
            assert not lo < row["x"] < hi


class TestIntervalInvariants:
    @pytest.fixture(scope="class", params=[3.2, 3.5, 3.74, R3, R6])
    def resolved(self, request, finder):
        f = MapFamily.logistic(request.param)
        return f, finder.resolve(f)

    def test_forward_invariance(self, resolved):
        f, captures = resolved
        p = captures.orbit.p
        for lo, hi in captures.intervals:
            xs = np.linspace(lo, hi, 102)[1:-1]
            for _ in range(20):
                xs = f.iterate_array(xs, p)
                assert np.all((xs >= lo - 1e-12) & (xs <= hi + 1e-12))

    def test_endpoints_map_to_partners(self, resolved):
        f, captures = resolved
        orbit = captures.orbit
        for i, (lo, hi) in enumerate(captures.intervals):
            partners = (orbit.saddles[i], orbit.companions[i])
            for endpoint in (lo, hi):
                image = f.iterate(endpoint, orbit.p)
                assert min(abs(image - u) for u in partners) <= 1e-9

    @pytest.mark.parametrize("r", [3.2, 3.5, R3, R6])
    def test_critical_interval_is_symmetric(self, finder, r):
        f = MapFamily.logistic(r)
        captures = finder.resolve(f)
        p = captures.orbit.p
        lo, hi = captures.critical_interval
        # f(x) = f(1 - x), so U_i' = 1 - U_i around C
        assert lo + hi == pytest.approx(1.0, abs=1e-12)
        for x in map(float, np.linspace(lo, 0.5, 7)):
            assert f.iterate(1.0 - x, p) == pytest.approx(f.iterate(x, p), abs=1e-12)

    @pytest.mark.parametrize("r", [R3, R6])
    def test_attraction_within_two_hundred_cycles(self, finder, r):
        f = MapFamily.logistic(r)
        captures = finder.resolve(f)
        p = captures.orbit.p
        for (lo, hi), s in zip(captures.intervals, captures.orbit.points):
            xs = np.linspace(lo, hi, 102)[1:-1]
            for _ in range(200):
                xs = f.iterate_array(xs, p)
                if np.all(np.abs(xs - s) < 1e-9):
                    break
            assert np.max(np.abs(xs - s)) < 1e-9


class TestAttractorSamples:
    def test_distinct_values(self, finder):
        samples = finder.attractor_samples(MapFamily.logistic(3.0), [2.5, 3.2, R3])
        assert samples.shape == (3, 200)
        assert [_distinct(row) for row in samples] == [1, 2, 3]

    def test_tent_family(self, finder):
        samples = finder.attractor_samples(MapFamily.tent(1.5), [0.8], burn_in=200, samples=10)
        # below r = 1 every orbit falls into the fixed point 0
        np.testing.assert_allclose(samples, 0.0, atol=1e-12)
