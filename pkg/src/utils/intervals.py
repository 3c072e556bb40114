"""
Interval helpers: merging, measure and symmetric difference of unions of intervals
"""
import math
from typing import Iterable, List, Sequence, Tuple

Interval = Tuple[float, float]


def merge_intervals(intervals: Iterable[Interval], tol: float = 0.0) -> List[Interval]:
    """
    Merge overlapping or touching intervals into maximal disjoint ones

    Args:
        intervals: Iterable of (lo, hi) pairs, in any order
        tol: Gaps no larger than this are closed

    Returns:
        Sorted list of disjoint (lo, hi) pairs
    """
    ordered = sorted((float(lo), float(hi)) for lo, hi in intervals if hi > lo)
    merged: List[Interval] = []
    for lo, hi in ordered:
        if merged and lo <= merged[-1][1] + tol:
            prev_lo, prev_hi = merged[-1]
            merged[-1] = (prev_lo, max(prev_hi, hi))
        else:
            merged.append((lo, hi))
    return merged


def total_length(intervals: Iterable[Interval]) -> float:
    """Sum of lengths with compensated summation"""
    return math.fsum(hi - lo for lo, hi in intervals)


def intersection_length(first: Sequence[Interval], second: Sequence[Interval]) -> float:
    """
    Measure of the intersection of two unions of intervals

    Both arguments must already be sorted and disjoint (output of merge_intervals).
    """
    pieces = []
    i = j = 0
    while i < len(first) and j < len(second):
        lo = max(first[i][0], second[j][0])
        hi = min(first[i][1], second[j][1])
        if hi > lo:
            pieces.append(hi - lo)
        if first[i][1] < second[j][1]:
            i += 1
        else:
            j += 1
    return math.fsum(pieces)


def symmetric_difference_length(first: Sequence[Interval], second: Sequence[Interval]) -> float:
    """Measure of the symmetric difference of two merged unions of intervals"""
    a = merge_intervals(first)
    b = merge_intervals(second)
    return max(0.0, total_length(a) + total_length(b) - 2.0 * intersection_length(a, b))
