"""Chance-corrected inter-annotator agreement.

Krippendorff's alpha is computed from the coincidence matrix:
``alpha = 1 - D_o / D_e`` where observed disagreement weights each unit's
ordered value pairs by ``1 / (m_u - 1)`` and expected disagreement pairs
every value with every other across units.  Works with any distance over
hashable labels; MASI serves multi-label (set-valued) annotations.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Hashable, Sequence

from qudparse.core import QudParseError

Distance = Callable[[Hashable, Hashable], float]


class AgreementError(QudParseError):
    """Agreement is undefined for the given data."""


def nominal_distance(a: Hashable, b: Hashable) -> float:
    return 0.0 if a == b else 1.0


def masi_distance(a, b) -> float:
    """Set-comparison distance: 1 - Jaccard * monotonicity.

    The monotonicity coefficient is 1 for identical sets, 2/3 when one
    strictly contains the other, 1/3 for overlap without containment, and
    0 for disjoint sets.  Two empty sets count as identical (distance 0).
    """
    a, b = frozenset(a), frozenset(b)
    if a == b:
        return 0.0
    union = a | b
    jaccard = len(a & b) / len(union)
    if a < b or b < a:
        monotonicity = 2 / 3
    elif a & b:
        monotonicity = 1 / 3
    else:
        monotonicity = 0.0
    return 1.0 - jaccard * monotonicity


def _as_set(value) -> frozenset:
    if isinstance(value, frozenset):
        return value
    if isinstance(value, (set, tuple, list)):
        return frozenset(value)
    return frozenset([value])


def _resolve(distance: "str | Distance") -> tuple[Distance, bool]:
    if callable(distance):
        return distance, False
    if distance == "nominal":
        return nominal_distance, False
    if distance == "masi":
        return masi_distance, True
    raise ValueError(f"unknown distance {distance!r}; use 'nominal', 'masi', or a callable")


def krippendorff_alpha(
    matrix: Sequence[Sequence], distance: "str | Distance" = "nominal"
) -> float:
    """Alpha over an items x judges matrix; ``None`` marks a missing cell.

    With ``distance="masi"`` cell values are treated as label sets (bare
    labels become singletons).  Raises :class:`AgreementError` when fewer
    than two pairable values exist.
    """
    metric, coerce_sets = _resolve(distance)
    units: list[list[Hashable]] = []
    for row in matrix:
        values = [v for v in row if v is not None]
        if coerce_sets:
            values = [_as_set(v) for v in values]
        if len(values) >= 2:
            units.append(values)
    n = sum(len(u) for u in units)
    if n < 2:
        raise AgreementError("no pairable values: need >= 2 values in >= 1 unit")

    coincidence: Counter[tuple[Hashable, Hashable]] = Counter()
    totals: Counter[Hashable] = Counter()
    for unit in units:
        m = len(unit)
        for v in unit:
            totals[v] += 1
        weight = 1.0 / (m - 1)
        counts = Counter(unit)
        for c, times_c in counts.items():
            for k, times_k in counts.items():
                pairs = times_c * times_k - (times_c if c == k else 0)
                if pairs:
                    coincidence[(c, k)] += pairs * weight

    observed = sum(weight * metric(c, k) for (c, k), weight in coincidence.items()) / n
    expected = sum(
        totals[c] * totals[k] * metric(c, k)
        for c in totals
        for k in totals
        if c != k
    ) / (n * (n - 1))
    if expected == 0.0:
        return 1.0
    return 1.0 - observed / expected
