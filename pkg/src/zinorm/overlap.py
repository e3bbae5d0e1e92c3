"""Significance-by-eye classification of two confidence intervals.

Two independent 95% intervals are compared by how much they overlap
relative to their facing arms. The mapping to approximate p-values
follows the standard interval-inference rules of thumb: a clear gap
means p < .01, just-touching means p is near .01, overlap up to half
the average arm means p < .05, and more overlap than that is read as
not significant.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateComputationError
from .indicators import IndicatorResult

#: Overlaps within this absolute tolerance of zero count as touching.
TOUCH_TOLERANCE = 1e-9

#: Facing arms differing by more than this factor trigger the caveat flag.
ARM_RATIO_LIMIT = 2.0


class OverlapCategory(Enum):
    GAP = "gap"
    TOUCH = "touch"
    MODERATE = "moderate"
    SUBSTANTIAL = "substantial"

    def __str__(self) -> str:
        return self.value

    @property
    def p_label(self) -> str:
        return _P_LABELS[self]


_P_LABELS = {
    OverlapCategory.GAP: "p < .01",
    OverlapCategory.TOUCH: "p ≈ .01",
    OverlapCategory.MODERATE: "p < .05",
    OverlapCategory.SUBSTANTIAL: "not significant",
}


@dataclass(frozen=True)
class OverlapVerdict:
    """Outcome of comparing two intervals.

    `overlap_proportion` is the signed overlap of the two intervals divided
    by the mean of the two facing arms; negative values mean a gap.
    `caveat` flags arm lengths too unequal for the rule of thumb to be
    trusted.
    """

    category: OverlapCategory
    overlap_proportion: float
    arm_ratio: float
    caveat: bool

    @property
    def p_label(self) -> str:
        return self.category.p_label


def classify_overlap(a: IndicatorResult, b: IndicatorResult) -> OverlapVerdict:
    """Classify the overlap between two results' confidence intervals.

    The comparison is symmetric: the lower-valued result's upper arm faces
    the higher-valued result's lower arm. When one interval contains the
    other, the overlap is the contained interval's full length, which always
    classifies as substantial.

    Raises
    ------
    DegenerateComputationError
        If either facing arm has zero length.
    """
    lo, hi = sorted(
        (a, b), key=lambda r: (r.value, r.ci_lower, r.ci_upper)
    )
    arm_lo = lo.ci_upper - lo.value
    arm_hi = hi.value - hi.ci_lower
    if arm_lo <= 0 or arm_hi <= 0:
        raise DegenerateComputationError(
            "cannot classify overlap: a confidence arm has zero length"
        )
    overlap = min(lo.ci_upper, hi.ci_upper) - max(lo.ci_lower, hi.ci_lower)
    mean_arm = 0.5 * (arm_lo + arm_hi)
    proportion = overlap / mean_arm
    ratio = max(arm_lo, arm_hi) / min(arm_lo, arm_hi)

    if overlap < -TOUCH_TOLERANCE:
        category = OverlapCategory.GAP
    elif overlap <= TOUCH_TOLERANCE:
        category = OverlapCategory.TOUCH
    elif proportion <= 0.5:
        category = OverlapCategory.MODERATE
    else:
        category = OverlapCategory.SUBSTANTIAL
    return OverlapVerdict(
        category=category,
        overlap_proportion=proportion,
        arm_ratio=ratio,
        caveat=ratio > ARM_RATIO_LIMIT,
    )
