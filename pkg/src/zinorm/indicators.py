"""Field- and time-normalized impact indicators with 95% confidence intervals.

All four indicators compare a group's per-stratum mention proportions against
the world's, where the world profile contains the group. Values are ratios:
1.0 means the group performs like the world baseline. Intervals are normal
approximations on the log scale (except MNPC, whose interval is assembled
from per-stratum log-scale intervals) using the fixed 95% quantile 1.96.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._kernels import mh_accumulate
from .errors import DegenerateComputationError, InputDataError
from .profiles import CountProfile, StratumKey

#: Normal quantile used by every interval here; fixed rather than configurable.
Z95 = 1.96


class IndicatorKind(Enum):
    EMNPC = "emnpc"
    MNPC = "mnpc"
    MHQ = "mhq"
    MHQ_PRIME = "mhq_prime"

    def __str__(self) -> str:
        return self.value


#: Rendering order for report rows.
KIND_ORDER = {kind: index for index, kind in enumerate(IndicatorKind)}


@dataclass(frozen=True)
class IndicatorResult:
    """A computed indicator value with its 95% confidence interval.

    Invariants are checked on construction: the value and both bounds are
    finite and positive, the bounds bracket the value, and at least one
    stratum contributed.
    """

    kind: IndicatorKind
    value: float
    ci_lower: float
    ci_upper: float
    strata_used: int
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        for name in ("value", "ci_lower", "ci_upper"):
            x = getattr(self, name)
            if not math.isfinite(x) or x <= 0:
                raise DegenerateComputationError(
                    f"{self.kind} {name} is not a positive finite number: {x!r}"
                )
        if not (self.ci_lower <= self.value <= self.ci_upper):
            raise DegenerateComputationError(
                f"{self.kind} interval [{self.ci_lower}, {self.ci_upper}] "
                f"does not bracket the value {self.value}"
            )
        if self.strata_used < 1:
            raise DegenerateComputationError(
                f"{self.kind} computed from no strata"
            )

    @property
    def percent_vs_world(self) -> float:
        return percent_vs_world(self.value)


def percent_vs_world(value: float) -> float:
    """Express a ratio indicator as a percentage difference from the world."""
    if not math.isfinite(value) or value <= 0:
        raise DegenerateComputationError(
            f"cannot express {value!r} as a percentage of the world baseline"
        )
    return 100.0 * (value - 1.0)


def pooled_proportion(profile: CountProfile) -> float:
    """Mentioned share of all papers in the profile, pooled across strata."""
    total = profile.total_papers
    if total == 0:
        raise DegenerateComputationError(
            f"profile {profile.label!r} has no papers"
        )
    return profile.total_mentioned / total


def equalized_proportion(profile: CountProfile) -> float:
    """Unweighted mean of per-stratum mentioned proportions.

    Each stratum counts equally regardless of size, so large strata cannot
    dominate the average.
    """
    if len(profile) == 0:
        raise DegenerateComputationError(
            f"profile {profile.label!r} has no strata"
        )
    return sum(cell.proportion_mentioned for _, cell in profile.items()) / len(profile)


def _require_subset(group: CountProfile, world: CountProfile) -> None:
    missing = [k for k in group.strata() if k not in world]
    if missing:
        raise InputDataError(
            f"group {group.label!r} has strata absent from the world profile: "
            + ", ".join(str(k) for k in missing)
        )
    if len(group) == 0:
        raise DegenerateComputationError(
            f"group {group.label!r} has no strata"
        )


def _cell_arrays(
    group: CountProfile, world: CountProfile
) -> tuple[list[StratumKey], np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Group and world cells over the group's strata, dominance-checked."""
    keys = list(group.strata())
    a = np.empty(len(keys))
    b = np.empty(len(keys))
    c = np.empty(len(keys))
    d = np.empty(len(keys))
    for i, key in enumerate(keys):
        g = group[key]
        w = world[key]
        if g.mentioned > w.mentioned or g.not_mentioned > w.not_mentioned:
            raise InputDataError(
                f"stratum {key}: group {group.label!r} counts exceed the "
                "world counts; the world must contain the group"
            )
        a[i] = g.mentioned
        b[i] = g.not_mentioned
        c[i] = w.mentioned
        d[i] = w.not_mentioned
    return keys, a, b, c, d


def emnpc(
    group: CountProfile,
    world: CountProfile,
    *,
    world_strata: str = "all",
) -> IndicatorResult:
    """Equalized mean normalized proportion cited/mentioned.

    The group's stratum-equalized mentioned proportion divided by the
    world's. The world average runs over all world strata by default;
    pass ``world_strata="group"`` to average only over the strata where
    the group publishes.

    Raises
    ------
    DegenerateComputationError
        If either equalized proportion is zero (the log-scale interval
        is undefined); continuity-correct the profiles first.
    """
    if world_strata not in ("all", "group"):
        raise InputDataError(
            f"world_strata must be 'all' or 'group', got {world_strata!r}"
        )
    _require_subset(group, world)

    world_for_baseline = (
        world if world_strata == "all" else world.restrict(group.strata())
    )
    p_g = equalized_proportion(group)
    p_w = equalized_proportion(world_for_baseline)
    if p_g == 0 or p_w == 0:
        raise DegenerateComputationError(
            "equalized proportion is zero for "
            f"{group.label!r} vs world ({p_g:g} / {p_w:g}); apply a "
            "continuity correction or drop the empty strata"
        )
    n_g = group.total_papers
    n_w = world_for_baseline.total_papers
    half_width = Z95 * math.sqrt(
        ((1.0 - p_g) / p_g) / n_g + ((1.0 - p_w) / p_w) / n_w
    )
    value = p_g / p_w
    notes = [
        "interval width combines stratum-equalized proportions with pooled "
        "paper totals"
    ]
    if world_strata == "group":
        notes.append("world baseline averaged over the group's strata only")
    return IndicatorResult(
        kind=IndicatorKind.EMNPC,
        value=value,
        ci_lower=value * math.exp(-half_width),
        ci_upper=value * math.exp(half_width),
        strata_used=len(group),
        notes=tuple(notes),
    )


def mnpc(group: CountProfile, world: CountProfile) -> IndicatorResult:
    """Mean normalized proportion cited/mentioned.

    Equivalent formulations: the size-weighted mean over the group's strata
    of (group proportion / world proportion), or the per-paper mean where a
    mentioned paper scores 1 over its stratum's world proportion and an
    unmentioned paper scores 0.

    The interval combines per-stratum log-scale ratio intervals: the bound
    offsets are the size-weighted sums of the per-stratum offsets, which
    keeps the lower bound positive.

    Raises
    ------
    DegenerateComputationError
        If any stratum has a zero group or world mentioned cell; apply a
        continuity correction (or drop such strata) first.
    """
    _require_subset(group, world)
    keys, a, b, c, d = _cell_arrays(group, world)

    n_gf = a + b
    n_wf = c + d
    n_g = float(n_gf.sum())
    if n_g == 0:
        raise DegenerateComputationError(
            f"group {group.label!r} has no papers"
        )
    p_gf = a / n_gf
    p_wf = c / n_wf
    for i, key in enumerate(keys):
        if p_wf[i] == 0:
            raise DegenerateComputationError(
                f"stratum {key}: world has no mentioned papers; apply a "
                "continuity correction or drop the stratum"
            )
        if p_gf[i] == 0:
            raise DegenerateComputationError(
                f"stratum {key}: group {group.label!r} has no mentioned "
                "papers; apply a continuity correction"
            )

    weights = n_gf / n_g
    ratio = p_gf / p_wf
    half_width = Z95 * np.sqrt(
        ((1.0 - p_gf) / p_gf) / n_gf + ((1.0 - p_wf) / p_wf) / n_wf
    )
    lower_f = ratio * np.exp(-half_width)
    upper_f = ratio * np.exp(half_width)

    value = float(np.sum(weights * ratio))
    lower = value - float(np.sum(weights * (ratio - lower_f)))
    upper = value + float(np.sum(weights * (upper_f - ratio)))
    return IndicatorResult(
        kind=IndicatorKind.MNPC,
        value=value,
        ci_lower=lower,
        ci_upper=upper,
        strata_used=len(keys),
    )


def _mh_from_cells(
    kind: IndicatorKind,
    label: str,
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    d: np.ndarray,
    notes: list[str],
) -> IndicatorResult:
    r, s, pr, cross, qs, contributing = mh_accumulate(a, b, c, d)
    if r == 0 or s == 0:
        side = "numerator" if r == 0 else "denominator"
        raise DegenerateComputationError(
            f"{kind} for {label!r}: pooled {side} is zero; the quotient "
            "is undefined"
        )
    skipped = len(a) - contributing
    if skipped:
        notes.append(
            f"{skipped} stratum(s) with empty numerator and denominator "
            "contributed nothing"
        )
    variance = 0.5 * (pr / r**2 + cross / (r * s) + qs / s**2)
    half_width = Z95 * math.sqrt(variance)
    value = r / s
    return IndicatorResult(
        kind=kind,
        value=value,
        ci_lower=value * math.exp(-half_width),
        ci_upper=value * math.exp(half_width),
        strata_used=contributing,
        notes=tuple(notes),
    )


def mhq(group: CountProfile, world: CountProfile) -> IndicatorResult:
    """Mantel-Haenszel quotient of the group against the whole world.

    Pools per-stratum 2x2 tables (group row vs world row) into a single
    odds-ratio-style quotient; the interval uses the robust log-scale
    variance estimator for sparse pooled tables. Strata where both the
    pooled numerator and denominator terms vanish contribute nothing.

    Raises
    ------
    InputDataError
        If any group cell exceeds its world cell.
    DegenerateComputationError
        If the pooled numerator or denominator is zero.
    """
    _require_subset(group, world)
    _, a, b, c, d = _cell_arrays(group, world)
    return _mh_from_cells(IndicatorKind.MHQ, group.label, a, b, c, d, [])


def mhq_prime(group: CountProfile, world: CountProfile) -> IndicatorResult:
    """Mantel-Haenszel quotient against the world excluding the group.

    Identical to `mhq` except the comparison row is the world minus the
    group's own papers, so a group is never compared against itself.
    Strata where the group is the entire world have an empty comparison
    row and are skipped with a note.

    Raises
    ------
    DegenerateComputationError
        If the group covers the whole world in every stratum, or the
        pooled numerator or denominator is zero.
    """
    _require_subset(group, world)
    keys, a, b, c, d = _cell_arrays(group, world)
    c_prime = c - a
    d_prime = d - b
    keep = (c_prime + d_prime) > 0
    notes: list[str] = []
    dropped = int((~keep).sum())
    if dropped:
        skipped_keys = [str(k) for k, used in zip(keys, keep) if not used]
        notes.append(
            f"skipped {dropped} stratum(s) where the group is the entire "
            "world: " + ", ".join(skipped_keys)
        )
    if not keep.any():
        raise DegenerateComputationError(
            f"group {group.label!r} is the entire world in every stratum; "
            "nothing remains to compare against"
        )
    return _mh_from_cells(
        IndicatorKind.MHQ_PRIME,
        group.label,
        a[keep],
        b[keep],
        c_prime[keep],
        d_prime[keep],
        notes,
    )
