"""Synthetic zero-inflated worlds with known ground truth.

A `WorldSpec` defines strata (field, year, world size, world mention
probability) and groups whose mention odds are the world's odds scaled by a
multiplier theta; the world is the union of the groups plus background
papers at the base probability. Odds scaling (a logit shift) rather than
probability scaling keeps the group-vs-background odds ratio exactly theta
and can never push a probability past 1.

Randomness comes from numpy's PCG64 generator. Replications of the coverage
experiment are independent: replication i draws from a generator seeded by
(master seed, spawn key i), so any subset of replications is reproducible.

Ground truths for the coverage experiment are the indicator functionals
evaluated on the expected cell counts, computed analytically from the spec.
Because the world contains its groups, the Mantel-Haenszel quotient's
estimand is theta diluted by the group's share of the world; using the
analytic value keeps coverage a pure test of CI calibration.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._kernels import mh_batch
from .errors import DegenerateComputationError, InputDataError
from .indicators import (
    Z95,
    IndicatorKind,
    emnpc,
    mhq,
    mhq_prime,
    mnpc,
)
from .profiles import (
    WORLD_LABEL,
    CellCounts,
    CountProfile,
    FilterConfig,
    PublicationRecord,
    StratumKey,
    apply_filters,
    build_profiles,
)
from .report import build_comparisons, compute_rows, result_payload

logger = logging.getLogger(__name__)

#: Group labels that would collide with generated paper-id prefixes.
RESERVED_LABELS = (WORLD_LABEL, "bg")

_VALIDITY_KINDS = (IndicatorKind.EMNPC, IndicatorKind.MNPC, IndicatorKind.MHQ)


class QualityLabel(Enum):
    Q0 = "Q0"
    Q1 = "Q1"
    Q2 = "Q2"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class QualityGroup:
    """A paper's peer-recommendation bucket with its mean score."""

    label: QualityLabel
    ffa: float


def ffa_group(scores: Sequence[int]) -> QualityGroup:
    """Bucket a paper by the mean of its recommendation scores.

    No scores means never recommended (Q0). A mean up to 1.0 inclusive is
    Q1, anything above is Q2. Scores outside {1, 2, 3} are rejected.
    """
    for score in scores:
        if not isinstance(score, int) or score not in (1, 2, 3):
            raise InputDataError(
                f"recommendation score {score!r} is not in {{1, 2, 3}}"
            )
    if not scores:
        return QualityGroup(QualityLabel.Q0, 0.0)
    ffa = sum(scores) / len(scores)
    label = QualityLabel.Q1 if ffa <= 1.0 else QualityLabel.Q2
    return QualityGroup(label, ffa)


def group_probability(world_probability: float, theta: float) -> float:
    """Scale a world mention probability's odds by theta.

    Raises
    ------
    InputDataError
        If the inputs are out of range or the scaled probability leaves
        [0, 1] (impossible for finite positive theta, but checked).
    """
    if not (0.0 <= world_probability <= 1.0):
        raise InputDataError(
            f"world probability {world_probability!r} outside [0, 1]"
        )
    if not (math.isfinite(theta) and theta > 0):
        raise InputDataError(f"theta must be positive and finite, got {theta!r}")
    if theta == 1.0 or world_probability == 1.0:
        return world_probability
    odds = theta * world_probability / (1.0 - world_probability)
    q = odds / (1.0 + odds)
    if not (0.0 <= q <= 1.0):
        raise InputDataError(
            f"scaled probability {q!r} outside [0, 1] for theta {theta}"
        )
    return q


def _require_int(value: object, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputDataError(f"{what} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class StratumSpec:
    key: StratumKey
    world_size: int
    mention_probability: float

    def __post_init__(self) -> None:
        if self.world_size < 1:
            raise InputDataError(
                f"stratum {self.key}: world_size must be at least 1"
            )
        if not (0.0 <= self.mention_probability <= 1.0):
            raise InputDataError(
                f"stratum {self.key}: mention_probability outside [0, 1]"
            )


@dataclass(frozen=True)
class GroupSpec:
    label: str
    sizes: tuple[int, ...]
    theta: float

    def __post_init__(self) -> None:
        if not self.label or self.label in RESERVED_LABELS or ":" in self.label:
            raise InputDataError(
                f"group label {self.label!r} is empty, reserved, or contains ':'"
            )
        if any(size < 0 for size in self.sizes):
            raise InputDataError(f"group {self.label!r} has a negative size")
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise InputDataError(
                f"group {self.label!r}: theta must be positive and finite"
            )


@dataclass(frozen=True)
class WorldSpec:
    """A synthetic world: strata, groups with odds multipliers, a seed."""

    seed: int
    strata: tuple[StratumSpec, ...]
    groups: tuple[GroupSpec, ...]

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise InputDataError("seed must be an integer")
        if not (0 <= self.seed < 2**64):
            raise InputDataError("seed must fit in 64 unsigned bits")
        if not self.strata:
            raise InputDataError("spec defines no strata")
        keys = [s.key for s in self.strata]
        if len(set(keys)) != len(keys):
            raise InputDataError("spec has duplicate strata")
        labels = [g.label for g in self.groups]
        if len(set(labels)) != len(labels):
            raise InputDataError("spec has duplicate group labels")
        for group in self.groups:
            if len(group.sizes) != len(self.strata):
                raise InputDataError(
                    f"group {group.label!r} has {len(group.sizes)} sizes "
                    f"for {len(self.strata)} strata"
                )
        for index, stratum in enumerate(self.strata):
            allocated = sum(g.sizes[index] for g in self.groups)
            if allocated > stratum.world_size:
                raise InputDataError(
                    f"stratum {stratum.key}: group sizes sum to {allocated}, "
                    f"exceeding world_size {stratum.world_size}"
                )

    @classmethod
    def from_dict(cls, raw: Mapping) -> "WorldSpec":
        try:
            seed = _require_int(raw["seed"], "seed")
            strata_raw = raw["strata"]
            groups_raw = raw.get("groups", [])
        except KeyError as exc:
            raise InputDataError(f"spec is missing key {exc.args[0]!r}") from None
        strata = []
        for item in strata_raw:
            strata.append(
                StratumSpec(
                    key=StratumKey(
                        str(item["field_id"]),
                        _require_int(item["year"], "year"),
                    ),
                    world_size=_require_int(item["world_size"], "world_size"),
                    mention_probability=float(item["mention_probability"]),
                )
            )
        groups = []
        for item in groups_raw:
            sizes = item["sizes"]
            if isinstance(sizes, list):
                sizes = tuple(_require_int(s, "group size") for s in sizes)
            else:
                sizes = (_require_int(sizes, "group size"),) * len(strata)
            groups.append(
                GroupSpec(
                    label=str(item["label"]),
                    sizes=sizes,
                    theta=float(item["theta"]),
                )
            )
        return cls(seed=seed, strata=tuple(strata), groups=tuple(groups))

    @classmethod
    def from_json(cls, path: Path | str) -> "WorldSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise InputDataError(f"cannot read spec: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputDataError(f"spec is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def background_sizes(self) -> tuple[int, ...]:
        return tuple(
            stratum.world_size - sum(g.sizes[i] for g in self.groups)
            for i, stratum in enumerate(self.strata)
        )

    def group_probabilities(self, group: GroupSpec) -> tuple[float, ...]:
        return tuple(
            group_probability(s.mention_probability, group.theta)
            for s in self.strata
        )


def generate_synthetic(
    spec: WorldSpec, *, seed: int | None = None
) -> tuple[list[PublicationRecord], list[tuple[str, str]]]:
    """Draw one synthetic world; identical seeds give identical output.

    Per paper, mentioned-or-not comes from a Bernoulli draw at the group's
    odds-scaled probability (background papers use the world probability);
    mentioned papers get a positive mention count, unmentioned papers 0.
    Paper ids encode group, stratum, and index, so output order and bytes
    are deterministic.
    """
    master = spec.seed if seed is None else seed
    rng = np.random.default_rng(master)
    records: list[PublicationRecord] = []
    pairs: list[tuple[str, str]] = []
    background = spec.background_sizes()
    for i, stratum in enumerate(spec.strata):
        key = stratum.key
        for group in spec.groups:
            size = group.sizes[i]
            if size == 0:
                continue
            q = group_probability(stratum.mention_probability, group.theta)
            hits = rng.binomial(1, q, size=size)
            extra = rng.poisson(1.0, size=size)
            for j in range(size):
                paper_id = f"{group.label}:{key.field_id}:{key.year}:{j:05d}"
                mentions = int(hits[j] * (1 + extra[j]))
                records.append(
                    PublicationRecord(paper_id, key.field_id, key.year, mentions)
                )
                pairs.append((paper_id, group.label))
        if background[i] > 0:
            hits = rng.binomial(1, stratum.mention_probability, size=background[i])
            extra = rng.poisson(1.0, size=background[i])
            for j in range(background[i]):
                paper_id = f"bg:{key.field_id}:{key.year}:{j:05d}"
                mentions = int(hits[j] * (1 + extra[j]))
                records.append(
                    PublicationRecord(paper_id, key.field_id, key.year, mentions)
                )
    return records, pairs


def write_synthetic(
    records: Sequence[PublicationRecord],
    pairs: Sequence[tuple[str, str]],
    out_dir: Path | str,
) -> tuple[Path, Path]:
    """Write publications.csv and membership.csv in the ingestion format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pub_path = out / "publications.csv"
    mem_path = out / "membership.csv"
    with open(pub_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("paper_id,field_id,year,mentions\n")
        for rec in records:
            fh.write(f"{rec.paper_id},{rec.field_id},{rec.year},{rec.mentions}\n")
    with open(mem_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("paper_id,group_id\n")
        for paper_id, group_id in pairs:
            fh.write(f"{paper_id},{group_id}\n")
    return pub_path, mem_path


def expected_profiles(
    spec: WorldSpec,
) -> tuple[CountProfile, dict[str, CountProfile]]:
    """Expected (non-integer) cell counts implied by the spec.

    World cells accumulate the group cells term by term, so the world
    dominates every group cell exactly even in floating point.
    """
    world_cells: dict[StratumKey, CellCounts] = {}
    group_cells: dict[str, dict[StratumKey, CellCounts]] = {
        g.label: {} for g in spec.groups
    }
    background = spec.background_sizes()
    for i, stratum in enumerate(spec.strata):
        mentioned = background[i] * stratum.mention_probability
        unmentioned = background[i] * (1.0 - stratum.mention_probability)
        for group in spec.groups:
            size = group.sizes[i]
            if size == 0:
                continue
            q = group_probability(stratum.mention_probability, group.theta)
            cell = CellCounts(size * q, size * (1.0 - q))
            group_cells[group.label][stratum.key] = cell
            mentioned += cell.mentioned
            unmentioned += cell.not_mentioned
        world_cells[stratum.key] = CellCounts(mentioned, unmentioned)
    world = CountProfile(WORLD_LABEL, world_cells)
    groups = {
        label: CountProfile(label, cells)
        for label, cells in group_cells.items()
        if cells
    }
    return world, groups


_TRUTH_FUNCTIONS = {
    IndicatorKind.EMNPC: emnpc,
    IndicatorKind.MNPC: mnpc,
    IndicatorKind.MHQ: mhq,
    IndicatorKind.MHQ_PRIME: mhq_prime,
}


def true_indicator_values(
    spec: WorldSpec,
    kinds: Sequence[IndicatorKind] = tuple(IndicatorKind),
) -> dict[str, dict[str, float]]:
    """Analytic plug-in truths: indicators evaluated on expected counts."""
    world, groups = expected_profiles(spec)
    truths: dict[str, dict[str, float]] = {}
    for label in sorted(groups):
        profile = groups[label]
        truths[label] = {
            str(kind): _TRUTH_FUNCTIONS[kind](profile, world).value
            for kind in kinds
        }
    return truths


def _replication_draws(
    spec: WorldSpec, replications: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mentioned-count draws: per-group (G, reps, strata) and world (reps, strata)."""
    n_strata = len(spec.strata)
    n_groups = len(spec.groups)
    sizes = np.array(
        [g.sizes for g in spec.groups], dtype=np.int64
    ).reshape(n_groups, n_strata)
    probs = np.array(
        [spec.group_probabilities(g) for g in spec.groups]
    ).reshape(n_groups, n_strata)
    background = np.array(spec.background_sizes(), dtype=np.int64)
    base_p = np.array([s.mention_probability for s in spec.strata])

    group_draws = np.empty((n_groups, replications, n_strata))
    world_draws = np.empty((replications, n_strata))
    for i in range(replications):
        rng = np.random.default_rng(
            np.random.SeedSequence(spec.seed, spawn_key=(i,))
        )
        total = np.zeros(n_strata)
        for g in range(n_groups):
            draws = rng.binomial(sizes[g], probs[g])
            group_draws[g, i] = draws
            total += draws
        world_draws[i] = total + rng.binomial(background, base_p)
    return group_draws, world_draws


def _mask_bounds(value, half_width, degenerate):
    lower = np.where(degenerate, np.nan, value * np.exp(-half_width))
    upper = np.where(degenerate, np.nan, value * np.exp(half_width))
    return lower, upper


def _batch_emnpc(a, m, c, n):
    """EMNPC per replication; a, c are (reps, strata) mentioned counts."""
    group_mask = m > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p_g = (a[:, group_mask] / m[group_mask]).mean(axis=1)
        p_w = (c / n).mean(axis=1)
        degenerate = (p_g == 0) | (p_w == 0)
        n_g = m[group_mask].sum()
        n_w = n.sum()
        half = Z95 * np.sqrt(
            ((1.0 - p_g) / p_g) / n_g + ((1.0 - p_w) / p_w) / n_w
        )
        value = np.where(degenerate, np.nan, p_g / p_w)
        lower, upper = _mask_bounds(value, half, degenerate)
    return value, lower, upper, degenerate


def _batch_mnpc(a, m, c, n, present_per_stratum):
    """Continuity-corrected MNPC per replication.

    Empty mentioned cells receive the same corrections the scalar path
    applies: a zero world cell gains 0.5 per present group (at least one)
    with the matching total increase, and a zero group cell gains 0.5
    mentioned and 0.5 not-mentioned.
    """
    group_mask = m > 0
    k = np.maximum(1, present_per_stratum)

    world_zero = c == 0
    c_corr = np.where(world_zero, 0.5 * k, c)
    n_corr = np.where(world_zero, n + k, n)

    a_g = a[:, group_mask]
    m_g = m[group_mask]
    group_zero = a_g == 0
    a_corr = np.where(group_zero, 0.5, a_g)
    m_corr = np.where(group_zero, m_g + 1, m_g)

    p_w = c_corr[:, group_mask] / n_corr[:, group_mask]
    p_g = a_corr / m_corr
    n_g = m_corr.sum(axis=1, keepdims=True)
    weights = m_corr / n_g
    ratio = p_g / p_w
    half = Z95 * np.sqrt(
        ((1.0 - p_g) / p_g) / m_corr + ((1.0 - p_w) / p_w) / n_corr[:, group_mask]
    )
    lower_f = ratio * np.exp(-half)
    upper_f = ratio * np.exp(half)
    value = (weights * ratio).sum(axis=1)
    lower = value - (weights * (ratio - lower_f)).sum(axis=1)
    upper = value + (weights * (upper_f - ratio)).sum(axis=1)
    degenerate = np.zeros(value.shape, dtype=bool)
    return value, lower, upper, degenerate


def _batch_mhq(a, m, c, n):
    """Mantel-Haenszel quotient per replication on raw draws."""
    group_mask = m > 0
    a_g = a[:, group_mask]
    b_g = m[group_mask] - a_g
    c_g = c[:, group_mask]
    d_g = n[group_mask] - c_g
    r, s, pr, cross, qs, _ = mh_batch(a_g, b_g, c_g, d_g)
    degenerate = (r == 0) | (s == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(degenerate, np.nan, r / s)
        variance = 0.5 * (pr / r**2 + cross / (r * s) + qs / s**2)
        half = Z95 * np.sqrt(variance)
        lower, upper = _mask_bounds(value, half, degenerate)
    return value, lower, upper, degenerate


def coverage_experiment(
    spec: WorldSpec, replications: int, nominal: float = 0.95
) -> dict:
    """Estimate CI coverage for EMNPC, MNPC, and MHq under the spec.

    Each replication redraws every group and the background from the spec's
    probabilities; a replication's CI covers when it contains the analytic
    truth. Replications where an indicator is degenerate (a zero pooled
    numerator or denominator, or a zero equalized proportion) are excluded
    from that indicator's coverage and reported in the ``degenerate``
    count. MNPC runs on continuity-corrected draws, EMNPC and MHq on raw
    draws, matching the reporting pipeline.

    Only the 0.95 nominal level is supported; the interval constructions
    fix the matching normal quantile.
    """
    if nominal != 0.95:
        raise InputDataError(
            f"only the 0.95 nominal level is supported, got {nominal!r}"
        )
    if replications < 100:
        raise InputDataError(
            f"at least 100 replications are required, got {replications}"
        )
    if not spec.groups:
        raise InputDataError("coverage requires at least one group")

    truths = true_indicator_values(spec, _VALIDITY_KINDS)
    group_draws, world_draws = _replication_draws(spec, replications)
    n = np.array([s.world_size for s in spec.strata], dtype=np.float64)
    present = np.array(
        [sum(1 for g in spec.groups if g.sizes[i] > 0) for i in range(len(spec.strata))],
        dtype=np.int64,
    )

    out_groups: dict[str, dict] = {}
    for g, group in enumerate(spec.groups):
        m = np.array(group.sizes, dtype=np.float64)
        if not m.any():
            continue
        a = group_draws[g]
        cells = {}
        batches = {
            IndicatorKind.EMNPC: _batch_emnpc(a, m, world_draws, n),
            IndicatorKind.MNPC: _batch_mnpc(a, m, world_draws, n, present),
            IndicatorKind.MHQ: _batch_mhq(a, m, world_draws, n),
        }
        for kind, (value, lower, upper, degenerate) in batches.items():
            truth = truths[group.label][str(kind)]
            usable = ~degenerate
            covered = int(
                ((lower[usable] <= truth) & (truth <= upper[usable])).sum()
            )
            used = int(usable.sum())
            cells[str(kind)] = {
                "truth": truth,
                "coverage": covered / used if used else float("nan"),
                "covered": covered,
                "used": used,
                "degenerate": int(degenerate.sum()),
            }
        out_groups[group.label] = cells

    return {
        "nominal": nominal,
        "replications": replications,
        "seed": spec.seed,
        "groups": out_groups,
    }


def convergent_validity_run(spec: WorldSpec) -> dict:
    """Generate one world and report EMNPC, MNPC, and MHq per year.

    Each synthetic year runs through the same filter-and-compute pipeline
    as CSV reports, and adjacent groups (in spec order) are compared with
    interval-overlap verdicts. Section shapes match `run_report`'s JSON.
    """
    if not spec.groups:
        raise InputDataError("validity run requires at least one group")
    records, pairs = generate_synthetic(spec)
    world, groups = build_profiles(records, pairs)
    adjacent = [
        (spec.groups[i].label, spec.groups[i + 1].label)
        for i in range(len(spec.groups) - 1)
    ]

    years_out: dict[str, dict] = {}
    all_notes: list[str] = []
    for year in sorted({key.year for key in world.strata()}):
        year_keys = [key for key in world.strata() if key.year == year]
        world_y = world.restrict(year_keys)
        groups_y = {
            label: profile.restrict(year_keys)
            for label, profile in groups.items()
        }
        groups_y = {
            label: profile
            for label, profile in groups_y.items()
            if len(profile) > 0
        }
        filtered = apply_filters(world_y, groups_y, FilterConfig())
        active = {
            label: profile
            for label, profile in filtered.groups.items()
            if len(profile) > 0
        }
        rows, notes = compute_rows(filtered.world, active, _VALIDITY_KINDS)
        pairs_here = [
            (a, b) for a, b in adjacent if a in rows and b in rows
        ]
        for a, b in adjacent:
            if (a, b) not in pairs_here:
                notes.append(
                    f"comparison {a} vs {b} skipped (absent in year {year})"
                )
        comparisons, cmp_notes = build_comparisons(
            rows, pairs_here, _VALIDITY_KINDS
        )
        notes.extend(cmp_notes)
        years_out[str(year)] = {
            "groups": {
                label: {
                    str(kind): result_payload(result)
                    for kind, result in by_kind.items()
                }
                for label, by_kind in rows.items()
            },
            "comparisons": comparisons,
            "notes": notes,
        }
        all_notes.extend(notes)

    return {
        "years": years_out,
        "audit": {
            "seed": spec.seed,
            "groups": [g.label for g in spec.groups],
            "strata": len(spec.strata),
            "notes": all_notes,
        },
    }
