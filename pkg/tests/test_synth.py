import json

import numpy as np
import pytest

from zinorm import (
    GroupSpec,
    IndicatorKind,
    InputDataError,
    QualityLabel,
    StratumKey,
    StratumSpec,
    WorldSpec,
    convergent_validity_run,
    coverage_experiment,
    expected_profiles,
    ffa_group,
    generate_synthetic,
    group_probability,
    parse_membership,
    parse_publications,
    true_indicator_values,
    write_synthetic,
)
from zinorm.profiles import build_profiles


def make_spec(seed=7, theta=2.0, p=0.2, world=50, group=10, n_strata=3):
    strata = tuple(
        StratumSpec(StratumKey(f"f{i}", 2000 + i), world, p)
        for i in range(n_strata)
    )
    groups = (GroupSpec("g", (group,) * n_strata, theta),)
    return WorldSpec(seed=seed, strata=strata, groups=groups)


class TestFfaGroup:
    def test_empty_is_q0(self):
        grouped = ffa_group([])
        assert grouped.label is QualityLabel.Q0
        assert grouped.ffa == 0.0

    def test_low_mean_is_q1(self):
        grouped = ffa_group([1, 1])
        assert grouped.label is QualityLabel.Q1
        assert grouped.ffa == 1.0

    def test_boundary_mean_exactly_one_is_q1(self):
        assert ffa_group([1]).label is QualityLabel.Q1

    def test_high_mean_is_q2(self):
        grouped = ffa_group([2, 3])
        assert grouped.label is QualityLabel.Q2
        assert grouped.ffa == 2.5

    def test_score_outside_scale_rejected(self):
        with pytest.raises(InputDataError, match="score"):
            ffa_group([1, 4])
        with pytest.raises(InputDataError, match="score"):
            ffa_group([0])

    def test_non_integer_score_rejected(self):
        with pytest.raises(InputDataError):
            ffa_group([1.5])

    def test_permutation_invariant(self):
        assert ffa_group([3, 1, 2]) == ffa_group([2, 3, 1])


class TestGroupProbability:
    def test_theta_one_is_identity(self):
        assert group_probability(0.37, 1.0) == 0.37

    def test_endpoints_fixed(self):
        assert group_probability(0.0, 5.0) == 0.0
        assert group_probability(1.0, 5.0) == 1.0

    def test_odds_scaling_value(self):
        # odds 1/9 doubled -> 2/9 -> probability 2/11
        assert group_probability(0.1, 2.0) == pytest.approx(2.0 / 11.0)

    def test_monotone_in_theta(self):
        probs = [group_probability(0.3, t) for t in (0.5, 1.0, 2.0, 8.0)]
        assert probs == sorted(probs)
        assert all(0 < q < 1 for q in probs)

    def test_bad_inputs(self):
        with pytest.raises(InputDataError):
            group_probability(1.2, 1.0)
        with pytest.raises(InputDataError):
            group_probability(0.5, 0.0)
        with pytest.raises(InputDataError):
            group_probability(0.5, float("inf"))


class TestWorldSpec:
    def test_reserved_label_rejected(self):
        with pytest.raises(InputDataError, match="reserved"):
            GroupSpec("world", (1,), 1.0)
        with pytest.raises(InputDataError, match="reserved"):
            GroupSpec("bg", (1,), 1.0)

    def test_colon_in_label_rejected(self):
        with pytest.raises(InputDataError):
            GroupSpec("a:b", (1,), 1.0)

    def test_sizes_length_mismatch(self):
        strata = (StratumSpec(StratumKey("f", 2000), 10, 0.1),)
        with pytest.raises(InputDataError, match="sizes"):
            WorldSpec(seed=1, strata=strata, groups=(GroupSpec("g", (1, 2), 1.0),))

    def test_overallocated_stratum(self):
        strata = (StratumSpec(StratumKey("f", 2000), 10, 0.1),)
        with pytest.raises(InputDataError, match="exceeding"):
            WorldSpec(
                seed=1,
                strata=strata,
                groups=(GroupSpec("a", (6,), 1.0), GroupSpec("b", (5,), 1.0)),
            )

    def test_duplicate_strata(self):
        strata = (
            StratumSpec(StratumKey("f", 2000), 10, 0.1),
            StratumSpec(StratumKey("f", 2000), 20, 0.2),
        )
        with pytest.raises(InputDataError, match="duplicate"):
            WorldSpec(seed=1, strata=strata, groups=())

    def test_bad_seed(self):
        strata = (StratumSpec(StratumKey("f", 2000), 10, 0.1),)
        with pytest.raises(InputDataError, match="seed"):
            WorldSpec(seed=-1, strata=strata, groups=())
        with pytest.raises(InputDataError, match="seed"):
            WorldSpec(seed=2**64, strata=strata, groups=())
        with pytest.raises(InputDataError, match="seed"):
            WorldSpec(seed=True, strata=strata, groups=())

    def test_from_dict_scalar_sizes_broadcast(self):
        spec = WorldSpec.from_dict(
            {
                "seed": 3,
                "strata": [
                    {"field_id": "f", "year": 2000, "world_size": 10,
                     "mention_probability": 0.1},
                    {"field_id": "f", "year": 2001, "world_size": 10,
                     "mention_probability": 0.1},
                ],
                "groups": [{"label": "g", "sizes": 4, "theta": 2.0}],
            }
        )
        assert spec.groups[0].sizes == (4, 4)
        assert spec.background_sizes() == (6, 6)

    def test_from_dict_missing_key(self):
        with pytest.raises(InputDataError, match="missing key"):
            WorldSpec.from_dict({"strata": []})

    def test_from_json_roundtrip(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(
            json.dumps(
                {
                    "seed": 11,
                    "strata": [
                        {"field_id": "f", "year": 2000, "world_size": 10,
                         "mention_probability": 0.25}
                    ],
                    "groups": [{"label": "g", "sizes": [2], "theta": 1.0}],
                }
            )
        )
        spec = WorldSpec.from_json(path)
        assert spec.seed == 11
        assert spec.group_probabilities(spec.groups[0]) == (0.25,)

    def test_from_json_bad_file(self, tmp_path):
        with pytest.raises(InputDataError, match="cannot read"):
            WorldSpec.from_json(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(InputDataError, match="not valid JSON"):
            WorldSpec.from_json(bad)


class TestGenerateSynthetic:
    def test_deterministic_for_same_seed(self):
        spec = make_spec()
        assert generate_synthetic(spec) == generate_synthetic(spec)

    def test_seed_override_changes_draws(self):
        spec = make_spec()
        base = generate_synthetic(spec)
        other = generate_synthetic(spec, seed=spec.seed + 1)
        assert base != other

    def test_counts_and_ids(self):
        spec = make_spec(world=20, group=5, n_strata=2)
        records, pairs = generate_synthetic(spec)
        assert len(records) == 40
        assert len(pairs) == 10
        assert {g for _, g in pairs} == {"g"}
        ids = [r.paper_id for r in records]
        assert len(set(ids)) == len(ids)
        assert "g:f0:2000:00000" in ids
        assert "bg:f1:2001:00014" in ids

    def test_mention_counts_exercise_dichotomization(self):
        records, _ = generate_synthetic(make_spec(world=400, p=0.5, seed=99))
        mentioned = [r.mentions for r in records if r.mentions > 0]
        assert mentioned, "expected some mentioned papers"
        assert min(mentioned) >= 1
        assert max(mentioned) > 1
        assert all(r.is_mentioned == (r.mentions > 0) for r in records)

    def test_roundtrip_through_csv(self, tmp_path):
        spec = make_spec(seed=123)
        records, pairs = generate_synthetic(spec)
        pub_path, mem_path = write_synthetic(records, pairs, tmp_path)
        with open(pub_path) as fh:
            parsed_records = parse_publications(fh)
        with open(mem_path) as fh:
            parsed_pairs = parse_membership(fh)
        assert parsed_records == records
        assert parsed_pairs == pairs
        world, groups = build_profiles(parsed_records, parsed_pairs)
        assert world.total_papers == 150
        assert groups["g"].total_papers == 30

    def test_written_files_byte_identical_across_runs(self, tmp_path):
        spec = make_spec(seed=321)
        first = tmp_path / "a"
        second = tmp_path / "b"
        write_synthetic(*generate_synthetic(spec), first)
        write_synthetic(*generate_synthetic(spec), second)
        assert (first / "publications.csv").read_bytes() == (
            second / "publications.csv"
        ).read_bytes()
        assert (first / "membership.csv").read_bytes() == (
            second / "membership.csv"
        ).read_bytes()


class TestExpectedProfiles:
    def test_cells_match_spec_arithmetic(self):
        spec = make_spec(theta=2.0, p=0.2, world=50, group=10)
        world, groups = expected_profiles(spec)
        q = group_probability(0.2, 2.0)
        key = StratumKey("f0", 2000)
        cell = groups["g"][key]
        assert cell.mentioned == pytest.approx(10 * q)
        world_cell = world[key]
        assert world_cell.mentioned == pytest.approx(40 * 0.2 + 10 * q)
        assert world_cell.total == pytest.approx(50.0)

    def test_world_dominates_in_float(self):
        # stress the term-by-term accumulation with awkward probabilities
        strata = tuple(
            StratumSpec(StratumKey(f"f{i}", 2000), 7, 1.0 / 3.0)
            for i in range(5)
        )
        groups = tuple(
            GroupSpec(f"g{j}", (1,) * 5, 1.0 + j / 7.0) for j in range(7)
        )
        spec = WorldSpec(seed=1, strata=strata, groups=groups)
        world, group_profiles = expected_profiles(spec)
        for profile in group_profiles.values():
            for key in profile.strata():
                assert world[key].mentioned >= profile[key].mentioned
                assert (
                    world[key].not_mentioned
                    >= profile[key].not_mentioned
                )

    def test_truths_unity_when_theta_one(self):
        spec = make_spec(theta=1.0)
        truths = true_indicator_values(spec)
        for kind in IndicatorKind:
            assert truths["g"][str(kind)] == pytest.approx(1.0, abs=1e-12)

    def test_truths_ordered_by_theta(self):
        strata = tuple(
            StratumSpec(StratumKey(f"f{i}", 2001), 500, 0.1) for i in range(4)
        )
        groups = tuple(
            GroupSpec(label, (30,) * 4, theta)
            for label, theta in (("lo", 0.5), ("mid", 1.0), ("hi", 4.0))
        )
        spec = WorldSpec(seed=9, strata=strata, groups=groups)
        truths = true_indicator_values(spec, (IndicatorKind.MHQ,))
        assert truths["lo"]["mhq"] < truths["mid"]["mhq"] < truths["hi"]["mhq"]


class TestCoverageExperiment:
    def test_rejects_wrong_nominal(self):
        with pytest.raises(InputDataError, match="0.95"):
            coverage_experiment(make_spec(), 200, nominal=0.9)

    def test_rejects_too_few_replications(self):
        with pytest.raises(InputDataError, match="100"):
            coverage_experiment(make_spec(), 99)

    def test_rejects_groupless_spec(self):
        strata = (StratumSpec(StratumKey("f", 2000), 10, 0.1),)
        spec = WorldSpec(seed=1, strata=strata, groups=())
        with pytest.raises(InputDataError, match="group"):
            coverage_experiment(spec, 200)

    def test_structure_and_degenerate_accounting(self):
        # tiny strata make zero-mention draws likely, exercising the
        # degenerate-exclusion path
        spec = make_spec(seed=5150, world=5, group=3, p=0.2, theta=2.0)
        out = coverage_experiment(spec, 200)
        assert out["nominal"] == 0.95
        assert out["replications"] == 200
        assert out["seed"] == 5150
        cells = out["groups"]["g"]
        assert set(cells) == {"emnpc", "mnpc", "mhq"}
        for payload in cells.values():
            assert set(payload) == {
                "truth", "coverage", "covered", "used", "degenerate",
            }
            assert payload["used"] + payload["degenerate"] == 200
            assert payload["covered"] <= payload["used"]
        assert cells["mhq"]["degenerate"] > 0

    def test_deterministic(self):
        spec = make_spec(seed=77, world=200, group=20, p=0.15)
        assert coverage_experiment(spec, 150) == coverage_experiment(spec, 150)

    def test_healthy_spec_covers_near_nominal(self):
        strata = tuple(
            StratumSpec(StratumKey(f"f{i}", 2002), 400, 0.1) for i in range(6)
        )
        spec = WorldSpec(
            seed=424242,
            strata=strata,
            groups=(GroupSpec("g", (12,) * 6, 2.0),),
        )
        out = coverage_experiment(spec, 400)
        mhq = out["groups"]["g"]["mhq"]
        assert mhq["degenerate"] == 0
        assert 0.90 <= mhq["coverage"] <= 0.99


class TestConvergentValidity:
    def test_rejects_groupless_spec(self):
        strata = (StratumSpec(StratumKey("f", 2000), 10, 0.1),)
        spec = WorldSpec(seed=1, strata=strata, groups=())
        with pytest.raises(InputDataError, match="group"):
            convergent_validity_run(spec)

    def test_flat_theta_groups_are_indistinguishable(self):
        strata = tuple(
            StratumSpec(StratumKey(field, year), 400, 0.1)
            for year in (2001, 2002)
            for field in ("bio", "chem")
        )
        groups = tuple(
            GroupSpec(label, (100,) * 4, 1.0) for label in ("qa", "qb", "qc")
        )
        spec = WorldSpec(seed=1234, strata=strata, groups=groups)
        out = convergent_validity_run(spec)
        assert sorted(out["years"]) == ["2001", "2002"]
        assert out["audit"]["groups"] == ["qa", "qb", "qc"]
        for payload in out["years"].values():
            for row in payload["groups"].values():
                assert 0.5 < row["mhq"]["value"] < 2.0
            mhq_cmp = [
                c for c in payload["comparisons"] if c["indicator"] == "mhq"
            ]
            assert len(mhq_cmp) == 2
            for comparison in mhq_cmp:
                assert comparison["category"] == "substantial"
                assert comparison["p_label"] == "not significant"

    def test_group_equal_to_world_scores_unity(self):
        strata = tuple(
            StratumSpec(StratumKey("f", year), 60, 0.3) for year in (2000, 2001)
        )
        spec = WorldSpec(
            seed=5,
            strata=strata,
            groups=(GroupSpec("all", (60, 60), 1.0),),
        )
        out = convergent_validity_run(spec)
        for payload in out["years"].values():
            row = payload["groups"]["all"]
            for kind in ("emnpc", "mnpc", "mhq"):
                assert row[kind]["value"] == pytest.approx(1.0, abs=1e-12)
            assert payload["comparisons"] == []

    def test_payload_shape_matches_report(self):
        spec = make_spec(seed=8, world=300, group=40, p=0.2, theta=3.0)
        out = convergent_validity_run(spec)
        year = out["years"]["2000"]
        row = year["groups"]["g"]["mhq"]
        assert {"value", "ci_lower", "ci_upper", "strata_used"} <= set(row)
        assert row["ci_lower"] < row["value"] < row["ci_upper"]


def test_replication_seeding_is_stable_under_rep_count():
    # replication i must not depend on how many replications follow it
    from zinorm.synth import _replication_draws

    spec = make_spec(seed=2024, world=100, group=10, p=0.1)
    few_groups, few_world = _replication_draws(spec, 50)
    many_groups, many_world = _replication_draws(spec, 120)
    np.testing.assert_array_equal(few_groups, many_groups[:, :50, :])
    np.testing.assert_array_equal(few_world, many_world[:50, :])
