from pathlib import Path

import pytest

from zinorm import build_profiles, parse_membership, parse_publications

FIXTURES = Path(__file__).parent / "fixtures"

PUBLICATIONS_CSV = FIXTURES / "small_world_publications.csv"
MEMBERSHIP_CSV = FIXTURES / "small_world_membership.csv"
COVERAGE_SPEC = FIXTURES / "coverage_spec.json"
VALIDITY_SPEC = FIXTURES / "validity_spec.json"


@pytest.fixture(scope="session")
def small_world():
    """(world, groups) profiles for the two-set worked example."""
    with open(PUBLICATIONS_CSV, newline="") as fh:
        records = parse_publications(fh)
    with open(MEMBERSHIP_CSV, newline="") as fh:
        pairs = parse_membership(fh)
    return build_profiles(records, pairs)
