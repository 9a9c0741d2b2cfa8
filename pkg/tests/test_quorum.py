import pytest

from codedmem.errors import ConfigError
from codedmem.quorum import (
    QuorumSystem,
    availability_by_arithmetic,
    min_intersection,
    verify_availability,
    verify_intersection,
)


def test_coded_threshold():
    assert QuorumSystem.coded(5, 1, 3).threshold == 4
    assert QuorumSystem.coded(7, 2, 3).threshold == 5
    assert QuorumSystem.coded(4, 1, 2).threshold == 3


def test_intersection_example():
    # Two 4-subsets of 5 servers share at least 3.
    assert min_intersection(QuorumSystem.coded(5, 1, 3)) == 3


def test_bound_violation_is_rejected():
    with pytest.raises(ConfigError, match="k=4 violates the quorum bound"):
        QuorumSystem.coded(5, 1, 4)
    with pytest.raises(ConfigError):
        QuorumSystem.coded(4, 2, 1)


def test_too_small_threshold_breaks_intersection():
    qs = QuorumSystem(5, 3, f=1, k=3)
    assert not verify_intersection(qs)


def test_too_large_threshold_breaks_availability():
    qs = QuorumSystem(5, 5, f=1, k=1)
    assert not verify_availability(qs)
    assert not availability_by_arithmetic(qs)


@pytest.mark.parametrize("n,f", [(3, 1), (5, 2), (6, 2)])
def test_other_systems(n, f):
    for qs in (QuorumSystem.majority(n, f), QuorumSystem.n_minus_f(n, f)):
        assert verify_availability(qs)
        assert min_intersection(qs) >= 1
    # n - f quorums intersect in at least n - 2f servers.
    assert min_intersection(QuorumSystem.n_minus_f(n, f)) == n - 2 * f


def test_exhaustive_limit():
    with pytest.raises(ConfigError):
        min_intersection(QuorumSystem(13, 7))
