import numpy as np
import pytest

from birs.model import (
    DetectionResult,
    Region,
    TestOutcome,
    as_sample_matrix,
    merge_regions,
    region_intersection_size,
    region_union_size,
    regions_from_mask,
    regions_to_mask,
)


def test_region_basics():
    r = Region(2, 5)
    assert r.length == 3
    assert r.as_slice() == slice(2, 5)
    assert repr(r) == "Region(2, 5)"
    assert Region(0, 4) < Region(1, 2)


@pytest.mark.parametrize("a,b", [(3, 3), (4, 2), (-1, 2)])
def test_region_rejects_bad_bounds(a, b):
    with pytest.raises(ValueError):
        Region(a, b)


def test_region_check_within():
    Region(0, 8).check_within(8)
    with pytest.raises(ValueError, match="p=7"):
        Region(0, 8).check_within(7)


def test_union_size_examples():
    assert region_union_size([]) == 0
    assert region_union_size([Region(0, 4)]) == 4
    assert region_union_size([Region(0, 4), Region(2, 6)]) == 6


def test_intersection_size():
    a = [Region(0, 4), Region(10, 20)]
    b = [Region(2, 12), Region(19, 30)]
    assert region_intersection_size(a, b) == 2 + 2 + 1
    assert region_intersection_size([], b) == 0


def test_merge_regions_touching_and_overlapping():
    got = merge_regions([Region(4, 8), Region(0, 4), Region(10, 12), Region(11, 15)])
    assert got == [Region(0, 8), Region(10, 15)]


def test_mask_round_trip():
    mask = np.array([0, 1, 1, 0, 0, 1, 0, 1, 1, 1], dtype=bool)
    regions = regions_from_mask(mask)
    assert regions == [Region(1, 3), Region(5, 6), Region(7, 10)]
    assert np.array_equal(regions_to_mask(regions, 10), mask)
    assert regions_from_mask([]) == []


def test_as_sample_matrix_validation():
    assert as_sample_matrix([[1, 2]]).dtype == np.float64
    with pytest.raises(ValueError, match="2-D"):
        as_sample_matrix([1.0, 2.0])
    with pytest.raises(ValueError, match="NaN"):
        as_sample_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_sample_matrix(np.empty((0, 3)))


def test_outcome_strict_rejection():
    assert not TestOutcome(1.0, 1.0, 10, 0.05).reject
    assert TestOutcome(1.0 + 1e-12, 1.0, 10, 0.05).reject


def test_detection_result_invariants():
    DetectionResult((Region(0, 2), Region(3, 5)), (), 1, 0)
    with pytest.raises(ValueError):
        DetectionResult((Region(0, 2), Region(2, 5)), (), 1, 0)
    with pytest.raises(ValueError):
        DetectionResult((Region(3, 5), Region(0, 2)), (), 1, 0)
    empty = DetectionResult.empty(1)
    assert empty.regions == () and empty.n_detected_points == 0 and empty.rounds_used == 0
