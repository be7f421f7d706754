import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import TISSUE_TABLE, table_sigma_eps
from rfdose.errors import DomainError
from rfdose.phantom import PhantomSpec, make_phantom
from rfdose.tissues import (FREQUENCIES_GHZ, LabelVolume, PropertyMaps, TissueTable, assign_properties,
                            default_table, lookup_properties, tissue_stats)


@pytest.mark.parametrize("tid", range(1, 14))
@pytest.mark.parametrize("freq", FREQUENCIES_GHZ)
def test_lookup_matches_reference_table(tid, freq):
    sigma, eps, rho = lookup_properties(tid, freq)
    assert (sigma, eps) == table_sigma_eps(tid, freq)
    assert rho == TISSUE_TABLE[tid][1]
    assert default_table()[tid].name == TISSUE_TABLE[tid][0]


@pytest.mark.parametrize("tid, freq, expected", [
    (7, 0.9, (2.41, 68.64, 1007)),
    (9, 3.0, (0.13, 5.22, 911)),
    (3, 1.8, (0.28, 11.78, 1908)),
])
def test_lookup_examples(tid, freq, expected):
    assert lookup_properties(tid, freq) == expected


@pytest.mark.parametrize("bad", [0, 14, -1])
def test_lookup_rejects_unknown_tissue(bad):
    with pytest.raises(DomainError):
        lookup_properties(bad, 0.9)


@pytest.mark.parametrize("freq", [0.0, 1.0, 2.4, 6.0])
def test_lookup_rejects_unknown_frequency(freq):
    with pytest.raises(DomainError):
        lookup_properties(1, freq)


def test_table_monotone_in_frequency():
    for t in default_table().entries:
        assert t.sigma[0] <= t.sigma[1] <= t.sigma[2]
        assert t.epsilon[0] >= t.epsilon[1] >= t.epsilon[2]


def test_table_requires_thirteen_entries():
    table = default_table()
    with pytest.raises(DomainError):
        TissueTable(table.entries[:-1])


def test_assign_all_air():
    maps = assign_properties(LabelVolume(np.zeros((3, 4, 5), dtype=np.uint16)), 1.8)
    assert np.all(maps.sigma == 0) and np.all(maps.epsilon == 1) and np.all(maps.rho == 0)


def test_assign_single_muscle_voxel():
    lab = np.zeros((3, 3, 3), dtype=np.uint16)
    lab[1, 1, 1] = 11
    maps = assign_properties(LabelVolume(lab), 0.9)
    assert (maps.sigma[1, 1, 1], maps.epsilon[1, 1, 1], maps.rho[1, 1, 1]) == (0.94, 55.03, 1090)
    assert maps.sigma[0, 0, 0] == 0 and maps.epsilon[0, 0, 0] == 1 and maps.rho[0, 0, 0] == 0


def test_assign_grey_and_white_matter():
    lab = np.array([4, 5, 4, 5], dtype=np.uint16).reshape(2, 2, 1)
    maps = assign_properties(LabelVolume(lab), 3.0)
    np.testing.assert_array_equal(maps.sigma.ravel(), [2.22, 1.51, 2.22, 1.51])


label_volumes = arrays(np.uint16, st.tuples(*(st.integers(1, 6),) * 3), elements=st.integers(0, 13))


@given(label_volumes, st.sampled_from(FREQUENCIES_GHZ))
def test_assign_then_stats_returns_table_constants(labels, freq):
    lv = LabelVolume(labels)
    stats = tissue_stats(assign_properties(lv, freq), lv)
    for tid in range(1, 14):
        s = stats[tid]
        if not (labels == tid).any():
            assert not s.present and s.mean == {} and s.std == {}
            continue
        sigma, eps = table_sigma_eps(tid, freq)
        assert s.count == int((labels == tid).sum())
        assert s.mean == {"sigma": sigma, "epsilon": eps, "rho": TISSUE_TABLE[tid][1]}
        assert s.std == {"sigma": 0.0, "epsilon": 0.0, "rho": 0.0}


def test_stats_population_std():
    lab = np.array([3, 3], dtype=np.uint16).reshape(2, 1, 1)
    sigma = np.array([1.0, 3.0]).reshape(2, 1, 1)
    maps = PropertyMaps(sigma, np.ones_like(sigma), np.ones_like(sigma), 0.9)
    s = tissue_stats(maps, LabelVolume(lab))[3]
    assert s.mean["sigma"] == 2.0 and s.std["sigma"] == 1.0


def test_stats_dim_mismatch():
    lv = LabelVolume(np.ones((2, 2, 2), dtype=np.uint16))
    maps = assign_properties(LabelVolume(np.ones((2, 2, 3), dtype=np.uint16)), 0.9)
    with pytest.raises(DomainError):
        tissue_stats(maps, lv)


def test_label_volume_validation():
    with pytest.raises(DomainError):
        LabelVolume(np.full((2, 2, 2), 14))
    with pytest.raises(DomainError):
        LabelVolume(np.zeros((0, 2, 2)))


def test_property_maps_reject_unphysical():
    z = np.zeros((2, 2, 2))
    with pytest.raises(DomainError):
        PropertyMaps(z, np.full_like(z, 0.5), z, 0.9)
    with pytest.raises(DomainError):
        PropertyMaps(-np.ones_like(z), np.ones_like(z), z, 0.9)


# --- phantoms --------------------------------------------------------------------

def test_one_shell_phantom():
    spec = PhantomSpec(shells=((12, 20.0),), dims=(48, 48, 48), voxel_size=1.0, noise_std=0.0)
    labels, t1, t2 = make_phantom(spec)
    head = labels.labels != 0
    assert set(np.unique(labels.labels[head])) == {12}
    assert np.all(t1.intensities[head] == spec.t1_means[12])


def test_phantom_deterministic():
    spec = PhantomSpec(dims=(40, 40, 40), voxel_size=5.0, noise_std=7.0, seed=3)
    a, b = make_phantom(spec), make_phantom(spec)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(getattr(x, "labels", getattr(x, "intensities", None)),
                                      getattr(y, "labels", getattr(y, "intensities", None)))


@pytest.mark.parametrize("r", [6.0, 10.0, 15.5])
def test_sphere_voxel_count(r):
    n = int(2 * r + 6)
    spec = PhantomSpec(shells=((4, r),), dims=(n, n, n), voxel_size=1.0)
    labels, _, _ = make_phantom(spec)
    count = int((labels.labels != 0).sum())
    assert abs(count - 4 / 3 * np.pi * r ** 3) <= 0.02 * 4 / 3 * np.pi * r ** 3


def test_phantom_overflow():
    with pytest.raises(DomainError):
        make_phantom(PhantomSpec(shells=((12, 30.0),), dims=(20, 20, 20), voxel_size=1.0))


def test_phantom_radii_must_decrease():
    with pytest.raises(DomainError):
        PhantomSpec(shells=((12, 30.0), (4, 30.0)))
