import numpy as np
import pytest

from leafstem.cloud import LEAF, STEM
from leafstem.synth import PlantSpec, _layout, generate_plant


def test_no_leaves_means_all_stem():
    cloud, truth = generate_plant(PlantSpec(leaf_count=0, points_total=2000))
    assert len(cloud) == 2000 and (truth == STEM).all()


def test_noise_free_stem_geometry():
    spec = PlantSpec(leaf_count=0, noise_sigma=0.0, points_total=5000, seed=3)
    cloud, _ = generate_plant(spec)
    r = np.hypot(cloud.points[:, 0], cloud.points[:, 1])
    assert np.abs(r - spec.stem_radius).max() <= 1e-9
    z = cloud.points[:, 2]
    assert z.min() >= 0 and z.max() <= spec.stem_height


def test_noise_free_stem_labels_consistent():
    spec = PlantSpec(noise_sigma=0.0, points_total=20_000, seed=1)
    cloud, truth = generate_plant(spec)
    stem = cloud.points[truth == STEM]
    assert np.abs(np.hypot(stem[:, 0], stem[:, 1]) - spec.stem_radius).max() <= 1e-9
    assert stem[:, 2].min() >= 0 and stem[:, 2].max() <= spec.stem_height


def test_deterministic():
    a, ta = generate_plant(PlantSpec(seed=9, points_total=5000))
    b, tb = generate_plant(PlantSpec(seed=9, points_total=5000))
    assert np.array_equal(a.points, b.points) and np.array_equal(ta, tb)
    c, _ = generate_plant(PlantSpec(seed=10, points_total=5000))
    assert not np.array_equal(a.points, c.points)


@pytest.mark.parametrize("slender", [False, True])
def test_labels_cover_budget(slender):
    spec = PlantSpec(points_total=12_345, slender_leaf=slender)
    cloud, truth = generate_plant(spec)
    assert len(cloud) == len(truth) == 12_345
    assert (truth == LEAF).sum() + (truth == STEM).sum() == 12_345
    assert 0 < (truth == STEM).sum() < 12_345


def test_slender_flag_leaves_other_geometry_alone():
    spec = PlantSpec(seed=4)
    rng = lambda: np.random.default_rng(np.random.SeedSequence(4).spawn(3)[0])  # noqa: E731
    leaves, slender = _layout(spec, rng())
    leaves2, _ = _layout(PlantSpec(seed=4, slender_leaf=True), rng())
    for a, b in zip(leaves, leaves2):
        assert np.array_equal(a.base, b.base) and np.array_equal(a.axis, b.axis)
    assert slender.axis.tolist() == [0, 0, 1]


def test_default_proportions():
    cloud, truth = generate_plant(PlantSpec(seed=0))
    ext = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    assert 90 < ext[0] < 170 and 90 < ext[1] < 170 and 180 < ext[2] < 240
    assert (truth == STEM).mean() < 0.25


@pytest.mark.parametrize(
    "kw",
    [dict(stem_height=0), dict(stem_radius=-1), dict(leaf_count=-1), dict(points_total=999),
     dict(leaf_droop_angle=91), dict(noise_sigma=-0.1), dict(leaf_width=0)],
)
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        PlantSpec(**kw)
