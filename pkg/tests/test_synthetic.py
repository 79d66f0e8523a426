import numpy as np
import pytest

from divattn.errors import ConfigError
from divattn.synthetic import SyntheticSpec, make_synthetic, part_anchors


def small(**kw):
    base = dict(identities=6, train_identities=3, min_frames=5, frames=8, D=16)
    base.update(kw)
    return SyntheticSpec(**base)


def test_same_spec_same_bytes():
    assert make_synthetic(small()).to_bytes() == make_synthetic(small()).to_bytes()
    assert make_synthetic(small()).to_bytes() != make_synthetic(small(data_seed=1)).to_bytes()


def test_frozen_fingerprint():
    ds = make_synthetic(small())
    v = ds.videos[0]
    assert (v.frames.shape, v.label, v.camera) == ((6, 32, 16), 0, 0)
    assert round(float(v.frames[0, 0, 0]), 12) == pytest.approx(0.666281121686, abs=1e-12)


def test_shapes_labels_and_cameras():
    spec = small()
    ds = make_synthetic(spec)
    assert len(ds.videos) == spec.identities * spec.videos_per_identity
    for v in ds.videos:
        assert spec.min_frames <= v.frames.shape[0] <= spec.frames
        assert v.frames.shape[1:] == (spec.grid_h * spec.grid_w, spec.D)
    assert {v.label for v in ds.split("train")} == set(range(3))
    assert {v.label for v in ds.split("test")} == set(range(3, 6))
    probes, gallery = ds.probes_and_gallery()
    assert all(v.camera == 0 for v in probes) and all(v.camera == 1 for v in gallery)
    with pytest.raises(ValueError):
        ds.split("val")


def test_clean_parts_are_identical_at_fixed_cells():
    spec = small(noise=0.0, p_occ=0.0, jitter=0)
    ds = make_synthetic(spec)
    W = spec.grid_w
    for v in ds.videos:
        for p, (row, col) in enumerate(part_anchors(spec)):
            cells = [(row + dr) * W + col + dc for dr in (0, 1) for dc in (0, 1)]
            block = v.frames[:, cells, :]
            assert np.array_equal(block, np.broadcast_to(ds.signatures[v.label, p], block.shape))


def test_full_occlusion_hides_identity():
    spec = small(noise=0.0, p_occ=1.0, jitter=0)
    ds = make_synthetic(spec)
    sigs = ds.signatures.reshape(-1, spec.D)
    for v in ds.videos:
        flat = v.frames.reshape(-1, spec.D)
        assert not any(np.any(np.all(flat == s, axis=1)) for s in sigs)


def test_mean_pooled_nearest_neighbour_separates_two_identities():
    spec = SyntheticSpec(identities=2, train_identities=2, videos_per_identity=4, part_type=0.0,
                         signal=1.0, clutter=0.35, D=64, noise=0.05)
    ds = make_synthetic(spec)
    pooled = np.array([v.frames.mean(axis=(0, 1)) for v in ds.videos])
    labels = np.array([v.label for v in ds.videos])
    dist = np.linalg.norm(pooled[:, None] - pooled[None], axis=-1)
    np.fill_diagonal(dist, np.inf)
    assert np.array_equal(labels[dist.argmin(axis=1)], labels)


@pytest.mark.parametrize("field,value", [("identities", 1), ("train_identities", 0), ("p_occ", 1.5),
                                         ("frames", 2), ("noise", -0.1), ("grid_w", 1)])
def test_validation(field, value):
    with pytest.raises(ConfigError) as info:
        make_synthetic(small(**{field: value}))
    assert info.value.key in (field, "grid_h")
