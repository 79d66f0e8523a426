import numpy as np
import pytest

from divattn.config import Hyperparams, RunSettings, loads_config
from divattn.errors import DivergenceError, FormatError
from divattn.io import checkpoint_bytes, write_video_dir
from divattn.model import init_params
from divattn.oim import OimState
from divattn.synthetic import SyntheticSpec, make_synthetic
from divattn.train import METRIC_COLUMNS, load_splits, splits_from_synthetic, train

SMALL = dict(identities=8, train_identities=4, min_frames=6, frames=10)


def small_splits(**spec):
    return splits_from_synthetic(make_synthetic(SyntheticSpec(**{**SMALL, **spec})))


def test_zero_epochs_returns_initialization():
    h = Hyperparams(epochs=0, seed=5)
    res = train(h, small_splits())
    init = init_params(h, classes=4, seed=5)
    assert checkpoint_bytes(res.params, res.state) == checkpoint_bytes(init, OimState.zeros(4, h.E))
    assert res.rows == []


def test_metrics_log_is_reproducible(tmp_path):
    h = Hyperparams(epochs=2, seed=11)
    logs = []
    for i in range(2):
        path = tmp_path / f"m{i}.csv"
        train(h, small_splits(), metrics_path=path)
        logs.append(path.read_text())
    assert logs[0] == logs[1]
    lines = logs[0].splitlines()
    assert lines[0] == "# divattn metrics"
    assert "# lr = 0.1" in lines and "# K = 6" in lines
    header = [l for l in lines if not l.startswith("#")]
    assert header[0] == ",".join(METRIC_COLUMNS)
    assert len(header) == 3


def test_loss_non_increasing_first_five_epochs():
    h = Hyperparams(epochs=5, lr=0.01, lr_drop=0.01, seed=0)
    res = train(h, splits_from_synthetic(make_synthetic(SyntheticSpec(noise=0.0))))
    losses = [row["loss"] for row in res.rows]
    assert all(b <= a for a, b in zip(losses, losses[1:])), losses


def test_warmup_freezes_enhancement_and_temporal():
    h = Hyperparams(epochs=2, warmup_epochs=2, seed=1)
    res = train(h, small_splits())
    init = init_params(h, classes=4, seed=1)
    for name in ("enhance.W_pos", "enhance.b_pos", "enhance.fcn_W", "enhance.fcn_b", "temporal.w", "temporal.b"):
        assert np.array_equal(res.params[name], init[name]), name
    assert not np.array_equal(res.params["spatial.W"], init["spatial.W"])


def test_momentum_and_softmax_variants_train():
    for h in (Hyperparams(epochs=2, sgd_momentum=0.9), Hyperparams(epochs=2, loss="softmax")):
        res = train(h, small_splits())
        assert all(np.isfinite(row["loss"]) for row in res.rows)
    assert res.params["classifier.W"].shape == (4, h.E)


def test_divergence_reports_last_good():
    h = Hyperparams(epochs=1, lr=1e300, lr_drop=1e300)
    with pytest.raises(DivergenceError) as info:
        train(h, small_splits())
    params, state = info.value.last_good
    assert all(np.all(np.isfinite(a)) for a in params.arrays.values())
    assert info.value.exit_status == 4


def test_grid_mismatch():
    with pytest.raises(FormatError):
        train(Hyperparams(grid_h=4, grid_w=8), small_splits())


def test_directory_splits_match_synthetic(tmp_path):
    spec = SyntheticSpec(**SMALL)
    ds = make_synthetic(spec)
    probes, gallery = ds.probes_and_gallery()
    for name, videos in (("train", ds.split("train")), ("probes", probes), ("gallery", gallery)):
        write_video_dir(tmp_path / name, videos, ds.grid_shape)
    h, run = loads_config(f"data = {tmp_path}\nepochs = 1\n")
    from_dir = train(h, load_splits(run, h))
    from_mem = train(h, splits_from_synthetic(ds))
    assert checkpoint_bytes(from_dir.params, from_dir.state) == checkpoint_bytes(from_mem.params, from_mem.state)
