# SPDX-License-Identifier: Apache-2.0
import json

import numpy as np
import pytest

import semlink


def small_config():
    cfg = json.loads(semlink.Config().to_json())
    cfg["data"]["n_samples"] = 20
    cfg["data"]["n_channels"] = 20
    cfg["training"]["log_wallclock"] = False
    for stage in ("stage1", "stage2", "stage3"):
        cfg["training"][stage].update(epochs=1, batch_size=4, max_train=4)
    return semlink.Config.from_json(json.dumps(cfg))


def test_config_round_trip():
    cfg = small_config()
    assert semlink.Config.from_json(cfg.to_json()) == cfg
    assert cfg.hash() == semlink.Config().hash()


def test_bad_config_raises():
    with pytest.raises(semlink.ConfigError):
        semlink.Config.from_json('{"dims": {"N_x": 1}}')


def test_channel_shape_and_determinism():
    cfg = semlink.Config()
    h = semlink.realize_channel(cfg, 3)
    assert h.shape == (2, 6, 16, 16, 4)
    assert h.dtype == np.complex128
    np.testing.assert_array_equal(h, semlink.realize_channel(cfg, 3))
    assert not np.array_equal(h, semlink.realize_channel(cfg, 4))


def test_sample_ranges():
    a, b, label = semlink.sample(semlink.Config(), 0, 5)
    assert a.shape == (3, 32, 32) and b.shape == (1, 32, 32)
    assert label.shape == (32, 32)
    assert set(np.unique(label)) <= {0, 1, 2, 3}
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_svd_bound_positive():
    assert semlink.svd_bound(semlink.Config(), 1) > 0.0


def test_cli_train_and_evaluate(tmp_path):
    cfg = small_config()
    path = tmp_path / "config.json"
    cfg.save(str(path))
    out = str(tmp_path / "run")
    code, _, err = semlink.run_cli(["train", "--stage", "1", "--config", str(path), "--out", out])
    assert code == 0, err
    r = semlink.evaluate(cfg, ckpt=out + "/stage1", split="val")
    assert 0.0 <= r["miou"] <= 1.0
    assert r["samples"] == 2


def test_cli_usage_error_code():
    code, _, err = semlink.run_cli(["frobnicate"])
    assert code == 2
    assert err
