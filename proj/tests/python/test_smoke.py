# Copyright 2026 The SemanticSTR Desk Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json

import numpy as np
import pytest

import sstr


def test_charset_round_trip():
    assert sstr.normalize("Hello, World!") == "helloworld"
    tokens = sstr.encode("stop")
    assert tokens[-1] == sstr.EOS
    assert sstr.decode(tokens) == "stop"
    assert sstr.MAX_STEPS == 26


def test_metric_arithmetic():
    preds = ["x"] * 4969
    gts = ["y"] * 4969
    preds[:486] = gts[:486]
    assert sstr.word_accuracy(preds, gts) == pytest.approx(9.78, abs=0.005)
    assert sstr.word_match("STOP", "stop")
    with pytest.raises(ValueError):
        sstr.word_accuracy(["a"], [])


def test_geometry():
    assert sstr.scale_box((0, 0, 10, 10), 50) == (2.5, 2.5, 5, 5)
    assert sstr.scale_box((4, 6, 8, 2), 8) == (6, 6.5, 4, 1)
    assert sstr.encompasses((0, 0, 10, 10), (2, 2, 3, 3))
    assert not sstr.encompasses((0, 0, 10, 10), (8, 8, 5, 5))
    assert sstr.iou((0, 0, 2, 2), (1, 0, 2, 2)) == pytest.approx(1 / 3)


def test_usage_errors():
    code, _, _ = sstr.run_cli(["frobnicate"])
    assert code == 1
    code, _, err = sstr.run_cli(["train", "--config", "/no/such/config.json", "--out", "x"])
    assert code == 1
    assert "/no/such/config.json" in err
    with pytest.raises(OSError):
        sstr.Model("/no/such/model.ckpt")


def tiny_config():
    cfg = sstr.default_config()
    cfg["seed"] = 4
    cfg["data"].update(n_train=6, n_val=2, n_test=3)
    cfg["backbone"]["feature_dim"] = 16
    cfg["model"].update(dim=16, heads=2, n_enc=1, n_dec=1, ff=32)
    cfg["semantics"].update(mode="overlap", embed_dim=8)
    cfg["fusion"].update(placement="pre_encoder", hidden=8)
    cfg["train"].update(batch_size=4, eval_every=4, max_iters=8, lr=1e-3)
    return cfg


def test_end_to_end(tmp_path):
    cfg_path = tmp_path / "tiny.json"
    cfg_path.write_text(json.dumps(tiny_config()))
    data = tmp_path / "data"
    code, out, err = sstr.run_cli(["gen-data", "--config", str(cfg_path), "--out", str(data)])
    assert code == 0, err
    assert "train: 6 scenes" in out

    run = tmp_path / "run"
    code, _, err = sstr.run_cli(["train", "--config", str(data / "config.json"), "--out", str(run)])
    assert code == 0, err
    assert (run / "log.csv").read_text().startswith("iter,loss,val_acc,lr\n")
    assert (run / "best.ckpt").read_bytes()[:5] == b"SSTR1"

    code, out, err = sstr.run_cli(
        ["eval", "--config", str(data / "config.json"), "--checkpoint", str(run / "best.ckpt"), "--out", str(run)])
    assert code == 0, err
    report = json.loads((run / "eval.json").read_text())
    preds = [r["pred"] for r in report["records"]]
    gts = [r["gt"] for r in report["records"]]
    assert out.startswith("accuracy %.2f" % sstr.word_accuracy(preds, gts))

    same = sstr.compare(run / "eval.json", run / "eval.json")
    assert (same["corrected"], same["broken"], same["net"]) == (0, 0, 0)

    model = sstr.Model(str(run / "best.ckpt"))
    assert model.placement == "pre_encoder"
    ann = json.loads((data / "test" / "annotations.json").read_text())
    scene = ann[0]
    image = sstr.read_image(str(data / "test" / scene["image_path"]))
    assert image.dtype == np.float32 and image.ndim == 2
    text = model.recognize(image[:32, :100], [("clock", 1.0), ("sign", 0.5)])
    assert len(text) <= sstr.MAX_STEPS
    assert all(c.isdigit() or c.islower() for c in text)
    with pytest.raises(Exception):
        model.recognize(np.zeros((2, 3, 4), dtype=np.float32))
