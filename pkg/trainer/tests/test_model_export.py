import numpy as np
import pytest
import torch

from ampbt_trainer.export import ExportError, export_weights
from ampbt_trainer.model import AmpbtNet, SpbtNet, patterns_to_input
from ampbt_trainer.records import load_dataset


def small_model(seed=0):
    torch.manual_seed(seed)
    model = AmpbtNet(32, (8, 4, 5))
    # give the batchnorms non-trivial running statistics
    model.train()
    rng = np.random.default_rng(seed)
    pats = rng.standard_normal((16, 32)) + 1j * rng.standard_normal((16, 32))
    model(patterns_to_input(pats))
    model.eval()
    return model


def test_backbone_parameter_budget():
    model = AmpbtNet(255, (255, 10, 51))
    backbone = sum(p.numel() for p in model.backbone.parameters())
    assert backbone == 124_608
    per_stream = sum(p.numel() for p in model.attn[0].parameters())
    assert per_stream == 54_928
    spbt = SpbtNet(255, 255)
    assert 3 * sum(p.numel() for p in spbt.backbone.parameters()) == 373_824


def test_forward_shapes_and_pooling():
    model = AmpbtNet(255, (255, 10, 51)).eval()
    with torch.no_grad():
        logits = model(torch.randn(3, 2, 255))
    assert [tuple(l.shape) for l in logits] == [(3, 255), (3, 10), (3, 51)]
    assert model.heads[0].in_features == 256 * 31


def test_single_task_ignores_other_labels():
    # the single-task loss depends only on its own label column
    from ampbt_trainer.losses import cross_entropy_logits
    torch.manual_seed(0)
    model = SpbtNet(32, 8).eval()
    x = torch.randn(6, 2, 32)
    labels_a = torch.randint(8, (6, 3))
    labels_b = labels_a.clone()
    labels_b[:, 1:] = (labels_b[:, 1:] + 1) % 4
    with torch.no_grad():
        la = cross_entropy_logits(model(x)[0], labels_a[:, 0])
        lb = cross_entropy_logits(model(x)[0], labels_b[:, 0])
    assert float(la) == float(lb)


def test_input_normalization_and_zero_pattern():
    pats = np.zeros((2, 16), dtype=np.complex64)
    pats[1] = 3.0 + 4.0j
    x = patterns_to_input(pats)
    assert x.shape == (2, 2, 16)
    assert torch.all(x[0] == 0)
    assert float(x[1].abs().max()) == pytest.approx(0.8)  # 4/5 after peak scaling


def test_export_refuses_missing_running_stats(tmp_path):
    model = AmpbtNet(32, (8, 4, 5))
    model.backbone[0].bn.running_mean = None
    with pytest.raises(ExportError):
        export_weights(model, tmp_path / "w.ampw")


def test_export_refuses_nonfinite(tmp_path):
    model = small_model()
    with torch.no_grad():
        model.heads[0].bias[0] = float("nan")
    with pytest.raises(ExportError):
        export_weights(model, tmp_path / "w.ampw")


def test_exported_file_loads_in_inference_package(tmp_path):
    from airybeamlab.inference import forward_logits, load_weights, write_weights

    model = small_model(3)
    path = tmp_path / "w.ampw"
    export_weights(model, path)
    weights = load_weights(path)
    assert weights.descriptor["class_counts"] == [8, 4, 5]

    # independent writers produce identical bytes for identical content
    path2 = tmp_path / "w2.ampw"
    write_weights(path2, weights)
    assert path.read_bytes() == path2.read_bytes()

    rng = np.random.default_rng(4)
    for _ in range(10):
        pat = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        with torch.no_grad():
            ours = [l[0].numpy() for l in model(patterns_to_input(pat[None, :]))]
        theirs = forward_logits(pat, weights)
        for a, b in zip(ours, theirs):
            assert np.abs(a - b).max() < 1e-4


def test_spbt_export_single_head(tmp_path):
    from airybeamlab.inference import forward, load_weights

    torch.manual_seed(5)
    model = SpbtNet(32, 8)
    model.train()
    rng = np.random.default_rng(5)
    model(patterns_to_input(rng.standard_normal((8, 32)) + 0j))
    model.eval()
    path = tmp_path / "s.ampw"
    export_weights(model, path)
    weights = load_weights(path)
    assert weights.descriptor["attention"] is False
    assert weights.descriptor["class_counts"] == [8]
    probs = forward(rng.standard_normal(32) + 1j * rng.standard_normal(32), weights)
    assert len(probs) == 1 and abs(probs[0].sum() - 1) < 1e-6


def test_export_paper_dims_descriptor(tmp_path):
    from airybeamlab.inference import backbone_parameter_count, load_weights

    model = AmpbtNet(255, (255, 10, 51)).eval()
    path = tmp_path / "paper.ampw"
    export_weights(model, path)
    weights = load_weights(path)
    assert weights.descriptor["class_counts"] == [255, 10, 51]
    assert weights.descriptor["input_length"] == 255
    assert backbone_parameter_count(weights.descriptor) == 124_608


def test_dataset_reader_roundtrip(tmp_path):
    # writes with the generator package, reads with this one
    from airybeamlab.dataset import DatasetManifest, TrainingRecord, write_records
    from airybeamlab.scenario import Region, ScenarioConfig

    rng = np.random.default_rng(6)
    records = [TrainingRecord(
        x_r=float(rng.uniform(0.5, 2)), y_r=float(rng.uniform(-1, 1)),
        blockage_ratio=float(np.float32(rng.random())),
        pattern=(rng.standard_normal(16) + 1j * rng.standard_normal(16)).astype(np.complex64),
        labels=(int(rng.integers(16)), int(rng.integers(4)), int(rng.integers(5))),
        gain=float(np.float32(rng.random()))) for _ in range(20)]
    cfg = ScenarioConfig(100e9, 17, Region(0.0, 4.0, -2.0, 2.0))
    manifest = DatasetManifest(scenario=cfg.to_json_dict(), scenario_hash=cfg.hash(),
                               codebook={"l1": 16, "l2": 4, "l3": 5}, record_count=20)
    path = tmp_path / "d.abtd"
    write_records(path, records, manifest)
    data = load_dataset(path)
    assert data["patterns"].shape == (20, 16)
    for i, rec in enumerate(records):
        np.testing.assert_array_equal(data["patterns"][i], rec.pattern)
        assert tuple(data["labels"][i]) == rec.labels
        assert data["gains"][i] == np.float32(rec.gain)
        np.testing.assert_allclose(data["positions"][i], (rec.x_r, rec.y_r))


def test_split_matches_generator_convention():
    from airybeamlab.dataset import split_dataset
    from ampbt_trainer.records import split_indices

    ours = split_indices(437, seed=9)
    theirs = split_dataset(437, seed=9)
    for a, b in zip(ours, theirs):
        np.testing.assert_array_equal(a, b)
