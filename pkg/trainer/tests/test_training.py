import json

import numpy as np
import pytest
import torch

from airybeamlab.dataset import DatasetManifest, TrainingRecord, write_records
from airybeamlab.scenario import Region, ScenarioConfig

from ampbt_trainer.cli import main as train_main
from ampbt_trainer.records import load_dataset
from ampbt_trainer.train import TrainConfig, train_ampbt, train_spbt

DIMS = (8, 4, 5)


def smoke_dataset(path, n=50, seed=0, length=16):
    """Synthetic but learnable records: the pattern encodes its labels."""
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n):
        labels = (int(rng.integers(DIMS[0])), int(rng.integers(DIMS[1])),
                  int(rng.integers(DIMS[2])))
        pattern = 0.05 * (rng.standard_normal(length) + 1j * rng.standard_normal(length))
        pattern[labels[0] % length] += 1.0
        pattern[labels[1] % length] += 1.0j
        pattern[(labels[2] + 8) % length] += 0.7 + 0.7j
        records.append(TrainingRecord(
            x_r=1.0, y_r=0.0, blockage_ratio=0.0,
            pattern=pattern.astype(np.complex64), labels=labels,
            gain=1.0))
    cfg = ScenarioConfig(100e9, 17, Region(0.0, 4.0, -2.0, 2.0))
    manifest = DatasetManifest(scenario=cfg.to_json_dict(), scenario_hash=cfg.hash(),
                               codebook={"l1": DIMS[0], "l2": DIMS[1], "l3": DIMS[2]},
                               record_count=n)
    write_records(path, records, manifest)
    return path


@pytest.fixture(scope="module")
def smoke_path(tmp_path_factory):
    return smoke_dataset(tmp_path_factory.mktemp("smoke") / "smoke.abtd")


def test_training_loss_decreases_for_some_seed(smoke_path):
    decreased = 0
    for seed in range(3):
        cfg = TrainConfig(epochs=2, patience=10, seed=seed, batch_size=16)
        _, report = train_ampbt(smoke_path, cfg)
        first = sum(report.epochs[0]["train_loss"])
        second = sum(report.epochs[1]["train_loss"])
        decreased += second < first
    assert decreased >= 1


def test_exported_checkpoint_matches_in_process_model(smoke_path, tmp_path):
    from airybeamlab.inference import forward_logits, load_weights
    from ampbt_trainer.export import export_weights
    from ampbt_trainer.model import patterns_to_input

    cfg = TrainConfig(epochs=3, patience=10, seed=1, batch_size=16)
    model, _ = train_ampbt(smoke_path, cfg)
    path = tmp_path / "m.ampw"
    export_weights(model, path)
    weights = load_weights(path)
    data = load_dataset(smoke_path)
    model.eval()
    for i in range(10):
        pat = data["patterns"][i]
        with torch.no_grad():
            ours = [l[0].numpy() for l in model(patterns_to_input(pat[None, :]))]
        theirs = forward_logits(pat, weights)
        for a, b in zip(ours, theirs):
            assert np.abs(a - b).max() < 1e-4


def test_ew_and_dwa_identical_through_second_epoch(smoke_path):
    # the weighting schemes only diverge once descent rates exist (t >= 3)
    ew = TrainConfig(epochs=2, patience=10, seed=2, batch_size=16, weighting="ew")
    dwa = TrainConfig(epochs=2, patience=10, seed=2, batch_size=16, weighting="dwa")
    _, rep_ew = train_ampbt(smoke_path, ew)
    _, rep_dwa = train_ampbt(smoke_path, dwa)
    for e_ew, e_dwa in zip(rep_ew.epochs, rep_dwa.epochs):
        assert e_dwa["lambda"] == [1.0, 1.0, 1.0]
        np.testing.assert_allclose(e_ew["train_loss"], e_dwa["train_loss"], rtol=1e-6)


def test_dwa_lambdas_sum_to_task_count(smoke_path):
    cfg = TrainConfig(epochs=5, patience=10, seed=0, batch_size=16, weighting="dwa")
    _, report = train_ampbt(smoke_path, cfg)
    for epoch in report.epochs:
        assert sum(epoch["lambda"]) == pytest.approx(3.0)
    assert report.epochs[0]["lambda"] == [1.0, 1.0, 1.0]
    assert report.epochs[1]["lambda"] == [1.0, 1.0, 1.0]


def test_single_task_training(smoke_path):
    cfg = TrainConfig(epochs=2, patience=10, seed=0, batch_size=16)
    model, report = train_spbt(smoke_path, cfg, task=1)
    assert model.class_counts == (DIMS[1],)
    assert len(report.epochs[0]["train_loss"]) == 1


def test_cli_trains_and_reports(smoke_path, tmp_path):
    out = tmp_path / "m.ampw"
    report = tmp_path / "report.json"
    rc = train_main(["--data", str(smoke_path), "--out", str(out),
                     "--epochs", "2", "--batch", "16", "--seed", "0",
                     "--report", str(report)])
    assert rc == 0
    assert out.exists()
    rep = json.loads(report.read_text())
    assert len(rep["epochs"]) == 2
    for key in ("train_loss", "lambda", "val_loss", "val_accuracy"):
        assert key in rep["epochs"][0]

    from airybeamlab.inference import load_weights
    weights = load_weights(out)
    assert weights.descriptor["class_counts"] == list(DIMS)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(weighting="nope")
    with pytest.raises(ValueError):
        TrainConfig(temperature=0.0)
