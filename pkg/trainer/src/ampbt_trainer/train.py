"""Training loops for the multi-task and single-task classifiers.

Mini-batch Adam with per-epoch task reweighting (equal weights or
dynamic weight averaging over epoch-mean training losses), early
stopping on the validation equal-weight total loss, and export of the
best-validation checkpoint.
"""

import copy
import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .losses import cross_entropy_logits, dwa_weights, total_loss
from .model import AmpbtNet, SpbtNet, patterns_to_input
from .records import class_counts, load_dataset, split_indices


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 2e-4
    epochs: int = 100
    weighting: str = "ew"        # "ew" | "dwa"
    temperature: float = 2.0
    seed: int = 0
    patience: int = 10
    split_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.learning_rate <= 0 or self.temperature <= 0:
            raise ValueError("batch size, learning rate, and temperature must be positive")
        if self.weighting not in ("ew", "dwa"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")

    def to_json(self):
        return json.dumps({"epochs": self.epochs, "best_epoch": self.best_epoch,
                           "best_val_loss": self.best_val_loss}, indent=2)


def _batches(n, batch_size, generator):
    order = torch.randperm(n, generator=generator)
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size]


def _accuracy(logits, labels):
    return [float((lg.argmax(dim=1) == labels[:, i]).float().mean())
            for i, lg in enumerate(logits)]


def train_model(model, data, train_idx, val_idx, config: TrainConfig,
                task_slice=None):
    """Train in place; returns (report, best_state_dict).

    ``split`` is an optional (train_idx, val_idx) pair. ``task_slice`` restricts supervision to one label column for the
    single-task variant.
    """
    torch.manual_seed(config.seed)
    x = patterns_to_input(data["patterns"])
    labels = torch.from_numpy(data["labels"])
    if task_slice is not None:
        labels = labels[:, [task_slice]]
    n_tasks = len(model.class_counts)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    gen = torch.Generator().manual_seed(config.seed)

    report = TrainReport()
    history = []
    weights = np.ones(n_tasks)
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    for epoch in range(1, config.epochs + 1):
        if config.weighting == "dwa":
            weights = dwa_weights(history, config.temperature, n_tasks)
            assert abs(weights.sum() - n_tasks) < 1e-9
        model.train()
        epoch_losses = np.zeros(n_tasks)
        n_batches = 0
        for idx in _batches(len(train_idx), config.batch_size, gen):
            batch = torch.from_numpy(train_idx[idx.numpy()])
            logits = model(x[batch])
            losses = [cross_entropy_logits(lg, labels[batch][:, i])
                      for i, lg in enumerate(logits)]
            loss = total_loss(losses, weights)
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses += np.array([float(l.detach()) for l in losses])
            n_batches += 1
        epoch_losses /= n_batches
        history.append(epoch_losses.copy())

        model.eval()
        with torch.no_grad():
            vx = x[torch.from_numpy(val_idx)]
            vlabels = labels[torch.from_numpy(val_idx)]
            vlogits = model(vx)
            vlosses = [float(cross_entropy_logits(lg, vlabels[:, i]))
                       for i, lg in enumerate(vlogits)]
            vacc = _accuracy(vlogits, vlabels)
        val_total = float(sum(vlosses))
        report.epochs.append({
            "epoch": epoch,
            "train_loss": epoch_losses.tolist(),
            "lambda": np.asarray(weights, dtype=float).tolist(),
            "val_loss": vlosses,
            "val_accuracy": vacc,
        })
        if val_total < report.best_val_loss:
            report.best_val_loss = val_total
            report.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.load_state_dict(best_state)
    return report, best_state


def train_ampbt(dataset_path, config: TrainConfig, split=None):
    """Train the multi-task network on a record file; returns (model, report)."""
    data = load_dataset(dataset_path)
    counts = class_counts(data["manifest"])
    torch.manual_seed(config.seed)
    model = AmpbtNet(data["patterns"].shape[1], counts)
    train_idx, val_idx = (split if split is not None
                          else split_indices(len(data["patterns"]), config.split_seed)[:2])
    report, _ = train_model(model, data, train_idx, val_idx, config)
    return model, report


def train_spbt(dataset_path, config: TrainConfig, task: int, split=None):
    """Train one single-parameter network for the given task index."""
    data = load_dataset(dataset_path)
    counts = class_counts(data["manifest"])
    torch.manual_seed(config.seed)
    model = SpbtNet(data["patterns"].shape[1], counts[task])
    train_idx, val_idx = (split if split is not None
                          else split_indices(len(data["patterns"]), config.split_seed)[:2])
    report, _ = train_model(model, data, train_idx, val_idx, config, task_slice=task)
    return model, report
