"""Per-task losses and the adaptive task weighting.

Cross-entropy uses the natural logarithm (a fixed log base only rescales
gradients, which the learning rate absorbs). Zero predicted probability
at the true class is clamped at 1e-12 so the loss stays finite.

Dynamic weight averaging tracks the relative descent rate of each
task's epoch-mean training loss, w_i(t-1) = L_i(t-1) / L_i(t-2) for
t >= 3 and 1 before that, and sets lambda_i(t) = I * exp(w_i / T) /
sum_j exp(w_j / T), so the weights always sum to the task count I.
"""

import numpy as np
import torch

PROB_FLOOR = 1e-12


def cross_entropy(probs, labels) -> torch.Tensor:
    """Mean negative log-probability of the true classes for one task."""
    probs = probs if torch.is_tensor(probs) else torch.as_tensor(probs)
    labels = labels if torch.is_tensor(labels) else torch.as_tensor(labels)
    picked = probs.gather(1, labels.view(-1, 1)).clamp_min(PROB_FLOOR)
    return -picked.log().mean()


def cross_entropy_logits(logits, labels) -> torch.Tensor:
    """Numerically stable form used in the training loop."""
    return torch.nn.functional.cross_entropy(logits, labels)


def total_loss(task_losses, weights) -> torch.Tensor:
    if len(task_losses) != len(weights):
        raise ValueError("one weight per task loss required")
    if any(float(w) < 0 for w in weights):
        raise ValueError("task weights must be non-negative")
    out = None
    for loss, w in zip(task_losses, weights):
        term = float(w) * loss
        out = term if out is None else out + term
    return out


def dwa_weights(loss_history, temperature=2.0, n_tasks=3) -> np.ndarray:
    """Task weights for the upcoming epoch from epoch-mean loss history.

    ``loss_history`` holds one row per completed epoch. With fewer than
    two completed epochs every rate is 1 (uniform weights); a zero
    previous loss clamps its ratio to 1.
    """
    history = np.asarray(loss_history, dtype=float).reshape(-1, n_tasks)
    if len(history) < 2:
        rates = np.ones(n_tasks)
    else:
        prev, prev2 = history[-1], history[-2]
        with np.errstate(divide="ignore", invalid="ignore"):
            rates = np.where(prev2 > 0, prev / prev2, 1.0)
    e = np.exp(rates / temperature)
    return n_tasks * e / e.sum()
