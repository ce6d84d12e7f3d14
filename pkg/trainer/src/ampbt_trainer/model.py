"""Torch modules for the multi-task and single-task beam classifiers.

The shared backbone is three conv(k=3, pad=1) -> batchnorm -> relu ->
maxpool(2) stages over a 2-channel (re, im) input. Each task owns a
stream of three attention modules (1x1 conv -> bn -> relu, 1x1 conv ->
bn -> sigmoid) whose masks gate the backbone features, plus one linear
head over the flattened stage-3 features. The single-task variant drops
the attention streams and keeps one head on the raw backbone output.
"""

import torch
from torch import nn

BACKBONE_CHANNELS = (64, 128, 256)
KERNEL = 3
POOL = 2
ATTN_MID_DIVISOR = 4
BN_EPS = 1e-5


class BackboneStage(nn.Module):
    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv = nn.Conv1d(c_in, c_out, KERNEL, padding=KERNEL // 2)
        self.bn = nn.BatchNorm1d(c_out, eps=BN_EPS)
        self.act = nn.ReLU()
        self.pool = nn.MaxPool1d(POOL)

    def forward(self, x):
        return self.pool(self.act(self.bn(self.conv(x))))


class AttentionModule(nn.Module):
    def __init__(self, c_in, c_feat):
        super().__init__()
        mid = c_feat // ATTN_MID_DIVISOR
        self.conv1 = nn.Conv1d(c_in, mid, 1)
        self.bn1 = nn.BatchNorm1d(mid, eps=BN_EPS)
        self.conv2 = nn.Conv1d(mid, c_feat, 1)
        self.bn2 = nn.BatchNorm1d(c_feat, eps=BN_EPS)

    def forward(self, x):
        h = torch.relu(self.bn1(self.conv1(x)))
        return torch.sigmoid(self.bn2(self.conv2(h)))


def _final_length(input_length):
    n = input_length
    for _ in BACKBONE_CHANNELS:
        n = n // POOL
    return n


class AmpbtNet(nn.Module):
    """Shared backbone + per-task attention streams + per-task heads."""

    def __init__(self, input_length, class_counts):
        super().__init__()
        self.input_length = input_length
        self.class_counts = tuple(int(c) for c in class_counts)
        chans = (2,) + BACKBONE_CHANNELS
        self.backbone = nn.ModuleList(
            BackboneStage(a, b) for a, b in zip(chans, chans[1:]))
        self.attn = nn.ModuleList()
        for _ in self.class_counts:
            stream = nn.ModuleList()
            for j, cj in enumerate(BACKBONE_CHANNELS):
                c_in = cj if j == 0 else cj + BACKBONE_CHANNELS[j - 1]
                stream.append(AttentionModule(c_in, cj))
            self.attn.append(stream)
        feat = BACKBONE_CHANNELS[-1] * _final_length(input_length)
        self.heads = nn.ModuleList(nn.Linear(feat, c) for c in self.class_counts)
        self.pool = nn.MaxPool1d(POOL)

    def forward(self, x):
        feats = []
        for stage in self.backbone:
            x = stage(x)
            feats.append(x)
        logits = []
        for stream, head in zip(self.attn, self.heads):
            task = None
            for j, fj in enumerate(feats):
                inp = fj if task is None else torch.cat([fj, self.pool(task)], dim=1)
                task = fj * stream[j](inp)
            logits.append(head(task.flatten(1)))
        return logits


class SpbtNet(nn.Module):
    """Independent single-parameter network: full backbone + one head."""

    def __init__(self, input_length, n_classes):
        super().__init__()
        self.input_length = input_length
        self.class_counts = (int(n_classes),)
        chans = (2,) + BACKBONE_CHANNELS
        self.backbone = nn.ModuleList(
            BackboneStage(a, b) for a, b in zip(chans, chans[1:]))
        feat = BACKBONE_CHANNELS[-1] * _final_length(input_length)
        self.heads = nn.ModuleList([nn.Linear(feat, int(n_classes))])

    def forward(self, x):
        for stage in self.backbone:
            x = stage(x)
        return [self.heads[0](x.flatten(1))]


def patterns_to_input(patterns, normalize=True):
    """Complex (n, L) patterns -> float32 (n, 2, L) network input.

    ``normalize`` scales each pattern by its peak magnitude (all-zero
    patterns pass through unchanged), matching the ``max_abs``
    normalization recorded in exported weight files.
    """
    import numpy as np

    patterns = np.asarray(patterns)
    if normalize:
        peak = np.max(np.abs(patterns), axis=1, keepdims=True)
        patterns = np.where(peak > 0, patterns / np.where(peak == 0, 1, peak), patterns)
    x = np.stack([patterns.real, patterns.imag], axis=1).astype(np.float32)
    return torch.from_numpy(x)
