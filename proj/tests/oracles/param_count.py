"""Trainable parameter count of the default wdcnn stack, built in torch."""
import math
import sys

import torch.nn as nn


def same_pad(length, k, s):
    out = math.ceil(length / s)
    total = max((out - 1) * s + k - length, 0)
    return total // 2, total - total // 2, out


def build(num_classes):
    layers, c, length = [], 1, 1024
    for out_c, k, s, pad in [(16, 64, 16, "same"), (32, 3, 1, "same"), (64, 3, 1, "same"), (64, 3, 1, "valid")]:
        if pad == "same":
            left, right, _ = same_pad(length, k, s)
            layers.append(nn.ConstantPad1d((left, right), 0.0))
            length += left + right
        layers += [nn.Conv1d(c, out_c, k, s), nn.BatchNorm1d(out_c), nn.ReLU(), nn.MaxPool1d(2, 2)]
        length = ((length - k) // s + 1) // 2
        c = out_c
    layers += [nn.Flatten(), nn.Linear(c * length, 64), nn.ReLU(), nn.Dropout(0.5), nn.Linear(64, num_classes)]
    return nn.Sequential(*layers), c * length


if __name__ == "__main__":
    for k in map(int, sys.argv[1:] or ["5", "6"]):
        net, flat = build(k)
        print(k, flat, sum(p.numel() for p in net.parameters() if p.requires_grad))
