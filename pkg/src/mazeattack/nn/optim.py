"""SGD / Adam and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_keys(params, grads):
    missing = [k for k in params if k not in grads]
    if missing:
        raise KeyError(f"missing gradient for parameter(s): {', '.join(missing)}")


class SGD:
    def __init__(self, params, lr=0.1, momentum=0.0):
        self.params = dict(params)
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.steps = 0

    def step(self, grads, lr=None):
        _check_keys(self.params, grads)
        lr = self.lr if lr is None else lr
        for k, p in self.params.items():
            g = grads[k]
            if self.momentum:
                v = self.velocity[k] = self.momentum * self.velocity[k] + g
            else:
                v = g
            p.data = p.data - lr * v
        self.steps += 1


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.steps = 0

    def step(self, grads, lr=None):
        _check_keys(self.params, grads)
        lr = self.lr if lr is None else lr
        self.steps += 1
        t = self.steps
        c1 = 1 - self.beta1**t
        c2 = 1 - self.beta2**t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p.data = p.data - lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def cosine_lr(initial_lr, t, total_steps):
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if not 0 <= t <= total_steps:
        raise ValueError(f"step {t} outside [0, {total_steps}]")
    if t == total_steps:
        return 0.0
    return 0.5 * initial_lr * (1.0 + math.cos(math.pi * t / total_steps))


@dataclass(frozen=True)
class LrSchedule:
    initial_lr: float
    total_steps: int

    def __call__(self, t):
        return cosine_lr(self.initial_lr, t, self.total_steps)
