"""Divergences and classification losses."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

PROB_FLOOR = 1e-7


def _check_prob(v, name):
    if np.any(v < 0):
        raise ValueError(f"{name} has negative entries")
    sums = v.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError(f"{name} rows must sum to 1 (got {sums})")


def kl_divergence(p, q):
    """KL(p || q) for probability vectors, logs taken of values clamped at ``PROB_FLOOR``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    _check_prob(p, "p")
    _check_prob(q, "q")
    return float(np.sum(p * (np.log(np.maximum(p, PROB_FLOOR)) - np.log(np.maximum(q, PROB_FLOOR)))))


def kl_rows(p, q):
    """Per-row KL(p_b || q_b) on ndarrays, no validation (hot path)."""
    return np.sum(p * (np.log(np.maximum(p, PROB_FLOOR)) - np.log(np.maximum(q, PROB_FLOOR))), axis=1)


def kl_rows_tensor(p, q):
    """Per-row KL where either side may be a tape tensor."""
    p_t = p if isinstance(p, Tensor) else Tensor(p)
    q_t = q if isinstance(q, Tensor) else Tensor(q)
    return (p_t * (p_t.clamp_min(PROB_FLOOR).log() - q_t.clamp_min(PROB_FLOOR).log())).sum(axis=1)


def kl_loss(y_target, q):
    """Batch-mean KL(y_target || q); ``y_target`` is a fixed ndarray, ``q`` a tape tensor."""
    y_target = np.asarray(y_target, dtype=np.float64)
    log_p = np.log(np.maximum(y_target, PROB_FLOOR))
    entropy_term = np.sum(y_target * log_p) / y_target.shape[0]
    cross = (q.clamp_min(PROB_FLOOR).log() * y_target).sum() * (1.0 / y_target.shape[0])
    return cross * -1.0 + entropy_term


def cross_entropy(q, labels):
    """Mean −log q[label] for probability rows ``q``."""
    labels = np.asarray(labels, dtype=int)
    onehot = np.zeros(q.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    return (q.clamp_min(PROB_FLOOR).log() * onehot).sum() * (-1.0 / len(labels))
