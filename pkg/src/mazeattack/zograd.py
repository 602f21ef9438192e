"""Forward-difference gradient estimation on random unit-sphere directions.

Estimates are taken at the generator's pre-tanh activation ``x_p`` so that every
perturbed point ``tanh(x_p + eps * u)`` is still a valid query in [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import backward


@dataclass(frozen=True)
class ZoConfig:
    epsilon: float = 1e-3
    m: int = 10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.m < 1:
            raise ValueError("m must be at least 1")


@dataclass
class GradientEstimate:
    ghat: np.ndarray
    queries_spent: int


def sample_sphere(d, m, rng, batch=None):
    """``m`` directions uniform on the unit sphere in R^d (normalised Gaussians).

    With ``batch`` set, returns an (m, batch, d) array: one direction per
    perturbation index and batch row.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be positive")
    shape = (m, d) if batch is None else (m, batch, d)
    u = rng.standard_normal(shape)
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    # a zero draw has probability 0; redraw rather than divide by it
    while np.any(norms == 0):
        bad = (norms == 0)[..., 0]
        u[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(u, axis=-1, keepdims=True)
    return u / norms


def _finite(value, where):
    value = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite loss at {where}")
    return value


def fd_single(loss_at, x, u, epsilon, base=None):
    """Rank-one forward-difference estimate ``d * (L(x + eps u) - L(x)) / eps * u``."""
    x = np.asarray(x, dtype=np.float64)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    d = x.size
    f0 = _finite(loss_at(x) if base is None else base, x)
    x1 = x + epsilon * u
    f1 = _finite(loss_at(x1), x1)
    return d * (f1 - f0) / epsilon * u


def estimate_grad(loss_at, x, cfg, rng):
    """Averaged forward-difference gradient for a batch of points.

    ``loss_at`` maps a (B, d) batch to B per-row losses and is called m + 1
    times: once at ``x`` and once per perturbation index, each call covering all
    B rows with their own directions.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("estimate_grad expects a (B, d) batch")
    B, d = x.shape
    dirs = sample_sphere(d, cfg.m, rng, batch=B)
    spent = 0
    f0 = _finite(loss_at(x), "x")
    spent += B
    ghat = np.zeros_like(x)
    for i in range(cfg.m):
        xi = x + cfg.epsilon * dirs[i]
        fi = _finite(loss_at(xi), f"perturbation {i}")
        spent += B
        ghat += (d * (fi - f0) / cfg.epsilon)[:, None] * dirs[i]
    return GradientEstimate(ghat / cfg.m, spent)


def inject_and_backprop(x_p, ghat):
    """Backpropagate an externally supplied gradient seeded at the ``x_p`` node.

    ``x_p`` is the generator's pre-tanh tensor from a taped forward pass; the
    gradients land in ``.grad`` of the generator parameters.
    """
    g = ghat.ghat if isinstance(ghat, GradientEstimate) else np.asarray(ghat, dtype=np.float64)
    if g.shape != x_p.shape:
        raise ValueError(f"gradient shape {g.shape} does not match x_p shape {x_p.shape}")
    backward(x_p, seed=g)


def generator_grads(G, z, ghat):
    """Gradient map over the generator's parameters from an injected ``x_p`` gradient."""
    G.zero_grad()
    x_p, _ = G.forward_split(z)
    inject_and_backprop(x_p, ghat)
    return G.gradients()


def cosine_similarity(a, b):
    a = np.ravel(a)
    b = np.ravel(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))
