"""Query-only black-box access to a target classifier, with exact query accounting."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .nn import Adam, Model, cross_entropy, backward, mlp_spec


class BudgetExhausted(RuntimeError):
    """Raised when a query batch would push the ledger past its budget."""


class QueryLedger:
    """Counts target queries per input row against a budget ``Q``."""

    def __init__(self, budget, enforce=True):
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self.budget = budget
        self.enforce = enforce
        self._q = 0
        self._lock = threading.Lock()

    @property
    def q(self):
        return self._q

    @property
    def remaining(self):
        if self.budget is None:
            return float("inf")
        return self.budget - self._q

    def consume(self, n):
        """Atomically check the budget and charge ``n`` queries."""
        n = int(n)
        if n < 0:
            raise ValueError("cannot consume a negative number of queries")
        with self._lock:
            if self.enforce and self.budget is not None and self._q + n > self.budget:
                raise BudgetExhausted(
                    f"batch of {n} rows would exceed budget ({self._q}/{self.budget} used)"
                )
            self._q += n

    def __repr__(self):
        return f"QueryLedger(q={self._q}, budget={self.budget})"


def _sealed_query_fn(model):
    model = model.copy().eval()

    def run(batch):
        return model.predict(batch)

    return run


class BlackBoxOracle:
    """Soft-label query interface around a hidden model.

    Public surface: ``query``, ``ledger``, ``input_dim``, ``output_dim``.
    The model itself is captured in a closure and never stored as an attribute.
    """

    __slots__ = ("_run", "ledger", "input_dim", "output_dim", "_dedupe", "_seen", "_check_range")

    def __init__(self, target, budget=None, enforce=True, dedupe=False, check_range=True):
        self._run = _sealed_query_fn(target)
        self.ledger = QueryLedger(budget, enforce=enforce)
        self.input_dim = target.input_dim
        self.output_dim = target.output_dim
        self._dedupe = dedupe
        self._seen = set()
        self._check_range = check_range

    def query(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise ValueError(f"query batch must have shape (B, {self.input_dim}), got {batch.shape}")
        if self._check_range and (np.any(batch < -1.0) or np.any(batch > 1.0) or not np.all(np.isfinite(batch))):
            raise ValueError("query inputs must lie in [-1, 1]")
        if self._dedupe:
            keys = [row.tobytes() for row in batch]
            fresh = {k for k in keys if k not in self._seen}
            self.ledger.consume(len(fresh))
            self._seen.update(fresh)
        else:
            self.ledger.consume(len(batch))
        return self._run(batch)


def query_cost_per_iteration(B, N_G, m, N_C):
    """Target queries spent by one outer attack iteration: ``B * (N_G * (m + 1) + N_C)``."""
    return B * (N_G * (m + 1) + N_C)


# -- target training --------------------------------------------------------


class TargetTrainingError(RuntimeError):
    pass


@dataclass
class TargetSpec:
    hidden: tuple = (64, 64)
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 64
    accuracy_floor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(self.hidden)

    def layer_spec(self, d, k):
        return mlp_spec([d, *self.hidden, k], head="softmax")


def accuracy(model, x, y):
    return float(np.mean(np.argmax(model.predict(x), axis=1) == y))


def train_target(spec, dataset, seed=None):
    """Train a softmax MLP on ``dataset`` with Adam; returns ``(model, test_accuracy)``."""
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    init_rng, order_rng = rng.spawn(2)
    model = Model(spec.layer_spec(dataset.d, dataset.k), seed=int(init_rng.integers(2**31)))
    opt = Adam(model.named_params(), lr=spec.lr)
    x, y = dataset.x_train, dataset.y_train
    n = len(x)
    model.train()
    for _ in range(spec.epochs):
        perm = order_rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = perm[start:start + spec.batch_size]
            model.zero_grad()
            loss = cross_entropy(model(x[idx]), y[idx])
            backward(loss)
            opt.step(model.gradients())
    model.eval()
    acc = accuracy(model, dataset.x_test, dataset.y_test)
    if acc < spec.accuracy_floor:
        raise TargetTrainingError(
            f"target test accuracy {acc:.4f} below floor {spec.accuracy_floor}"
        )
    return model, acc
