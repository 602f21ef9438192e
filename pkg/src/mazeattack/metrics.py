from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EvalSet:
    """Held-out labelled data used only for measuring clones; never queried."""

    x: np.ndarray
    y: np.ndarray
    target_acc: float

    @classmethod
    def from_dataset(cls, dataset, target_acc):
        return cls(dataset.x_test, dataset.y_test, target_acc)


def normalized_accuracy(clone_acc, target_acc):
    if target_acc <= 0:
        raise ValueError("target accuracy must be positive to normalise against it")
    return clone_acc / target_acc


def clone_accuracy(clone, eval_set):
    return float(np.mean(np.argmax(clone.predict(eval_set.x), axis=1) == eval_set.y))


def agreement_rate(clone, reference, x):
    """Fraction of inputs on which the clone and ``reference`` agree on the argmax.

    ``reference`` is any callable returning class scores (e.g. a target model's
    ``predict``); it is evaluated directly, outside any query ledger.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("agreement needs a non-empty evaluation set")
    a = np.argmax(clone.predict(x), axis=1)
    b = np.argmax(np.asarray(reference(x)), axis=1)
    return float(np.mean(a == b))
