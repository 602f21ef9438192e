"""Desk-scale synthetic classification datasets, features scaled into [-1, 1]."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace

import numpy as np

KINDS = ("gaussian-blobs", "rings", "grid-patterns")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian-blobs"
    n_train: int = 4000
    n_test: int = 1000
    d: int = 32
    k: int = 4
    seed: int = 0
    sigma: float = 1.0
    # half the distance between neighbouring class centres, in units of sigma
    separation: float = 4.0
    # translation of all centres along a seeded random direction, in units of sigma
    shift: float = 0.0
    # seed for the sample draws; defaults to ``seed``. Centres depend on ``seed`` only.
    draw_seed: int | None = None
    # radius of the normalised data frame; 1.0 fills [-1, 1]^d
    extent: float = 1.0
    # noise scale of class 0 relative to sigma; a broad class 0 covers most of the cube
    class0_spread: float = 3.0

    def to_dict(self):
        return asdict(self)


@dataclass
class SyntheticDataset:
    spec: DatasetSpec
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def d(self):
        return self.x_train.shape[1]

    @property
    def k(self):
        return self.spec.k

    @property
    def kind(self):
        return self.spec.kind


def _balanced_labels(n, k, rng):
    return rng.permutation(np.arange(n) % k)


def _orthonormal(d, n, rng):
    q, _ = np.linalg.qr(rng.normal(size=(d, max(n, 1))))
    return q[:, :n].T


def _blob_frame(spec, rng_centres):
    """Class centres and the scale mapping raw coordinates into [-1, 1]."""
    a = spec.separation * spec.sigma * np.sqrt(2.0)
    if spec.kind == "gaussian-blobs":
        if spec.k > spec.d:
            raise ValueError(f"gaussian-blobs supports at most d={spec.d} classes, got k={spec.k}")
        centres = a * _orthonormal(spec.d, spec.k, rng_centres)
    else:
        bits = max(1, int(np.ceil(np.log2(spec.k))))
        if bits > min(spec.d, 10):
            raise ValueError(f"grid-patterns cannot represent k={spec.k} classes in d={spec.d}")
        axes = _orthonormal(spec.d, bits, rng_centres)
        signs = np.array([[1.0 if (i >> b) & 1 else -1.0 for b in range(bits)] for i in range(2**bits)])
        centres = (a / 2.0) * signs @ axes
    direction = _orthonormal(spec.d, 1, rng_centres)[0]
    scale = np.abs(centres).max() + 5.0 * spec.sigma * max(spec.class0_spread, 1.0)
    return centres, direction, scale


def _draw(spec, n, centres, direction, scale, rng):
    y = _balanced_labels(n, spec.k, rng)
    if spec.kind == "rings":
        # concentric circles in the plane spanned by the two rows of ``centres``
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        radii = 0.9 * (y + 1) / spec.k + rng.normal(scale=0.02 * spec.sigma, size=n)
        x = (radii * np.cos(theta))[:, None] * centres[0] + (radii * np.sin(theta))[:, None] * centres[1]
        x = spec.extent * (x + 0.02 * spec.sigma * rng.normal(size=(n, spec.d)))
    else:
        if spec.kind == "gaussian-blobs":
            which = y
        else:
            # several grid cells share a label: cells i with i % k == label
            counts = (len(centres) - y + spec.k - 1) // spec.k
            which = y + spec.k * (rng.integers(0, 1 << 30, size=n) % counts)
        sig = np.where(y == 0, spec.sigma * spec.class0_spread, spec.sigma)
        x = centres[which] + sig[:, None] * rng.normal(size=(n, spec.d))
        x = spec.extent * (x + spec.shift * spec.sigma * direction) / scale
    return np.clip(x, -1.0, 1.0), y


def make_dataset(spec=None, **overrides):
    spec = replace(spec or DatasetSpec(), **overrides)
    if spec.kind not in KINDS:
        raise ValueError(f"unknown dataset kind {spec.kind!r}; expected one of {KINDS}")
    if spec.k < 2:
        raise ValueError("need at least 2 classes")
    if spec.class0_spread <= 0:
        raise ValueError("class0_spread must be positive")
    if spec.kind == "rings" and spec.d < 2:
        raise ValueError("rings needs d >= 2")
    if spec.kind == "rings" and spec.k > 16:
        raise ValueError(f"rings supports at most 16 classes, got k={spec.k}")
    centre_rng = np.random.default_rng([spec.seed, 0])
    draw_seed = spec.seed if spec.draw_seed is None else spec.draw_seed
    train_rng = np.random.default_rng([draw_seed, 1])
    test_rng = np.random.default_rng([draw_seed, 2])
    if spec.kind == "rings":
        centres, direction, scale = _orthonormal(spec.d, 2, centre_rng), None, None
    else:
        centres, direction, scale = _blob_frame(spec, centre_rng)
    x_tr, y_tr = _draw(spec, spec.n_train, centres, direction, scale, train_rng)
    x_te, y_te = _draw(spec, spec.n_test, centres, direction, scale, test_rng)
    return SyntheticDataset(spec, x_tr, y_tr, x_te, y_te)


def surrogate_spec(target_spec, kind="shifted-blobs", shift=1.0):
    """A surrogate distribution standing in for an attacker's alternate dataset.

    ``shifted-blobs`` keeps the target's class geometry but moves every centre
    and redraws all samples; ``rings`` is an unrelated distribution.
    """
    base = target_spec.draw_seed if target_spec.draw_seed is not None else target_spec.seed
    if kind == "shifted-blobs":
        return replace(target_spec, shift=shift, draw_seed=base + 7919)
    if kind == "rings":
        return replace(target_spec, kind="rings", draw_seed=base + 7919)
    if kind == "matched":
        return replace(target_spec, draw_seed=base + 7919)
    raise ValueError(f"unknown surrogate kind {kind!r}")


def load_csv_dataset(train_path, test_path, k=None):
    """Load ``label,f1,...,fd`` CSV files (no header) into a ``SyntheticDataset`` shell."""

    def read(path):
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        arr = np.array(rows, dtype=np.float64)
        return np.clip(arr[:, 1:], -1.0, 1.0), arr[:, 0].astype(int)

    x_tr, y_tr = read(train_path)
    x_te, y_te = read(test_path)
    k = k or int(max(y_tr.max(), y_te.max()) + 1)
    spec = DatasetSpec(kind="file", n_train=len(x_tr), n_test=len(x_te), d=x_tr.shape[1], k=k)
    return SyntheticDataset(spec, x_tr, y_tr, x_te, y_te)
