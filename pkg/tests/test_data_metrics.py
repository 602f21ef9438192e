import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mazeattack import (
    BlackBoxOracle,
    DatasetSpec,
    EvalSet,
    TargetSpec,
    agreement_rate,
    clone_accuracy,
    make_dataset,
    normalized_accuracy,
    surrogate_spec,
    train_target,
)
from mazeattack.data import load_csv_dataset
from mazeattack.nn import Model, mlp_spec


@pytest.mark.parametrize("kind", ["gaussian-blobs", "rings", "grid-patterns"])
@given(seed=st.integers(0, 10**6), k=st.integers(2, 6))
def test_datasets_are_balanced_and_in_range(kind, seed, k):
    ds = make_dataset(kind=kind, seed=seed, k=k, d=8, n_train=101, n_test=37)
    for x, y in ((ds.x_train, ds.y_train), (ds.x_test, ds.y_test)):
        assert x.shape[1] == 8
        assert np.all(np.abs(x) <= 1.0)
        counts = np.bincount(y, minlength=k)
        assert counts.max() - counts.min() <= 1


def test_same_seed_same_data():
    a, b = make_dataset(seed=3), make_dataset(seed=3)
    assert np.array_equal(a.x_train, b.x_train) and np.array_equal(a.y_test, b.y_test)
    assert not np.array_equal(a.x_train, make_dataset(seed=4).x_train)


def test_train_and_test_splits_are_disjoint():
    ds = make_dataset()
    train_rows = {r.tobytes() for r in ds.x_train}
    assert not any(r.tobytes() in train_rows for r in ds.x_test)


def test_default_task_shape():
    ds = make_dataset()
    assert ds.x_train.shape == (4000, 32) and ds.x_test.shape == (1000, 32) and ds.k == 4


def test_linear_probe_separates_two_plain_blobs():
    ds = make_dataset(k=2, class0_spread=1.0)
    _, acc = train_target(TargetSpec(hidden=(), epochs=30), ds)
    assert acc >= 0.99


def test_broad_class_zero_is_wider_than_the_rest():
    ds = make_dataset()
    spread = [ds.x_train[ds.y_train == c].std(axis=0).mean() for c in range(ds.k)]
    assert spread[0] > 2.5 * max(spread[1:])


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"kind": "spiral"}, "unknown dataset kind"),
        ({"k": 1}, "at least 2"),
        ({"k": 40, "d": 32}, "at most d=32"),
        ({"kind": "rings", "k": 17}, "at most 16"),
        ({"kind": "grid-patterns", "k": 2048, "d": 32}, "cannot represent"),
        ({"class0_spread": 0.0}, "positive"),
    ],
)
def test_unrepresentable_specs_are_rejected(overrides, message):
    with pytest.raises(ValueError, match=message):
        make_dataset(**overrides)


def test_surrogate_specs_share_centres_but_not_samples():
    base = DatasetSpec()
    target = make_dataset(base)
    for kind in ("matched", "shifted-blobs", "rings"):
        sur = make_dataset(surrogate_spec(base, kind))
        rows = {r.tobytes() for r in target.x_train}
        assert not any(r.tobytes() in rows for r in sur.x_train)
    with pytest.raises(ValueError):
        surrogate_spec(base, "mnist")


def test_csv_loader(tmp_path):
    (tmp_path / "tr.csv").write_text("0,0.5,-0.5\n1,2.0,0.1\n")
    (tmp_path / "te.csv").write_text("1,0.0,0.0\n")
    ds = load_csv_dataset(tmp_path / "tr.csv", tmp_path / "te.csv")
    assert ds.k == 2 and ds.d == 2
    assert ds.x_train[1, 0] == 1.0  # clipped into the cube
    assert list(ds.y_train) == [0, 1]


# -- metrics -----------------------------------------------------------------


def test_normalized_accuracy_examples():
    assert round(normalized_accuracy(89.85, 92.26), 3) == 0.974
    assert normalized_accuracy(0.8, 0.8) == 1.0
    assert normalized_accuracy(0.0, 0.9) == 0.0
    with pytest.raises(ValueError):
        normalized_accuracy(0.5, 0.0)


@pytest.fixture(scope="module")
def binary_task():
    ds = make_dataset(k=2, d=6, n_train=600, n_test=2000, class0_spread=1.0)
    target, acc = train_target(TargetSpec(hidden=(8,), epochs=20), ds)
    return ds, target, acc


def test_agreement_with_itself_is_one(binary_task):
    ds, target, acc = binary_task
    assert acc > 0.99
    assert agreement_rate(target, target.predict, ds.x_test) == 1.0


def test_constant_clone_agrees_half_the_time_on_balanced_data(binary_task):
    ds, target, _ = binary_task
    C = Model(mlp_spec([6, 2], head="softmax"), seed=0)
    C.named_params()["0.W"].data[...] = 0.0
    C.named_params()["0.b"].data[...] = [1.0, 0.0]
    assert agreement_rate(C, target.predict, ds.x_test) == pytest.approx(0.5, abs=0.03)


def test_random_clones_agree_about_one_in_k():
    ds = make_dataset(k=4, d=8, n_train=800, n_test=400, class0_spread=1.0)
    target, _ = train_target(TargetSpec(hidden=(16,), epochs=20), ds)
    x = np.random.default_rng(0).uniform(-1, 1, size=(400, 8))
    rates = []
    for s in range(60):
        C = Model(mlp_spec([8, 4], head="softmax"), seed=s)
        rates.append(agreement_rate(C, target.predict, x))
    assert np.mean(rates) == pytest.approx(0.25, abs=0.06)


def test_agreement_rejects_empty_sets(binary_task):
    _, target, _ = binary_task
    with pytest.raises(ValueError):
        agreement_rate(target, target.predict, np.zeros((0, 6)))


def test_evaluation_never_touches_the_ledger(binary_task):
    ds, target, acc = binary_task
    oracle = BlackBoxOracle(target, budget=5)
    ev = EvalSet.from_dataset(ds, acc)
    clone = Model(mlp_spec([6, 2], head="softmax"), seed=1)
    before = oracle.ledger.q
    clone_accuracy(clone, ev)
    agreement_rate(clone, target.predict, ev.x)
    assert oracle.ledger.q == before == 0
    assert clone_accuracy(target, ev) == acc
