import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mazeattack import AttackConfig, AttackLog, BlackBoxOracle, ReplayBuffer, run_maze, run_maze_whitebox
from mazeattack.maze import AttackState, run_attack
from mazeattack.nn import SGD


def small_cfg(**kw):
    base = dict(budget=2000, batch_size=8, m=2, n_gen=1, n_clone=2, n_replay=2, latent_dim=4,
                gen_hidden=(8,), clone_hidden=(8,), lr_gen=1e-2, log_every=1)
    base.update(kw)
    return AttackConfig(**base)


def test_default_cost_is_2048():
    assert AttackConfig().cost_per_iteration() == 2048


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        AttackConfig(m=0)
    with pytest.raises(ValueError):
        AttackConfig(n_replay=-1)
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0)
    with pytest.raises(ValueError, match="batch_size"):
        AttackConfig(batch_size=1)
    with pytest.raises(ValueError):
        AttackConfig(n_gen=0, n_clone=0)


def test_config_dict_round_trip():
    cfg = small_cfg(seed=3)
    assert AttackConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(KeyError, match="unknown attack config key: bogus"):
        AttackConfig.from_dict({"bogus": 1})


# -- replay buffer -------------------------------------------------------------


def test_buffer_keeps_every_pair_in_order():
    buf = ReplayBuffer(2, 3)
    buf.add(np.ones((2, 2)), np.full((2, 3), 1 / 3))
    buf.add(np.zeros((1, 2)), np.full((1, 3), 1 / 3))
    assert len(buf) == 3
    x, _ = next(buf.minibatches(10, np.random.default_rng(0)))
    assert sorted(x[:, 0]) == [0.0, 1.0, 1.0]


def test_buffer_stores_copies():
    buf = ReplayBuffer(1, 1)
    x = np.zeros((1, 1))
    buf.add(x, np.ones((1, 1)))
    x[0, 0] = 9.0
    assert next(buf.minibatches(1, np.random.default_rng(0)))[0][0, 0] == 0.0


def test_minibatches_visit_each_row_once_per_pass():
    buf = ReplayBuffer(1, 1)
    buf.add(np.arange(10.0)[:, None], np.ones((10, 1)))
    it = buf.minibatches(4, np.random.default_rng(1))
    first_pass = np.concatenate([next(it)[0] for _ in range(3)])[:, 0]
    assert sorted(first_pass) == list(range(10))


def test_capped_buffer_evicts_down_to_cap():
    buf = ReplayBuffer(1, 1, cap=5)
    for i in range(4):
        buf.add(np.full((3, 1), float(i)), np.ones((3, 1)))
    assert len(buf) == 5


# -- log ---------------------------------------------------------------------


def test_log_is_strictly_increasing_in_q(tmp_path):
    log = AttackLog()
    log.add(q=0, norm_acc=0.1)
    log.add(q=0, norm_acc=0.2)
    log.add(q=10, norm_acc=0.95)
    assert [r["q"] for r in log.rows] == [0, 10]
    assert log.queries_to_reach(0.9) == 10
    assert log.queries_to_reach(0.99) == float("inf")
    log.to_csv(tmp_path / "log.csv")
    back = AttackLog.from_csv(tmp_path / "log.csv")
    assert back.rows[1]["q"] == 10 and back.rows[1]["norm_acc"] == 0.95


# -- loop behaviour ------------------------------------------------------------


@settings(max_examples=15)
@given(
    B=st.integers(2, 6), m=st.integers(1, 4), n_gen=st.integers(0, 2), n_clone=st.integers(0, 2),
    n_replay=st.integers(0, 2), extra=st.integers(0, 3),
)
def test_every_iteration_spends_exactly_its_cost(small_task, B, m, n_gen, n_clone, n_replay, extra):
    if n_gen + n_clone == 0:
        n_clone = 1
    _, target, ev = small_task
    cfg = small_cfg(batch_size=B, m=m, n_gen=n_gen, n_clone=n_clone, n_replay=n_replay)
    cost = cfg.cost_per_iteration()
    cfg = small_cfg(batch_size=B, m=m, n_gen=n_gen, n_clone=n_clone, n_replay=n_replay, budget=3 * cost + extra % cost)
    oracle = BlackBoxOracle(target, budget=cfg.budget)
    _, log = run_maze(oracle, cfg, ev)
    qs = [r["q"] for r in log.rows]
    assert np.all(np.diff(qs) == cost)
    assert log.iterations == 3 and oracle.ledger.q == 3 * cost
    assert not log.truncated


def test_budget_below_one_iteration_runs_nothing(small_task):
    _, target, ev = small_task
    cfg = small_cfg()
    oracle = BlackBoxOracle(target, budget=cfg.cost_per_iteration() - 1)
    clone, log = run_maze(oracle, cfg, ev)
    assert log.iterations == 0 and oracle.ledger.q == 0
    assert len(log.rows) == 1


def test_zero_budget_returns_the_initial_clone(small_task):
    _, target, ev = small_task
    cfg = small_cfg(budget=0)
    clone, log = run_maze(BlackBoxOracle(target, budget=0), cfg, ev)
    fresh = AttackState(cfg, target.input_dim, target.output_dim).C
    for k, v in fresh.state().items():
        assert np.array_equal(clone.state()[k], v)


def test_runs_are_bit_identical_under_a_shared_seed(small_task):
    _, target, ev = small_task
    cfg = small_cfg(seed=7)
    a, la = run_maze(BlackBoxOracle(target, budget=cfg.budget), cfg, ev)
    b, lb = run_maze(BlackBoxOracle(target, budget=cfg.budget), cfg, ev)
    for k, v in a.state().items():
        assert v.tobytes() == b.state()[k].tobytes()
    assert repr(la.rows) == repr(lb.rows)


def test_different_seeds_give_different_clones(small_task):
    _, target, ev = small_task
    a, _ = run_maze(BlackBoxOracle(target, budget=2000), small_cfg(seed=1), ev)
    b, _ = run_maze(BlackBoxOracle(target, budget=2000), small_cfg(seed=2), ev)
    assert not np.array_equal(a.state()["0.W"], b.state()["0.W"])


def test_replay_spends_no_queries(small_task):
    _, target, ev = small_task
    spent = []
    for n_replay in (0, 5):
        oracle = BlackBoxOracle(target, budget=2000)
        run_maze(oracle, small_cfg(n_replay=n_replay), ev)
        spent.append(oracle.ledger.q)
    assert spent[0] == spent[1]


def test_perfect_clone_is_a_fixed_point(small_task):
    _, target, ev = small_task
    cfg = small_cfg(clone_hidden=(16,), n_replay=0)
    state = AttackState(cfg, target.input_dim, target.output_dim)
    state.C = target.copy()
    state.opt_C = SGD(state.C.named_params(), lr=cfg.lr_clone, momentum=cfg.clone_momentum)
    clone, log = run_attack(BlackBoxOracle(target, budget=cfg.budget), cfg, ev, state=state)
    for k, v in target.state().items():
        assert np.allclose(clone.state()[k], v, atol=1e-9)
    assert all(abs(r["loss_c"]) < 1e-9 for r in log.rows[1:])


def test_clone_loss_falls_over_a_short_attack(small_task):
    _, target, ev = small_task
    cfg = small_cfg(budget=20000, batch_size=32, log_every=5)
    _, log = run_maze(BlackBoxOracle(target, budget=cfg.budget), cfg, ev)
    losses = [r["loss_c"] for r in log.rows[1:]]
    assert losses[-1] < losses[0]
    assert log.final["norm_acc"] > 1 / 3


def test_whitebox_charges_the_same_queries(small_task):
    _, target, ev = small_task
    cfg = small_cfg()
    o1 = BlackBoxOracle(target, budget=cfg.budget)
    o2 = BlackBoxOracle(target, budget=cfg.budget)
    _, l1 = run_maze(o1, cfg, ev)
    _, l2 = run_maze_whitebox(target, cfg, ev, oracle=o2)
    assert o1.ledger.q == o2.ledger.q
    assert l1.iterations == l2.iterations


def test_trace_records_one_cosine_per_generator_step(small_task):
    from mazeattack.maze import WhiteBoxEstimator

    _, target, ev = small_task
    cfg = small_cfg(n_gen=2)
    oracle = BlackBoxOracle(target, budget=cfg.budget)
    wb = WhiteBoxEstimator(target, oracle.ledger, cfg.m)
    state = AttackState(cfg, target.input_dim, target.output_dim)
    wb.clone = state.C
    trace = []
    _, log = run_attack(oracle, cfg, ev, state=state, trace=trace, reference=lambda xp: wb.exact(xp)[0])
    assert len(trace) == 2 * log.iterations
    assert all(-1 <= t["cosine"] <= 1 for t in trace)
