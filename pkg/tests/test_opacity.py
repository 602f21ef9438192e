import ast
from pathlib import Path

import numpy as np
import pytest

import mazeattack
from mazeattack import AttackConfig, BlackBoxOracle, JbdaConfig, PdConfig, SeedSet, SurrogateConfig
from mazeattack import run_jbda, run_maze, run_maze_pd, run_noise, run_surrogate

PUBLIC = {"query", "ledger", "input_dim", "output_dim"}
ATTACK_MODULES = ("maze.py", "pd.py", "baselines.py", "zograd.py")
SRC = Path(mazeattack.__file__).parent


def oracle_attribute_uses(path):
    tree = ast.parse(path.read_text())
    uses = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Attribute) and isinstance(node.value, ast.Name) and node.value.id == "oracle":
            uses.append((node.attr, node.lineno))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in ("getattr", "vars"):
            if node.args and isinstance(node.args[0], ast.Name) and node.args[0].id == "oracle":
                uses.append((node.func.id, node.lineno))
    return uses


@pytest.mark.parametrize("module", ATTACK_MODULES)
def test_attack_code_touches_only_the_public_oracle_surface(module):
    bad = [(a, n) for a, n in oracle_attribute_uses(SRC / module) if a not in PUBLIC]
    assert bad == []


@pytest.mark.parametrize("module", ATTACK_MODULES)
def test_attack_code_never_names_oracle_internals(module):
    text = (SRC / module).read_text()
    for private in ("_run", "_sealed_query_fn", "_seen", "__closure__"):
        assert private not in text


class Facade:
    """Exposes exactly the public members and nothing else."""

    __slots__ = PUBLIC

    def __init__(self, oracle):
        for name in PUBLIC:
            object.__setattr__(self, name, getattr(oracle, name))


def test_every_attack_runs_through_a_minimal_facade(small_task):
    ds, target, ev = small_task
    cfg = AttackConfig(budget=600, batch_size=8, m=2, latent_dim=4, gen_hidden=(8,), clone_hidden=(8,))
    seeds = SeedSet(ds.x_train[:20])
    runs = {
        "maze": lambda o: run_maze(o, cfg, ev),
        "maze-pd": lambda o: run_maze_pd(o, seeds, cfg, PdConfig(n_critic=1, critic_hidden=(8,)), ev),
        "noise": lambda o: run_noise(o, cfg, ev),
        "jbda": lambda o: run_jbda(o, seeds.x, JbdaConfig(n_seeds=10, rounds=1, epochs_per_round=1, clone_hidden=(8,)), ev),
        "surrogate": lambda o: run_surrogate(o, ds.x_train[:50], SurrogateConfig(epochs=1, clone_hidden=(8,)), ev),
    }
    for name, run in runs.items():
        oracle = BlackBoxOracle(target, budget=600)
        run(Facade(oracle))
        assert oracle.ledger.q > 0, name


def test_oracle_holds_no_reference_to_the_model(small_task):
    _, target, _ = small_task
    oracle = BlackBoxOracle(target)
    assert not hasattr(oracle, "__dict__")
    held = [getattr(oracle, s) for s in BlackBoxOracle.__slots__]
    assert not any(h is target for h in held)
    assert not any(isinstance(h, type(target)) for h in held)
    # the facade cannot rebuild outputs without spending queries
    before = oracle.ledger.q
    oracle.query(np.zeros((1, oracle.input_dim)))
    assert oracle.ledger.q == before + 1
