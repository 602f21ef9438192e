"""Comparison attacks: JBDA, uniform noise, and surrogate-data distillation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .maze import AttackLog, ReplayBuffer, clone_step, make_clone
from .metrics import clone_accuracy, normalized_accuracy
from .nn import SGD, Adam, Model, Tensor, backward, cosine_lr, cross_entropy, grad, mlp_spec
from .oracle import BudgetExhausted


@dataclass
class JbdaConfig:
    n_seeds: int = 100
    rounds: int = 6
    epochs_per_round: int = 10
    lambda_jbda: float = 0.1
    lr: float = 1e-3
    batch_size: int = 128
    clone_hidden: tuple = (128, 128)
    seed: int = 0

    def __post_init__(self):
        self.clone_hidden = tuple(self.clone_hidden)
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not self.lambda_jbda > 0:
            raise ValueError("lambda_jbda must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown jbda config key: {unknown[0]}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["clone_hidden"] = list(self.clone_hidden)
        return d


@dataclass
class SurrogateConfig:
    kind: str = "shifted-blobs"
    epochs: int = 100
    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 128
    clone_hidden: tuple = (128, 128)
    seed: int = 0

    def __post_init__(self):
        self.clone_hidden = tuple(self.clone_hidden)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown surrogate config key: {unknown[0]}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["clone_hidden"] = list(self.clone_hidden)
        return d


def _clone_model(hidden, d, k, seed):
    return Model(mlp_spec([d, *hidden, k], head="softmax"), seed=seed)


def _log(log, q, clone, eval_set, eta=float("nan"), loss_c=float("nan")):
    acc = clone_accuracy(clone, eval_set)
    log.add(q=q, clone_acc=acc, norm_acc=normalized_accuracy(acc, eval_set.target_acc),
            loss_c=loss_c, eta_c=eta)


# -- JBDA ----------------------------------------------------------------


def jbda_augment(clone, x, y, lambda_jbda):
    """x' = clip(x + lambda * sign(d CE(C(x), y) / dx), -1, 1) with sign(0) = 0."""
    xt = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    clone.eval()
    loss = cross_entropy(clone(xt), y) * len(x)
    (g,) = grad(loss, [xt])
    return np.clip(xt.data + lambda_jbda * np.sign(g.data), -1.0, 1.0)


def _fit_hard(clone, opt, x, y, epochs, batch_size, rng):
    clone.train()
    for _ in range(epochs):
        perm = rng.permutation(len(x))
        for start in range(0, len(x), batch_size):
            idx = perm[start:start + batch_size]
            clone.zero_grad()
            backward(cross_entropy(clone(x[idx]), y[idx]))
            opt.step(clone.gradients())
    clone.eval()


def run_jbda(oracle, seeds, cfg, eval_set):
    """Jacobian-based dataset augmentation from a labelled seed pool.

    Each round perturbs every pool point once, labels the new points through
    the oracle, and retrains; the pool doubles per round.  Returns
    ``(clone, log, pool_sizes)``.
    """
    rng = np.random.default_rng(cfg.seed)
    init_rng, sample_rng, order_rng = rng.spawn(3)
    seeds = np.asarray(seeds, dtype=np.float64)
    pick = sample_rng.choice(len(seeds), size=min(cfg.n_seeds, len(seeds)), replace=False)
    pool_x = seeds[np.sort(pick)]
    clone = _clone_model(cfg.clone_hidden, oracle.input_dim, oracle.output_dim, int(init_rng.integers(2**31)))
    opt = Adam(clone.named_params(), lr=cfg.lr)
    log = AttackLog()
    _log(log, oracle.ledger.q, clone, eval_set)
    sizes = []
    try:
        pool_y = np.argmax(oracle.query(pool_x), axis=1)
        _fit_hard(clone, opt, pool_x, pool_y, cfg.epochs_per_round, cfg.batch_size, order_rng)
        sizes.append(len(pool_x))
        _log(log, oracle.ledger.q, clone, eval_set)
        for _ in range(cfg.rounds):
            new_x = jbda_augment(clone, pool_x, pool_y, cfg.lambda_jbda)
            new_y = np.argmax(oracle.query(new_x), axis=1)
            pool_x = np.concatenate([pool_x, new_x])
            pool_y = np.concatenate([pool_y, new_y])
            sizes.append(len(pool_x))
            _fit_hard(clone, opt, pool_x, pool_y, cfg.epochs_per_round, cfg.batch_size, order_rng)
            _log(log, oracle.ledger.q, clone, eval_set)
    except BudgetExhausted:
        log.truncated = True
    return clone, log, sizes


# -- Noise ---------------------------------------------------------------


def run_noise(oracle, cfg, eval_set):
    """Query x ~ U[-1, 1]^d until the budget is spent, distilling as in the clone phase.

    Uses the clone optimiser, schedule, and replay settings of ``cfg``
    (an ``AttackConfig``); every ``n_clone`` query batches are followed by
    ``n_replay`` replay steps.
    """
    d, k = oracle.input_dim, oracle.output_dim
    ss = np.random.SeedSequence(cfg.seed)
    init_rng, x_rng, replay_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    clone = make_clone(cfg, d, k, int(init_rng.integers(2**31)))
    opt = SGD(clone.named_params(), lr=cfg.lr_clone, momentum=cfg.clone_momentum)
    buffer = ReplayBuffer(d, k)
    B = cfg.batch_size
    planned = max(1, -(-cfg.budget // B))
    log = AttackLog()
    _log(log, 0, clone, eval_set, cfg.lr_clone)
    step, losses, eta = 0, [], cfg.lr_clone
    try:
        while oracle.ledger.remaining > 0:
            n = int(min(B, oracle.ledger.remaining))
            x = x_rng.uniform(-1.0, 1.0, size=(n, d))
            y = oracle.query(x)
            eta = cosine_lr(cfg.lr_clone, min(step, planned), planned)
            losses.append(clone_step(clone, opt, x, y, eta))
            buffer.add(x, y)
            step += 1
            if cfg.n_clone and step % cfg.n_clone == 0 and cfg.n_replay:
                batches = buffer.minibatches(B, replay_rng)
                for _ in range(cfg.n_replay):
                    bx, by = next(batches)
                    clone_step(clone, opt, bx, by, eta)
            if step % (cfg.log_every * max(cfg.n_clone, 1)) == 0:
                _log(log, oracle.ledger.q, clone, eval_set, eta, float(np.mean(losses)))
                losses = []
    except BudgetExhausted:
        log.truncated = True
    _log(log, oracle.ledger.q, clone, eval_set, eta, float(np.mean(losses)) if losses else float("nan"))
    clone.eval()
    return clone, log


# -- Surrogate data --------------------------------------------------------


def run_surrogate(oracle, surrogate_x, cfg, eval_set):
    """Label a surrogate set once through the oracle, then distil offline."""
    surrogate_x = np.asarray(surrogate_x, dtype=np.float64)
    if oracle.ledger.budget is not None and len(surrogate_x) > oracle.ledger.remaining:
        raise ValueError(
            f"surrogate set of {len(surrogate_x)} rows exceeds the remaining budget {oracle.ledger.remaining}"
        )
    d, k = oracle.input_dim, oracle.output_dim
    rng = np.random.default_rng(cfg.seed)
    init_rng, order_rng = rng.spawn(2)
    clone = _clone_model(cfg.clone_hidden, d, k, int(init_rng.integers(2**31)))
    log = AttackLog()
    _log(log, oracle.ledger.q, clone, eval_set, cfg.lr)
    labels = np.concatenate(
        [oracle.query(surrogate_x[i:i + cfg.batch_size]) for i in range(0, len(surrogate_x), cfg.batch_size)]
    )
    opt = SGD(clone.named_params(), lr=cfg.lr, momentum=cfg.momentum)
    n = len(surrogate_x)
    losses, eta = [], cfg.lr
    for epoch in range(cfg.epochs):
        eta = cosine_lr(cfg.lr, epoch, cfg.epochs)
        perm = order_rng.permutation(n)
        losses = [
            clone_step(clone, opt, surrogate_x[perm[s:s + cfg.batch_size]], labels[perm[s:s + cfg.batch_size]], eta)
            for s in range(0, n, cfg.batch_size)
        ]
    _log(log, oracle.ledger.q, clone, eval_set, eta, float(np.mean(losses)) if losses else float("nan"))
    clone.eval()
    return clone, log
