"""The data-free attack loop: generator, clone, and experience-replay phases."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np

from .metrics import clone_accuracy, normalized_accuracy
from .nn import SGD, Model, Tensor, backward, cosine_lr, grad, kl_loss, kl_rows, kl_rows_tensor, mlp_spec, no_grad
from .oracle import BlackBoxOracle, BudgetExhausted, query_cost_per_iteration
from .zograd import GradientEstimate, ZoConfig, cosine_similarity, estimate_grad, inject_and_backprop

# RNG stream indices; spawned from one SeedSequence so adding a stream never shifts another
STREAM_GEN_INIT, STREAM_CLONE_INIT, STREAM_Z, STREAM_DIRS, STREAM_REPLAY, STREAM_EVICT = range(6)
STREAM_CRITIC_INIT, STREAM_CRITIC = 6, 7
N_STREAMS = 8


@dataclass
class AttackConfig:
    budget: int = 200_000
    epsilon: float = 1e-3
    m: int = 10
    batch_size: int = 128
    n_gen: int = 1
    n_clone: int = 5
    n_replay: int = 10
    lr_gen: float = 1e-4
    lr_clone: float = 0.1
    gen_momentum: float = 0.0
    clone_momentum: float = 0.9
    latent_dim: int = 16
    gen_hidden: tuple = (64, 64)
    clone_hidden: tuple = (128, 128)
    log_every: int = 50
    buffer_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.gen_hidden = tuple(self.gen_hidden)
        self.clone_hidden = tuple(self.clone_hidden)
        for name in ("m", "latent_dim", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (the generator uses batch normalisation)")
        for name in ("n_gen", "n_clone", "n_replay", "budget"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.cost_per_iteration() == 0:
            raise ValueError("an iteration must spend at least one query (n_gen or n_clone > 0)")

    def cost_per_iteration(self):
        return query_cost_per_iteration(self.batch_size, self.n_gen, self.m, self.n_clone)

    def planned_iterations(self):
        return max(1, self.budget // self.cost_per_iteration())

    def zo(self):
        return ZoConfig(self.epsilon, self.m)

    def to_dict(self):
        d = asdict(self)
        d["gen_hidden"] = list(self.gen_hidden)
        d["clone_hidden"] = list(self.clone_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown attack config key: {unknown[0]}")
        return cls(**d)


def make_generator(cfg, d, seed):
    spec = mlp_spec([cfg.latent_dim, *cfg.gen_hidden, d], batchnorm=True, head="tanh")
    return Model(spec, seed=seed)


def make_clone(cfg, d, k, seed):
    return Model(mlp_spec([d, *cfg.clone_hidden, k], head="softmax"), seed=seed)


class ReplayBuffer:
    """Every (x, T(x)) pair the attack has paid for."""

    def __init__(self, d, k, cap=None, rng=None):
        self.x = np.empty((0, d))
        self.y = np.empty((0, k))
        self._chunks = []
        self.cap = cap
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def _flush(self):
        if self._chunks:
            xs, ys = zip(*self._chunks)
            self.x = np.concatenate([self.x, *xs])
            self.y = np.concatenate([self.y, *ys])
            self._chunks = []

    def add(self, x, y):
        self._chunks.append((np.array(x, dtype=np.float64), np.array(y, dtype=np.float64)))
        if self.cap is not None:
            self._flush()
            overflow = len(self.x) - self.cap
            if overflow > 0:
                keep = np.sort(self.rng.choice(len(self.x), size=self.cap, replace=False))
                self.x, self.y = self.x[keep], self.y[keep]

    def __len__(self):
        return len(self.x) + sum(len(c[0]) for c in self._chunks)

    def minibatches(self, batch_size, rng):
        """Endless minibatches: uniform without replacement within a pass, reshuffled per pass."""
        self._flush()
        n = len(self.x)
        while True:
            perm = rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = perm[start:start + batch_size]
                yield self.x[idx], self.y[idx]


class AttackLog:
    COLUMNS = ("q", "clone_acc", "norm_acc", "loss_c", "loss_g", "eta_c", "eta_g")

    def __init__(self):
        self.rows = []
        self.truncated = False
        self.iterations = 0

    def add(self, **row):
        if self.rows and row["q"] <= self.rows[-1]["q"]:
            return
        self.rows.append({c: row.get(c, float("nan")) for c in self.COLUMNS})

    @property
    def final(self):
        return self.rows[-1]

    def queries_to_reach(self, norm_acc):
        """First logged q with normalised accuracy at or above ``norm_acc`` (inf if never)."""
        for r in self.rows:
            if r["norm_acc"] >= norm_acc:
                return r["q"]
        return float("inf")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r["q"]] + [repr(float(r[c])) for c in self.COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path):
        log = cls()
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                log.rows.append({c: (int(r[c]) if c == "q" else float(r[c])) for c in cls.COLUMNS})
        return log


# -- losses --------------------------------------------------------------


def disagreement(oracle, clone):
    """Per-row L_G(x_p) = -KL(T(tanh x_p) || C(tanh x_p)); each call queries B rows."""

    def loss_at(x_p):
        x = np.tanh(x_p)
        return -kl_rows(oracle.query(x), clone.predict(x))

    return loss_at


def zo_estimator(cfg, rng):
    zo = cfg.zo()

    def estimate(x_p, loss_at):
        return estimate_grad(loss_at, x_p, zo, rng)

    return estimate


class WhiteBoxEstimator:
    """Exact d L_G / d x_p by backpropagating through the target itself.

    Ablation only: it holds the target model directly.  It charges the ledger
    the same B * (m + 1) queries the forward-difference estimator would spend.
    """

    def __init__(self, target, ledger, m):
        self.target = target.copy().eval()
        self.ledger = ledger
        self.m = m
        self.clone = None

    def exact(self, x_p, extra_loss=None):
        xp = Tensor(x_p, requires_grad=True)
        x = xp.tanh()
        p_t = self.target(x)
        p_c = self.clone.eval()(x)
        loss = -kl_rows_tensor(p_t, p_c)
        if extra_loss is not None:
            loss = loss + extra_loss(x)
        (g,) = grad(loss.sum(), [xp])
        return g.data, loss.data

    def __call__(self, x_p, loss_at):
        B = x_p.shape[0]
        cost = B * (self.m + 1)
        self.ledger.consume(cost)
        g, _ = self.exact(x_p)
        return GradientEstimate(g, cost)


# -- phases --------------------------------------------------------------


class AttackState:
    """Models, optimisers, RNG streams, and buffer for one attack run."""

    def __init__(self, cfg, d, k):
        self.cfg = cfg
        ss = np.random.SeedSequence(cfg.seed)
        self.streams = [np.random.default_rng(s) for s in ss.spawn(N_STREAMS)]
        self.G = make_generator(cfg, d, int(self.streams[STREAM_GEN_INIT].integers(2**31)))
        self.C = make_clone(cfg, d, k, int(self.streams[STREAM_CLONE_INIT].integers(2**31)))
        self.opt_G = SGD(self.G.named_params(), lr=cfg.lr_gen, momentum=cfg.gen_momentum)
        self.opt_C = SGD(self.C.named_params(), lr=cfg.lr_clone, momentum=cfg.clone_momentum)
        self.buffer = ReplayBuffer(d, k, cfg.buffer_cap, self.streams[STREAM_EVICT])
        self.losses_c = []
        self.losses_g = []

    def rng(self, idx):
        return self.streams[idx]


def generator_phase(state, oracle, lr, estimator, loss_fn=None, trace=None, reference=None):
    """N_G generator steps driven by an estimated gradient at the pre-tanh layer."""
    cfg, G, C = state.cfg, state.G, state.C
    C.eval()
    loss_at = loss_fn(C) if loss_fn is not None else disagreement(oracle, C)
    for _ in range(cfg.n_gen):
        z = state.rng(STREAM_Z).standard_normal((cfg.batch_size, cfg.latent_dim))
        G.train()
        G.zero_grad()
        x_p, _ = G.forward_split(z)
        seen = []

        def recording(xp, _f=loss_at):
            v = _f(xp)
            if not seen:
                seen.append(float(np.mean(v)))
            return v

        est = estimator(x_p.data, recording)
        if seen:
            state.losses_g.append(seen[0])
        if trace is not None and reference is not None:
            exact = reference(x_p.data)
            trace.append({"q": oracle.ledger.q, "cosine": cosine_similarity(est.ghat, exact)})
        # the batch loss is the row mean, so the per-row gradient is scaled by 1/B
        inject_and_backprop(x_p, est.ghat / cfg.batch_size)
        state.opt_G.step(G.gradients(), lr=lr)


def clone_step(C, opt, x, y, lr):
    C.train()
    C.zero_grad()
    loss = kl_loss(y, C(x))
    backward(loss)
    opt.step(C.gradients(), lr=lr)
    return loss.item()


def clone_phase(state, oracle, lr):
    """N_C distillation steps on fresh generated queries; every pair goes to the buffer."""
    cfg, G = state.cfg, state.G
    for _ in range(cfg.n_clone):
        z = state.rng(STREAM_Z).standard_normal((cfg.batch_size, cfg.latent_dim))
        G.train()
        with no_grad():
            x = G(z).data
        y = oracle.query(x)
        state.losses_c.append(clone_step(state.C, state.opt_C, x, y, lr))
        state.buffer.add(x, y)


def replay_phase(state, lr):
    """N_R distillation steps on stored pairs; spends no queries."""
    cfg = state.cfg
    if cfg.n_replay == 0 or len(state.buffer) == 0:
        return
    batches = state.buffer.minibatches(cfg.batch_size, state.rng(STREAM_REPLAY))
    for _ in range(cfg.n_replay):
        x, y = next(batches)
        clone_step(state.C, state.opt_C, x, y, lr)


# -- outer loop ----------------------------------------------------------


def _log_row(log, state, oracle, eval_set, eta_c, eta_g):
    acc = clone_accuracy(state.C, eval_set)
    lc = float(np.mean(state.losses_c)) if state.losses_c else float("nan")
    lg = float(np.mean(state.losses_g)) if state.losses_g else float("nan")
    state.losses_c, state.losses_g = [], []
    log.add(
        q=oracle.ledger.q,
        clone_acc=acc,
        norm_acc=normalized_accuracy(acc, eval_set.target_acc),
        loss_c=lc,
        loss_g=lg,
        eta_c=eta_c,
        eta_g=eta_g,
    )


def run_attack(oracle, cfg, eval_set, estimator=None, loss_fn=None, extra_phase=None,
               state=None, trace=None, reference=None):
    """Shared outer loop; runs whole iterations while the budget covers one."""
    state = state or AttackState(cfg, oracle.input_dim, oracle.output_dim)
    estimator = estimator or zo_estimator(cfg, state.rng(STREAM_DIRS))
    if hasattr(estimator, "clone"):
        estimator.clone = state.C
    cost = cfg.cost_per_iteration()
    planned = cfg.planned_iterations()
    log = AttackLog()
    _log_row(log, state, oracle, eval_set, cfg.lr_clone, cfg.lr_gen)
    it = 0
    eta_c, eta_g = cfg.lr_clone, cfg.lr_gen
    try:
        while oracle.ledger.remaining >= cost:
            t = min(it, planned)
            eta_c = cosine_lr(cfg.lr_clone, t, planned)
            eta_g = cosine_lr(cfg.lr_gen, t, planned)
            generator_phase(state, oracle, eta_g, estimator, loss_fn, trace, reference)
            clone_phase(state, oracle, eta_c)
            replay_phase(state, eta_c)
            if extra_phase is not None:
                extra_phase(state)
            it += 1
            if it % cfg.log_every == 0:
                _log_row(log, state, oracle, eval_set, eta_c, eta_g)
    except BudgetExhausted:
        log.truncated = True
    log.iterations = it
    _log_row(log, state, oracle, eval_set, eta_c, eta_g)
    state.C.eval()
    return state.C, log


def run_maze(oracle, cfg, eval_set, estimator=None, trace=None, reference=None):
    """Data-free extraction: returns ``(clone, log)``."""
    return run_attack(oracle, cfg, eval_set, estimator=estimator, trace=trace, reference=reference)


def run_maze_whitebox(target, cfg, eval_set, oracle=None):
    """Same loop with exact generator gradients taken through ``target``.

    Queries are still charged to a ledger (``oracle``'s, or a fresh one with the
    configured budget) so both loops run the same number of iterations.
    """
    if oracle is None:
        oracle = BlackBoxOracle(target, budget=cfg.budget)
    est = WhiteBoxEstimator(target, oracle.ledger, cfg.m)
    return run_attack(oracle, cfg, eval_set, estimator=est)
