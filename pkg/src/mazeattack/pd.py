"""Partial-data variant: a gradient-penalised Wasserstein critic pulls generated
queries toward a small set of unlabelled seed inputs."""

from __future__ import annotations

import csv
import struct
from dataclasses import asdict, dataclass, fields

import numpy as np

from .maze import (
    STREAM_CRITIC,
    STREAM_CRITIC_INIT,
    STREAM_DIRS,
    AttackState,
    disagreement,
    run_attack,
    zo_estimator,
)
from .nn import Adam, Model, Tensor, backward, grad, mlp_spec, no_grad
from .zograd import GradientEstimate


@dataclass
class SeedSet:
    """Unlabelled inputs from the target's training distribution."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError("seed inputs must be an (n, d) array")
        if len(self.x) == 0:
            raise ValueError("seed set is empty; the partial-data attack needs seed inputs")
        if np.any(np.abs(self.x) > 1.0) or not np.all(np.isfinite(self.x)):
            raise ValueError("seed inputs must lie in [-1, 1]")

    def __len__(self):
        return len(self.x)

    @property
    def d(self):
        return self.x.shape[1]

    def sample(self, n, rng):
        """``n`` rows drawn with replacement."""
        return self.x[rng.integers(0, len(self.x), size=n)]

    def check_disjoint(self, other):
        other = np.asarray(other, dtype=np.float64)
        seen = {row.tobytes() for row in other}
        if any(row.tobytes() in seen for row in self.x):
            raise ValueError("seed set overlaps the evaluation set")

    @classmethod
    def from_dataset(cls, dataset, n=100, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = rng.choice(len(dataset.x_train), size=min(n, len(dataset.x_train)), replace=False)
        seeds = cls(dataset.x_train[np.sort(idx)])
        seeds.check_disjoint(dataset.x_test)
        return seeds

    # -- files: CSV rows, or binary "<n:int64><d:int64>" then row-major f64, little-endian

    def save(self, path):
        if str(path).endswith(".csv"):
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerows([repr(float(v)) for v in row] for row in self.x)
        else:
            with open(path, "wb") as fh:
                fh.write(struct.pack("<qq", *self.x.shape))
                fh.write(self.x.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        if str(path).endswith(".csv"):
            with open(path, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r]
            return cls(np.array(rows, dtype=np.float64))
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 16:
            raise ValueError(f"{path}: truncated seed file header")
        n, d = struct.unpack("<qq", raw[:16])
        body = raw[16:]
        if n < 0 or d < 1 or len(body) != 8 * n * d:
            raise ValueError(f"{path}: header says {n}x{d} but body holds {len(body)} bytes")
        return cls(np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64))


@dataclass
class PdConfig:
    lambda_wgan: float = 10.0
    n_critic: int = 10
    lr_critic: float = 1e-4
    gp_weight: float = 10.0
    critic_hidden: tuple = (64, 64)
    # "zo": the critic term goes through the forward-difference estimator with the KL term;
    # "split": the critic term is differentiated exactly and added to the KL estimate
    mode: str = "zo"

    def __post_init__(self):
        self.critic_hidden = tuple(self.critic_hidden)
        if self.lambda_wgan < 0:
            raise ValueError("lambda_wgan must be non-negative")
        if self.n_critic < 0:
            raise ValueError("n_critic must be non-negative")
        if self.mode not in ("zo", "split"):
            raise ValueError(f"mode must be 'zo' or 'split', got {self.mode!r}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown pd config key: {unknown[0]}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["critic_hidden"] = list(self.critic_hidden)
        return d


def make_critic(d, hidden=(64, 64), seed=0):
    return Model(mlp_spec([d, *hidden, 1]), seed=seed)


def critic_scores(D, x):
    with no_grad():
        return D(np.asarray(x, dtype=np.float64)).data[:, 0]


def gradient_penalty(D, x_real, x_fake, alpha, gp_weight=10.0):
    """gp_weight * mean (||grad D(x_hat)|| - 1)^2 at x_hat = alpha x_real + (1 - alpha) x_fake.

    ``alpha`` has one entry per row.  The result stays differentiable in the
    critic parameters.
    """
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1, 1)
    x_hat = Tensor(alpha * x_real + (1.0 - alpha) * x_fake, requires_grad=True)
    (g,) = grad(D(x_hat).sum(), [x_hat], create_graph=True)
    return ((g.row_norm() - 1.0) ** 2).mean() * gp_weight


def critic_loss(D, x_real, x_fake, rng, gp_weight=10.0):
    """mean D(fake) - mean D(real) + gradient penalty at random interpolates."""
    x_real = np.asarray(x_real, dtype=np.float64)
    x_fake = np.asarray(x_fake, dtype=np.float64)
    if len(x_real) == 0:
        raise ValueError("critic needs at least one real seed input")
    if x_real.shape != x_fake.shape:
        raise ValueError(f"real batch {x_real.shape} and fake batch {x_fake.shape} differ in shape")
    alpha = rng.uniform(0.0, 1.0, size=len(x_real))
    wass = D(x_fake).mean() - D(x_real).mean()
    return wass + gradient_penalty(D, x_real, x_fake, alpha, gp_weight)


class PdState:
    """Critic, its optimiser, and the seed set for one partial-data run."""

    def __init__(self, attack_state, seeds, pd_cfg):
        if len(seeds) == 0:
            raise ValueError("seed set is empty")
        self.cfg = pd_cfg
        self.seeds = seeds
        self.attack = attack_state
        init_rng = attack_state.rng(STREAM_CRITIC_INIT)
        self.D = make_critic(seeds.d, pd_cfg.critic_hidden, int(init_rng.integers(2**31)))
        self.opt_D = Adam(self.D.named_params(), lr=pd_cfg.lr_critic, betas=(0.0, 0.9))
        self.rng = attack_state.rng(STREAM_CRITIC)
        self.losses = []


def critic_phase(pd_state):
    """N_d critic steps on seed vs freshly generated batches; issues no queries."""
    cfg, st = pd_state.cfg, pd_state.attack
    B, G, D = st.cfg.batch_size, st.G, pd_state.D
    for _ in range(cfg.n_critic):
        z = pd_state.rng.standard_normal((B, st.cfg.latent_dim))
        G.train()
        with no_grad():
            x_fake = G(z).data
        x_real = pd_state.seeds.sample(B, pd_state.rng)
        D.zero_grad()
        loss = critic_loss(D, x_real, x_fake, pd_state.rng, cfg.gp_weight)
        backward(loss)
        pd_state.opt_D.step(D.gradients())
        pd_state.losses.append(loss.item())
    return D


def generator_loss_pd(oracle, C, D, lambda_wgan):
    """Per-row L_G(x_p) = -KL(T(x) || C(x)) - lambda * D(x) at x = tanh(x_p)."""
    kl_part = disagreement(oracle, C)
    if lambda_wgan == 0:
        return kl_part

    def loss_at(x_p):
        return kl_part(x_p) - lambda_wgan * critic_scores(D, np.tanh(x_p))

    return loss_at


def critic_term_grad(D, x_p, lambda_wgan):
    """Exact per-row d(-lambda * D(tanh x_p)) / d x_p."""
    xp = Tensor(np.asarray(x_p, dtype=np.float64), requires_grad=True)
    (g,) = grad(D(xp.tanh()).sum() * (-lambda_wgan), [xp])
    return g.data


class SplitEstimator:
    """Forward-difference estimate of the KL term plus the exact critic-term gradient."""

    def __init__(self, base, D, lambda_wgan):
        self.base = base
        self.D = D
        self.lambda_wgan = lambda_wgan

    def __call__(self, x_p, loss_at):
        est = self.base(x_p, loss_at)
        return GradientEstimate(est.ghat + critic_term_grad(self.D, x_p, self.lambda_wgan), est.queries_spent)


def run_maze_pd(oracle, seeds, cfg, pd_cfg, eval_set, estimator=None, state=None, pd_state=None,
                trace=None, reference=None):
    """Partial-data attack: returns ``(clone, log)``.

    Pass ``state``/``pd_state`` to inspect the generator and critic afterwards.
    """
    if not isinstance(seeds, SeedSet):
        seeds = SeedSet(seeds)
    if seeds.d != oracle.input_dim:
        raise ValueError(f"seed inputs have d={seeds.d}, oracle expects {oracle.input_dim}")
    state = state or AttackState(cfg, oracle.input_dim, oracle.output_dim)
    pd_state = pd_state or PdState(state, seeds, pd_cfg)
    lam = pd_cfg.lambda_wgan
    if pd_cfg.mode == "split" and lam != 0:
        base = estimator or zo_estimator(cfg, state.rng(STREAM_DIRS))
        estimator = SplitEstimator(base, pd_state.D, lam)

        def loss_fn(C):
            return disagreement(oracle, C)
    else:

        def loss_fn(C):
            return generator_loss_pd(oracle, C, pd_state.D, lam)

    extra = (lambda _s: critic_phase(pd_state)) if pd_cfg.n_critic > 0 else None
    return run_attack(oracle, cfg, eval_set, estimator=estimator, loss_fn=loss_fn, extra_phase=extra,
                      state=state, trace=trace, reference=reference)


def critic_gap(D, G, seeds, n, rng, latent_dim):
    """mean D(seeds) - mean D(G(z)) over ``n`` draws of each."""
    z = rng.standard_normal((n, latent_dim))
    G.train()
    with no_grad():
        fake = G(z).data
    return float(np.mean(critic_scores(D, seeds.sample(n, rng))) - np.mean(critic_scores(D, fake)))
