"""Continuous-action policy-gradient agents over the portfolio MDP.

Three algorithms share the network substrate:

* ``DdpgAgent`` — deterministic actor with a Q critic, target networks,
  and experience replay; the actor follows the critic's action gradient
  chained through the softmax head.
* ``GdpgAgent`` — DDPG plus a learned next-price-relative model feeding
  an augmented critic; the actor gradient mixes the model-free and
  model-based critics with a fixed weight ``alpha`` (``alpha = 1``
  collapses to plain DDPG, bit for bit).
* ``PpoAgent`` — stochastic diagonal-Gaussian policy in logit space with
  a clipped probability-ratio surrogate and a fitted value baseline.

Every random stream (initialization, exploration, replay sampling,
episode starts) derives from the config seed, so training runs replay
exactly.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, NumericalError
from .market_data import StateTensor
from .nn import (
    Adam,
    AsSequence,
    Branch,
    Center,
    Conv1d,
    Dense,
    Network,
    PerAsset,
    Relu,
    Rnn,
    Tensor,
    load_into,
    load_params,
    named_params,
    save_params,
    softmax_backward,
    softmax_head,
    stable_softmax,
)
from .portfolio_env import EpisodeStep, PortfolioEnv


@dataclass
class AgentConfig:
    """Shapes and hyperparameters for one agent instance."""

    n_assets: int
    window_size: int
    n_features: int
    close_feature: int = 0
    cash_index: int = 0
    # network sizes
    conv_channels: int = 8
    conv_kernel: int = 5
    hidden: int = 32
    rnn_hidden: int = 16
    # optimization
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    model_lr: float = 1e-3
    value_lr: float = 1e-3
    gamma: float = 0.99
    tau: float = 0.01
    noise_sigma: float = 0.1
    batch_size: int = 64
    replay_capacity: int = 100_000
    # gdpg
    alpha: float = 0.5
    gdpg_dual_ascent: bool = False
    dual_lr: float = 0.01
    # ppo
    clip_eps: float = 0.2
    ppo_epochs: int = 10
    ppo_init_std: float = 0.3
    ppo_use_prev_weights: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.clip_eps <= 0:
            raise ConfigError("clip_eps must be positive")
        if self.n_assets < 2:
            raise ConfigError("need cash plus at least one risky asset")


def _encoder(cfg: AgentConfig, rng: np.random.Generator) -> PerAsset:
    """Shared per-asset conv stack: a short filter over the window, then a
    second filter collapsing the remaining length to one column."""
    k1 = min(cfg.conv_kernel, cfg.window_size)
    l1 = cfg.window_size - k1 + 1
    return PerAsset(
        [
            Conv1d(cfg.n_features, cfg.conv_channels, k1, rng),
            Relu(),
            Conv1d(cfg.conv_channels, cfg.conv_channels, l1, rng),
            Relu(),
        ]
    )


def _enc_dim(cfg: AgentConfig) -> int:
    return cfg.n_assets * cfg.conv_channels


def build_actor(cfg: AgentConfig, rng: np.random.Generator, with_prev: bool = True) -> Network:
    """Logit-producing policy network over (window[, prev_weights])."""
    head_in = _enc_dim(cfg) + (cfg.n_assets if with_prev else 0)
    tail = [Dense(head_in, cfg.hidden, rng), Relu(), Dense(cfg.hidden, cfg.n_assets, rng)]
    if with_prev:
        return Network(
            [Branch([[Center(), _encoder(cfg, rng)], []]), *tail], rng_seed=cfg.seed
        )
    return Network([Center(), _encoder(cfg, rng), *tail], rng_seed=cfg.seed)


def build_critic(cfg: AgentConfig, rng: np.random.Generator) -> Network:
    """Scalar Q over (window, prev_weights, action)."""
    head_in = _enc_dim(cfg) + 2 * cfg.n_assets
    return Network(
        [
            Branch([[Center(), _encoder(cfg, rng)], [], []]),
            Dense(head_in, cfg.hidden, rng),
            Relu(),
            Dense(cfg.hidden, 1, rng),
        ],
        rng_seed=cfg.seed,
    )


def build_augmented_critic(cfg: AgentConfig, rng: np.random.Generator) -> Network:
    """Scalar Q over (window, prev_weights, action, predicted relatives)."""
    head_in = _enc_dim(cfg) + 3 * cfg.n_assets
    return Network(
        [
            Branch([[Center(), _encoder(cfg, rng)], [], [], []]),
            Dense(head_in, cfg.hidden, rng),
            Relu(),
            Dense(cfg.hidden, 1, rng),
        ],
        rng_seed=cfg.seed,
    )


def build_value(cfg: AgentConfig, rng: np.random.Generator, with_prev: bool = False) -> Network:
    head_in = _enc_dim(cfg) + (cfg.n_assets if with_prev else 0)
    tail = [Dense(head_in, cfg.hidden, rng), Relu(), Dense(cfg.hidden, 1, rng)]
    if with_prev:
        return Network(
            [Branch([[Center(), _encoder(cfg, rng)], []]), *tail], rng_seed=cfg.seed
        )
    return Network([Center(), _encoder(cfg, rng), *tail], rng_seed=cfg.seed)


def build_transition(cfg: AgentConfig, rng: np.random.Generator) -> Network:
    """Recurrent model of the next price-relative vector given the window."""
    return Network(
        [
            Center(),
            AsSequence(),
            Rnn(cfg.n_assets * cfg.n_features, cfg.rnn_hidden, rng),
            Dense(cfg.rnn_hidden, cfg.n_assets, rng),
        ],
        rng_seed=cfg.seed,
    )


class Batch(NamedTuple):
    windows: np.ndarray  # (B, A, W, F)
    prev_ws: np.ndarray  # (B, A)
    actions: np.ndarray  # (B, A)
    rewards: np.ndarray  # (B,)
    next_windows: np.ndarray
    next_prev_ws: np.ndarray
    dones: np.ndarray  # (B,) float 0/1


class ReplayBuffer:
    """Fixed-capacity ring of transitions with seeded uniform sampling
    (without replacement within a batch)."""

    def __init__(self, capacity: int, cfg: AgentConfig, rng: np.random.Generator):
        shape = (capacity, cfg.n_assets, cfg.window_size, cfg.n_features)
        self.windows = np.zeros(shape)
        self.prev_ws = np.zeros((capacity, cfg.n_assets))
        self.actions = np.zeros((capacity, cfg.n_assets))
        self.rewards = np.zeros(capacity)
        self.next_windows = np.zeros(shape)
        self.next_prev_ws = np.zeros((capacity, cfg.n_assets))
        self.dones = np.zeros(capacity)
        self.capacity = capacity
        self.rng = rng
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def add(self, step: EpisodeStep) -> None:
        i = self._head
        self.windows[i] = step.state.window
        self.prev_ws[i] = step.state.prev_weights
        self.actions[i] = step.action
        self.rewards[i] = step.reward
        self.next_windows[i] = step.next_state.window
        self.next_prev_ws[i] = step.next_state.prev_weights
        self.dones[i] = 1.0 if step.done else 0.0
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if batch_size > self._size:
            raise ValueError(f"batch {batch_size} exceeds buffer size {self._size}")
        idx = self.rng.choice(self._size, size=batch_size, replace=False)
        return Batch(
            self.windows[idx],
            self.prev_ws[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_windows[idx],
            self.next_prev_ws[idx],
            self.dones[idx],
        )


def soft_update(online: Network, target: Network, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    po, pt = online.params(), target.params()
    if len(po) != len(pt) or any(a.shape != b.shape for a, b in zip(po, pt)):
        raise ValueError("online and target network architectures differ")
    for o, t in zip(po, pt):
        t.data[...] = tau * o.data + (1.0 - tau) * t.data


def batch_from_steps(steps: list[EpisodeStep]) -> Batch:
    return Batch(
        np.stack([s.state.window for s in steps]),
        np.stack([s.state.prev_weights for s in steps]),
        np.stack([s.action for s in steps]),
        np.array([s.reward for s in steps]),
        np.stack([s.next_state.window for s in steps]),
        np.stack([s.next_state.prev_weights for s in steps]),
        np.array([1.0 if s.done else 0.0 for s in steps]),
    )


class DdpgAgent:
    """Deterministic policy gradient with target networks and replay."""

    kind = "ddpg"

    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg
        seeds = np.random.SeedSequence(cfg.seed).spawn(8)
        self._rngs = [np.random.default_rng(s) for s in seeds]
        self.actor = build_actor(cfg, self._rngs[0])
        self.critic = build_critic(cfg, self._rngs[1])
        self.target_actor = copy.deepcopy(self.actor)
        self.target_critic = copy.deepcopy(self.critic)
        self.actor_opt = Adam(self.actor.params(), cfg.actor_lr)
        self.critic_opt = Adam(self.critic.params(), cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.replay_capacity, cfg, self._rngs[2])
        self.noise_rng = self._rngs[3]
        self.episode_rng = self._rngs[4]
        self.noise_sigma = cfg.noise_sigma

    # -- acting ---------------------------------------------------------
    def _policy_logits(self, windows: np.ndarray, prev_ws: np.ndarray) -> np.ndarray:
        return self.actor.forward((windows, prev_ws))

    def act(self, state: StateTensor, explore: bool = False) -> np.ndarray:
        logits = self._policy_logits(state.window[None], state.prev_weights[None])[0]
        if explore and self.noise_sigma > 0:
            logits = logits + self.noise_rng.normal(0.0, self.noise_sigma, logits.shape)
        return softmax_head(logits)

    # -- critic ---------------------------------------------------------
    def _td_targets(self, batch: Batch) -> np.ndarray:
        next_logits = self.target_actor.forward((batch.next_windows, batch.next_prev_ws))
        next_actions = stable_softmax(next_logits)
        q_next = self.target_critic.forward(
            (batch.next_windows, batch.next_prev_ws, next_actions)
        )[:, 0]
        return batch.rewards + self.cfg.gamma * (1.0 - batch.dones) * q_next

    def critic_update(self, batch: Batch) -> float:
        targets = self._td_targets(batch)
        q = self.critic.forward((batch.windows, batch.prev_ws, batch.actions))[:, 0]
        err = q - targets
        loss = float(np.mean(err**2))
        if not math.isfinite(loss):
            raise NumericalError("non-finite TD loss")
        self.critic.zero_grads()
        self.critic.backward((2.0 * err / len(err))[:, None])
        self.critic_opt.step()
        return loss

    # -- actor ----------------------------------------------------------
    def actor_gradient(self, batch: Batch) -> np.ndarray:
        """Flat gradient of -mean Q(s, policy(s)) over the batch: the
        critic's action sensitivity chained through softmax and actor."""
        n = len(batch.rewards)
        logits = self.actor.forward((batch.windows, batch.prev_ws))
        actions = stable_softmax(logits)
        self.critic.zero_grads()
        self.critic.forward((batch.windows, batch.prev_ws, actions))
        input_grads = self.critic.backward(np.full((n, 1), -1.0 / n))
        self.critic.zero_grads()  # the critic itself is not being updated here
        d_logits = softmax_backward(actions, input_grads[2])
        self.actor.zero_grads()
        self.actor.backward(d_logits)
        grad = self.actor.flat_grad()
        self.actor.zero_grads()
        return grad

    def actor_update(self, batch: Batch) -> float:
        grad = self.actor_gradient(batch)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite actor gradient")
        self.actor.set_flat_grad(grad)
        self.actor_opt.step()
        return float(np.linalg.norm(grad))

    def soft_update_targets(self) -> None:
        soft_update(self.actor, self.target_actor, self.cfg.tau)
        soft_update(self.critic, self.target_critic, self.cfg.tau)

    def update(self, batch: Batch) -> dict[str, float]:
        critic_loss = self.critic_update(batch)
        grad_norm = self.actor_update(batch)
        self.soft_update_targets()
        return {"critic_loss": critic_loss, "actor_grad_norm": grad_norm}

    # -- persistence ------------------------------------------------------
    def _named(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for prefix, net in self._networks().items():
            out.update(named_params(net, prefix))
        return out

    def _networks(self) -> dict[str, Network]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def save(self, path: str | Path) -> None:
        save_params(path, self._named(), metadata={"agent": self.kind, "config": asdict(self.cfg)})

    @classmethod
    def load(cls, path: str | Path) -> "DdpgAgent":
        named, meta = load_params(path)
        cfg = AgentConfig(**meta["config"])
        agent = cls(cfg)
        for prefix, net in agent._networks().items():
            load_into(net, named, prefix)
        return agent


class GdpgAgent(DdpgAgent):
    """DDPG variant mixing model-free and model-based critic gradients."""

    kind = "gdpg"

    def __init__(self, cfg: AgentConfig):
        if cfg.window_size < 2:
            raise ConfigError("the transition model needs window_size >= 2")
        super().__init__(cfg)
        self.transition = build_transition(cfg, self._rngs[5])
        self.aug_critic = build_augmented_critic(cfg, self._rngs[6])
        self.target_aug_critic = copy.deepcopy(self.aug_critic)
        self.model_opt = Adam(self.transition.params(), cfg.model_lr)
        self.aug_opt = Adam(self.aug_critic.params(), cfg.critic_lr)
        self.alpha = cfg.alpha

    def _relatives_from_windows(self, windows: np.ndarray) -> np.ndarray:
        """Realized price relatives between the last two window columns;
        this is the quantity the transition model learns to predict."""
        prev_col = windows[:, :, -2, self.cfg.close_feature]
        y = 1.0 / prev_col
        y[:, self.cfg.cash_index] = 1.0
        return y

    def model_update(self, batch: Batch) -> float:
        target = self._relatives_from_windows(batch.next_windows)
        pred = self.transition.forward(batch.windows)
        err = pred - target
        loss = float(np.mean(err**2))
        if not math.isfinite(loss):
            raise NumericalError("non-finite transition-model loss")
        self.transition.zero_grads()
        self.transition.backward(2.0 * err / err.size)
        self.model_opt.step()
        return loss

    def aug_critic_update(self, batch: Batch) -> float:
        next_logits = self.target_actor.forward((batch.next_windows, batch.next_prev_ws))
        next_actions = stable_softmax(next_logits)
        y_next = self.transition.forward(batch.next_windows)
        q_next = self.target_aug_critic.forward(
            (batch.next_windows, batch.next_prev_ws, next_actions, y_next)
        )[:, 0]
        targets = batch.rewards + self.cfg.gamma * (1.0 - batch.dones) * q_next
        y_now = self.transition.forward(batch.windows)
        q = self.aug_critic.forward((batch.windows, batch.prev_ws, batch.actions, y_now))[:, 0]
        err = q - targets
        loss = float(np.mean(err**2))
        if not math.isfinite(loss):
            raise NumericalError("non-finite augmented TD loss")
        self.aug_critic.zero_grads()
        self.aug_critic.backward((2.0 * err / len(err))[:, None])
        self.aug_opt.step()
        return loss

    def _aug_actor_gradient(self, batch: Batch) -> np.ndarray:
        n = len(batch.rewards)
        y_pred = self.transition.forward(batch.windows)
        logits = self.actor.forward((batch.windows, batch.prev_ws))
        actions = stable_softmax(logits)
        self.aug_critic.zero_grads()
        self.aug_critic.forward((batch.windows, batch.prev_ws, actions, y_pred))
        input_grads = self.aug_critic.backward(np.full((n, 1), -1.0 / n))
        self.aug_critic.zero_grads()
        d_logits = softmax_backward(actions, input_grads[2])
        self.actor.zero_grads()
        self.actor.backward(d_logits)
        grad = self.actor.flat_grad()
        self.actor.zero_grads()
        return grad

    def actor_gradient(self, batch: Batch, alpha: float | None = None) -> np.ndarray:
        """alpha-mix of the model-free and model-based gradients; the
        endpoints short-circuit so alpha=1 is bit-identical to DDPG."""
        a = self.alpha if alpha is None else alpha
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha={a} outside [0, 1]")
        if a == 1.0:
            return super().actor_gradient(batch)
        if a == 0.0:
            return self._aug_actor_gradient(batch)
        return (1.0 - a) * self._aug_actor_gradient(batch) + a * super().actor_gradient(batch)

    def _dual_ascent_step(self, batch: Batch) -> None:
        """Optional constraint-weight update (off by default): move alpha
        along the gap between the model-based and model-free values."""
        logits = self.actor.forward((batch.windows, batch.prev_ws))
        actions = stable_softmax(logits)
        q_free = self.critic.forward((batch.windows, batch.prev_ws, actions))[:, 0]
        y_pred = self.transition.forward(batch.windows)
        q_model = self.aug_critic.forward(
            (batch.windows, batch.prev_ws, actions, y_pred)
        )[:, 0]
        gap = float(np.mean(q_model) - np.mean(q_free))
        self.alpha = float(np.clip(self.alpha + self.cfg.dual_lr * gap, 0.0, 1.0))

    def update(self, batch: Batch) -> dict[str, float]:
        critic_loss = self.critic_update(batch)
        model_loss = self.model_update(batch)
        aug_loss = self.aug_critic_update(batch)
        grad = self.actor_gradient(batch)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite actor gradient")
        self.actor.set_flat_grad(grad)
        self.actor_opt.step()
        self.soft_update_targets()
        soft_update(self.aug_critic, self.target_aug_critic, self.cfg.tau)
        if self.cfg.gdpg_dual_ascent:
            self._dual_ascent_step(batch)
        return {
            "critic_loss": critic_loss,
            "actor_grad_norm": float(np.linalg.norm(grad)),
            "model_loss": model_loss,
            "aug_critic_loss": aug_loss,
        }

    def _networks(self) -> dict[str, Network]:
        nets = super()._networks()
        nets.update(
            transition=self.transition,
            aug_critic=self.aug_critic,
            target_aug_critic=self.target_aug_critic,
        )
        return nets


def clipped_surrogate(ratio: np.ndarray, advantage: np.ndarray, eps: float) -> np.ndarray:
    """Per-sample clipped objective min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    out = np.zeros_like(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def gaussian_logp(z: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Row-wise diagonal-Gaussian log density in logit space."""
    var = np.exp(2.0 * log_std)
    quad = ((z - mean) ** 2 / var).sum(axis=-1)
    return -0.5 * quad - log_std.sum() - 0.5 * z.shape[-1] * math.log(2.0 * math.pi)


class PpoAgent:
    """Clipped-ratio policy gradient with a fitted value baseline.

    The policy is a diagonal Gaussian over pre-softmax logits; sampled
    logit vectors are pushed through softmax to land on the simplex, and
    densities are evaluated in logit space where they are well defined.
    The current portfolio weights are excluded from the policy input by
    default (``ppo_use_prev_weights`` restores them; with them included
    the learned policy tends to collapse onto uniform rebalancing).
    """

    kind = "ppo"

    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg
        seeds = np.random.SeedSequence(cfg.seed).spawn(8)
        self._rngs = [np.random.default_rng(s) for s in seeds]
        self.with_prev = cfg.ppo_use_prev_weights
        self.policy = build_actor(cfg, self._rngs[0], with_prev=self.with_prev)
        self.value = build_value(cfg, self._rngs[1], with_prev=self.with_prev)
        self.log_std = Tensor(np.full(cfg.n_assets, math.log(cfg.ppo_init_std)), "log_std")
        self.policy_opt = Adam([*self.policy.params(), self.log_std], cfg.actor_lr)
        self.value_opt = Adam(self.value.params(), cfg.value_lr)
        self.sample_rng = self._rngs[2]
        self.episode_rng = self._rngs[3]
        self.skipped_samples = 0
        self.last_grad_norm = 0.0

    def _inputs(self, windows: np.ndarray, prev_ws: np.ndarray):
        return (windows, prev_ws) if self.with_prev else windows

    def _mean_logits(self, windows: np.ndarray, prev_ws: np.ndarray) -> np.ndarray:
        return self.policy.forward(self._inputs(windows, prev_ws))

    def sample_action(self, state: StateTensor) -> tuple[np.ndarray, np.ndarray, float]:
        """Draw an action; returns (weights, logit sample, log-prob)."""
        mean = self._mean_logits(state.window[None], state.prev_weights[None])[0]
        std = np.exp(self.log_std.data)
        z = mean + std * self.sample_rng.normal(size=mean.shape)
        logp = float(gaussian_logp(z[None], mean[None], self.log_std.data)[0])
        return softmax_head(z), z, logp

    def act(self, state: StateTensor, explore: bool = False) -> np.ndarray:
        if explore:
            return self.sample_action(state)[0]
        mean = self._mean_logits(state.window[None], state.prev_weights[None])[0]
        return softmax_head(mean)

    def update(self, trajectory: list[EpisodeStep], epochs: int | None = None) -> float:
        """Run clipped-surrogate epochs over one complete trajectory;
        returns the final policy loss (negative surrogate objective)."""
        if not trajectory:
            raise ValueError("empty trajectory")
        if not trajectory[-1].done:
            raise ValueError("trajectory must reach a terminal step")
        epochs = self.cfg.ppo_epochs if epochs is None else epochs
        cfg = self.cfg
        windows = np.stack([s.state.window for s in trajectory])
        prev_ws = np.stack([s.state.prev_weights for s in trajectory])
        zs = np.stack([s.info["ppo_logit_sample"] for s in trajectory])
        logp_old = np.array([s.info["ppo_logp"] for s in trajectory])
        rewards = np.array([s.reward for s in trajectory])

        returns = discounted_returns(rewards, cfg.gamma)
        v0 = self.value.forward(self._inputs(windows, prev_ws))[:, 0]
        adv = returns - v0
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        loss = math.nan
        for _ in range(epochs):
            loss = self._policy_gradient(windows, prev_ws, zs, logp_old, adv)
            flat = [p.grad.ravel() for p in (*self.policy.params(), self.log_std)]
            self.last_grad_norm = float(np.linalg.norm(np.concatenate(flat)))
            self.policy_opt.step()
            self._value_epoch(windows, prev_ws, returns)
        return loss

    def _policy_gradient(self, windows, prev_ws, zs, logp_old, adv) -> float:
        """Fill policy and log-std grads with the clipped-surrogate loss
        gradient; returns the loss (negative surrogate objective)."""
        cfg = self.cfg
        mean = self._mean_logits(windows, prev_ws)
        logp_new = gaussian_logp(zs, mean, self.log_std.data)
        ratio = np.exp(logp_new - logp_old)
        valid = np.isfinite(ratio)
        self.skipped_samples += int((~valid).sum())
        n_valid = int(valid.sum())
        if n_valid == 0:
            raise NumericalError("every PPO ratio was non-finite; aborting update")
        surr = clipped_surrogate(np.where(valid, ratio, 1.0), adv, cfg.clip_eps)
        objective = float(surr[valid].mean())

        # d(objective)/d(logp): the clipped branch is flat, the raw branch
        # contributes A * ratio; maximizing, so the loss gets the negation
        raw = ratio * adv
        active = raw <= np.clip(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps) * adv
        coef = np.where(valid & active, adv * ratio, 0.0) / n_valid

        var = np.exp(2.0 * self.log_std.data)
        diff = zs - mean
        d_mean = -coef[:, None] * diff / var
        self.policy.zero_grads()
        self.log_std.grad[...] = 0.0
        self.policy.backward(d_mean)
        self.log_std.grad += (-coef[:, None] * (diff**2 / var - 1.0)).sum(axis=0)
        return -objective

    def _value_epoch(self, windows, prev_ws, returns) -> float:
        v = self.value.forward(self._inputs(windows, prev_ws))[:, 0]
        err = v - returns
        loss = float(np.mean(err**2))
        self.value.zero_grads()
        self.value.backward((2.0 * err / len(err))[:, None])
        self.value_opt.step()
        return loss

    def value_loss(self, trajectory: list[EpisodeStep]) -> float:
        windows = np.stack([s.state.window for s in trajectory])
        prev_ws = np.stack([s.state.prev_weights for s in trajectory])
        returns = discounted_returns(
            np.array([s.reward for s in trajectory]), self.cfg.gamma
        )
        v = self.value.forward(self._inputs(windows, prev_ws))[:, 0]
        return float(np.mean((v - returns) ** 2))

    def _networks(self) -> dict[str, Network]:
        return {"policy": self.policy, "value": self.value}

    def save(self, path: str | Path) -> None:
        named = {}
        for prefix, net in self._networks().items():
            named.update(named_params(net, prefix))
        named["log_std"] = self.log_std.data
        save_params(path, named, metadata={"agent": self.kind, "config": asdict(self.cfg)})

    @classmethod
    def load(cls, path: str | Path) -> "PpoAgent":
        named, meta = load_params(path)
        agent = cls(AgentConfig(**meta["config"]))
        for prefix, net in agent._networks().items():
            load_into(net, named, prefix)
        agent.log_std.data[...] = named["log_std"]
        return agent


AGENT_KINDS = {"ddpg": DdpgAgent, "gdpg": GdpgAgent, "ppo": PpoAgent}


def make_agent(kind: str, cfg: AgentConfig):
    try:
        return AGENT_KINDS[kind](cfg)
    except KeyError:
        raise ConfigError(f"unknown agent {kind!r}; choose from {sorted(AGENT_KINDS)}")


def load_agent(path: str | Path):
    _, meta = load_params(path)
    kind = meta.get("agent")
    if kind not in AGENT_KINDS:
        raise ConfigError(f"checkpoint {path} has unknown agent kind {kind!r}")
    return AGENT_KINDS[kind].load(path)


@dataclass
class EpisodeLog:
    episode: int
    steps: int
    mean_reward: float
    actor_grad_norm: float
    critic_loss: float
    model_loss: float | None = None


def _episode_start(env: PortfolioEnv, rng: np.random.Generator, episode_length: int) -> int:
    if episode_length <= 0:
        return env.min_start
    hi = max(env.min_start, env.last_tradable - episode_length)
    return int(rng.integers(env.min_start, hi + 1))


def train_agent(
    agent,
    env: PortfolioEnv,
    episodes: int,
    *,
    episode_length: int = 0,
    warmup: int | None = None,
    log_path: str | Path | None = None,
) -> list[EpisodeLog]:
    """Seeded training loop; returns one log row per episode and appends
    them as CSV when ``log_path`` is given."""
    if isinstance(agent, PpoAgent):
        logs = _train_ppo(agent, env, episodes, episode_length)
    else:
        logs = _train_ddpg_like(agent, env, episodes, episode_length, warmup)
    if log_path is not None:
        _write_log(Path(log_path), logs, model_column=isinstance(agent, GdpgAgent))
    return logs


def _train_ddpg_like(agent, env, episodes, episode_length, warmup) -> list[EpisodeLog]:
    cfg = agent.cfg
    warmup = cfg.batch_size if warmup is None else max(warmup, cfg.batch_size)
    base_sigma = cfg.noise_sigma
    logs: list[EpisodeLog] = []
    for ep in range(episodes):
        agent.noise_sigma = base_sigma * max(0.0, 1.0 - ep / max(1, episodes))
        state = env.reset(_episode_start(env, agent.episode_rng, episode_length))
        rewards, grad_norms, critic_losses, model_losses = [], [], [], []
        steps = 0
        while not env.done and (episode_length <= 0 or steps < episode_length):
            action = agent.act(state, explore=True)
            step = env.step(action)
            agent.buffer.add(step)
            rewards.append(step.reward)
            if len(agent.buffer) >= warmup:
                stats = agent.update(agent.buffer.sample(cfg.batch_size))
                grad_norms.append(stats["actor_grad_norm"])
                critic_losses.append(stats["critic_loss"])
                if "model_loss" in stats:
                    model_losses.append(stats["model_loss"])
            state = step.next_state
            steps += 1
        logs.append(
            EpisodeLog(
                episode=ep,
                steps=steps,
                mean_reward=float(np.mean(rewards)) if rewards else 0.0,
                actor_grad_norm=float(np.mean(grad_norms)) if grad_norms else 0.0,
                critic_loss=float(np.mean(critic_losses)) if critic_losses else 0.0,
                model_loss=float(np.mean(model_losses)) if model_losses else None,
            )
        )
    agent.noise_sigma = base_sigma
    return logs


def _train_ppo(agent: PpoAgent, env, episodes, episode_length) -> list[EpisodeLog]:
    logs: list[EpisodeLog] = []
    for ep in range(episodes):
        state = env.reset(_episode_start(env, agent.episode_rng, episode_length))
        trajectory: list[EpisodeStep] = []
        steps = 0
        while not env.done and (episode_length <= 0 or steps < episode_length):
            weights, z, logp = agent.sample_action(state)
            step = env.step(weights)
            step.info["ppo_logit_sample"] = z
            step.info["ppo_logp"] = logp
            trajectory.append(step)
            state = step.next_state
            steps += 1
        if not trajectory[-1].done:
            # the surrogate needs a complete trajectory; close it out
            trajectory[-1] = EpisodeStep(
                state=trajectory[-1].state,
                action=trajectory[-1].action,
                reward=trajectory[-1].reward,
                next_state=trajectory[-1].next_state,
                done=True,
                info=trajectory[-1].info,
            )
        agent.update(trajectory)
        logs.append(
            EpisodeLog(
                episode=ep,
                steps=steps,
                mean_reward=float(np.mean([s.reward for s in trajectory])),
                actor_grad_norm=agent.last_grad_norm,
                critic_loss=agent.value_loss(trajectory),
            )
        )
    return logs


def _write_log(path: Path, logs: list[EpisodeLog], model_column: bool) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            header = ["episode", "steps", "mean_reward", "actor_grad_norm", "critic_loss"]
            if model_column:
                header.append("model_loss")
            writer.writerow(header)
        for row in logs:
            record = [
                row.episode,
                row.steps,
                repr(row.mean_reward),
                repr(row.actor_grad_norm),
                repr(row.critic_loss),
            ]
            if model_column:
                record.append("" if row.model_loss is None else repr(row.model_loss))
            writer.writerow(record)
