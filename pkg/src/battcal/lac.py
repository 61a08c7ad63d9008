"""Lyapunov-based maximum-entropy actor-critic.

The critic maps (observation, action) to a non-negative value: the sum of
squares of its final layer activations. The squashed-Gaussian actor is
trained against the objective

    E[ beta * log pi(f(eps, s) | s)
       + lambda * (L(s', f(eps, s')) - L(s, a) + alpha3 * c) ]

with beta (entropy) and lambda (Lyapunov-decrease) adapted by one gradient
step per update in log-space. Bootstrapping uses a Polyak-averaged target
critic with next actions sampled from the current policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .env import (OBS_DIM, CalibEnv, EnvConfig, action_to_params,
                  target_param_value)
from .errors import ConfigInvalid

LOG_MULT_MIN = float(np.log(1e-6))


@dataclass
class LacConfig:
    gamma: float = 0.9            # discount
    alpha3: float = 0.1           # Lyapunov-decrease weight
    target_entropy: float | None = None  # defaults to -action_dim
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    total_steps: int = 1_000_000
    tau_polyak: float = 5e-3      # target-critic smoothing per update
    steps_per_update: int = 1
    warmup_steps: int = 1000      # uniform random actions before updates
    lr: float = 5e-4
    multiplier_lr: float = 5e-4
    multiplier_max: float = 10.0
    hidden: tuple[int, ...] = (256, 256, 256)
    critic_out_scale: float = 0.1  # shrink of the critic's last layer init
    dtype: str = "float64"
    seed: int = 0

    def validate(self) -> "LacConfig":
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigInvalid("lac.gamma must be in [0, 1)")
        if self.alpha3 <= 0.0:
            raise ConfigInvalid("lac.alpha3 must be > 0")
        if not 0.0 < self.tau_polyak <= 1.0:
            raise ConfigInvalid("lac.tau_polyak must be in (0, 1]")
        if self.batch_size <= 0 or self.buffer_capacity <= 0:
            raise ConfigInvalid("lac batch size and buffer capacity must be > 0")
        if self.total_steps < 0:
            raise ConfigInvalid("lac.total_steps must be >= 0")
        if self.steps_per_update <= 0:
            raise ConfigInvalid("lac.steps_per_update must be > 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigInvalid("lac.dtype must be float32 or float64")
        return self


class ReplayBuffer:
    """Fixed-capacity FIFO ring buffer of transitions (s, a, c, s', done)."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int,
                 dtype=np.float64):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.action = np.zeros((capacity, action_dim), dtype=dtype)
        self.cost = np.zeros(capacity, dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.done = np.zeros(capacity, dtype=dtype)
        self.cursor = 0
        self.size = 0

    def add(self, obs, action, cost, next_obs, done) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.action[i] = action
        self.cost[i] = cost
        self.next_obs[i] = next_obs
        self.done[i] = 1.0 if done else 0.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx], self.action[idx], self.cost[idx],
                self.next_obs[idx], self.done[idx])


@dataclass
class Multipliers:
    """Adaptive Lagrange multipliers, kept positive by log-space updates."""

    log_beta: float = 0.0
    log_lam: float = 0.0
    max_value: float = 10.0

    @property
    def beta(self) -> float:
        # exp(log(max)) can overshoot max by one ulp
        return min(float(np.exp(self.log_beta)), self.max_value)

    @property
    def lam(self) -> float:
        return min(float(np.exp(self.log_lam)), self.max_value)

    def ascend(self, grad_beta: float, grad_lam: float, lr: float) -> None:
        hi = float(np.log(self.max_value))
        self.log_beta = float(np.clip(self.log_beta + lr * grad_beta,
                                      LOG_MULT_MIN, hi))
        self.log_lam = float(np.clip(self.log_lam + lr * grad_lam,
                                     LOG_MULT_MIN, hi))


class LyapunovCritic:
    """Non-negative critic: value(s, a) = sum of squares of the final layer
    activations of an MLP over the concatenated (s, a)."""

    def __init__(self, obs_dim: int, action_dim: int, hidden, dtype,
                 out_scale: float = 1.0):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.net = nn.Mlp([obs_dim + action_dim, *hidden],
                          final_activation=True, dtype=dtype)
        self.out_scale = out_scale

    def init(self, rng: np.random.Generator) -> "LyapunovCritic":
        self.net.init(rng)
        # keep initial values O(1) so early bootstrap targets are sane
        self.net.weights[-1] *= self.out_scale
        return self

    def value(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        h = self.net.forward(np.concatenate([s, a], axis=-1))
        return np.square(h).sum(axis=-1)

    def value_cache(self, s: np.ndarray, a: np.ndarray):
        x = np.concatenate([s, a], axis=-1)
        h, cache = self.net.forward_cache(x)
        return np.square(h).sum(axis=-1), h, cache

    def copy_from(self, other: "LyapunovCritic", tau: float = 1.0) -> None:
        for dst, src in zip(self.net.parameters(), other.net.parameters()):
            if tau >= 1.0:
                dst[...] = src
            else:
                dst *= 1.0 - tau
                dst += tau * src


def lyapunov_target(cost, gamma: float, done, l_next):
    """Bootstrap target: c at terminal transitions, c + gamma * L' otherwise."""
    cost = np.asarray(cost, dtype=np.float64)
    done = np.asarray(done, dtype=np.float64)
    l_next = np.asarray(l_next, dtype=np.float64)
    return cost + gamma * (1.0 - done) * l_next


def compute_critic_loss(critic: LyapunovCritic, s, a, targets) -> float:
    """Mean over the batch of 0.5 * (L(s,a) - target)^2, target constant."""
    l = critic.value(s, a)
    return float(np.mean(0.5 * np.square(l - targets)))


def compute_actor_loss(actor: nn.Mlp, critic: LyapunovCritic, s, a, cost, s2,
                       eps1, eps2, beta: float, lam: float,
                       alpha3: float, action_dim: int) -> float:
    """Policy objective for fixed noise; recomputable at perturbed actor
    parameters for finite-difference checks."""
    out1 = actor.forward(s)
    mean1, ls1, _ = nn.split_head(out1, action_dim)
    _, logp = nn.squash_sample(mean1, ls1, eps1)
    out2 = actor.forward(s2)
    mean2, ls2, _ = nn.split_head(out2, action_dim)
    a2, _ = nn.squash_sample(mean2, ls2, eps2)
    l2 = critic.value(s2, a2)
    l1 = critic.value(s, a)
    return float(np.mean(beta * logp + lam * (l2 - l1 + alpha3 * cost)))


class LacAgent:
    """Actor, Lyapunov critic, target critic, multipliers, and their
    optimizers."""

    def __init__(self, obs_dim: int, action_dim: int, config: LacConfig):
        self.config = config.validate()
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        dtype = np.dtype(config.dtype)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
        self.actor = nn.Mlp([obs_dim, *config.hidden, 2 * action_dim],
                            dtype=dtype).init(rng)
        self.critic = LyapunovCritic(obs_dim, action_dim, config.hidden,
                                     dtype, config.critic_out_scale).init(rng)
        self.target_critic = LyapunovCritic(obs_dim, action_dim,
                                            config.hidden, dtype)
        self.target_critic.copy_from(self.critic)
        self.multipliers = Multipliers(max_value=config.multiplier_max)
        self.actor_opt = nn.Adam(self.actor.parameters(), lr=config.lr)
        self.critic_opt = nn.Adam(self.critic.net.parameters(), lr=config.lr)
        self.total_steps_trained = 0

    @property
    def target_entropy(self) -> float:
        if self.config.target_entropy is None:
            return -float(self.action_dim)
        return float(self.config.target_entropy)

    def act(self, obs: np.ndarray, deterministic: bool = True,
            eps: np.ndarray | None = None) -> np.ndarray:
        """Policy action in (-1, 1)^m: tanh(mean) when deterministic, a
        squashed-Gaussian sample otherwise (eps required)."""
        out = self.actor.forward(np.asarray(obs, dtype=self.actor.dtype))
        mean, log_std, _ = nn.split_head(out, self.action_dim)
        if deterministic:
            return np.tanh(np.asarray(mean, dtype=np.float64))
        if eps is None:
            raise ConfigInvalid("stochastic act() needs a noise vector")
        a, _ = nn.squash_sample(mean, log_std, np.asarray(eps, dtype=mean.dtype))
        return np.asarray(a, dtype=np.float64)

    # -- updates ----------------------------------------------------------

    def critic_update(self, batch, rng: np.random.Generator) -> float:
        s, a, c, s2, done = batch
        m = self.action_dim
        out2 = self.actor.forward(s2)
        mean2, ls2, _ = nn.split_head(out2, m)
        eps = rng.standard_normal(mean2.shape).astype(mean2.dtype)
        a2, _ = nn.squash_sample(mean2, ls2, eps)
        l_next = self.target_critic.value(s2, a2)
        targets = lyapunov_target(c, self.config.gamma, done, l_next) \
            .astype(s.dtype)

        l, h, cache = self.critic.value_cache(s, a)
        diff = (l - targets) / l.shape[0]
        grad_h = 2.0 * h * diff[:, None]
        grads, _ = self.critic.net.backward(cache, grad_h)
        self.critic_opt.step(self.critic.net.parameters(), grads)
        return float(np.mean(0.5 * np.square(l - targets)))

    def actor_update(self, batch, rng: np.random.Generator):
        """One Eq.-5 step; returns (loss, mean_logp, mean_lyapunov_diff)."""
        s, a, c, s2, done = batch
        m = self.action_dim
        beta = self.multipliers.beta
        lam = self.multipliers.lam
        batch_n = s.shape[0]

        out1, cache1 = self.actor.forward_cache(s)
        mean1, ls1, mask1 = nn.split_head(out1, m)
        eps1 = rng.standard_normal(mean1.shape).astype(mean1.dtype)
        a1, logp = nn.squash_sample(mean1, ls1, eps1)

        out2, cache2 = self.actor.forward_cache(s2)
        mean2, ls2, mask2 = nn.split_head(out2, m)
        eps2 = rng.standard_normal(mean2.shape).astype(mean2.dtype)
        a2, _ = nn.squash_sample(mean2, ls2, eps2)

        l2, h2, ccache2 = self.critic.value_cache(s2, a2)
        l1 = self.critic.value(s, a)
        lyap_diff = l2 - l1 + self.config.alpha3 * c
        loss = float(np.mean(beta * logp + lam * lyap_diff))

        # entropy path through logp at s
        dmean1, dls1 = nn.squash_logprob_grads(a1, ls1, eps1)
        scale = beta / batch_n
        grad_out1 = np.concatenate([dmean1 * scale,
                                    dls1 * mask1 * scale], axis=-1)
        grads1, _ = self.actor.backward(cache1, grad_out1)

        # Lyapunov path through the critic at (s2, f(eps, s2))
        grad_h2 = 2.0 * h2 * (lam / batch_n)
        _, grad_x2 = self.critic.net.backward(ccache2, grad_h2)
        g_a2 = grad_x2[:, self.obs_dim:]
        g_u2 = g_a2 * (1.0 - np.square(a2))
        grad_out2 = np.concatenate([g_u2,
                                    g_u2 * np.exp(ls2) * eps2 * mask2], axis=-1)
        grads2, _ = self.actor.backward(cache2, grad_out2)

        grads = [g1 + g2 for g1, g2 in zip(grads1, grads2)]
        self.actor_opt.step(self.actor.parameters(), grads)
        return loss, float(np.mean(logp)), float(np.mean(lyap_diff))

    def multiplier_update(self, mean_logp: float, mean_lyap_diff: float) -> None:
        grad_beta = mean_logp + self.target_entropy
        self.multipliers.ascend(grad_beta, mean_lyap_diff,
                                self.config.multiplier_lr)

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator):
        """Critic step, actor step, multiplier step, Polyak target update."""
        batch = buffer.sample(rng, self.config.batch_size)
        critic_loss = self.critic_update(batch, rng)
        actor_loss, mean_logp, mean_lyap = self.actor_update(batch, rng)
        self.multiplier_update(mean_logp, mean_lyap)
        self.target_critic.copy_from(self.critic, self.config.tau_polyak)
        return critic_loss, actor_loss, mean_logp


@dataclass
class EpisodeLog:
    step: int                    # env steps completed when episode ended
    episode: int
    cumulative_cost: float
    mean_abs_param_error: float  # mean |inferred - true| of the target param
    beta: float
    lam: float
    critic_loss: float
    actor_loss: float
    entropy: float               # -mean log pi from the latest update


LOG_FIELDS = ("step", "episode", "cumulative_cost", "mean_abs_param_error",
              "beta", "lambda", "critic_loss", "actor_loss", "entropy")


def train(trajectories, env_config: EnvConfig, config: LacConfig,
          progress=None, agent: LacAgent | None = None):
    """Train an agent over episodes drawn uniformly from the trajectory
    pool. Fully deterministic given config.seed.

    Passing an existing agent resumes training: its weights, multipliers,
    and step counter carry over and logged step numbers continue from
    agent.total_steps_trained.

    Returns (agent, logs) where logs is a list of EpisodeLog rows, one per
    completed episode.
    """
    config.validate()
    env_config.validate()
    if not trajectories:
        raise ConfigInvalid("training trajectory set must be non-empty")

    m = env_config.action_dim
    if agent is None:
        agent = LacAgent(OBS_DIM, m, config)
    elif agent.obs_dim != OBS_DIM or agent.action_dim != m:
        raise ConfigInvalid("resumed agent dimensions do not match the "
                            "environment")
    step_offset = agent.total_steps_trained
    dtype = np.dtype(config.dtype)
    buffer = ReplayBuffer(config.buffer_capacity, OBS_DIM, m, dtype=dtype)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    env = CalibEnv(env_config)

    logs: list[EpisodeLog] = []
    episode = 0
    critic_loss = actor_loss = 0.0
    entropy = float("nan")

    traj = trajectories[rng.integers(len(trajectories))]
    obs = env.reset(traj)
    true_vals = target_param_value(traj.params, env_config.target)
    ep_cost = 0.0
    ep_abs_err = 0.0
    ep_len = 0

    for step in range(config.total_steps):
        if step < config.warmup_steps:
            action = rng.uniform(-1.0, 1.0, size=m)
        else:
            eps = rng.standard_normal(m)
            action = agent.act(obs, deterministic=False, eps=eps)

        next_obs, cost, done = env.step(action)
        buffer.add(obs.astype(dtype), action.astype(dtype), cost,
                   next_obs.astype(dtype), done)

        inferred = target_param_value(action_to_params(action, env_config),
                                      env_config.target)
        ep_cost += cost
        ep_abs_err += float(np.mean(np.abs(inferred - true_vals)))
        ep_len += 1
        obs = next_obs

        if (step >= config.warmup_steps
                and buffer.size >= config.batch_size
                and (step + 1) % config.steps_per_update == 0):
            critic_loss, actor_loss, mean_logp = agent.update(buffer, rng)
            entropy = -mean_logp

        if done:
            episode += 1
            logs.append(EpisodeLog(step=step_offset + step + 1, episode=episode,
                                   cumulative_cost=ep_cost,
                                   mean_abs_param_error=ep_abs_err / ep_len,
                                   beta=agent.multipliers.beta,
                                   lam=agent.multipliers.lam,
                                   critic_loss=critic_loss,
                                   actor_loss=actor_loss,
                                   entropy=entropy))
            if progress is not None:
                progress(step_offset + step + 1, logs[-1])
            traj = trajectories[rng.integers(len(trajectories))]
            obs = env.reset(traj)
            true_vals = target_param_value(traj.params, env_config.target)
            ep_cost = 0.0
            ep_abs_err = 0.0
            ep_len = 0

    agent.total_steps_trained += config.total_steps
    return agent, logs
