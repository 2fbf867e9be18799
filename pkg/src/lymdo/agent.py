"""PPO with hand-written backpropagation.

Networks are plain dicts of float64 arrays (``w0, b0, w1, b1, ...``) with
tanh hidden layers and a linear output. The actor additionally owns a
state-independent ``log_std`` vector; actions are raw Gaussian outputs and the
environment turns them into partition cuts.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_RATIO_CLAMP = 20.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
CHECKPOINT_VERSION = 1

Params = dict


@dataclass
class PpoHyper:
    lr: float = 3e-4
    clip_eps: float = 0.2
    gamma: float = 0.99
    memory_size: int = 2048
    epochs: int = 10
    minibatch: int = 256
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple[int, ...] = (128, 64)
    init_log_std: float = -0.5
    reward_scale: float = 1.0  # rewards are divided by this before learning
    normalize_advantages: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.memory_size < 1 or self.minibatch < 1 or self.epochs < 1:
            raise ValueError("memory_size, minibatch and epochs must be >= 1")


# --- MLP ---------------------------------------------------------------------

def init_mlp(sizes, rng: np.random.Generator, out_gain: float = 1.0) -> Params:
    """Glorot-uniform weights, zero biases; the output layer is scaled by ``out_gain``."""
    params = {}
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        if i == n_layers - 1:
            w *= out_gain
        params[f"w{i}"] = w
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def _n_layers(params: Params) -> int:
    n = 0
    while f"w{n}" in params:
        n += 1
    return n


def mlp_forward(params: Params, x: np.ndarray):
    """Batch forward pass. Returns ``(output, cache)`` for ``mlp_backward``."""
    n = _n_layers(params)
    acts = [x]
    h = x
    for i in range(n):
        z = h @ params[f"w{i}"] + params[f"b{i}"]
        h = np.tanh(z) if i < n - 1 else z
        acts.append(h)
    return h, acts


def mlp_backward(params: Params, cache, grad_out: np.ndarray) -> Params:
    n = _n_layers(params)
    grads = {}
    g = grad_out
    for i in reversed(range(n)):
        a_in = cache[i]
        grads[f"w{i}"] = a_in.T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        if i > 0:
            g = (g @ params[f"w{i}"].T) * (1.0 - cache[i] ** 2)
    return grads


# --- policy ------------------------------------------------------------------

def init_actor(obs_dim: int, act_dim: int, hidden, rng, init_log_std: float = -0.5) -> Params:
    params = init_mlp([obs_dim, *hidden, act_dim], rng, out_gain=0.01)
    params["log_std"] = np.full(act_dim, float(init_log_std))
    return params


def init_critic(obs_dim: int, hidden, rng) -> Params:
    return init_mlp([obs_dim, *hidden, 1], rng)


def _mlp_part(params: Params) -> Params:
    return {k: v for k, v in params.items() if k != "log_std"}


def actor_forward(params: Params, state):
    """Gaussian means and log-stds for one state (1-D) or a batch (2-D)."""
    x = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state")
    single = x.ndim == 1
    mean, _ = mlp_forward(_mlp_part(params), x[None, :] if single else x)
    log_std = np.clip(params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    return (mean[0] if single else mean), log_std


def gaussian_log_prob(y, mean, log_std) -> np.ndarray:
    """Diagonal Gaussian log-density, summed over the last axis."""
    z = (np.asarray(y) - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI, axis=-1)


def sample_action(params: Params, state, rng: np.random.Generator, deterministic: bool = False):
    mean, log_std = actor_forward(params, state)
    if deterministic:
        y = mean.copy()
    else:
        y = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return y, float(gaussian_log_prob(y, mean, log_std))


def critic_value(params: Params, state) -> np.ndarray | float:
    x = np.asarray(state, dtype=float)
    if x.ndim == 1:
        out, _ = mlp_forward(params, x[None, :])
        return float(out[0, 0])
    out, _ = mlp_forward(params, x)
    return out[:, 0]


# --- returns and advantages -------------------------------------------------

def compute_returns(rewards, gamma: float, dones=None, last_value: float = 0.0) -> np.ndarray:
    """Discounted returns by backward recursion; episodes end where ``dones`` is set.

    ``last_value`` bootstraps a trailing segment that did not end an episode.
    """
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("empty trajectory")
    d = np.zeros(r.size, dtype=bool) if dones is None else np.asarray(dones, dtype=bool)
    out = np.empty_like(r)
    running = 0.0 if (dones is None or d[-1]) else float(last_value)
    for t in range(r.size - 1, -1, -1):
        if d[t]:
            running = 0.0
        running = r[t] + gamma * running
        out[t] = running
    return out


def compute_advantage(rewards, values, gamma: float, dones=None, last_value: float = 0.0,
                      normalize: bool = False) -> np.ndarray:
    """Discounted sum of TD errors, ``A_t = sum_i gamma^i delta_{t+i}``."""
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.size == 0:
        raise ValueError("empty trajectory")
    if v.shape != r.shape:
        raise ValueError(f"values {v.shape} misaligned with rewards {r.shape}")
    d = np.zeros(r.size, dtype=bool) if dones is None else np.asarray(dones, dtype=bool)
    adv = np.empty_like(r)
    running = 0.0
    next_v = 0.0 if (dones is None or d[-1]) else float(last_value)
    for t in range(r.size - 1, -1, -1):
        if d[t]:
            running = 0.0
            next_v = 0.0
        delta = r[t] + gamma * next_v - v[t]
        running = delta + gamma * running
        adv[t] = running
        next_v = v[t]
    if normalize and adv.size > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


# --- losses ------------------------------------------------------------------

def actor_loss(params: Params, states, actions, old_log_probs, advantages, eps: float):
    """Negated clipped surrogate (for descent) and its gradient."""
    x = np.asarray(states, dtype=float)
    y = np.asarray(actions, dtype=float)
    adv = np.asarray(advantages, dtype=float)
    b = x.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    mlp = _mlp_part(params)
    mean, cache = mlp_forward(mlp, x)
    log_std = params["log_std"]
    inv_var = np.exp(-2.0 * log_std)
    diff = y - mean
    logp = np.sum(-0.5 * diff * diff * inv_var - log_std - HALF_LOG_2PI, axis=1)
    raw = logp - np.asarray(old_log_probs, dtype=float)
    log_ratio = np.clip(raw, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
    ratio = np.exp(log_ratio)
    surr = ratio * adv
    surr_clip = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    loss = -float(np.mean(np.minimum(surr, surr_clip)))
    active = (surr <= surr_clip) & (np.abs(raw) < LOG_RATIO_CLAMP)
    g_logp = np.where(active, -ratio * adv / b, 0.0)
    g_mean = g_logp[:, None] * diff * inv_var
    grads = mlp_backward(mlp, cache, g_mean)
    grads["log_std"] = np.sum(g_logp[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    return loss, grads


def critic_loss(params: Params, states, returns):
    x = np.asarray(states, dtype=float)
    g = np.asarray(returns, dtype=float)
    b = x.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    out, cache = mlp_forward(params, x)
    err = out[:, 0] - g
    loss = float(np.mean(err * err))
    grads = mlp_backward(params, cache, (2.0 * err / b)[:, None])
    return loss, grads


# --- Adam --------------------------------------------------------------------

@dataclass
class Adam:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: Params, grads: Params) -> Params:
        """In-place bias-corrected update; returns ``params``."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def adam_step(params: Params, grads: Params, hyper: PpoHyper, state: Adam | None = None) -> Params:
    """One Adam update; pass the same ``state`` across calls to keep moments."""
    if state is None:
        state = Adam(hyper.lr, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps)
    return state.step(params, grads)


# --- rollout memory ----------------------------------------------------------

class Trajectory:
    """Rollout memory of (state, raw action, old log-prob, reward, value, done)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.clear()

    def clear(self):
        self.states, self.actions, self.log_probs = [], [], []
        self.rewards, self.values, self.dones = [], [], []

    def add(self, state, action, log_prob, reward, value, done):
        self.states.append(np.asarray(state, dtype=float))
        self.actions.append(np.asarray(action, dtype=float))
        self.log_probs.append(float(log_prob))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def __len__(self):
        return len(self.rewards)

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity


# --- agent -------------------------------------------------------------------

def _to_json(params: Params) -> dict:
    return {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in params.items()}


def _from_json(data: dict) -> Params:
    return {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in data.items()}


class PpoAgent:
    def __init__(self, obs_dim: int, act_dim: int, hyper: PpoHyper | None = None, seed: int = 0):
        self.hyper = hyper or PpoHyper()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.rng = np.random.default_rng(seed)
        init_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        h = self.hyper
        self.actor = init_actor(obs_dim, act_dim, h.hidden, init_rng, h.init_log_std)
        self.critic = init_critic(obs_dim, h.hidden, init_rng)
        self.actor_opt = Adam(h.lr, h.adam_beta1, h.adam_beta2, h.adam_eps)
        self.critic_opt = Adam(h.lr, h.adam_beta1, h.adam_beta2, h.adam_eps)
        self.memory = Trajectory(h.memory_size)
        self.updates = 0

    def act(self, obs, deterministic: bool = False):
        """Returns ``(y, log_prob, value)``."""
        y, logp = sample_action(self.actor, obs, self.rng, deterministic)
        return y, logp, critic_value(self.critic, obs)

    def store(self, obs, y, logp, reward, value, done):
        self.memory.add(obs, y, logp, reward / self.hyper.reward_scale, value, done)

    def update(self, last_obs=None) -> dict:
        """One PPO update over the full memory, then clear it."""
        h = self.hyper
        mem = self.memory
        states = np.stack(mem.states)
        actions = np.stack(mem.actions)
        old_logp = np.array(mem.log_probs)
        rewards = np.array(mem.rewards)
        values = np.array(mem.values)
        dones = np.array(mem.dones)
        last_value = 0.0
        if not dones[-1] and last_obs is not None:
            last_value = critic_value(self.critic, last_obs)
        returns = compute_returns(rewards, h.gamma, dones, last_value)
        adv = compute_advantage(rewards, values, h.gamma, dones, last_value, normalize=h.normalize_advantages)
        if not (np.all(np.isfinite(returns)) and np.all(np.isfinite(adv))):
            raise FloatingPointError("non-finite returns or advantages")
        n = len(rewards)
        a_losses, c_losses = [], []
        for _ in range(h.epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, h.minibatch):
                idx = order[start : start + h.minibatch]
                la, ga = actor_loss(self.actor, states[idx], actions[idx], old_logp[idx], adv[idx], h.clip_eps)
                lc, gc = critic_loss(self.critic, states[idx], returns[idx])
                if not (math.isfinite(la) and math.isfinite(lc)):
                    raise FloatingPointError(f"non-finite loss (actor {la}, critic {lc})")
                self.actor_opt.step(self.actor, ga)
                np.clip(self.actor["log_std"], LOG_STD_MIN, LOG_STD_MAX, out=self.actor["log_std"])
                self.critic_opt.step(self.critic, gc)
                a_losses.append(la)
                c_losses.append(lc)
        mem.clear()
        self.updates += 1
        return {"actor_loss": float(np.mean(a_losses)), "critic_loss": float(np.mean(c_losses)),
                "log_std": self.actor["log_std"].tolist()}

    def state_dict(self) -> dict:
        def opt(o: Adam):
            return {"t": o.t, "m": _to_json(o.m), "v": _to_json(o.v)}

        return {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "hyper": asdict(self.hyper),
            "actor": _to_json(self.actor),
            "critic": _to_json(self.critic),
            "actor_opt": opt(self.actor_opt),
            "critic_opt": opt(self.critic_opt),
            "rng": self.rng.bit_generator.state,
            "updates": self.updates,
        }

    @classmethod
    def from_state_dict(cls, data: dict) -> "PpoAgent":
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
        agent = cls(data["obs_dim"], data["act_dim"], PpoHyper(**data["hyper"]))
        agent.actor = _from_json(data["actor"])
        agent.critic = _from_json(data["critic"])
        for opt, blob in ((agent.actor_opt, data["actor_opt"]), (agent.critic_opt, data["critic_opt"])):
            opt.t = blob["t"]
            opt.m = _from_json(blob["m"])
            opt.v = _from_json(blob["v"])
        agent.rng.bit_generator.state = data["rng"]
        agent.updates = data["updates"]
        return agent

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        blob = self.state_dict()
        if extra:
            blob["extra"] = extra
        Path(path).write_text(json.dumps(blob))

    @classmethod
    def load(cls, path: str | Path) -> tuple["PpoAgent", dict]:
        data = json.loads(Path(path).read_text())
        return cls.from_state_dict(data), data.get("extra", {})
