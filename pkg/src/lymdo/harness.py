"""Training, baselines, evaluation sweeps and metrics files."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agent import PpoAgent, PpoHyper
from .allocators import allocate_all, fit_under_cap
from .environment import EdgeEnv, SystemConfig, default_config, map_action
from .system_model import Allocation

log = logging.getLogger(__name__)

POLICIES = ("lymdo", "ppo-joint", "local", "edge", "random")
LEARNED = ("lymdo", "ppo-joint")
PER_UE_FIELDS = ("cut", "alpha", "f_ue", "f_es", "t_e2e", "energy", "memory", "q_energy", "q_memory", "feasible")
INT_FIELDS = ("episode", "slot", "cut", "feasible")
MA_WINDOW = 20


def desk_hyper(**overrides) -> PpoHyper:
    """PPO settings that converge within a few hundred 200-slot episodes."""
    base = dict(gamma=0.5, memory_size=512, minibatch=64, reward_scale=100.0)
    base.update(overrides)
    return PpoHyper(**base)


@dataclass
class ExperimentSpec:
    config: SystemConfig = field(default_factory=default_config)
    policy: str = "lymdo"
    episodes: int = 400
    slots: int | None = None  # overrides config.episode_length
    lambda_sweep: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5)
    seeds: tuple[int, ...] = (0,)
    eval_episodes: int = 50
    out_dir: Path | None = None
    scenario: str = "default"
    hyper: PpoHyper = field(default_factory=desk_hyper)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.episodes < 1 or self.eval_episodes < 1:
            raise ValueError("episode counts must be >= 1")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.lambda_sweep = tuple(float(x) for x in self.lambda_sweep)
        if self.slots is not None:
            self.config = replace(self.config, episode_length=int(self.slots))


# --- policies ----------------------------------------------------------------

def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


class Policy:
    learns = False

    def decide(self, env: EdgeEnv, obs: np.ndarray, deterministic: bool):
        """Return ``(cuts, allocation, learn_record)``; the record is None for fixed policies."""
        raise NotImplementedError


class ConvexAssisted(Policy):
    def cuts(self, env: EdgeEnv, obs, deterministic):
        raise NotImplementedError

    def decide(self, env, obs, deterministic):
        cuts, record = self.cuts(env, obs, deterministic)
        alloc, _ = allocate_all(env.problem(cuts))
        return cuts, alloc, record


class LocalPolicy(ConvexAssisted):
    def cuts(self, env, obs, deterministic):
        return env.layer_counts.copy(), None


class EdgePolicy(ConvexAssisted):
    def cuts(self, env, obs, deterministic):
        return np.zeros(env.n, dtype=np.int64), None


class RandomPolicy(ConvexAssisted):
    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def cuts(self, env, obs, deterministic):
        return self.rng.integers(0, env.layer_counts + 1), None


class LymdoPolicy(ConvexAssisted):
    """Agent picks the cuts; the convex solvers fill in the resources."""

    learns = True

    def __init__(self, agent: PpoAgent):
        self.agent = agent

    def cuts(self, env, obs, deterministic):
        y, logp, value = self.agent.act(obs, deterministic)
        return map_action(y, env.layer_counts), (y, logp, value)


class PpoJointPolicy(Policy):
    """Agent outputs cuts and all three resource vectors (4N actions)."""

    learns = True

    def __init__(self, agent: PpoAgent):
        self.agent = agent

    @staticmethod
    def decode(y: np.ndarray, env: EdgeEnv):
        n = env.n
        cuts = map_action(y[:n], env.layer_counts)
        alpha = _sigmoid(y[n : 2 * n])
        if alpha.sum() > 1.0:
            alpha = alpha / alpha.sum()
        f_ue = _sigmoid(y[2 * n : 3 * n]) * env.cfg.f_max_ue
        f_es = _sigmoid(y[3 * n :]) * env.cfg.f_max_es
        if f_es.sum() > env.cfg.f_max_es:
            f_es = fit_under_cap(f_es * (env.cfg.f_max_es / f_es.sum()), env.cfg.f_max_es)
        return cuts, Allocation(alpha, f_ue, f_es)

    def decide(self, env, obs, deterministic):
        y, logp, value = self.agent.act(obs, deterministic)
        cuts, alloc = self.decode(y, env)
        return cuts, alloc, (y, logp, value)


def action_dim(policy: str, n: int) -> int:
    return 4 * n if policy == "ppo-joint" else n


def make_policy(name: str, env: EdgeEnv, seed: int = 0, agent: PpoAgent | None = None,
                hyper: PpoHyper | None = None) -> Policy:
    if name in LEARNED:
        if agent is None:
            agent = PpoAgent(env.obs_dim, action_dim(name, env.n), hyper, seed=seed)
        return LymdoPolicy(agent) if name == "lymdo" else PpoJointPolicy(agent)
    if name == "local":
        return LocalPolicy()
    if name == "edge":
        return EdgePolicy()
    if name == "random":
        return RandomPolicy(seed)
    raise ValueError(f"unknown policy {name!r}")


# --- metrics -----------------------------------------------------------------

def metric_columns(n: int) -> list[str]:
    cols = ["episode", "slot"]
    for f in PER_UE_FIELDS:
        cols.extend(f"{f}_{i}" for i in range(n))
    cols.extend(["reward", "mean_e2e"])
    return cols


class MetricsLog:
    """Per-slot rows kept as a float matrix; one row per slot."""

    def __init__(self, n: int):
        self.n = n
        self.columns = metric_columns(n)
        self._rows: list[np.ndarray] = []

    def add(self, episode: int, slot: int, m) -> None:
        parts = [np.array([episode, slot], dtype=float)]
        for f in PER_UE_FIELDS:
            parts.append(np.asarray(getattr(m, "cuts" if f == "cut" else f), dtype=float))
        parts.append(np.array([m.reward, float(np.mean(m.t_e2e))]))
        self._rows.append(np.concatenate(parts))

    def __len__(self):
        return len(self._rows)

    @property
    def data(self) -> np.ndarray:
        if not self._rows:
            return np.empty((0, len(self.columns)))
        return np.vstack(self._rows)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def per_ue(self, name: str) -> np.ndarray:
        """(rows, N) block for a per-UE field."""
        start = self.columns.index(f"{name}_0")
        return self.data[:, start : start + self.n]

    def column_means(self) -> dict:
        d = self.data
        if d.shape[0] == 0:
            return {c: None for c in self.columns}
        return {c: float(v) for c, v in zip(self.columns, d.mean(axis=0))}

    def episode_rewards(self) -> np.ndarray:
        """Mean slot reward of each episode, in episode order."""
        d = self.data
        if d.shape[0] == 0:
            return np.empty(0)
        ep = d[:, 0]
        rew = d[:, self.columns.index("reward")]
        uniq = np.unique(ep)
        return np.array([rew[ep == e].mean() for e in uniq])


def moving_average(x, window: int = MA_WINDOW) -> np.ndarray:
    """Trailing mean over up to ``window`` points (shorter at the start)."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _fmt(col: str, v: float) -> str:
    if col in INT_FIELDS or col.rsplit("_", 1)[0] in INT_FIELDS:
        return str(int(v))
    return repr(float(v))


def emit_metrics(mlog: MetricsLog, out_dir: str | Path, name: str, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<name>.csv`` (one row per slot) and ``<name>_summary.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{name}.csv"
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(mlog.columns)
            for row in mlog.data:
                w.writerow([_fmt(c, v) for c, v in zip(mlog.columns, row)])
        rewards = mlog.episode_rewards()
        summary = {
            "rows": len(mlog),
            "n_ue": mlog.n,
            "column_means": mlog.column_means(),
            "episode_mean_reward": rewards.tolist(),
            "episode_reward_ma": moving_average(rewards).tolist(),
            "ma_window": MA_WINDOW,
        }
        if extra:
            summary.update(extra)
        json_path = out / f"{name}_summary.json"
        json_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"writing metrics to {out}: {exc}") from exc
    return csv_path, json_path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def read_metrics_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(x) for x in row] for row in r]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


# --- loops -------------------------------------------------------------------

def run_episode(env: EdgeEnv, policy: Policy, episode: int, mlog: MetricsLog | None = None,
                learn: bool = False, deterministic: bool = False, seed: int | None = None) -> float:
    """Run one episode; returns the mean slot reward."""
    env.reset(seed)
    total = 0.0
    slots = env.cfg.episode_length
    for slot in range(slots):
        obs = env.observe()
        cuts, alloc, record = policy.decide(env, obs, deterministic)
        out = env.step(cuts, alloc)
        total += out.reward
        if mlog is not None:
            mlog.add(episode, slot, out.metrics)
        if learn and record is not None:
            agent = policy.agent
            y, logp, value = record
            agent.store(obs, y, logp, out.reward, value, out.done)
            if agent.memory.full:
                stats = agent.update(last_obs=env.observe())
                log.debug("update %d: %s", agent.updates, stats)
    return total / slots


def train(spec: ExperimentSpec, seed: int | None = None) -> tuple[PpoAgent, MetricsLog]:
    """Train a learned policy (lymdo or ppo-joint) for ``spec.episodes`` episodes."""
    if spec.policy not in LEARNED:
        raise ValueError(f"policy {spec.policy!r} is not trainable")
    seed = spec.seeds[0] if seed is None else seed
    env = EdgeEnv(replace(spec.config, seed=seed))
    policy = make_policy(spec.policy, env, seed=seed, hyper=spec.hyper)
    mlog = MetricsLog(env.n)
    env.reset(seed)
    for ep in range(spec.episodes):
        r = run_episode(env, policy, ep, mlog, learn=True)
        if ep % 20 == 0 or ep == spec.episodes - 1:
            log.info("%s episode %d/%d mean reward %.4g", spec.policy, ep + 1, spec.episodes, r)
    return policy.agent, mlog


def train_lymdo(spec: ExperimentSpec) -> tuple[PpoAgent, MetricsLog]:
    """Train, then persist checkpoint and metrics under ``spec.out_dir`` if set."""
    agent, mlog = train(spec)
    if spec.out_dir is not None:
        save_checkpoint(agent, spec, Path(spec.out_dir) / "checkpoint.json")
        emit_metrics(mlog, spec.out_dir, "train", {"policy": spec.policy, "seed": spec.seeds[0]})
    return agent, mlog


def save_checkpoint(agent: PpoAgent, spec: ExperimentSpec, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    agent.save(path, extra={"policy": spec.policy, "config": spec.config.to_dict()})


def load_checkpoint(path: str | Path) -> tuple[PpoAgent, str, SystemConfig]:
    agent, extra = PpoAgent.load(path)
    return agent, extra["policy"], SystemConfig.from_dict(extra["config"])


def run_baseline(spec: ExperimentSpec) -> MetricsLog:
    """Roll out a fixed policy on the training distribution."""
    if spec.policy in LEARNED:
        raise ValueError("use train() for learned policies")
    seed = spec.seeds[0]
    env = EdgeEnv(replace(spec.config, seed=seed))
    policy = make_policy(spec.policy, env, seed=seed)
    mlog = MetricsLog(env.n)
    env.reset(seed)
    for ep in range(spec.episodes):
        run_episode(env, policy, ep, mlog)
    if spec.out_dir is not None:
        emit_metrics(mlog, spec.out_dir, f"baseline_{spec.policy}", {"policy": spec.policy, "seed": seed})
    return mlog


@dataclass
class SweepPoint:
    policy: str
    lam: float
    seed: int
    mean_e2e: float
    mean_energy: list[float]
    mean_memory: list[float]
    final_q_energy: list[float]
    final_q_memory: list[float]
    q_energy_trace: list[list[float]]  # slot x UE, averaged over episodes
    q_memory_trace: list[list[float]]


def evaluate_policy(policy_name: str, cfg: SystemConfig, lambda_sweep, seeds, episodes: int,
                    agent: PpoAgent | None = None, metrics_dir: Path | None = None) -> list[SweepPoint]:
    """Deterministic rollouts at each pinned arrival rate and seed."""
    points = []
    for lam in lambda_sweep:
        for seed in seeds:
            env = EdgeEnv(replace(cfg.with_lambda(lam), seed=seed))
            policy = make_policy(policy_name, env, seed=seed, agent=agent)
            mlog = MetricsLog(env.n)
            env.reset(seed)
            for ep in range(episodes):
                run_episode(env, policy, ep, mlog, deterministic=True)
            points.append(_summarise(policy_name, lam, seed, mlog, env))
            if metrics_dir is not None:
                emit_metrics(mlog, metrics_dir, f"eval_{policy_name}_lam{lam:g}_seed{seed}",
                             {"policy": policy_name, "lam": lam, "seed": seed})
    return points


def _summarise(policy: str, lam: float, seed: int, mlog: MetricsLog, env: EdgeEnv) -> SweepPoint:
    k = env.cfg.episode_length
    n = env.n
    q = mlog.per_ue("q_energy").reshape(-1, k, n)
    w = mlog.per_ue("q_memory").reshape(-1, k, n)
    return SweepPoint(
        policy=policy,
        lam=lam,
        seed=seed,
        mean_e2e=float(mlog.per_ue("t_e2e").mean()),
        mean_energy=mlog.per_ue("energy").mean(axis=0).tolist(),
        mean_memory=mlog.per_ue("memory").mean(axis=0).tolist(),
        final_q_energy=q[:, -1, :].mean(axis=0).tolist(),
        final_q_memory=w[:, -1, :].mean(axis=0).tolist(),
        q_energy_trace=q.mean(axis=0).tolist(),
        q_memory_trace=w.mean(axis=0).tolist(),
    )


def sweep_table(points: list[SweepPoint]) -> list[dict]:
    """One row per (policy, lambda): metrics averaged over seeds."""
    rows = []
    keys = sorted({(p.policy, p.lam) for p in points}, key=lambda t: (t[0], t[1]))
    for pol, lam in keys:
        group = [p for p in points if p.policy == pol and p.lam == lam]
        rows.append({
            "policy": pol,
            "lam": lam,
            "seeds": [p.seed for p in group],
            "mean_e2e": float(np.mean([p.mean_e2e for p in group])),
            "mean_energy": np.mean([p.mean_energy for p in group], axis=0).tolist(),
            "mean_memory": np.mean([p.mean_memory for p in group], axis=0).tolist(),
            "final_q_energy": np.mean([p.final_q_energy for p in group], axis=0).tolist(),
            "final_q_memory": np.mean([p.final_q_memory for p in group], axis=0).tolist(),
        })
    return rows


def evaluate(checkpoint: str | Path | None, spec: ExperimentSpec) -> dict:
    """Sweep summary for a checkpoint (or a fixed policy when ``checkpoint`` is None)."""
    if checkpoint is not None:
        agent, policy, _ = load_checkpoint(checkpoint)
        if agent.obs_dim != 4 * spec.config.n or agent.act_dim != action_dim(policy, spec.config.n):
            raise ValueError(f"checkpoint expects {agent.obs_dim // 4} UEs, spec has {spec.config.n}")
    else:
        agent, policy = None, spec.policy
    cfg = spec.config
    metrics_dir = None if spec.out_dir is None else Path(spec.out_dir)
    points = evaluate_policy(policy, cfg, spec.lambda_sweep, spec.seeds, spec.eval_episodes, agent, metrics_dir)
    table = sweep_table(points)
    top = max(spec.lambda_sweep)
    traces = {str(p.seed): {"q_energy": p.q_energy_trace, "q_memory": p.q_memory_trace}
              for p in points if p.lam == top}
    summary = {"policy": policy, "sweep": table, "queue_traces_lam": top, "queue_traces": traces}
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{policy}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def final_window_stats(rewards, window: int = 50, ma: int = MA_WINDOW) -> dict:
    """Mean and variance of the moving-average reward over the last ``window`` episodes."""
    r = np.asarray(rewards, dtype=float)
    tail_ma = moving_average(r, ma)[-window:]
    return {"ma_mean": float(tail_ma.mean()), "ma_var": float(tail_ma.var()),
            "raw_var": float(r[-window:].var()), "raw_mean": float(r[-window:].mean())}


def is_finite_run(rewards) -> bool:
    return all(math.isfinite(x) for x in rewards)
