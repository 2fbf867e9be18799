"""Slotted stochastic MEC environment with Lyapunov virtual queues."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .allocators import AllocProblem
from .profiles import DnnProfile, bundled_profile, load_profile, profile_from_dict
from .system_model import (
    Allocation,
    RadioEnv,
    UeSpec,
    UnstableQueueError,
    edge_sojourn,
    local_sojourn,
    memory_cost,
    slot_objective,
    trans_delay,
)

SPEED_OF_LIGHT = 3e8


def dbm_per_hz_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass
class SystemConfig:
    ues: list[UeSpec]
    bandwidth: float = 5e6
    noise_psd: float = dbm_per_hz_to_watts(-174.0)
    f_max_ue: float = 1.5e9
    f_max_es: float = 15e9
    v: float = 10.0
    nu_e: float = 100.0
    nu_c: float = 10.0
    lam_range: tuple[float, float] = (0.5, 2.5)
    antenna_gain: float = 3.0
    carrier_freq: float = 915e6
    path_loss_exp: float = 3.0
    episode_length: int = 200
    t_penalty: float = 10.0
    memory_unit: float = 1e6  # bytes per unit of memory cost in queues/objective
    q_energy_scale: float = 10.0
    q_memory_scale: float = 100.0
    seed: int = 0

    def __post_init__(self):
        self.ues = list(self.ues)
        self.lam_range = (float(self.lam_range[0]), float(self.lam_range[1]))
        if not self.ues:
            raise ValueError("need at least one UE")
        lo, hi = self.lam_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad arrival-rate range {self.lam_range}")
        for name in ("bandwidth", "noise_psd", "f_max_ue", "f_max_es", "v", "nu_e", "nu_c",
                     "t_penalty", "memory_unit", "q_energy_scale", "q_memory_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")

    @property
    def n(self) -> int:
        return len(self.ues)

    def with_lambda(self, lam: float) -> "SystemConfig":
        """Copy with the arrival rate pinned to ``lam``."""
        return replace(self, lam_range=(lam, lam))

    def to_dict(self) -> dict:
        ues = []
        for ue in self.ues:
            try:
                bundled = bundled_profile(ue.profile.name) == ue.profile
            except Exception:
                bundled = False
            ues.append({
                "name": ue.name,
                "profile": ue.profile.name if bundled else ue.profile.to_dict(),
                "energy_budget_j": ue.energy_budget,
                "memory_budget_bytes": ue.memory_budget,
                "tx_power_w": ue.tx_power,
                "mem_cost_ue": ue.mem_cost_ue,
                "mem_cost_es": ue.mem_cost_es,
                "cycles_per_mac": ue.cycles_per_mac,
                "kappa": ue.kappa,
                "distance_m": ue.distance,
            })
        return {
            "version": 1,
            "bandwidth_hz": self.bandwidth,
            "noise_psd_w_per_hz": self.noise_psd,
            "f_max_ue_hz": self.f_max_ue,
            "f_max_es_hz": self.f_max_es,
            "v": self.v,
            "nu_e": self.nu_e,
            "nu_c": self.nu_c,
            "lam_range": list(self.lam_range),
            "antenna_gain": self.antenna_gain,
            "carrier_freq_hz": self.carrier_freq,
            "path_loss_exp": self.path_loss_exp,
            "episode_length": self.episode_length,
            "t_penalty_s": self.t_penalty,
            "memory_unit_bytes": self.memory_unit,
            "q_energy_scale": self.q_energy_scale,
            "q_memory_scale": self.q_memory_scale,
            "seed": self.seed,
            "ues": ues,
        }

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "SystemConfig":
        if data.get("version", 1) != 1:
            raise ValueError(f"unsupported config version {data.get('version')!r}")
        defaults = data.get("ue_defaults", {})
        ues = []
        for entry in data["ues"]:
            merged = {**defaults, **entry}
            ues.append(UeSpec(
                name=merged["name"],
                profile=_resolve_profile(merged["profile"], base_dir),
                tx_power=merged["tx_power_w"],
                energy_budget=merged["energy_budget_j"],
                memory_budget=merged["memory_budget_bytes"],
                mem_cost_ue=merged["mem_cost_ue"],
                mem_cost_es=merged["mem_cost_es"],
                cycles_per_mac=merged["cycles_per_mac"],
                kappa=merged["kappa"],
                distance=merged["distance_m"],
            ))
        if "noise_psd_w_per_hz" in data:
            noise = data["noise_psd_w_per_hz"]
        else:
            noise = dbm_per_hz_to_watts(data.get("noise_psd_dbm_per_hz", -174.0))
        keys = {
            "bandwidth": "bandwidth_hz", "f_max_ue": "f_max_ue_hz", "f_max_es": "f_max_es_hz",
            "v": "v", "nu_e": "nu_e", "nu_c": "nu_c", "lam_range": "lam_range",
            "antenna_gain": "antenna_gain", "carrier_freq": "carrier_freq_hz",
            "path_loss_exp": "path_loss_exp", "episode_length": "episode_length",
            "t_penalty": "t_penalty_s", "memory_unit": "memory_unit_bytes",
            "q_energy_scale": "q_energy_scale", "q_memory_scale": "q_memory_scale", "seed": "seed",
        }
        kwargs = {attr: data[key] for attr, key in keys.items() if key in data}
        return cls(ues=ues, noise_psd=noise, **kwargs)


def _resolve_profile(ref, base_dir: Path | None) -> DnnProfile:
    if isinstance(ref, dict):
        return profile_from_dict(ref)
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        candidate = base_dir / path
        if candidate.is_file():
            return load_profile(candidate)
    if path.suffix == ".json" and path.is_file():
        return load_profile(path)
    return bundled_profile(str(ref))


def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    return SystemConfig.from_dict(json.loads(path.read_text()), base_dir=path.parent)


def default_config() -> SystemConfig:
    """Bundled default: two AlexNet and three ResNet18 UEs."""
    text = (resources.files("lymdo") / "data" / "default_system.json").read_text()
    return SystemConfig.from_dict(json.loads(text))


@dataclass
class VirtualQueues:
    q_energy: np.ndarray
    q_memory: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "VirtualQueues":
        return cls(np.zeros(n), np.zeros(n))

    def copy(self) -> "VirtualQueues":
        return VirtualQueues(self.q_energy.copy(), self.q_memory.copy())


@dataclass
class SlotState:
    h: np.ndarray
    lam: np.ndarray
    q_energy: np.ndarray
    q_memory: np.ndarray

    @property
    def queues(self) -> VirtualQueues:
        return VirtualQueues(self.q_energy, self.q_memory)

    def vector(self) -> np.ndarray:
        """Raw (unnormalised) observation of length 4N."""
        return np.concatenate([self.h, self.lam, self.q_energy, self.q_memory])


@dataclass
class SlotMetrics:
    cuts: np.ndarray
    alpha: np.ndarray
    f_ue: np.ndarray
    f_es: np.ndarray
    t_ue: np.ndarray
    t_trans: np.ndarray
    t_es: np.ndarray
    t_e2e: np.ndarray  # effective: t_penalty where the local queue is unstable
    energy_comp: np.ndarray
    energy_trans: np.ndarray
    energy: np.ndarray
    memory: np.ndarray  # in memory units (MB by default)
    feasible: np.ndarray
    q_energy: np.ndarray  # backlogs the reward was computed with
    q_memory: np.ndarray
    reward: float


@dataclass
class StepOutcome:
    next_state: SlotState
    reward: float
    metrics: SlotMetrics
    done: bool = False


def mean_channel_gain(cfg: SystemConfig) -> np.ndarray:
    """Free-space path-loss average gain per UE."""
    d = np.array([ue.distance for ue in cfg.ues])
    return cfg.antenna_gain * (SPEED_OF_LIGHT / (4.0 * math.pi * cfg.carrier_freq * d)) ** cfg.path_loss_exp


def sample_channel(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh block fading: unit-mean exponential times the path-loss gain."""
    return rng.exponential(1.0, size=cfg.n) * mean_channel_gain(cfg)


def sample_arrivals(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.lam_range
    draw = rng.uniform(lo, hi, size=cfg.n)
    if lo == hi:
        return np.full(cfg.n, lo)
    return draw


def map_action(y, layer_counts) -> np.ndarray:
    """Squash raw actor outputs to partition cuts in ``0..L_n``."""
    y = np.asarray(y, dtype=float)
    L = np.asarray(layer_counts)
    cuts = np.floor(L * (np.tanh(y) + 1.0) / 2.0).astype(np.int64)
    return np.clip(cuts, 0, L)


def update_queues(queues: VirtualQueues, energy, memory, energy_budget, memory_budget,
                  nu_e: float, nu_c: float) -> VirtualQueues:
    q = np.maximum(queues.q_energy + nu_e * (np.asarray(energy) - energy_budget), 0.0)
    w = np.maximum(queues.q_memory + nu_c * (np.asarray(memory) - memory_budget), 0.0)
    return VirtualQueues(q, w)


@dataclass
class _UeTables:
    """Cut-indexed lookups for one UE (index = cut)."""

    layer_count: int
    d_ue: np.ndarray
    d_es: np.ndarray
    payload: np.ndarray
    memory: np.ndarray = field(repr=False)


class EdgeEnv:
    """One environment instance: owns its RNG streams and queue state."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.h_bar = mean_channel_gain(cfg)
        self.tables = []
        for ue in cfg.ues:
            cuts = range(ue.profile.layer_count + 1)
            self.tables.append(_UeTables(
                layer_count=ue.profile.layer_count,
                d_ue=np.array([ue.local_cycles(c) for c in cuts]),
                d_es=np.array([ue.edge_cycles(c) for c in cuts]),
                payload=np.array([ue.profile.payload(c) for c in cuts], dtype=float),
                memory=np.array([memory_cost(ue, c) for c in cuts]) / cfg.memory_unit,
            ))
        self.layer_counts = np.array([t.layer_count for t in self.tables])
        self.energy_budget = np.array([ue.energy_budget for ue in cfg.ues])
        self.memory_budget = np.array([ue.memory_budget for ue in cfg.ues]) / cfg.memory_unit
        self.power = np.array([ue.tx_power for ue in cfg.ues])
        self.kappa = np.array([ue.kappa for ue in cfg.ues])
        self.state: SlotState | None = None
        self.t = 0

    @property
    def n(self) -> int:
        return self.cfg.n

    @property
    def obs_dim(self) -> int:
        return 4 * self.n

    def reset(self, seed: int | None = None) -> SlotState:
        """Zero the queues and draw the first slot. ``seed`` restarts the RNG streams."""
        if seed is not None or not hasattr(self, "_rng_channel"):
            ss = np.random.SeedSequence(self.cfg.seed if seed is None else seed)
            ch, arr = ss.spawn(2)
            self._rng_channel = np.random.default_rng(ch)
            self._rng_arrival = np.random.default_rng(arr)
        self.t = 0
        self.state = SlotState(
            h=sample_channel(self.cfg, self._rng_channel),
            lam=sample_arrivals(self.cfg, self._rng_arrival),
            q_energy=np.zeros(self.n),
            q_memory=np.zeros(self.n),
        )
        return self.state

    def observe(self, state: SlotState | None = None) -> np.ndarray:
        """Normalised observation fed to the agent."""
        s = self.state if state is None else state
        return np.concatenate([
            s.h / self.h_bar,
            s.lam / self.cfg.lam_range[1],
            np.log1p(s.q_energy / self.cfg.q_energy_scale),
            np.log1p(s.q_memory / self.cfg.q_memory_scale),
        ])

    def cut_costs(self, cuts) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(d_ue, d_es, payload, memory) per UE for the given cuts."""
        d_ue = np.empty(self.n)
        d_es = np.empty(self.n)
        payload = np.empty(self.n)
        mem = np.empty(self.n)
        for i, c in enumerate(cuts):
            tab = self.tables[i]
            if not 0 <= c <= tab.layer_count:
                raise ValueError(f"UE {i}: cut {c} outside 0..{tab.layer_count}")
            d_ue[i], d_es[i], payload[i], mem[i] = tab.d_ue[c], tab.d_es[c], tab.payload[c], tab.memory[c]
        return d_ue, d_es, payload, mem

    def problem(self, cuts, state: SlotState | None = None) -> AllocProblem:
        s = self.state if state is None else state
        d_ue, d_es, payload, _ = self.cut_costs(cuts)
        return AllocProblem(
            q_energy=s.q_energy, q_memory=s.q_memory, lam=s.lam, gain=s.h,
            power=self.power, kappa=self.kappa, d_ue=d_ue, d_es=d_es, payload=payload,
            v=self.cfg.v, bandwidth=self.cfg.bandwidth, noise_psd=self.cfg.noise_psd,
            f_max_ue=self.cfg.f_max_ue, f_max_es=self.cfg.f_max_es,
        )

    def evaluate(self, state: SlotState, cuts, alloc: Allocation) -> SlotMetrics:
        """Costs and reward of applying ``(cuts, alloc)`` in ``state``; no side effects."""
        cfg = self.cfg
        alloc.check(cfg.f_max_ue, cfg.f_max_es)
        cuts = np.asarray(cuts, dtype=np.int64)
        d_ue, d_es, payload, mem = self.cut_costs(cuts)
        n = self.n
        t_ue, t_tr, t_es, t_eff = (np.zeros(n) for _ in range(4))
        e_comp = np.zeros(n)
        e_tr = np.zeros(n)
        feasible = np.ones(n, dtype=bool)
        for i in range(n):
            lam = state.lam[i]
            f = alloc.f_ue[i]
            radio = RadioEnv(cfg.bandwidth, cfg.noise_psd, state.h[i])
            t_tr[i] = trans_delay(payload[i], alloc.alpha[i], radio, self.power[i])
            t_es[i] = edge_sojourn(d_es[i], alloc.f_es[i])
            try:
                t_ue[i] = local_sojourn(lam, f, d_ue[i])
                t_eff[i] = t_ue[i] + t_tr[i] + t_es[i]
            except UnstableQueueError:
                t_ue[i] = math.inf
                t_eff[i] = cfg.t_penalty
                feasible[i] = False
            e_comp[i] = self.kappa[i] * f * f * d_ue[i] * lam
            e_tr[i] = self.power[i] * t_tr[i] * lam
        energy = e_comp + e_tr
        r = -slot_objective(state.queues, energy, mem, t_eff, cfg.v)
        return SlotMetrics(
            cuts=cuts, alpha=np.asarray(alloc.alpha, dtype=float), f_ue=np.asarray(alloc.f_ue, dtype=float),
            f_es=np.asarray(alloc.f_es, dtype=float), t_ue=t_ue, t_trans=t_tr, t_es=t_es, t_e2e=t_eff,
            energy_comp=e_comp, energy_trans=e_tr, energy=energy, memory=mem, feasible=feasible,
            q_energy=state.q_energy.copy(), q_memory=state.q_memory.copy(), reward=r,
        )

    def step(self, cuts, alloc: Allocation) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        m = self.evaluate(self.state, cuts, alloc)
        queues = update_queues(self.state.queues, m.energy, m.memory, self.energy_budget,
                               self.memory_budget, self.cfg.nu_e, self.cfg.nu_c)
        self.t += 1
        self.state = SlotState(
            h=sample_channel(self.cfg, self._rng_channel),
            lam=sample_arrivals(self.cfg, self._rng_arrival),
            q_energy=queues.q_energy,
            q_memory=queues.q_memory,
        )
        return StepOutcome(self.state, m.reward, m, done=self.t >= self.cfg.episode_length)
