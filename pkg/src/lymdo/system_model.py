"""Per-slot cost model: delays, UE energy, memory cost and the drift-plus-penalty objective.

Units: seconds, cycles/s, bytes, watts, joules. The slot length is one
second, so per-slot energy equals average power numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import DnnProfile, local_macs, peak_activation


class UnstableQueueError(ValueError):
    """Local service rate does not exceed the arrival rate."""


class InfeasibleTransmissionError(ValueError):
    """Positive payload with no bandwidth assigned."""


@dataclass(frozen=True)
class UeSpec:
    name: str
    profile: DnnProfile
    tx_power: float  # W
    energy_budget: float  # J per slot
    memory_budget: float  # bytes
    mem_cost_ue: float = 0.2
    mem_cost_es: float = 0.8
    cycles_per_mac: float = 0.12
    kappa: float = 1e-28
    distance: float = 150.0  # m

    def __post_init__(self):
        for fname in ("tx_power", "energy_budget", "memory_budget", "cycles_per_mac", "kappa", "distance"):
            if not getattr(self, fname) > 0:
                raise ValueError(f"{fname} must be positive")
        if self.mem_cost_ue < 0 or self.mem_cost_es < 0:
            raise ValueError("memory cost weights must be non-negative")

    def local_cycles(self, cut: int) -> float:
        return self.cycles_per_mac * local_macs(self.profile, cut)

    def edge_cycles(self, cut: int) -> float:
        return self.cycles_per_mac * self.profile.total_macs - self.local_cycles(cut)


@dataclass(frozen=True)
class RadioEnv:
    bandwidth: float  # Hz
    noise_psd: float  # W/Hz
    gain: float  # linear power gain

    def __post_init__(self):
        if not (self.bandwidth > 0 and self.noise_psd > 0 and self.gain > 0):
            raise ValueError("bandwidth, noise PSD and gain must be positive")

    def snr_full_band(self, power: float) -> float:
        return power * self.gain / (self.bandwidth * self.noise_psd)


@dataclass
class Allocation:
    alpha: np.ndarray
    f_ue: np.ndarray
    f_es: np.ndarray

    def check(self, f_max_ue: float, f_max_es: float, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless the bandwidth and CPU limits hold."""
        a, fu, fe = (np.asarray(x, dtype=float) for x in (self.alpha, self.f_ue, self.f_es))
        if np.any(a < 0) or np.any(a > 1) or a.sum() > 1 + tol:
            raise ValueError(f"bandwidth shares violate the simplex: {a}")
        if np.any(fu < 0) or np.any(fu > f_max_ue * (1 + tol)):
            raise ValueError(f"local frequencies outside [0, {f_max_ue}]: {fu}")
        if np.any(fe < 0) or fe.sum() > f_max_es * (1 + tol):
            raise ValueError(f"edge frequencies exceed {f_max_es}: {fe}")


@dataclass(frozen=True)
class DelayBreakdown:
    t_ue: float
    t_trans: float
    t_es: float

    @property
    def t_e2e(self) -> float:
        return self.t_ue + self.t_trans + self.t_es


@dataclass(frozen=True)
class EnergyBreakdown:
    comp: float
    trans: float

    @property
    def total(self) -> float:
        return self.comp + self.trans


def local_sojourn(arr_rate: float, f_ue: float, local_work: float) -> float:
    """Mean M/D/1 sojourn time of the local queue (service + waiting).

    ``local_work`` is cycles per task; zero work means nothing runs locally.
    """
    if local_work == 0:
        return 0.0
    if f_ue <= 0:
        raise UnstableQueueError("no local CPU for positive local work")
    mu = f_ue / local_work
    if mu <= arr_rate:
        raise UnstableQueueError(f"service rate {mu:.6g}/s <= arrival rate {arr_rate:.6g}/s")
    return 1.0 / mu + arr_rate / (2.0 * mu * mu * (1.0 - arr_rate / mu))


def uplink_rate(alpha: float, env: RadioEnv, power: float) -> float:
    """FDMA Shannon rate in bits/s for bandwidth share ``alpha``."""
    if alpha <= 0:
        return 0.0
    bw = alpha * env.bandwidth
    return bw * math.log2(1.0 + power * env.gain / (bw * env.noise_psd))


def trans_delay(payload: float, alpha: float, env: RadioEnv, power: float) -> float:
    """Upload time of ``payload`` bytes."""
    if payload == 0:
        return 0.0
    if not 0 < alpha <= 1:
        raise InfeasibleTransmissionError(f"payload {payload} B with bandwidth share {alpha}")
    return 8.0 * payload / uplink_rate(alpha, env, power)


def edge_sojourn(edge_work: float, f_es: float) -> float:
    if edge_work == 0:
        return 0.0
    if f_es <= 0:
        raise ValueError("positive edge work needs positive edge frequency")
    return edge_work / f_es


def energy(ue: UeSpec, cut: int, f_ue: float, arr_rate: float, t_trans: float) -> EnergyBreakdown:
    comp = ue.kappa * f_ue * f_ue * ue.local_cycles(cut) * arr_rate
    trans = ue.tx_power * t_trans * arr_rate
    return EnergyBreakdown(comp, trans)


def memory_cost(ue: UeSpec, cut: int) -> float:
    """Weighted bytes of parameters and peak activations held on each side.

    The UE-side activation peak runs over layers ``1..cut``; at ``cut == 0``
    only the raw input (layer 0) is buffered on the UE.
    """
    p = ue.profile
    L = p.layer_count
    p.check_cut(cut)
    ue_act = peak_activation(p, 1, cut) if cut > 0 else peak_activation(p, 0, 0)
    es_act = peak_activation(p, cut + 1, L)
    return ue.mem_cost_ue * (p.local_params(cut) + ue_act) + ue.mem_cost_es * (p.edge_params(cut) + es_act)


def slot_objective(queues, energies, memories, delays, v: float) -> float:
    """Drift-plus-penalty value sum_n(Q_n E_n + W_n C_n) + V sum_n T_n.

    ``queues`` needs ``q_energy`` and ``q_memory`` arrays; ``memories`` must be
    in the same unit the memory queue is kept in.
    """
    q = np.asarray(queues.q_energy, dtype=float)
    w = np.asarray(queues.q_memory, dtype=float)
    return float(
        np.sum(q * np.asarray(energies, dtype=float))
        + np.sum(w * np.asarray(memories, dtype=float))
        + v * np.sum(np.asarray(delays, dtype=float))
    )


def reward(queues, energies, memories, delays, v: float) -> float:
    return -slot_objective(queues, energies, memories, delays, v)
