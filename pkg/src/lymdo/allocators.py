"""Per-slot resource allocation for fixed partition cuts.

Given the cuts, the slot objective splits into three independent convex
problems:

* local CPU frequency per UE (1-D, Fibonacci search on the stable interval),
* edge CPU shares (closed form, proportional to sqrt of edge work),
* uplink bandwidth shares (KKT: equalise marginal weighted delay).
"""
from __future__ import annotations

import math
from dataclasses import MISSING, asdict, dataclass, fields

import numpy as np

from . import _core
from .system_model import Allocation

_ARRAY_FIELDS = ("q_energy", "q_memory", "lam", "gain", "power", "kappa", "d_ue", "d_es", "payload")


class InfeasibleAllocation(ValueError):
    """Local stability cannot be met even at the maximum UE frequency."""


@dataclass
class AllocProblem:
    """Inputs of the three allocation subproblems (all arrays are per UE).

    ``d_ue``/``d_es`` are cycles per task on each side, ``payload`` is bytes
    uploaded, ``q_energy`` the virtual energy backlog. ``q_memory`` does not
    enter any subproblem (memory cost depends on the cut only) but is kept for
    evaluating the full slot objective.
    """

    q_energy: np.ndarray
    q_memory: np.ndarray
    lam: np.ndarray
    gain: np.ndarray
    power: np.ndarray
    kappa: np.ndarray
    d_ue: np.ndarray
    d_es: np.ndarray
    payload: np.ndarray
    v: float
    bandwidth: float
    noise_psd: float
    f_max_ue: float
    f_max_es: float
    fib_tol: float = 1e-6  # relative to f_max_ue
    stable_margin: float = 1e-6
    sum_tol: float = 1e-9
    inner_tol: float = 1e-13

    def __post_init__(self):
        for name in _ARRAY_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.lam.shape[0]
        for name in _ARRAY_FIELDS:
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and non-negative")

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def snr(self) -> np.ndarray:
        """Full-band SNR p h / (W N0) per UE."""
        return self.power * self.gain / (self.bandwidth * self.noise_psd)

    def to_dict(self) -> dict:
        return {k: v.tolist() if isinstance(v, np.ndarray) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "AllocProblem":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        missing = {n for n, f in known.items() if f.default is MISSING} - set(data)
        if unknown or missing:
            raise ValueError(f"bad problem fields: missing {sorted(missing)}, unknown {sorted(unknown)}")
        return cls(**data)


def local_cpu_objective(prob: AllocProblem, i: int, f: float) -> float:
    return _core.local_cpu_objective(
        float(f), prob.q_energy[i], prob.kappa[i], prob.d_ue[i], prob.lam[i], prob.v
    )


def stable_interval(prob: AllocProblem, i: int) -> tuple[float, float]:
    lo = prob.d_ue[i] * prob.lam[i] * (1.0 + prob.stable_margin)
    return lo, prob.f_max_ue


def solve_local_cpu(prob: AllocProblem, i: int) -> float:
    """Optimal local frequency for UE ``i``; 0 when nothing runs locally."""
    if prob.d_ue[i] == 0:
        return 0.0
    lo, hi = stable_interval(prob, i)
    if lo >= hi:
        raise InfeasibleAllocation(
            f"UE {i}: needs more than {hi:.4g} cycles/s for {prob.lam[i]} tasks/s"
        )
    return _core.fibonacci_local_cpu(
        prob.q_energy[i], prob.kappa[i], prob.d_ue[i], prob.lam[i], prob.v,
        lo, hi, prob.fib_tol * prob.f_max_ue,
    )


def fit_under_cap(x: np.ndarray, cap: float) -> np.ndarray:
    """Shrink ``x`` by a few ulps if rounding pushed its float sum above ``cap``."""
    x = np.asarray(x, dtype=float)
    while x.sum() > cap:
        x = x * (1.0 - 4.0 * np.finfo(float).eps)
    return x


def solve_edge_cpu(prob: AllocProblem) -> np.ndarray:
    root = np.sqrt(prob.d_es)
    total = root.sum()
    if total == 0:
        return np.zeros(prob.n)
    return fit_under_cap(prob.f_max_es * (root / total), prob.f_max_es)


def edge_cpu_objective(prob: AllocProblem, f_es: np.ndarray) -> float:
    f_es = np.asarray(f_es, dtype=float)
    act = prob.d_es > 0
    if np.any(f_es[act] <= 0):
        return math.inf
    return float(prob.v * np.sum(prob.d_es[act] / f_es[act]))


def bandwidth_weights(prob: AllocProblem) -> np.ndarray:
    """Per-UE weight on upload time: queue-weighted tx energy rate plus V."""
    return prob.q_energy * prob.power * prob.lam + prob.v


def bandwidth_objective(prob: AllocProblem, alpha: np.ndarray) -> float:
    alpha = np.asarray(alpha, dtype=float)
    act = prob.payload > 0
    if not np.any(act):
        return 0.0
    a = alpha[act]
    if np.any(a <= 0):
        return math.inf
    snr = prob.snr()[act]
    rate = a * prob.bandwidth * np.log2(1.0 + snr / a)
    return float(np.sum(bandwidth_weights(prob)[act] * 8.0 * prob.payload[act] / rate))


def solve_bandwidth(prob: AllocProblem) -> np.ndarray:
    act = np.flatnonzero(prob.payload > 0)
    alpha = np.zeros(prob.n)
    if act.size == 0:
        return alpha
    shares = _core.bandwidth_kkt(
        bandwidth_weights(prob)[act].tolist(),
        (8.0 * prob.payload[act]).tolist(),
        prob.snr()[act].tolist(),
        prob.bandwidth,
        prob.sum_tol,
        prob.inner_tol,
    )
    alpha[act] = shares
    return alpha


def allocate_all(prob: AllocProblem) -> tuple[Allocation, np.ndarray]:
    """Solve all three subproblems.

    Returns the allocation and a boolean array marking UEs whose local queue
    can be stabilised. Unstabilisable UEs get ``f_max_ue``.
    """
    f_ue = np.zeros(prob.n)
    stable = np.ones(prob.n, dtype=bool)
    for i in range(prob.n):
        try:
            f_ue[i] = solve_local_cpu(prob, i)
        except InfeasibleAllocation:
            f_ue[i] = prob.f_max_ue
            stable[i] = False
    return Allocation(solve_bandwidth(prob), f_ue, solve_edge_cpu(prob)), stable
