"""Discrete-event check of the M/D/1 sojourn formula."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core


def md1_formula(lam: float, mu: float) -> float:
    """Closed-form mean sojourn (service plus Pollaczek-Khinchine wait)."""
    if not 0 < lam < mu:
        raise ValueError(f"need 0 < lam < mu, got lam={lam}, mu={mu}")
    return 1.0 / mu + lam / (2.0 * mu * mu * (1.0 - lam / mu))


def simulate_md1(lam: float, mu: float, n_arrivals: int, seed: int = 0) -> float:
    """Mean sojourn of ``n_arrivals`` Poisson(lam) tasks with fixed service 1/mu."""
    if n_arrivals < 1:
        raise ValueError("n_arrivals must be >= 1")
    if lam <= 0 or mu <= 0:
        raise ValueError("rates must be positive")
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0 / lam, size=n_arrivals))
    return _core.md1_mean_sojourn(arrivals, 1.0 / mu)


@dataclass(frozen=True)
class QueueCheck:
    utilisation: float
    simulated: float
    formula: float

    @property
    def rel_err(self) -> float:
        return abs(self.simulated - self.formula) / self.formula


def utilisation_sweep(utilisations=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
                      mu: float = 1.0, n_arrivals: int = 1_000_000, seed: int = 0) -> list[QueueCheck]:
    out = []
    for i, rho in enumerate(utilisations):
        lam = rho * mu
        out.append(QueueCheck(rho, simulate_md1(lam, mu, n_arrivals, seed + i), md1_formula(lam, mu)))
    return out
