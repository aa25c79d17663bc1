"""Minimum-PAPR pilot selection over the QPSK alphabet."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from usdr.ofdm.modem import OfdmConfig, time_blocks

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
DEFAULT_BUDGET = 4096
DEFAULT_SEED = 0
_CHUNK = 4096


@dataclass(frozen=True)
class PilotPlan:
    pilot_sequence: tuple
    papr_db: float

    def to_dict(self) -> dict:
        seq = np.asarray(self.pilot_sequence)
        return {"pilot_sequence": [[float(z.real), float(z.imag)] for z in seq], "papr_db": self.papr_db}

    @classmethod
    def from_dict(cls, d: dict) -> "PilotPlan":
        return cls(tuple(complex(re, im) for re, im in d["pilot_sequence"]), float(d["papr_db"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _papr_rows(indices: np.ndarray, config: OfdmConfig) -> np.ndarray:
    x = time_blocks(QPSK[indices], config).real
    p = x**2
    return 10 * np.log10(p.max(axis=1) / p.mean(axis=1))


def _exhaustive(p: int, lo: int, hi: int) -> np.ndarray:
    k = np.arange(lo, hi)[:, None]
    return (k >> (2 * np.arange(p - 1, -1, -1))) & 3


def search_pilot(config: OfdmConfig, candidate_budget: int = DEFAULT_BUDGET, seed: int = DEFAULT_SEED) -> PilotPlan:
    """Pick the QPSK pilot whose pre-bias time block has the lowest PAPR.

    Exhaustive over all ``4**P`` sequences (in base-4 counting order) when
    they fit in ``candidate_budget``, otherwise ``candidate_budget`` seeded
    random draws.  Ties keep the earliest candidate.
    """
    if candidate_budget < 1:
        raise ValueError("candidate_budget must be >= 1")
    p = config.p
    exhaustive = p * 2 < 63 and 4**p <= candidate_budget
    total = 4**p if exhaustive else candidate_budget
    rng = None if exhaustive else np.random.Generator(np.random.Philox(seed))

    best_papr, best_idx = np.inf, None
    for lo in range(0, total, _CHUNK):
        hi = min(total, lo + _CHUNK)
        idx = _exhaustive(p, lo, hi) if exhaustive else rng.integers(0, 4, size=(hi - lo, p))
        values = _papr_rows(idx, config)
        k = int(np.argmin(values))
        if values[k] < best_papr:
            best_papr, best_idx = float(values[k]), idx[k]
    seq = QPSK[best_idx]
    return PilotPlan(tuple(complex(z) for z in seq), best_papr)


@lru_cache(maxsize=32)
def default_pilot(config: OfdmConfig) -> PilotPlan:
    return search_pilot(config, DEFAULT_BUDGET, DEFAULT_SEED)
