"""Seedable channel impairments.

All randomness comes from a Philox counter-based generator keyed by
``ChannelModel.seed`` so a (model, frame) pair always yields the same output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from usdr.iq import IqFrame

KINDS = ("ideal", "awgn", "flat_gain", "fir_isi", "intensity")


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "ideal"
    snr_db: float = math.inf
    gain: complex = 1.0
    taps: tuple = (1.0,)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))
        if self.kind == "fir_isi":
            if len(self.taps) < 1:
                raise ValueError("fir_isi needs at least one tap")
            if self.taps[0] == 0:
                raise ValueError("fir_isi tap[0] must be nonzero")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def noise_enabled(self) -> bool:
        return self.kind == "awgn" and not math.isinf(self.snr_db)

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(int(self.seed)))

    def to_dict(self) -> dict:
        gain = complex(self.gain)
        return {
            "kind": self.kind,
            "snr_db": None if math.isinf(self.snr_db) else float(self.snr_db),
            "gain": [gain.real, gain.imag],
            "taps": list(self.taps),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelModel":
        d = dict(d)
        snr = d.get("snr_db")
        if snr is None or (isinstance(snr, str) and snr.lower() in ("inf", "+inf", "none")):
            d["snr_db"] = math.inf
        else:
            d["snr_db"] = float(snr)
        gain = d.get("gain", 1.0)
        if isinstance(gain, (list, tuple)):
            gain = complex(gain[0], gain[1])
        d["gain"] = complex(gain)
        if "taps" in d:
            d["taps"] = tuple(d["taps"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelModel":
        return cls.from_dict(json.loads(text))


def awgn(frame: IqFrame, snr_db: float, rng: np.random.Generator) -> IqFrame:
    """Circular complex Gaussian noise referenced to the frame's measured mean power."""
    if math.isinf(snr_db) and snr_db > 0:
        return frame.with_samples(frame.samples.copy())
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    power = frame.power()
    if power == 0:
        raise ValueError("undefined SNR on zero-power signal")
    variance = power / 10 ** (snr_db / 10)
    noise = rng.normal(scale=math.sqrt(variance / 2), size=(frame.samples.size, 2))
    return frame.with_samples(frame.samples + noise[:, 0] + 1j * noise[:, 1])


def apply_channel(frame: IqFrame, model: ChannelModel) -> IqFrame:
    x = frame.samples
    if model.kind == "ideal":
        return frame.with_samples(x.copy())
    if model.kind == "awgn":
        return awgn(frame, model.snr_db, model.rng())
    if model.kind == "flat_gain":
        return frame.with_samples(x * complex(model.gain))
    if model.kind == "fir_isi":
        if x.size == 0:
            raise ValueError("fir_isi needs a non-empty frame")
        y = np.convolve(x, np.asarray(model.taps, dtype=float))[: x.size]
        return frame.with_samples(y)
    # intensity: optical drive cannot go negative
    return frame.with_samples(np.maximum(x.real, 0.0).astype(complex))


def apply_channels(frame: IqFrame, models: Sequence[ChannelModel]) -> IqFrame:
    for model in models:
        frame = apply_channel(frame, model)
    return frame


def apply_timing_offset(frame: IqFrame, offset_samples: int) -> IqFrame:
    """Delay ``frame`` by prepending ``offset_samples`` zeros."""
    offset_samples = int(offset_samples)
    if offset_samples < 0:
        raise ValueError("offset_samples must be nonnegative")
    pad = np.zeros(offset_samples, dtype=complex)
    return frame.with_samples(np.concatenate([pad, frame.samples]))


def load_channel(spec) -> ChannelModel | list[ChannelModel]:
    """Parse a JSON object (one model) or array (a chain) into channel models."""
    data = json.loads(spec) if isinstance(spec, str) else spec
    if isinstance(data, list):
        return [ChannelModel.from_dict(d) for d in data]
    return ChannelModel.from_dict(data)
