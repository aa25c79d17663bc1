"""Built-in processing chains used by ``usdr pipeline``.

Each chain is a list of ``(stage_id, callable)`` in data-flow order plus a
seeded source producing the per-cycle input of the first stage.
"""

from __future__ import annotations

import numpy as np

from usdr.channel import ChannelModel, apply_channel
from usdr.iq import IqFrame
from usdr.lora import LoRaConfig, decode_frame, encode_frame
from usdr.ofdm import OfdmConfig, decode_packet, encode_packet


def _source_rng(seed: int, cycle: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, cycle])))


def lora_chain(config: LoRaConfig | None = None, snr_db: float = 10.0, payload_len: int = 16, seed: int = 0):
    config = config or LoRaConfig()

    def source(cycle):
        return _source_rng(seed, cycle).bytes(payload_len)

    def channel(frame):
        return apply_channel(frame, ChannelModel("awgn", snr_db=snr_db, seed=seed))

    stages = [
        ("encode", lambda payload: encode_frame(payload, config)),
        ("channel", channel),
        ("decode", lambda frame: decode_frame(frame, config)[0]),
    ]
    return stages, source


def ofdm_chain(config: OfdmConfig | None = None, snr_db: float = 40.0, n_bits: int = 4096, seed: int = 0):
    config = config or OfdmConfig()

    def source(cycle):
        return _source_rng(seed, cycle).integers(0, 2, n_bits, dtype=np.uint8)

    def channel(samples):
        return apply_channel(IqFrame(samples), ChannelModel("awgn", snr_db=snr_db, seed=seed)).samples.real

    stages = [
        ("encode", lambda bits: encode_packet(bits, config).samples),
        ("channel", channel),
        ("decode", lambda samples: decode_packet(samples, config, n_bits=n_bits)[0]),
    ]
    return stages, source


CHAINS = {"lora": lora_chain, "ofdm": ofdm_chain}


def build_chain(name: str, seed: int = 0):
    """Returns ``(stages dict, dependencies, source)`` for a named chain."""
    if name not in CHAINS:
        raise ValueError(f"unknown chain {name!r}; choose from {sorted(CHAINS)}")
    stages, source = CHAINS[name](seed=seed)
    ids = [s for s, _ in stages]
    deps = list(zip(ids[:-1], ids[1:]))
    return dict(stages), deps, source
