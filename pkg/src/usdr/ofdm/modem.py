"""DC-biased optical OFDM framing: Hermitian spectrum, IFFT, cyclic prefix, bias and clip.

Bin layout for ``n_fft`` bins, ``N = n_fft / 2``::

    0          DC, always 0
    1 .. P     data (or pilot) symbols
    P+1 .. N-1 zero pad (N - P - 1 bins)
    N          0
    N+1 ..     conj of bins N-1 .. 1 (mirror)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from usdr.ofdm.qam import SUPPORTED_ORDERS


@dataclass(frozen=True)
class OfdmConfig:
    n_fft: int = 64
    p: int = 31
    cp_len: int | None = None
    qam_order: int = 16
    dc_bias: float | None = None  # None: per-packet minimum that avoids clipping
    n_pilot_symbols: int = 1
    sample_rate_hz: float = 1e6  # capture metadata only

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        n = self.n_fft
        if n < 4 or n & (n - 1):
            raise ValueError("n_fft must be a power of two >= 4")
        if not 1 <= self.p <= n // 2 - 1:
            raise ValueError(f"p must be in 1..{n // 2 - 1}")
        if self.cp_len is None:
            object.__setattr__(self, "cp_len", n // 8)
        if not 0 <= self.cp_len < n:
            raise ValueError("cp_len must be in [0, n_fft)")
        if self.qam_order not in SUPPORTED_ORDERS:
            raise ValueError(f"unsupported QAM order {self.qam_order}")
        if self.dc_bias is not None and self.dc_bias < 0:
            raise ValueError("dc_bias must be nonnegative")
        if self.n_pilot_symbols < 1:
            raise ValueError("need at least one pilot symbol")

    @property
    def n_half(self) -> int:
        return self.n_fft // 2

    @property
    def zero_pad(self) -> int:
        return self.n_half - self.p - 1

    @property
    def block_len(self) -> int:
        return self.n_fft + self.cp_len

    @property
    def bits_per_block(self) -> int:
        return int(math.log2(self.qam_order)) * self.p

    @property
    def reference_rms(self) -> float:
        """Pre-bias RMS of a block whose P bins all have unit magnitude."""
        return math.sqrt(2 * self.p) / self.n_fft

    def clip_free_bias(self) -> float:
        """Bias that no block can undershoot: the largest possible pre-bias excursion."""
        from usdr.ofdm.qam import constellation

        peak_amp = float(np.max(np.abs(constellation(self.qam_order))))
        return 2 * self.p * peak_amp / self.n_fft

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OfdmConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class OfdmPacket:
    """Pilot blocks followed by data blocks, each ``n_fft + cp_len`` real nonnegative samples."""

    blocks: np.ndarray
    n_pilot: int
    config: OfdmConfig = field(repr=False)

    @property
    def n_data(self) -> int:
        return self.blocks.shape[0] - self.n_pilot

    @property
    def samples(self) -> np.ndarray:
        return self.blocks.ravel()


def hermitian_frame(symbols, config: OfdmConfig) -> np.ndarray:
    """Frequency bins for one block (or a stack of blocks, shape ``(..., P)``)."""
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape[-1] != config.p:
        raise ValueError(f"expected {config.p} symbols per block, got {symbols.shape[-1]}")
    n, N = config.n_fft, config.n_half
    bins = np.zeros(symbols.shape[:-1] + (n,), dtype=complex)
    bins[..., 1 : config.p + 1] = symbols
    bins[..., N + 1 :] = np.conj(bins[..., N - 1 : 0 : -1])
    return bins


def time_blocks(symbol_blocks, config: OfdmConfig) -> np.ndarray:
    """Complex pre-bias IFFT output per block, before the real cast."""
    return np.fft.ifft(hermitian_frame(symbol_blocks, config), axis=-1)


def ofdm_modulate(data_symbol_blocks, config: OfdmConfig, pilot_sequence=None) -> OfdmPacket:
    """Build a packet from ``(n_blocks, P)`` data symbols, prepending the pilot block(s)."""
    data = np.asarray(data_symbol_blocks, dtype=complex).reshape(-1, config.p)
    if pilot_sequence is None:
        from usdr.ofdm.pilot import default_pilot

        pilot_sequence = default_pilot(config).pilot_sequence
    pilot = np.asarray(pilot_sequence, dtype=complex).reshape(1, config.p)
    stack = np.concatenate([np.repeat(pilot, config.n_pilot_symbols, axis=0), data])
    x = time_blocks(stack, config).real
    with_cp = np.concatenate([x[:, config.n_fft - config.cp_len :], x], axis=1)
    if config.dc_bias is None:
        bias = max(0.0, -float(with_cp.min(initial=0.0)))  # smallest clip-free offset for this packet
    else:
        bias = config.dc_bias
    blocks = np.maximum(with_cp + bias, 0.0)
    return OfdmPacket(blocks, config.n_pilot_symbols, config)


def ofdm_demodulate(packet, config: OfdmConfig) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(pilot_rx, data_rx)`` bins 1..P, shapes ``(n_pilot, P)`` and ``(n_data, P)``."""
    samples = packet.samples if isinstance(packet, OfdmPacket) else np.asarray(packet)
    samples = np.asarray(samples).ravel()
    L = config.block_len
    if samples.size % L or samples.size < config.n_pilot_symbols * L:
        raise ValueError("packet framing error")
    blocks = samples.reshape(-1, L)[:, config.cp_len :]
    bins = np.fft.fft(blocks, axis=1)[:, 1 : config.p + 1]
    return bins[: config.n_pilot_symbols], bins[config.n_pilot_symbols :]


@dataclass
class ChannelEstimate:
    gains: np.ndarray
    usable: np.ndarray


def estimate_channel(pilot_rx, pilot_sequence, eps: float = 1e-9) -> ChannelEstimate:
    """Least-squares per-subcarrier gain averaged over the pilot blocks.

    A bin whose mean received pilot magnitude is below ``eps`` times the
    strongest bin is flagged unusable.
    """
    pilot_rx = np.atleast_2d(np.asarray(pilot_rx, dtype=complex))
    pilot_sequence = np.asarray(getattr(pilot_sequence, "pilot_sequence", pilot_sequence), dtype=complex)
    mags = np.abs(pilot_rx).mean(axis=0)
    ref = mags.max(initial=0.0)
    usable = mags > eps * ref if ref > 0 else np.zeros(mags.shape, bool)
    if not usable.any():
        raise ValueError("channel estimation failed")
    gains = (pilot_rx / pilot_sequence).mean(axis=0)
    gains = np.where(usable, gains, 0.0)
    return ChannelEstimate(gains, usable)


def equalize(data_bins, gains, usable=None) -> np.ndarray:
    """One-tap zero forcing; unusable bins come out as 0 (erasures)."""
    data_bins = np.asarray(data_bins, dtype=complex)
    if isinstance(gains, ChannelEstimate):
        gains, usable = gains.gains, gains.usable
    gains = np.asarray(gains, dtype=complex)
    if usable is None:
        usable = gains != 0
    safe = np.where(usable, gains, 1.0)
    return np.where(usable, data_bins / safe, 0.0)


def papr(signal) -> float:
    """Peak-to-average power ratio in dB."""
    x = np.asarray(signal)
    if x.size == 0:
        raise ValueError("papr of an empty signal")
    p = np.abs(x) ** 2
    mean = p.mean()
    if mean == 0:
        raise ValueError("papr of an all-zero signal")
    return float(10 * np.log10(p.max() / mean))
