"""Chirp spread spectrum modulation, dechirp demodulation and preamble sync."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal

from usdr.iq import IqFrame
from usdr.lora.config import LoRaConfig


@lru_cache(maxsize=64)
def _phase_terms(m: int, oversample: int) -> tuple[np.ndarray, np.ndarray]:
    tau = np.arange(m * oversample) / oversample  # time in chips
    return tau, tau**2 / (2 * m)


def chirp_phase_cycles(symbols, m: int, oversample: int = 1) -> np.ndarray:
    """Phase (in cycles) of the chirps for ``symbols``, shape ``(len(symbols), m * oversample)``.

    Instantaneous frequency normalised to the bandwidth starts at
    ``s/M - 1/2``, rises by ``1/M`` per chip and drops by one bandwidth when it
    passes ``+1/2`` (at chip ``M - s``).
    """
    s = np.asarray(symbols, dtype=np.float64).reshape(-1, 1)
    tau, quad = _phase_terms(m, oversample)
    phase = (s / m - 0.5) * tau + quad
    wrap_at = m - s
    phase -= np.where(tau >= wrap_at, tau - wrap_at, 0.0)
    return phase


def chirps(symbols, config: LoRaConfig) -> np.ndarray:
    """Rows of unit-envelope chirps, one per symbol."""
    symbols = np.asarray(symbols)
    if np.any(symbols < 0) or np.any(symbols >= config.m):
        raise ValueError("symbol out of range")
    return np.exp(2j * np.pi * chirp_phase_cycles(symbols, config.m, config.oversample))


@lru_cache(maxsize=64)
def _base(m: int, oversample: int) -> np.ndarray:
    up = np.exp(2j * np.pi * chirp_phase_cycles([0], m, oversample)[0])
    up.setflags(write=False)
    return up


def base_upchirp(config: LoRaConfig) -> np.ndarray:
    return _base(config.m, config.oversample)


def base_downchirp(config: LoRaConfig, oversample: int | None = None) -> np.ndarray:
    os_ = config.oversample if oversample is None else oversample
    return _base(config.m, os_).conj()


def css_modulate(symbol: int, config: LoRaConfig) -> IqFrame:
    if not 0 <= int(symbol) < config.m:
        raise ValueError(f"symbol {symbol} out of range [0, {config.m})")
    return IqFrame(chirps([symbol], config)[0], config.sample_rate_hz)


def modulate_symbols(symbols, config: LoRaConfig) -> np.ndarray:
    """Concatenated chirps for a symbol sequence (flat complex array)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size == 0:
        return np.zeros(0, complex)
    return chirps(symbols, config).ravel()


def dechirp_spectra(blocks: np.ndarray, config: LoRaConfig) -> np.ndarray:
    """|DFT(x* . y)| for each row of ``blocks`` (rows of ``M * oversample`` samples)."""
    blocks = np.asarray(blocks)
    if config.oversample > 1:
        blocks = blocks[..., :: config.oversample]
    down = base_downchirp(config, oversample=1)
    return np.abs(np.fft.fft(blocks * down, axis=-1))


def css_demodulate(frame, config: LoRaConfig) -> tuple[int, float]:
    """Return ``(symbol, magnitude)`` for exactly one symbol period."""
    samples = frame.samples if isinstance(frame, IqFrame) else np.asarray(frame)
    if samples.size != config.symbol_len:
        raise ValueError("symbol frame length mismatch")
    spectrum = dechirp_spectra(samples, config)
    k = int(np.argmax(spectrum))
    return k, float(spectrum[k])


def demodulate_symbols(samples, config: LoRaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Demodulate consecutive aligned symbols; returns (indices, peak magnitudes)."""
    samples = np.asarray(samples)
    L = config.symbol_len
    n = samples.size // L
    if n * L != samples.size:
        raise ValueError("symbol frame length mismatch")
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0)
    spectra = dechirp_spectra(samples.reshape(n, L), config)
    idx = spectra.argmax(axis=1)
    return idx.astype(np.int64), spectra[np.arange(n), idx]


# ----------------------------------------------------------------- preamble

N_SYNC_UP = 2
N_SFD_DOWN = 2.25


def preamble_len(config: LoRaConfig) -> int:
    L = config.symbol_len
    return (config.n_pre + N_SYNC_UP + 2) * L + L // 4


def build_preamble(config: LoRaConfig) -> IqFrame:
    """``n_pre`` upchirps, 2 more upchirps, 2 downchirps and a quarter downchirp."""
    up = base_upchirp(config)
    down = base_downchirp(config)
    L = config.symbol_len
    parts = [np.tile(up, config.n_pre + N_SYNC_UP), np.tile(down, 2), down[: L // 4]]
    return IqFrame(np.concatenate(parts), config.sample_rate_hz)


def _normalized_correlation(samples: np.ndarray, template: np.ndarray) -> np.ndarray:
    """|<y[t:t+L], template>| / (||y[t:t+L]|| ||template||) for every full-overlap lag t."""
    L = template.size
    corr = signal.oaconvolve(samples, template[::-1].conj(), mode="valid")
    energy = np.cumsum(np.concatenate([[0.0], np.abs(samples) ** 2]))
    win = energy[L:] - energy[:-L]
    denom = np.sqrt(np.maximum(win, 0.0) * np.sum(np.abs(template) ** 2))
    out = np.zeros(corr.size)
    nz = denom > 1e-12 * max(denom.max(initial=0.0), 1e-300)
    out[nz] = np.abs(corr[nz]) / denom[nz]
    return out


def _dechirp_ok(block: np.ndarray, config: LoRaConfig) -> bool:
    spectrum = dechirp_spectra(block, config)
    k = int(np.argmax(spectrum))
    median = float(np.median(spectrum))
    return k == 0 and spectrum[0] >= config.sync_peak_to_median * max(median, 1e-300)


def detect_preamble(frame, config: LoRaConfig, start: int = 0) -> tuple[int, bool]:
    """Locate the first preamble at or after sample ``start``.

    Coarse stage: normalized cross-correlation against the base upchirp,
    evaluated on a grid strided by the oversampling factor; a candidate is the
    earliest lag whose correlation clears the threshold for two consecutive
    symbol periods.  Fine stage: the lag is refined to full sample resolution,
    checked against the start-frame-delimiter downchirps, and accepted only if
    two consecutive preamble symbols dechirp to bin 0 with a peak at least
    ``sync_peak_to_median`` times the median bin.

    Returns ``(offset, found)`` where ``offset`` is the sample index of the
    first preamble upchirp; the payload starts at ``offset + preamble_len``.
    """
    samples = frame.samples if isinstance(frame, IqFrame) else np.asarray(frame)
    L = config.symbol_len
    os_ = config.oversample
    total = preamble_len(config)
    up = np.asarray(base_upchirp(config))
    down = np.asarray(base_downchirp(config))
    thr = config.correlation_threshold

    chunk = max(32 * L, 4 * total)
    pos = int(start)
    while pos + total <= samples.size:
        seg = samples[pos : pos + chunk + total + 2 * L]
        c_up = _normalized_correlation(seg, up)
        if c_up.size <= L:
            break
        n_lags = min(chunk, c_up.size - L)
        grid = np.arange(0, n_lags, os_)
        hits = grid[(c_up[grid] >= thr) & (c_up[grid + L] >= thr)]
        c_down = None
        for lag in hits:
            lo, hi = max(lag - os_ + 1, 0), min(lag + os_, c_up.size - L)
            window = np.arange(lo, hi)
            lag = int(window[np.argmax(c_up[window] + c_up[window + L])])
            # The earliest hit may be any upchirp of the preamble; the SFD pins the first one.
            if c_down is None:
                c_down = _normalized_correlation(seg, down)
            first = _locate_first(lag, c_up, c_down, config)
            if first is None:
                continue
            offset = pos + first
            if offset + total > samples.size:
                continue
            if _dechirp_ok(samples[offset : offset + L], config) and _dechirp_ok(
                samples[offset + L : offset + 2 * L], config
            ):
                return offset, True
        pos += n_lags
    return 0, False


def _locate_first(lag: int, c_up: np.ndarray, c_down: np.ndarray, config: LoRaConfig) -> int | None:
    L = config.symbol_len
    thr = config.correlation_threshold
    sfd_shift = (config.n_pre + N_SYNC_UP) * L
    # the earliest qualifying hit is normally the first upchirp; allow a few missed ones
    for k in range(config.n_pre + N_SYNC_UP):
        first = lag - k * L
        if first < 0:
            break
        d = first + sfd_shift
        if d + L < c_down.size and c_down[d] >= thr and c_down[d + L] >= thr:
            return first
    return None
