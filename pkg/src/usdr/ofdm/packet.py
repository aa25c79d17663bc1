"""Bit-level DCO-OFDM packets.

A non-empty payload is sent as a 32-bit big-endian bit count followed by the
bits, zero-padded to whole OFDM blocks.  An empty payload produces a
pilot-only packet.
"""

from __future__ import annotations

import numpy as np

from usdr.ofdm.modem import OfdmConfig, OfdmPacket, equalize, estimate_channel, ofdm_demodulate, ofdm_modulate
from usdr.ofdm.pilot import PilotPlan, default_pilot
from usdr.ofdm.qam import bits_per_symbol, qam_decide, qam_demap, qam_map

LENGTH_PREFIX_BITS = 32
EVM_FLOOR_DB = -300.0


def _pilot(config: OfdmConfig, pilot_plan: PilotPlan | None) -> PilotPlan:
    return default_pilot(config) if pilot_plan is None else pilot_plan


def encode_packet(bits, config: OfdmConfig, pilot_plan: PilotPlan | None = None) -> OfdmPacket:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    pilot = _pilot(config, pilot_plan)
    if bits.size == 0:
        return ofdm_modulate(np.zeros((0, config.p)), config, pilot.pilot_sequence)
    if bits.size >= 1 << LENGTH_PREFIX_BITS:
        raise ValueError("payload too long for the 32-bit length prefix")
    prefix = (bits.size >> np.arange(LENGTH_PREFIX_BITS - 1, -1, -1)) & 1
    stream = np.concatenate([prefix.astype(np.uint8), bits])
    stream = np.concatenate([stream, np.zeros(-stream.size % config.bits_per_block, np.uint8)])
    symbols = qam_map(stream, config.qam_order).reshape(-1, config.p)
    return ofdm_modulate(symbols, config, pilot.pilot_sequence)


def evm_db(equalized, decided) -> float:
    err = np.mean(np.abs(equalized - decided) ** 2)
    ref = np.mean(np.abs(decided) ** 2)
    if ref == 0:
        return EVM_FLOOR_DB
    return float(max(10 * np.log10(max(err / ref, 1e-300)), EVM_FLOOR_DB))


def decode_packet(
    packet, config: OfdmConfig, pilot_plan: PilotPlan | None = None, n_bits: int | None = None
) -> tuple[np.ndarray, float]:
    """Return ``(bits, evm_db)``; EVM is measured against hard decisions after equalization.

    ``n_bits`` overrides the received length prefix (useful when the prefix
    itself may be corrupted, as in BER sweeps).
    """
    pilot = _pilot(config, pilot_plan)
    pilot_rx, data_rx = ofdm_demodulate(packet, config)
    estimate = estimate_channel(pilot_rx, pilot.pilot_sequence)
    if data_rx.shape[0] == 0:
        return np.zeros(0, np.uint8), EVM_FLOOR_DB
    eq = equalize(data_rx, estimate)
    usable = np.broadcast_to(estimate.usable, eq.shape)
    decided = qam_decide(eq, config.qam_order).reshape(eq.shape)
    evm = evm_db(eq[usable], decided[usable])

    k = bits_per_symbol(config.qam_order)
    bits = qam_demap(eq, config.qam_order).reshape(eq.shape + (k,))
    bits[~usable] = 0  # erasures demap to the all-zero label
    bits = bits.reshape(-1)
    if n_bits is None:
        n = int((bits[:LENGTH_PREFIX_BITS].astype(np.int64) << np.arange(LENGTH_PREFIX_BITS - 1, -1, -1)).sum())
    else:
        n = int(n_bits)
    n = min(n, bits.size - LENGTH_PREFIX_BITS)
    return bits[LENGTH_PREFIX_BITS : LENGTH_PREFIX_BITS + n].copy(), evm
