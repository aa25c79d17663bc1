"""DC-biased optical OFDM modem."""

from usdr.ofdm.modem import (
    ChannelEstimate,
    OfdmConfig,
    OfdmPacket,
    equalize,
    estimate_channel,
    hermitian_frame,
    ofdm_demodulate,
    ofdm_modulate,
    papr,
    time_blocks,
)
from usdr.ofdm.packet import decode_packet, encode_packet, evm_db
from usdr.ofdm.pilot import PilotPlan, default_pilot, search_pilot
from usdr.ofdm.qam import constellation, qam_demap, qam_map

__all__ = [
    "ChannelEstimate",
    "OfdmConfig",
    "OfdmPacket",
    "PilotPlan",
    "constellation",
    "decode_packet",
    "default_pilot",
    "encode_packet",
    "equalize",
    "estimate_channel",
    "evm_db",
    "hermitian_frame",
    "ofdm_demodulate",
    "ofdm_modulate",
    "papr",
    "qam_demap",
    "qam_map",
    "search_pilot",
    "time_blocks",
]
