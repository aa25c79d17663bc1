# coding: utf-8

# # DC-biased optical OFDM
#
# An LED can only emit nonnegative intensity, so the OFDM block is made real
# by Hermitian symmetry and lifted by a DC bias.  A low-PAPR pilot block
# estimates the channel.

import numpy as np

from usdr.channel import ChannelModel, apply_channel
from usdr.iq import IqFrame
from usdr.ofdm import OfdmConfig, decode_packet, encode_packet, hermitian_frame, papr, search_pilot

rng = np.random.Generator(np.random.Philox(1))
cfg = OfdmConfig(n_fft=64, p=31, qam_order=16)

# Hermitian framing: bin 0 and bin N/2 stay empty, the upper half mirrors the
# lower half, and the inverse FFT is real to rounding.

data = (rng.normal(size=cfg.p) + 1j * rng.normal(size=cfg.p)) / np.sqrt(2)
x = np.fft.ifft(hermitian_frame(data, cfg))
print("max |imag| / max |real| =", np.abs(x.imag).max() / np.abs(x.real).max())

# Pilot search: random QPSK candidates, keep the lowest PAPR.

for budget in (1, 16, 256, 4096):
    print(f"budget {budget:5d}: pilot PAPR {search_pilot(cfg, candidate_budget=budget).papr_db:.2f} dB")

# A packet, its drive signal and the bias.

bits = rng.integers(0, 2, 4000, dtype=np.uint8)
pkt = encode_packet(bits, cfg)
print(f"{pkt.n_data} data blocks, min sample {pkt.samples.min():.3f}, PAPR {papr(pkt.samples):.1f} dB")

# Through a dispersive channel with noise.  The cyclic prefix absorbs the
# three-tap response and one-tap equalization undoes it.  The SNR counts the
# DC bias as signal, so the subcarriers see a good deal less.

for snr in (25, 30, 35, 40, 45):
    y = apply_channel(IqFrame(pkt.samples), ChannelModel("fir_isi", taps=[1.0, 0.5, 0.2]))
    y = apply_channel(y, ChannelModel("awgn", snr_db=snr, seed=snr))
    out, evm = decode_packet(y.samples.real, cfg, n_bits=bits.size)
    print(f"{snr} dB  EVM {evm:6.1f} dB  bit errors {np.count_nonzero(out != bits)}")
