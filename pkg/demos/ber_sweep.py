# coding: utf-8

# # Error rate against SNR for all three modems
#
# Every point is seeded, so rerunning prints the same table.  The same sweep
# is available from the command line as ``usdr sweep --spec spec.json``.

from usdr.harness.sweep import SweepSpec, ber_sweep, ber_sweep_rows

specs = [
    SweepSpec("lora", {"sf": 7, "cr": 1}, snr_points_db=[-12, -10, -8, -6], trials_per_point=20, seed=1),
    SweepSpec("lora", {"sf": 10, "cr": 1}, snr_points_db=[-20, -18, -16, -14], trials_per_point=10, seed=1),
    SweepSpec("ook", {"sps": 1}, snr_points_db=[4, 6, 8, 10], trials_per_point=10, seed=1),
    SweepSpec("ofdm", {"qam_order": 4}, snr_points_db=[15, 20, 25, 30], trials_per_point=5, seed=1),
]

for spec in specs:
    print(f"--- {spec.waveform} {spec.config}")
    for row in ber_sweep_rows(spec):
        ser = "" if row["ser"] in ("", None) else f"  SER {float(row['ser']):.3g}"
        print(f"{float(row['snr_db']):6.1f} dB  BER {float(row['ber']):.3g}{ser}")

# CSV output, as written by the command line tool.

print(ber_sweep(specs[2]))
