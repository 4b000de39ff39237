"""A miniature load sweep, written to CSV the same way the CLI does it.

Runs a reduced-size system (shorter preambles, small polar code) so the
whole sweep takes seconds, then prints the result table.  The CSV plus its
JSON sidecar are exactly what the uraplots package consumes.
"""

import csv

from otfsura import harness
from otfsura.config import SystemConfig

cfg = SystemConfig(
    preamble_bits=8,
    data_bits=20,
    preamble_delay_bins=16,
    preamble_doppler_bins=8,
    data_delay_bins=32,
    data_doppler_bins=32,
    max_delay=2,
    max_doppler=1,
    ebn0_preamble_db=6.0,
    fading="unit",
    num_trials=20,
)
cfg.polar.block_len = 128
cfg.polar.crc_len = 11
cfg.polar.list_size = 8

rows = harness.run_sweep(
    cfg,
    ka_values=[5, 10, 20],
    ebn0_values=[4.0],
    out_csv="small_sweep.csv",
)

with open("small_sweep.csv") as fh:
    for row in csv.DictReader(fh):
        print(f"K_a={row['k_a']:>3}  miss={float(row['miss_rate']):.4f}  "
              f"pupe={float(row['pupe']):.4f}  "
              f"overall Eb/N0={float(row['ebn0_overall_db']):.2f} dB")

print("\nwrote small_sweep.csv + small_sweep.json")
print("render with: uraplots miss --csv small_sweep.csv --out miss.png")
