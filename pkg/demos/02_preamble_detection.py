"""Joint activity detection and channel estimation on a toy codebook.

Five users each pick one of 64 preambles and reach the receiver over a
random single-path channel; AMP recovers who is active, on which
delay/Doppler cell, and with which gain.
"""

import numpy as np

from otfsura import csamp, txchain
from otfsura.config import AmpParams
from otfsura.csamp import ExpandedSensing

rng = np.random.default_rng(1)

sensing = txchain.build_sensing_matrix(n_bits=6, preamble_len=64, seed=7)
expanded = ExpandedSensing(sensing, 8, 8, max_delay=1, max_doppler=1)
print(f"codebook: {sensing.num_columns} preambles, "
      f"expanded to {expanded.num_columns} columns over {expanded.num_shifts} shifts")

# ground truth: 5 active users, unit-magnitude random-phase gains scaled
# well above the noise, random on-grid shifts
truth = np.zeros(expanded.num_columns, dtype=complex)
active = rng.choice(sensing.num_columns, size=5, replace=False)
for i in active:
    flat = int(rng.integers(0, expanded.num_shifts)) * sensing.num_columns + int(i)
    truth[flat] = 6.0 * np.exp(2j * np.pi * rng.random())

noise = (rng.normal(size=64) + 1j * rng.normal(size=64)) * np.sqrt(0.5)
measurement = expanded.matvec(truth) + noise

support = csamp.amp_decode(measurement, expanded, AmpParams(denoiser="soft"))
print(f"AMP finished after {support.iterations} iterations, "
      f"noise level estimate {support.noise_level:.3f}\n")

print("  flat column   preamble  (delay, doppler)     true gain     estimate")
for flat in support.active:
    idx, shift = expanded.split_index(int(flat))
    print(f"  {flat:11d}   {idx:8d}  ({shift.delay}, {shift.doppler:+d})"
          f"        {truth[flat]:+.3f}  {support.coefficients[flat]:+.3f}")
