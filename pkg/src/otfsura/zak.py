"""Discrete Zak transform kernel for OTFS signal processing.

The delay-Doppler (DD) grid is an M x N complex matrix (M delay bins,
N Doppler bins).  Its time-domain counterpart is the length-M*N vector
obtained by an inverse DFT along the Doppler axis followed by column-wise
vectorisation.  All DFTs use the unitary (1/sqrt(N)) convention, so both
transforms are isometries and power accounting is exact.

Conventions, fixed here and relied on everywhere else:

* ``idzt(X)[m + M*q] = (1/sqrt(N)) * sum_n X[m, n] * exp(+2j*pi*q*n/N)``
* ``dzt`` is the exact inverse: reshape column-wise to M x N, forward
  unitary DFT along the Doppler axis.
* A delay/Doppler shift ``(tau, nu)`` acts on a length-L time signal as
  ``y[l] = x[(l - tau) mod L] * exp(2j*pi*nu*(l - tau)/L)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DDShift:
    """Integer delay/Doppler shift, in grid bins."""

    delay: int
    doppler: int


def doppler_bins(max_doppler: int) -> range:
    """On-grid Doppler indices: {-max_doppler+1, ..., max_doppler}.

    ``max_doppler == 0`` collapses the Doppler axis to {0} (the
    non-dispersive / GMAC-style configuration).
    """
    if max_doppler < 0:
        raise ValueError("max_doppler must be >= 0")
    if max_doppler == 0:
        return range(0, 1)
    return range(-max_doppler + 1, max_doppler + 1)


def idzt(grid: np.ndarray) -> np.ndarray:
    """Inverse discrete Zak transform: M x N DD grid -> length M*N time signal.

    Inverse unitary DFT along the Doppler (column) axis, then column-wise
    vectorisation.  Norm preserving.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    rows = np.fft.ifft(grid, axis=1, norm="ortho")
    return rows.reshape(-1, order="F")


def dzt(signal: np.ndarray, m: int, n: int) -> np.ndarray:
    """Discrete Zak transform: length m*n time signal -> m x n DD grid.

    Exact inverse of :func:`idzt` (column-wise reshape, forward unitary DFT
    along the Doppler axis).
    """
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.size != m * n:
        raise ValueError(f"signal length {signal.size} does not match {m}x{n}")
    return np.fft.fft(signal.reshape(m, n, order="F"), axis=1, norm="ortho")


def add_cp(signal: np.ndarray, cp_len: int) -> np.ndarray:
    """Prepend the last ``cp_len`` samples as a cyclic prefix."""
    signal = np.asarray(signal)
    if cp_len < 0 or cp_len > signal.size:
        raise ValueError(f"cp_len {cp_len} out of range for length {signal.size}")
    if cp_len == 0:
        return signal.copy()
    return np.concatenate([signal[-cp_len:], signal])


def remove_cp(signal: np.ndarray, cp_len: int) -> np.ndarray:
    """Drop the first ``cp_len`` samples (inverse of :func:`add_cp`)."""
    signal = np.asarray(signal)
    if cp_len < 0 or cp_len >= signal.size:
        raise ValueError(f"cp_len {cp_len} out of range for length {signal.size}")
    return signal[cp_len:].copy()


def dd_shift_time(signal: np.ndarray, shift: DDShift, grid_len: int) -> np.ndarray:
    """Apply a cyclic delay-Doppler shift to a time signal.

    ``y[l] = x[(l - tau) mod L] * exp(2j*pi*nu*(l - tau)/L)`` with
    ``L == grid_len``.  Unitary, so the norm is preserved.
    """
    signal = np.asarray(signal)
    if signal.size != grid_len:
        raise ValueError(f"signal length {signal.size} != grid_len {grid_len}")
    tau, nu = shift.delay, shift.doppler
    delayed = np.roll(signal, tau)
    ramp = np.exp(2j * np.pi * nu * (np.arange(grid_len) - tau) / grid_len)
    return delayed * ramp


def dd_phase_relation(
    shift: DDShift, m: int, n: int, num_delay: int, num_doppler: int
) -> tuple[tuple[int, int], complex]:
    """DD-domain input-output relation of a unit-gain single-path channel.

    For observation cell ``(m, n)`` of an ``num_delay x num_doppler`` grid
    and a cyclic shift ``(tau, nu)``, returns the source cell
    ``((m - tau) mod M, (n - nu) mod N)`` and the unit-modulus phase such
    that ``Y[m, n] = phase * X[source]``:

    ``phase = exp(2j*pi*nu*(m - tau)/(M*N)) * exp(2j*pi*(n - nu)*floor((m - tau)/M)/N)``
    """
    if not (0 <= m < num_delay and 0 <= n < num_doppler):
        raise ValueError(f"cell ({m}, {n}) outside {num_delay}x{num_doppler} grid")
    tau, nu = shift.delay, shift.doppler
    src = (int((m - tau) % num_delay), int((n - nu) % num_doppler))
    wraps = (m - tau) // num_delay  # floor division, exact
    phase = np.exp(2j * np.pi * nu * (m - tau) / (num_delay * num_doppler))
    phase *= np.exp(2j * np.pi * (n - nu) * wraps / num_doppler)
    return src, complex(phase)


def dd_shift_grid_maps(
    shift: DDShift, num_delay: int, num_doppler: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised forward form of :func:`dd_phase_relation` over a full grid.

    Returns ``(dest_flat, factor)`` where, for every source cell with
    column-major flat index ``j``, the single-path channel deposits
    ``factor[j] * X.flat_colmajor[j]`` at flat index ``dest_flat[j]``.
    Equivalently ``Y = scatter(factor * x)``, the exact DD-domain image of
    :func:`dd_shift_time`.
    """
    tau, nu = shift.delay, shift.doppler
    m_bins, n_bins = num_delay, num_doppler
    src_m = np.arange(m_bins)
    src_n = np.arange(n_bins)
    wraps = (src_m + tau) // m_bins  # delay wrap count per source row
    dst_m = src_m + tau - m_bins * wraps
    dst_n = (src_n + nu) % n_bins
    # factor = exp(2j*pi*nu*(m-tau)/(MN)) * exp(2j*pi*(n-nu)*floor((m-tau)/M)/N)
    # with m-tau = src_m - M*wraps and floor((m-tau)/M) = -wraps at the dest.
    row_phase = np.exp(2j * np.pi * nu * (src_m - m_bins * wraps) / (m_bins * n_bins))
    col_phase = np.exp(-2j * np.pi * np.outer(wraps, src_n) / n_bins)
    factor = row_phase[:, None] * col_phase
    dest_flat = dst_m[:, None] + m_bins * dst_n[None, :]
    return dest_flat.reshape(-1, order="F"), factor.reshape(-1, order="F")
