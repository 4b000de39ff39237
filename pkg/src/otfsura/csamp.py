"""Phase-1 receiver: joint activity detection and channel estimation.

The received preamble block, in the DD domain, is a noisy superposition of
delay-Doppler shifted preamble columns.  Stacking every on-grid shifted
copy of every preamble as columns gives the expanded sensing matrix; the
receiver recovers the sparse coefficient vector over that column space
with AMP and reads off active preambles and per-path channel estimates.

The expanded matrix is never materialised: a DD shift acts on a DD-domain
vector as a permutation plus a diagonal unit-modulus phase, so products
with the full matrix reduce to one dense product with the base codebook
plus per-shift gather/scatter passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelPath, UserChannel
from .txchain import SensingMatrix
from .zak import (
    DDShift,
    dd_shift_grid_maps,
    dd_shift_time,
    doppler_bins,
    dzt,
    idzt,
    remove_cp,
)

_LN2_SQRT = np.sqrt(np.log(2.0))  # median of |CN(0,s^2)| is s*sqrt(ln 2)


def shift_list(max_delay: int, max_doppler: int) -> list[DDShift]:
    """Canonical enumeration of the on-grid shifts (delay-major)."""
    return [
        DDShift(tau, nu)
        for tau in range(max_delay + 1)
        for nu in doppler_bins(max_doppler)
    ]


@dataclass
class ExpandedSensing:
    """Matrix-free view of the DD-expanded sensing matrix.

    Columns are indexed ``shift_index * num_preambles + preamble_index``
    (shift-major), so each contiguous block of ``num_preambles`` columns
    shares one (delay, Doppler) shift.
    """

    base: SensingMatrix
    delay_bins: int
    doppler_bins: int
    max_delay: int
    max_doppler: int
    shifts: list[DDShift] = field(init=False)
    _dest: np.ndarray = field(init=False, repr=False)
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.delay_bins * self.doppler_bins != self.base.preamble_len:
            raise ValueError("preamble grid does not match the codebook length")
        self.shifts = shift_list(self.max_delay, self.max_doppler)
        n = self.base.preamble_len
        self._dest = np.empty((len(self.shifts), n), dtype=np.int64)
        self._factor = np.empty((len(self.shifts), n), dtype=complex)
        for s, sh in enumerate(self.shifts):
            dest, factor = dd_shift_grid_maps(sh, self.delay_bins, self.doppler_bins)
            self._dest[s] = dest
            self._factor[s] = factor

    @property
    def num_shifts(self) -> int:
        return len(self.shifts)

    @property
    def num_columns(self) -> int:
        return self.base.num_columns * self.num_shifts

    def column_index(self, preamble_index: int, shift: DDShift) -> int:
        return self.shifts.index(shift) * self.base.num_columns + preamble_index

    def split_index(self, flat: int) -> tuple[int, DDShift]:
        s, i = divmod(flat, self.base.num_columns)
        return i, self.shifts[s]

    def matvec(self, coeffs: np.ndarray) -> np.ndarray:
        """``A_exp @ coeffs`` without materialising the matrix."""
        blocks = coeffs.reshape(self.num_shifts, self.base.num_columns)
        mixed = self.base.columns @ blocks.T  # (n, num_shifts)
        out = np.zeros(self.base.preamble_len, dtype=complex)
        for s in range(self.num_shifts):
            out[self._dest[s]] += self._factor[s] * mixed[:, s]
        return out

    def rmatvec(self, vec: np.ndarray) -> np.ndarray:
        """``A_exp^H @ vec``."""
        shifted = np.conj(self._factor) * vec[self._dest]  # (num_shifts, n)
        blocks = self.base.columns.conj().T @ shifted.T    # (num_preambles, num_shifts)
        return blocks.T.reshape(-1)

    def columns_at(self, flat_indices: np.ndarray) -> np.ndarray:
        """Materialise selected expanded columns (for least squares / tests)."""
        out = np.empty((self.base.preamble_len, len(flat_indices)), dtype=complex)
        for k, flat in enumerate(flat_indices):
            s, i = divmod(int(flat), self.base.num_columns)
            col = np.zeros(self.base.preamble_len, dtype=complex)
            col[self._dest[s]] = self._factor[s] * self.base.columns[:, i]
            out[:, k] = col
        return out


def expanded_column(
    base: SensingMatrix,
    preamble_index: int,
    shift: DDShift,
    num_delay: int,
    num_doppler: int,
) -> np.ndarray:
    """One column of the expanded sensing matrix, via the time domain.

    The DD-domain image of sending preamble ``preamble_index`` over a
    unit-gain single-path channel with this shift: IDZT, cyclic DD shift,
    DZT, vectorised column-wise.
    """
    if not 0 <= shift.delay < num_delay:
        raise ValueError("delay shift outside the grid")
    if not -num_doppler < shift.doppler < num_doppler:
        raise ValueError("Doppler shift outside the grid")
    grid = base.columns[:, preamble_index].reshape(num_delay, num_doppler, order="F")
    time_sig = dd_shift_time(idzt(grid), shift, grid.size)
    return dzt(time_sig, num_delay, num_doppler).reshape(-1, order="F")


def dd_measurement(received_cp: np.ndarray, config) -> np.ndarray:
    """CP removal + DZT + column-wise vectorisation of the preamble block."""
    block = remove_cp(np.asarray(received_cp), config.max_delay)
    grid = dzt(block, config.preamble_delay_bins, config.preamble_doppler_bins)
    return grid.reshape(-1, order="F")


@dataclass
class SparseSupport:
    """AMP output: the estimated coefficient vector and its active set."""

    coefficients: np.ndarray
    active: np.ndarray          # flat column indices with |coeff| above the gate
    noise_level: float          # final residual-based noise scale estimate
    iterations: int


def amp_decode(
    y_dd: np.ndarray,
    sensing: ExpandedSensing,
    params,
    expected_active: float | None = None,
    signal_var: float | None = None,
    signal_amp: complex | None = None,
) -> SparseSupport:
    """AMP recovery of the sparse activity vector.

    Iterates ``x <- eta(x + A^H z)``, ``z <- y - A x + (z/delta)*<eta'>``
    with ``delta = rows/columns``.  Denoisers:

    * ``"soft"`` (default): complex soft threshold at ``threshold_scale``
      times the residual noise level (median absolute deviation of ``|z|``).
    * ``"bg"``: Bernoulli-Gaussian posterior mean; prior activity
      ``expected_active / columns`` with coefficient variance ``signal_var``
      (matched to Rayleigh path gains).
    * ``"pm"``: Bernoulli point-mass posterior mean at the known coefficient
      ``signal_amp`` (matched to deterministic unit-gain paths; its decision
      statistic is coherent, which is what lets it track the good
      state-evolution branch at high load).

    The active set is gated at ``activity_scale`` times the final noise
    level, by default after a least-squares re-fit of the candidate
    coefficients.
    """
    y = np.asarray(y_dd, dtype=complex)
    rows = y.size
    cols = sensing.num_columns
    if rows != sensing.base.preamble_len:
        raise ValueError("measurement length does not match the codebook")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite measurement")
    delta = rows / cols
    if params.denoiser in ("bg", "pm") and expected_active is None:
        raise ValueError(f"{params.denoiser} denoiser needs expected_active")
    if params.denoiser == "bg" and signal_var is None:
        raise ValueError("bg denoiser needs signal_var")
    if params.denoiser == "pm" and signal_amp is None:
        raise ValueError("pm denoiser needs signal_amp")
    if params.denoiser not in ("soft", "bg", "pm"):
        raise ValueError(f"unknown denoiser {params.denoiser!r}")

    x = np.zeros(cols, dtype=complex)
    z = y.copy()
    sigma = float(np.median(np.abs(z)) / _LN2_SQRT)
    prev_res = np.linalg.norm(z)
    iters_done = 0

    for t in range(params.num_iters):
        pseudo = x + sensing.rmatvec(z)
        if params.denoiser == "bg":
            tau2 = max(np.linalg.norm(z) ** 2 / rows, 1e-300)
            eps = min(expected_active / cols, 0.5)
            vg = signal_var
            k = vg / (tau2 * (vg + tau2))
            log_ratio = (
                np.log(eps / (1 - eps))
                + np.log(tau2 / (vg + tau2))
                + np.abs(pseudo) ** 2 * k
            )
            post = 1.0 / (1.0 + np.exp(-np.clip(log_ratio, -60, 60)))
            wiener = vg / (vg + tau2)
            x = post * wiener * pseudo
            deriv = wiener * (post + post * (1 - post) * k * np.abs(pseudo) ** 2)
            eta_prime = float(np.mean(deriv))
            sigma = np.sqrt(tau2)
        elif params.denoiser == "pm":
            tau2 = max(np.linalg.norm(z) ** 2 / rows, 1e-300)
            eps = min(expected_active / cols, 0.5)
            amp = complex(signal_amp)
            log_ratio = (
                np.log(eps / (1 - eps))
                + (2.0 * (pseudo * np.conj(amp)).real - abs(amp) ** 2) / tau2
            )
            post = 1.0 / (1.0 + np.exp(-np.clip(log_ratio, -60, 60)))
            x = post * amp
            deriv = post * (1.0 - post) * abs(amp) ** 2 / tau2
            eta_prime = float(np.mean(deriv))
            sigma = np.sqrt(tau2)
        else:
            sigma = float(np.median(np.abs(z)) / _LN2_SQRT)
            thr = params.threshold_scale * sigma
            mag = np.abs(pseudo)
            active = mag > thr
            x = np.where(active, pseudo * (1.0 - thr / np.maximum(mag, 1e-300)), 0.0)
            eta_prime = float(np.mean(active * (1.0 - thr / (2.0 * np.maximum(mag, 1e-300)))))

        z = y - sensing.matvec(x) + z * (eta_prime / delta)
        iters_done = t + 1
        if not np.all(np.isfinite(z)):
            raise RuntimeError(f"AMP diverged (non-finite residual at iteration {t})")
        res = np.linalg.norm(z)
        if prev_res > 0 and abs(prev_res - res) / prev_res < params.stop_tol:
            break
        prev_res = res

    if params.ls_refine:
        coeffs, active_idx, sigma = _debias_and_gate(y, x, sensing, params, sigma)
    else:
        gate = params.activity_scale * sigma
        active_idx = np.flatnonzero(np.abs(x) > gate)
        coeffs = x
    return SparseSupport(
        coefficients=coeffs,
        active=active_idx,
        noise_level=sigma,
        iterations=iters_done,
    )


def _debias_and_gate(y, x, sensing, params, sigma_amp):
    """Least-squares re-fit of the AMP support, then magnitude gating.

    Soft thresholding shrinks every surviving coefficient by roughly the
    threshold, so gating the raw AMP output discards genuine weak paths.
    Refitting the candidate columns removes that bias; each coefficient is
    then gated against its own standard error (post-fit residual scale
    times the Gram-inverse leverage), with one prune-and-refit pass.
    """
    rows = y.size
    cand = np.flatnonzero(np.abs(x) > 0.5 * sigma_amp)
    if cand.size == 0:
        return np.zeros_like(x), cand, sigma_amp
    if cand.size >= rows:
        order = np.argsort(-np.abs(x[cand]))
        cand = np.sort(cand[order[: rows - 1]])

    sigma_ls = sigma_amp
    fit = None
    for _ in range(2):
        cols_mat = sensing.columns_at(cand)
        fit, *_ = np.linalg.lstsq(cols_mat, y, rcond=None)
        resid = y - cols_mat @ fit
        dof = max(rows - cand.size, 1)
        sigma_ls = float(np.sqrt(np.sum(np.abs(resid) ** 2) / dof))
        # floor at numerical precision so an exact fit cannot promote dust
        sigma_ls = max(sigma_ls, 1e-12 * float(np.linalg.norm(y)) / np.sqrt(rows))
        gram = cols_mat.conj().T @ cols_mat
        leverage = np.abs(np.diag(np.linalg.pinv(gram)))
        se = sigma_ls * np.sqrt(np.maximum(leverage, 1e-300))
        keep = np.abs(fit) > params.activity_scale * se
        if keep.all():
            break
        cand = cand[keep]
        fit = fit[keep]
        if cand.size == 0:
            return np.zeros_like(x), cand, sigma_ls
    active_idx = cand
    coeffs = np.zeros_like(x)
    coeffs[active_idx] = fit
    return coeffs, active_idx, sigma_ls


@dataclass
class DetectedUser:
    """One detected preamble with its per-path channel estimates."""

    preamble_index: int
    paths: list  # list of ChannelPath

    @property
    def total_power(self) -> float:
        return float(sum(abs(p.gain) ** 2 for p in self.paths))


def extract_detections(
    support: SparseSupport, sensing: ExpandedSensing, config
) -> list[DetectedUser]:
    """Group active columns by preamble; divide out the known preamble scale
    so gains are in channel units."""
    scale = np.sqrt(config.power_preamble * config.n_preamble)
    groups: dict[int, list] = {}
    for flat in support.active:
        idx, shift = sensing.split_index(int(flat))
        gain = complex(support.coefficients[flat] / scale)
        groups.setdefault(idx, []).append(ChannelPath(gain, shift))
    return [
        DetectedUser(preamble_index=i, paths=paths)
        for i, paths in sorted(groups.items())
    ]


def miss_detection_rate(
    truth: list[tuple[int, UserChannel]], detected: list[DetectedUser]
) -> float:
    """Fraction of transmitted preambles not recovered.

    Strict rule: a transmitted preamble counts as detected only if its
    index together with the exact (delay, Doppler) of every one of its
    paths appears among the detections.
    """
    if not truth:
        raise ValueError("no transmitted users")
    found = {
        (d.preamble_index, p.shift.delay, p.shift.doppler)
        for d in detected
        for p in d.paths
    }
    misses = 0
    for index, chan in truth:
        ok = all(
            (index, p.shift.delay, p.shift.doppler) in found for p in chan.paths
        )
        misses += not ok
    return misses / len(truth)
