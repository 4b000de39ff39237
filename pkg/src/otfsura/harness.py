"""Monte Carlo orchestration: reproducible trials, (K_a, Eb/N0) sweeps,
Wilson confidence intervals, threshold search and CSV/JSON persistence."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codec, csamp, rxdata, txchain
from .channel import (
    ChannelPath,
    NoiseSpec,
    UserChannel,
    apply_channel,
    draw_user_channel,
)
from .config import SystemConfig
from .csamp import DetectedUser, ExpandedSensing
from .zak import DDShift, dzt, remove_cp

RESULT_COLUMNS = [
    "config_hash",
    "k_a",
    "ebn0_data_db",
    "ebn0_overall_db",
    "trials",
    "miss_rate",
    "miss_ci_lo",
    "miss_ci_hi",
    "pupe",
    "pupe_ci_lo",
    "pupe_ci_hi",
    "undetected_errors",
]
SCHEMA_VERSION = 1


@dataclass
class TrialReport:
    seed: int
    num_users: int
    miss_count: int
    decoded_count: int
    error_count: int          # transmitted messages not decoded
    undetected_errors: int    # CRC passes with wrong bits
    collisions: int           # users sharing a preamble with someone else
    user_codes: list[str] = field(default_factory=list)

    @property
    def miss_rate(self) -> float:
        return self.miss_count / self.num_users

    @property
    def pupe(self) -> float:
        return self.error_count / self.num_users


_SENSING_CACHE: dict[tuple, tuple] = {}


def get_sensing(config: SystemConfig) -> tuple[txchain.SensingMatrix, ExpandedSensing]:
    """Per-process cache of the (fixed) codebook and its expanded operator."""
    key = (
        config.sensing_seed,
        config.preamble_bits,
        config.preamble_delay_bins,
        config.preamble_doppler_bins,
        config.max_delay,
        config.max_doppler,
    )
    hit = _SENSING_CACHE.get(key)
    if hit is None:
        sensing = txchain.build_sensing_matrix(
            config.preamble_bits, config.n_preamble, config.sensing_seed
        )
        expanded = ExpandedSensing(
            sensing,
            config.preamble_delay_bins,
            config.preamble_doppler_bins,
            config.max_delay,
            config.max_doppler,
        )
        _SENSING_CACHE.clear()
        _SENSING_CACHE[key] = (sensing, expanded)
        hit = _SENSING_CACHE[key]
    return hit


def _ideal_detections(
    users: list[tuple[int, UserChannel]]
) -> list[DetectedUser]:
    """Oracle phase 1: the true active set with true channels (phase-1 units);
    users picking the same preamble merge, gains adding on identical shifts."""
    merged: dict[int, dict[tuple[int, int], complex]] = {}
    for index, chan in users:
        cell_map = merged.setdefault(index, {})
        for p in chan.paths:
            key = (p.shift.delay, p.shift.doppler)
            cell_map[key] = cell_map.get(key, 0.0) + p.gain
    out = []
    for index in sorted(merged):
        paths = [
            ChannelPath(gain, DDShift(*key)) for key, gain in merged[index].items()
        ]
        out.append(DetectedUser(preamble_index=index, paths=paths))
    return out


def _resolved_denoiser(config: SystemConfig) -> str:
    if config.amp.denoiser != "auto":
        return config.amp.denoiser
    return "pm" if config.fading == "unit" else "bg"


def run_trial(config: SystemConfig, trial_index: int) -> TrialReport:
    """One end-to-end Monte Carlo trial, deterministic in (config, trial_index)."""
    rng = np.random.default_rng(
        np.random.SeedSequence((config.master_seed, trial_index))
    )
    sensing, expanded = get_sensing(config)
    ka = config.num_users

    # draw messages and channels
    bits = rng.integers(0, 2, size=(ka, config.total_bits)).astype(np.uint8)
    path_choices = config.paths_choices()
    channels = []
    for k in range(ka):
        p_k = int(rng.choice(path_choices)) if len(path_choices) > 1 else path_choices[0]
        channels.append(
            draw_user_channel(rng, p_k, config.max_delay, config.max_doppler, config.fading)
        )
    indices = [codec.bits_to_int(bits[k, : config.preamble_bits]) for k in range(ka)]
    data_bits = [bits[k, config.preamble_bits :] for k in range(ka)]
    truth_phase1 = list(zip(indices, channels))
    index_counts: dict[int, int] = {}
    for i in indices:
        index_counts[i] = index_counts.get(i, 0) + 1
    collisions = sum(1 for i in indices if index_counts[i] > 1)

    # transmit + channel (both phases in one timeline: the Doppler ramp is
    # referenced to the start of the CP-stripped preamble block)
    frames = [txchain.transmit(bits[k], sensing, config) for k in range(ka)]
    pairs = [(frames[k].frame, channels[k]) for k in range(ka)]
    received = apply_channel(
        pairs,
        NoiseSpec(config.noise_var),
        rng,
        nu_period=config.n_preamble,
        phase_ref=config.max_delay,
    )

    # phase 1
    if config.ideal_phase1:
        detections = _ideal_detections(truth_phase1)
    else:
        y_p_cp = received[: config.n_preamble + config.max_delay]
        y_dd = csamp.dd_measurement(y_p_cp, config)
        mean_paths = float(np.mean(path_choices))
        coef = np.sqrt(config.power_preamble * config.n_preamble)
        params = config.amp
        denoiser = _resolved_denoiser(config)
        if denoiser != params.denoiser:
            params = dataclasses.replace(params, denoiser=denoiser)
        support = csamp.amp_decode(
            y_dd,
            expanded,
            params,
            expected_active=ka * mean_paths,
            signal_var=coef**2 / mean_paths,
            signal_amp=coef,
        )
        detections = csamp.extract_detections(support, expanded, config)

    found = {
        (d.preamble_index, p.shift.delay, p.shift.doppler)
        for d in detections
        for p in d.paths
    }
    user_missed = [
        not all((indices[k], p.shift.delay, p.shift.doppler) in found
                for p in channels[k].paths)
        for k in range(ka)
    ]
    miss_count = sum(user_missed)
    user_codes = ["missed" if m else "detected" for m in user_missed]

    if not config.run_data_phase:
        return TrialReport(
            seed=trial_index,
            num_users=ka,
            miss_count=miss_count,
            decoded_count=0,
            error_count=ka,
            undetected_errors=0,
            collisions=collisions,
            user_codes=user_codes,
        )

    # phase 2
    y_c_cp = received[config.n_preamble + config.max_delay :]
    grid_c = dzt(
        remove_cp(y_c_cp, config.max_delay),
        config.data_delay_bins,
        config.data_doppler_bins,
    )
    genie_truth = None
    if config.polar.genie:
        genie_truth = {}
        for k in range(ka):
            genie_truth.setdefault(indices[k], []).append(data_bits[k])
    rescaled = rxdata.rescale_channel(detections, config)
    outcomes, _ = rxdata.decode_all(grid_c, rescaled, config, genie_truth)

    truth_msgs = list(zip(indices, data_bits))
    pupe_val = rxdata.pupe(outcomes, truth_msgs)
    error_count = round(pupe_val * ka)
    decoded_count = ka - error_count

    truth_set = {(i, d.tobytes()) for i, d in truth_msgs}
    undetected = sum(
        1
        for o in outcomes
        if o.crc_ok and (o.user.preamble_index, o.data_bits.tobytes()) not in truth_set
    )
    decoded_set = {
        (o.user.preamble_index, o.data_bits.tobytes())
        for o in outcomes
        if o.crc_ok
    }
    for k in range(ka):
        if (indices[k], data_bits[k].tobytes()) in decoded_set:
            user_codes[k] = "decoded"
        elif user_codes[k] != "missed":
            user_codes[k] = "undecoded"

    return TrialReport(
        seed=trial_index,
        num_users=ka,
        miss_count=miss_count,
        decoded_count=decoded_count,
        error_count=error_count,
        undetected_errors=undetected,
        collisions=collisions,
        user_codes=user_codes,
    )


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total == 0:
        return (0.0, 1.0)
    p = successes / total
    denom = 1 + z**2 / total
    centre = (p + z**2 / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z**2 / (4 * total**2)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def overall_ebn0(config: SystemConfig, data_ebn0_db: float | None = None) -> float:
    """Energy-domain bit-weighted combination of the two phases' Eb/N0, in dB.

    CP energy is excluded from the budget by construction (neither phase's
    Eb/N0 counts it)."""
    if data_ebn0_db is None:
        data_ebn0_db = config.ebn0_data_db
    e_p = 10 ** (config.ebn0_preamble_db / 10) * config.preamble_bits
    e_d = 10 ** (data_ebn0_db / 10) * config.data_bits
    return 10 * math.log10((e_p + e_d) / config.total_bits)


@dataclass
class SweepPoint:
    config: SystemConfig
    trials: int
    miss_count: int
    error_count: int
    undetected_errors: int

    def row(self) -> dict:
        cfg = self.config
        users = self.trials * cfg.num_users
        miss_ci = wilson_interval(self.miss_count, users)
        pupe_ci = wilson_interval(self.error_count, users)
        return {
            "config_hash": cfg.config_hash(),
            "k_a": cfg.num_users,
            "ebn0_data_db": round(cfg.ebn0_data_db, 6),
            "ebn0_overall_db": round(overall_ebn0(cfg), 6),
            "trials": self.trials,
            "miss_rate": self.miss_count / users,
            "miss_ci_lo": miss_ci[0],
            "miss_ci_hi": miss_ci[1],
            "pupe": self.error_count / users,
            "pupe_ci_lo": pupe_ci[0],
            "pupe_ci_hi": pupe_ci[1],
            "undetected_errors": self.undetected_errors,
        }


def run_point(
    config: SystemConfig,
    workers: int = 1,
    checkpoint_path: str | None = None,
    checkpoint_every: int = 0,
) -> SweepPoint:
    """Run ``config.num_trials`` trials of one configuration and pool counts."""
    trials = config.num_trials
    reports: list[TrialReport] = []
    if workers <= 1:
        for t in range(trials):
            reports.append(run_trial(config, t))
            _maybe_checkpoint(checkpoint_path, checkpoint_every, reports, config)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep in pool.map(run_trial, [config] * trials, range(trials)):
                reports.append(rep)
                _maybe_checkpoint(checkpoint_path, checkpoint_every, reports, config)
    return SweepPoint(
        config=config,
        trials=trials,
        miss_count=sum(r.miss_count for r in reports),
        error_count=sum(r.error_count for r in reports),
        undetected_errors=sum(r.undetected_errors for r in reports),
    )


def _maybe_checkpoint(path, every, reports, config):
    if not path or not every or len(reports) % every:
        return
    done = len(reports)
    users = done * config.num_users
    state = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.config_hash(),
        "done_trials": done,
        "miss_rate": sum(r.miss_count for r in reports) / users,
        "pupe": sum(r.error_count for r in reports) / users,
    }
    with open(path, "w") as fh:
        json.dump(state, fh, indent=2)


def run_sweep(
    config: SystemConfig,
    ka_values: list[int] | None = None,
    ebn0_values: list[float] | None = None,
    workers: int = 1,
    out_csv: str | None = None,
    target_pupe: float | None = None,
    bisect_lo: float = -2.0,
    bisect_hi: float = 20.0,
    bisect_tol_db: float = 0.25,
    checkpoint_every: int = 0,
) -> list[dict]:
    """Grid sweep over K_a and/or the data-phase Eb/N0.

    With ``target_pupe`` set, the Eb/N0 axis is replaced by a per-K_a
    bisection for the smallest data Eb/N0 reaching the target PUPE; the
    emitted row holds that threshold point.
    """
    ka_values = ka_values or [config.num_users]
    rows: list[dict] = []
    writer = _CsvWriter(out_csv, config) if out_csv else None
    checkpoint = (out_csv + ".progress.json") if (out_csv and checkpoint_every) else None

    for ka in ka_values:
        base = config.replace(num_users=ka)
        if target_pupe is not None:
            found = required_data_ebn0(
                base,
                target_pupe,
                lo=bisect_lo,
                hi=bisect_hi,
                tol_db=bisect_tol_db,
                workers=workers,
            )
            if found is None:
                continue
            point = run_point(
                base.replace(ebn0_data_db=found),
                workers,
                checkpoint,
                checkpoint_every,
            )
            rows.append(point.row())
            if writer:
                writer.write(rows[-1])
        else:
            for ebn0 in ebn0_values or [config.ebn0_data_db]:
                point = run_point(
                    base.replace(ebn0_data_db=float(ebn0)),
                    workers,
                    checkpoint,
                    checkpoint_every,
                )
                rows.append(point.row())
                if writer:
                    writer.write(rows[-1])
    if writer:
        writer.close()
    return rows


def required_data_ebn0(
    config: SystemConfig,
    target_pupe: float,
    lo: float,
    hi: float,
    tol_db: float = 0.25,
    workers: int = 1,
) -> float | None:
    """Bisection for the smallest data-phase Eb/N0 whose PUPE <= target.

    Assumes PUPE is non-increasing in Eb/N0; common random numbers (the
    same per-trial seeds at every probe) keep the comparison clean.
    Returns None when even ``hi`` misses the target.
    """

    def probe(db: float) -> float:
        point = run_point(config.replace(ebn0_data_db=float(db)), workers)
        users = point.trials * config.num_users
        return point.error_count / users

    if probe(hi) > target_pupe:
        return None
    if probe(lo) <= target_pupe:
        return lo
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if probe(mid) <= target_pupe:
            hi = mid
        else:
            lo = mid
    return hi


class _CsvWriter:
    def __init__(self, path: str, config: SystemConfig):
        self.path = path
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self._fh = open(path, "w", newline="")
        self._csv = csv.DictWriter(self._fh, fieldnames=RESULT_COLUMNS)
        self._csv.writeheader()
        sidecar = os.path.splitext(path)[0] + ".json"
        with open(sidecar, "w") as fh:
            json.dump(
                {"schema_version": SCHEMA_VERSION, "config": config.to_dict()},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")

    def write(self, row: dict):
        self._csv.writerow(row)
        self._fh.flush()

    def close(self):
        self._fh.close()


def write_rows(path: str, rows: list[dict], config: SystemConfig):
    """Write a completed result table plus its JSON sidecar."""
    writer = _CsvWriter(path, config)
    for row in rows:
        writer.write(row)
    writer.close()
