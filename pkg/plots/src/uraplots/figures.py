"""Figure rendering: miss detection vs load, and required Eb/N0 vs load."""

from __future__ import annotations

import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import ResultSet

MISS_GROUP_KEYS = ["preamble_bits", "max_delay", "max_doppler", "ebn0_preamble_db"]
EBN0_GROUP_KEYS = ["polar.list_size", "polar.crc_len"]

_PNG_METADATA = {"Software": "uraplots"}  # fixed so re-renders are byte-identical
_FLOOR = 1e-6  # display floor for zero-count rates on the log axis


def _style():
    plt.rcParams.update(
        {
            "figure.figsize": (5.2, 3.6),
            "figure.dpi": 120,
            "savefig.dpi": 150,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "grid.linestyle": "--",
            "lines.linewidth": 1.3,
            "lines.markersize": 4.5,
            "legend.fontsize": 8,
            "font.size": 9,
        }
    )


def _series_label(keys, values):
    return ", ".join(f"{k.split('.')[-1]}={v}" for k, v in zip(keys, values))


def plot_miss_detection(
    results: ResultSet, output_path: str, group_keys: list[str] | None = None
) -> str:
    """Preamble miss-detection probability versus the number of active users,
    log-y with Wilson confidence bands, one series per configuration group."""
    keys = group_keys or MISS_GROUP_KEYS
    _style()
    fig, ax = plt.subplots()
    for label_vals, rows in sorted(results.group_by(keys).items(), key=str):
        rows = sorted(rows, key=lambda r: r["k_a"])
        ka = np.array([r["k_a"] for r in rows])
        rate = np.maximum([r["miss_rate"] for r in rows], _FLOOR)
        lo = np.maximum([r["miss_ci_lo"] for r in rows], _FLOOR)
        hi = np.maximum([r["miss_ci_hi"] for r in rows], _FLOOR)
        (line,) = ax.semilogy(ka, rate, marker="o", label=_series_label(keys, label_vals))
        ax.fill_between(ka, lo, hi, alpha=0.2, color=line.get_color())
    ax.set_xlabel("active users $K_a$")
    ax.set_ylabel("preamble miss-detection probability")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(output_path, metadata=_PNG_METADATA)
    plt.close(fig)
    return output_path


def required_ebn0_curve(rows: list[dict], target_pe: float) -> tuple[list, list]:
    """Per K_a, the overall Eb/N0 reaching the target PUPE.

    A single row at some K_a is taken as a threshold point when its PUPE
    meets the target (the sweep's bisection mode emits exactly that).  With
    several Eb/N0 points per K_a the crossing is interpolated log-linearly;
    K_a values whose rows never reach the target are skipped with a warning.
    """
    ka_list = []
    ebn0_list = []
    by_ka: dict[int, list[dict]] = {}
    for row in rows:
        by_ka.setdefault(row["k_a"], []).append(row)
    for ka in sorted(by_ka):
        pts = sorted(by_ka[ka], key=lambda r: r["ebn0_overall_db"])
        ebn0 = np.array([p["ebn0_overall_db"] for p in pts])
        pupe = np.array([max(p["pupe"], _FLOOR) for p in pts])
        if len(pts) == 1:
            if pts[0]["pupe"] <= target_pe:
                ka_list.append(ka)
                ebn0_list.append(float(ebn0[0]))
            else:
                warnings.warn(f"K_a={ka}: single point misses target PUPE, skipped")
            continue
        below = np.nonzero(pupe <= target_pe)[0]
        if below.size == 0:
            warnings.warn(f"K_a={ka}: no Eb/N0 point reaches the target PUPE, skipped")
            continue
        j = below[0]
        if j == 0:
            ka_list.append(ka)
            ebn0_list.append(float(ebn0[0]))
            continue
        # log-linear interpolation between the bracketing points
        logp = np.log(pupe)
        frac = (np.log(target_pe) - logp[j - 1]) / (logp[j] - logp[j - 1])
        ka_list.append(ka)
        ebn0_list.append(float(ebn0[j - 1] + frac * (ebn0[j] - ebn0[j - 1])))
    return ka_list, ebn0_list


def plot_required_ebn0(
    results: ResultSet,
    target_pe: float,
    output_path: str,
    group_keys: list[str] | None = None,
) -> str:
    """Overall Eb/N0 required for the target PUPE versus the number of users."""
    keys = group_keys or EBN0_GROUP_KEYS
    _style()
    fig, ax = plt.subplots()
    markers = ["o", "s", "^", "v", "D", "*"]
    for i, (label_vals, rows) in enumerate(
        sorted(results.group_by(keys).items(), key=str)
    ):
        ka, ebn0 = required_ebn0_curve(rows, target_pe)
        if not ka:
            warnings.warn(f"series {label_vals}: no threshold points, skipped")
            continue
        ax.plot(
            ka,
            ebn0,
            marker=markers[i % len(markers)],
            label=_series_label(keys, label_vals),
        )
    ax.set_xlabel("active users $K_a$")
    ax.set_ylabel(f"overall $E_b/N_0$ [dB] at PUPE $\\leq$ {target_pe:g}")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(output_path, metadata=_PNG_METADATA)
    plt.close(fig)
    return output_path
