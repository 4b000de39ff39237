"""Doubly-dispersive multiuser channel simulation.

Each user's signal travels over ``P_k`` discrete paths, each with a complex
gain and an on-grid (delay, Doppler) shift; the receiver sees the noisy
superposition.  Delay acts as a *linear* shift on the transmitted vector
(samples pushed past the front are lost; cyclic prefixes make the in-block
content cyclic).  The Doppler ramp of every path is referenced to a single
instant, ``phase_ref + tau`` samples into the vector, so that after CP
removal a block satisfies the cyclic DD relation exactly and any later
block picks up the deterministic phase accumulated in the meantime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .zak import DDShift, doppler_bins


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    shift: DDShift


@dataclass
class UserChannel:
    """The multipath profile of one user: distinct (delay, Doppler) pairs."""

    paths: list[ChannelPath]

    def __post_init__(self):
        if not self.paths:
            raise ValueError("a user channel needs at least one path")
        shifts = [(p.shift.delay, p.shift.doppler) for p in self.paths]
        if len(set(shifts)) != len(shifts):
            raise ValueError("duplicate (delay, doppler) pair in user channel")


@dataclass(frozen=True)
class NoiseSpec:
    """Per-complex-sample AWGN variance."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("noise variance must be >= 0")


def draw_user_channel(
    rng: np.random.Generator,
    num_paths: int,
    max_delay: int,
    max_doppler: int,
    fading: str = "rayleigh",
) -> UserChannel:
    """Draw one user's multipath channel.

    Gains are i.i.d. CN(0, 1/num_paths) in ``"rayleigh"`` mode (unit total
    mean power) or exactly 1 in ``"unit"`` mode; shifts are uniform over the
    (delay, Doppler) grid without repetition.
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    dops = list(doppler_bins(max_doppler))
    cells = [(t, d) for t in range(max_delay + 1) for d in dops]
    if num_paths > len(cells):
        raise ValueError(
            f"cannot draw {num_paths} distinct shifts from a grid of {len(cells)}"
        )
    picks = rng.choice(len(cells), size=num_paths, replace=False)
    if fading == "rayleigh":
        scale = np.sqrt(0.5 / num_paths)
        gains = rng.normal(scale=scale, size=num_paths) + 1j * rng.normal(
            scale=scale, size=num_paths
        )
    elif fading == "unit":
        gains = np.ones(num_paths, dtype=complex)
    else:
        raise ValueError(f"unknown fading mode {fading!r}")
    paths = [
        ChannelPath(complex(gains[i]), DDShift(*cells[picks[i]]))
        for i in range(num_paths)
    ]
    return UserChannel(paths)


def apply_channel(
    signals: list[tuple[np.ndarray, UserChannel]],
    noise: NoiseSpec,
    rng: np.random.Generator,
    nu_period: int,
    phase_ref: int = 0,
) -> np.ndarray:
    """Superimpose all users' signals through their channels plus AWGN.

    ``y[l] = sum_k sum_p h * x_k[l - tau] * exp(2j*pi*nu*(l - phase_ref - tau)/nu_period) + w[l]``

    ``nu_period`` is the number of samples per Doppler cycle (the grid size
    the integer Doppler indices refer to); ``phase_ref`` places the zero of
    the Doppler ramp (the first sample after the leading CP, so that the
    CP-stripped block obeys the cyclic DD relation with no extra factor).
    Delays shift zeros in at the front.
    """
    if not signals:
        raise ValueError("need at least one (signal, channel) pair")
    length = np.asarray(signals[0][0]).size
    for sig, _ in signals:
        if np.asarray(sig).size != length:
            raise ValueError("all transmitted signals must have the same length")

    t = np.arange(length)
    out = np.zeros(length, dtype=complex)
    for sig, chan in signals:
        sig = np.asarray(sig, dtype=complex)
        for path in chan.paths:
            tau, nu = path.shift.delay, path.shift.doppler
            delayed = np.zeros(length, dtype=complex)
            if tau == 0:
                delayed[:] = sig
            else:
                delayed[tau:] = sig[:-tau]
            ramp = np.exp(2j * np.pi * nu * (t - phase_ref - tau) / nu_period)
            out += path.gain * delayed * ramp

    if noise.sigma2 > 0:
        s = np.sqrt(noise.sigma2 / 2)
        out += rng.normal(scale=s, size=length) + 1j * rng.normal(scale=s, size=length)
    return out
