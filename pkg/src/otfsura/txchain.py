"""Per-user transmitter: preamble phase and coded-data phase.

A message of ``b = b_p + b_c`` bits is split in two.  The first part picks
one column of the shared sensing matrix; that column fills the preamble DD
grid column-wise and is OTFS-modulated.  The second part is CRC-polar
encoded, QPSK mapped, zero-padded to the data grid size, permuted by the
interleaver seeded with the preamble bits, OTFS-modulated, and both phases
get a cyclic prefix of ``max_delay`` samples.  The frame is their
concatenation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import codec
from .zak import add_cp, idzt

_HEADER = struct.Struct("<QQQ")  # n_preamble_bits, preamble_len, seed


@dataclass
class SensingMatrix:
    """The preamble codebook: ``preamble_len x 2**n_bits``, entries
    i.i.d. CN(0, 1/preamble_len), fixed once generated and shared verbatim
    by transmitter and receiver."""

    columns: np.ndarray
    n_bits: int
    seed: int

    @property
    def preamble_len(self) -> int:
        return self.columns.shape[0]

    @property
    def num_columns(self) -> int:
        return self.columns.shape[1]


@dataclass
class TxFrame:
    phase1: np.ndarray  # preamble_len + max_delay samples
    phase2: np.ndarray  # data_len + max_delay samples
    frame: np.ndarray   # concatenation


def build_sensing_matrix(n_bits: int, preamble_len: int, seed: int) -> SensingMatrix:
    """Generate the shared preamble codebook from a seed."""
    if n_bits < 1 or preamble_len < 1:
        raise ValueError("n_bits and preamble_len must be positive")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(0.5 / preamble_len)
    shape = (preamble_len, 2**n_bits)
    cols = rng.normal(scale=scale, size=shape) + 1j * rng.normal(scale=scale, size=shape)
    return SensingMatrix(columns=cols, n_bits=n_bits, seed=seed)


def save_sensing_matrix(sensing: SensingMatrix, path) -> None:
    """Binary format: header (3 little-endian uint64: n_bits, preamble_len,
    seed) followed by the matrix row-major as interleaved re/im float64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(sensing.n_bits, sensing.preamble_len, sensing.seed))
        inter = np.empty(sensing.columns.shape + (2,), dtype="<f8")
        inter[..., 0] = sensing.columns.real
        inter[..., 1] = sensing.columns.imag
        fh.write(inter.tobytes(order="C"))


def load_sensing_matrix(path) -> SensingMatrix:
    with open(path, "rb") as fh:
        n_bits, preamble_len, seed = _HEADER.unpack(fh.read(_HEADER.size))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    cols = raw.reshape(preamble_len, 2**n_bits, 2)
    return SensingMatrix(
        columns=cols[..., 0] + 1j * cols[..., 1], n_bits=int(n_bits), seed=int(seed)
    )


def transmit(message_bits: np.ndarray, sensing: SensingMatrix, config) -> TxFrame:
    """Build one user's frame from its ``b_p + b_c`` message bits."""
    message_bits = np.asarray(message_bits, dtype=np.uint8)
    cfg = config
    if message_bits.size != cfg.preamble_bits + cfg.data_bits:
        raise ValueError(
            f"message must have {cfg.preamble_bits + cfg.data_bits} bits"
        )
    if sensing.n_bits != cfg.preamble_bits or sensing.preamble_len != cfg.n_preamble:
        raise ValueError("sensing matrix does not match the configuration")

    pre_bits = message_bits[: cfg.preamble_bits]
    data_bits = message_bits[cfg.preamble_bits :]
    index = codec.bits_to_int(pre_bits)

    # phase 1: preamble column -> DD grid (column-wise) -> OTFS -> CP
    column = sensing.columns[:, index]
    grid_p = column.reshape(cfg.preamble_delay_bins, cfg.preamble_doppler_bins, order="F")
    phase1 = add_cp(idzt(grid_p), cfg.max_delay) * np.sqrt(
        cfg.power_preamble * cfg.n_preamble
    )

    # phase 2: CRC -> polar -> QPSK -> pad -> seeded interleave -> OTFS -> CP
    grid_c = data_grid(data_bits, index, cfg)
    phase2 = add_cp(idzt(grid_c), cfg.max_delay)

    return TxFrame(
        phase1=phase1, phase2=phase2, frame=np.concatenate([phase1, phase2])
    )


def data_grid(data_bits: np.ndarray, preamble_index: int, config) -> np.ndarray:
    """The phase-2 DD grid (amplitude included) for a given message.

    Shared by the transmitter and the SIC reconstruction path.
    """
    spec = config.polar_spec()
    info = codec.crc_attach(np.asarray(data_bits, dtype=np.uint8), spec.crc_len, spec.crc_poly)
    symbols = codec.qpsk_map(codec.polar_encode(info, spec))
    interleaver = codec.build_interleaver(preamble_index, config.n_data)
    placed = codec.pad_and_interleave(symbols, config.n_data, interleaver)
    grid = placed.reshape(config.data_delay_bins, config.data_doppler_bins, order="F")
    return grid * np.sqrt(config.power_data)
