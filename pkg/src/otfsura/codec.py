"""Bit-level chain: CRC, 5G-NR style polar coding with SCL decoding, QPSK,
zero-padding and the preamble-seeded pseudo-random interleaver.

Bit-exact conventions (contracts shared by transmitter and receiver):

* CRC: zero initial state, no reflection, parity appended MSB-first so
  that the full word is divisible by the generator.  Generator polynomials
  follow 3GPP TS 38.212 (6/11/16/24-bit variants).
* Polar transform: natural-order ``x = u F^{(x)n}`` (TS 38.212, no
  bit-reversal permutation, no rate matching); the information+CRC bits
  occupy the most reliable positions of the TS 38.212 universal sequence,
  placed in increasing index order.
* QPSK: Gray map, bit pair ``(b0, b1) -> ((1-2*b0) + 1j*(1-2*b1))/sqrt(2)``;
  bit 0 of a pair modulates the real part.
* Interleaver: Fisher-Yates over ``0..n-1`` driven by the splitmix64
  stream, seeded with the big-endian integer value of the preamble bits;
  ``interleave(v)[j] = v[perm[j]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._kernels import fisher_yates, scl_decode_paths
from ._polar_tables import RELIABILITY_1024

# TS 38.212 generator polynomials, MSB (x^len) implicit.
CRC_POLYS = {
    6: 0x21,
    11: 0x621,
    16: 0x1021,
    24: 0x864CFB,
}

_LLR_CLIP = 1e4


# ---------------------------------------------------------------------------
# CRC
# ---------------------------------------------------------------------------

def _poly_bits(crc_len: int, poly: int) -> np.ndarray:
    bits = [(poly >> (crc_len - 1 - i)) & 1 for i in range(crc_len)]
    return np.array(bits, dtype=np.uint8)


@lru_cache(maxsize=32)
def _crc_matrix(msg_len: int, crc_len: int, poly: int) -> np.ndarray:
    """GF(2) matrix G with crc(m) = (m @ G) % 2 (CRC is linear, zero init)."""
    gen = _poly_bits(crc_len, poly)
    mat = np.zeros((msg_len, crc_len), dtype=np.uint8)
    # per-unit-vector long division (message lengths here are small)
    for i in range(msg_len):
        word = np.zeros(msg_len + crc_len, dtype=np.uint8)
        word[i] = 1
        for j in range(msg_len):
            if word[j]:
                word[j] = 0
                word[j + 1 : j + 1 + crc_len] ^= gen
        mat[i] = word[msg_len:]
    return mat


def crc_attach(bits: np.ndarray, crc_len: int, poly: int | None = None) -> np.ndarray:
    """Append the ``crc_len``-bit CRC of ``bits`` (MSB-first remainder)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if poly is None:
        poly = CRC_POLYS[crc_len]
    mat = _crc_matrix(bits.size, crc_len, poly)
    parity = bits @ mat % 2
    return np.concatenate([bits, parity.astype(np.uint8)])


def crc_check(bits: np.ndarray, crc_len: int, poly: int | None = None) -> bool:
    """True iff the trailing ``crc_len`` bits are the CRC of the rest."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size <= crc_len:
        raise ValueError("word shorter than its CRC")
    if poly is None:
        poly = CRC_POLYS[crc_len]
    mat = _crc_matrix(bits.size - crc_len, crc_len, poly)
    parity = bits[:-crc_len] @ mat % 2
    return bool(np.all(parity == bits[-crc_len:]))


def _crc_check_batch(words: np.ndarray, crc_len: int, poly: int) -> np.ndarray:
    """Vectorised crc_check over rows of ``words``."""
    mat = _crc_matrix(words.shape[1] - crc_len, crc_len, poly)
    parity = words[:, :-crc_len] @ mat % 2
    return np.all(parity == words[:, -crc_len:], axis=1)


# ---------------------------------------------------------------------------
# Polar code
# ---------------------------------------------------------------------------

@dataclass
class PolarCodeSpec:
    """Everything the polar encoder/decoder pair needs.

    ``info_len`` counts data and CRC bits together; ``frozen_mask`` marks the
    ``block_len - info_len`` least reliable positions.
    """

    block_len: int
    info_len: int
    crc_len: int
    crc_poly: int
    list_size: int
    genie: bool = False
    info_positions: np.ndarray = field(repr=False, default=None)
    frozen_mask: np.ndarray = field(repr=False, default=None)

    @classmethod
    def create(
        cls,
        block_len: int,
        info_len: int,
        crc_len: int = 16,
        list_size: int = 16,
        genie: bool = False,
        crc_poly: int | None = None,
    ) -> "PolarCodeSpec":
        if block_len & (block_len - 1) or not 0 < block_len <= 1024:
            raise ValueError("block_len must be a power of two <= 1024")
        if not 0 < info_len <= block_len:
            raise ValueError("info_len must be in 1..block_len")
        if crc_len >= info_len:
            raise ValueError("CRC does not fit into info_len")
        if crc_poly is None:
            if crc_len not in CRC_POLYS:
                raise ValueError(f"no default polynomial for crc_len={crc_len}")
            crc_poly = CRC_POLYS[crc_len]
        seq = RELIABILITY_1024[RELIABILITY_1024 < block_len]
        info_positions = np.sort(seq[block_len - info_len :])
        frozen_mask = np.ones(block_len, dtype=np.int8)
        frozen_mask[info_positions] = 0
        return cls(
            block_len=block_len,
            info_len=info_len,
            crc_len=crc_len,
            crc_poly=crc_poly,
            list_size=list_size,
            genie=genie,
            info_positions=info_positions,
            frozen_mask=frozen_mask,
        )

    @property
    def data_len(self) -> int:
        return self.info_len - self.crc_len


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Natural-order polar transform ``x = u F^{(x)n}`` (self-inverse)."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    lead = x.shape[:-1]
    step = 1
    while step < n:
        pairs = x.reshape(*lead, n // (2 * step), 2, step)
        pairs[..., 0, :] ^= pairs[..., 1, :]
        step *= 2
    return x


def polar_encode(info_bits: np.ndarray, spec: PolarCodeSpec) -> np.ndarray:
    """Encode ``info_len`` bits (data + CRC) into a ``block_len`` codeword."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.shape[-1] != spec.info_len:
        raise ValueError(
            f"expected {spec.info_len} info bits, got {info_bits.shape[-1]}"
        )
    u = np.zeros(info_bits.shape[:-1] + (spec.block_len,), dtype=np.uint8)
    u[..., spec.info_positions] = info_bits
    return polar_transform(u)


def scl_decode(
    llrs: np.ndarray,
    spec: PolarCodeSpec,
    true_info: np.ndarray | None = None,
) -> tuple[np.ndarray, bool]:
    """CRC-aided SCL decode.

    Among the surviving list paths, returns the most likely one passing the
    CRC, else the most likely path with ``crc_ok=False``.  Positive LLR
    means bit 0.  In genie mode a path only counts as correct if it also
    matches ``true_info`` exactly (ideal error detection).
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size != spec.block_len:
        raise ValueError(f"expected {spec.block_len} LLRs, got {llrs.size}")
    if np.isnan(llrs).any():
        raise ValueError("NaN in decoder input")
    llrs = np.clip(llrs, -_LLR_CLIP, _LLR_CLIP)

    uhat, pm, active = scl_decode_paths(llrs, spec.frozen_mask, spec.list_size)
    cands = uhat[:active][:, spec.info_positions].astype(np.uint8)
    order = np.argsort(pm[:active], kind="stable")
    ok = _crc_check_batch(cands[order], spec.crc_len, spec.crc_poly)

    hit = np.flatnonzero(ok)
    if hit.size:
        best = cands[order[hit[0]]]
        crc_ok = True
    else:
        best = cands[order[0]]
        crc_ok = False
    if spec.genie and crc_ok:
        if true_info is None:
            raise ValueError("genie mode needs the true info bits")
        crc_ok = bool(np.array_equal(best, np.asarray(true_info, dtype=np.uint8)))
    return best, crc_ok


# ---------------------------------------------------------------------------
# QPSK
# ---------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-coded QPSK: bit pairs -> unit-energy symbols, bit 0 on the real axis."""
    bits = np.asarray(bits, dtype=np.float64)
    if bits.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    re = 1.0 - 2.0 * bits[0::2]
    im = 1.0 - 2.0 * bits[1::2]
    return (re + 1j * im) / _SQRT2


def qpsk_llr(symbol_est: np.ndarray, sinr: np.ndarray | float) -> np.ndarray:
    """Per-bit LLRs for unit-gain-normalised symbol estimates.

    Under the circular-Gaussian residual model with per-symbol SINR
    ``gamma``: ``llr = 2*sqrt(2)*gamma*Re/Im``, interleaved
    ``[re0, im0, re1, im1, ...]``; positive means bit 0.
    """
    symbol_est = np.atleast_1d(np.asarray(symbol_est))
    scale = 2.0 * _SQRT2 * np.atleast_1d(np.asarray(sinr, dtype=np.float64))
    llr = np.empty(2 * symbol_est.size)
    llr[0::2] = scale * symbol_est.real
    llr[1::2] = scale * symbol_est.imag
    return np.clip(llr, -_LLR_CLIP, _LLR_CLIP)


# ---------------------------------------------------------------------------
# Seeded interleaver
# ---------------------------------------------------------------------------

@dataclass
class Interleaver:
    """A seeded bijection on 0..n-1; ``interleave(v)[j] = v[perm[j]]``."""

    permutation: np.ndarray
    seed: int

    def interleave(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        if vec.size != self.permutation.size:
            raise ValueError("vector length does not match the permutation")
        return vec[self.permutation]

    def deinterleave(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        if vec.size != self.permutation.size:
            raise ValueError("vector length does not match the permutation")
        out = np.empty_like(vec)
        out[self.permutation] = vec
        return out


def bits_to_int(bits: np.ndarray) -> int:
    """Big-endian integer value of a bit vector (bits[0] is the MSB)."""
    value = 0
    for b in np.asarray(bits).astype(int):
        value = (value << 1) | int(b)
    return value


def build_interleaver(seed_bits_or_int, length: int) -> Interleaver:
    """Deterministic interleaver from preamble bits (or their integer value)."""
    if length < 1:
        raise ValueError("interleaver length must be >= 1")
    if np.isscalar(seed_bits_or_int):
        seed = int(seed_bits_or_int)
    else:
        seed = bits_to_int(seed_bits_or_int)
    perm = fisher_yates(length, seed)
    return Interleaver(permutation=perm, seed=seed)


def pad_and_interleave(
    symbols: np.ndarray, length: int, interleaver: Interleaver
) -> np.ndarray:
    """Zero-pad ``symbols`` to ``length`` and permute."""
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.size > length:
        raise ValueError(f"{symbols.size} symbols do not fit in {length} slots")
    padded = np.zeros(length, dtype=complex)
    padded[: symbols.size] = symbols
    return interleaver.interleave(padded)


def deinterleave_and_strip(
    vec: np.ndarray, num_symbols: int, interleaver: Interleaver
) -> np.ndarray:
    """Exact inverse of :func:`pad_and_interleave`."""
    return interleaver.deinterleave(vec)[:num_symbols]


@lru_cache(maxsize=4096)
def occupied_slots(seed: int, length: int, num_symbols: int) -> tuple:
    """Compact interleaver view used by the receiver.

    Returns ``(slots, symbol_index)``: the ``num_symbols`` positions a user
    with this interleaver seed occupies in the length-``length`` vector, and
    which symbol sits in each.  ``slot_of_symbol = slots[argsort(symbol_index)]``.
    """
    perm = fisher_yates(length, seed)
    slots = np.flatnonzero(perm < num_symbols)
    sym_idx = perm[slots]
    slots.setflags(write=False)
    sym_idx.setflags(write=False)
    return slots, sym_idx
