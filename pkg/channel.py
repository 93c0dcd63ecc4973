"""
Channel Module
Frequency-domain simulation of one discovery slot: every transmitter puts a
single tone per OFDM symbol through its per-link gains, tones on the same bin
add like multipath, complex noise is added, and a receiver detects the bins
standing well above the symbol's median energy.

The time-domain OFDM signal is never built; cyclic prefix and timing offset
are taken as absorbed, so tones land exactly on bins.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from codec import Codeword, DetectedTones
from errors import DimensionMismatchError, OutOfRangeError
from gfield import FieldParams

CHANNEL_KINDS = ("awgn", "rayleigh_block")
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "rayleigh_block"
    noise_var: float = 0.0
    pathloss_exp: float = 0.0
    ref_gain: float = 1.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise OutOfRangeError(f"channel kind must be one of {CHANNEL_KINDS}, got {self.kind!r}")
        if self.noise_var < 0:
            raise OutOfRangeError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.pathloss_exp < 0:
            raise OutOfRangeError(f"pathloss_exp must be >= 0, got {self.pathloss_exp}")
        if self.ref_gain < 0:
            raise OutOfRangeError(f"ref_gain must be >= 0, got {self.ref_gain}")


@dataclass(frozen=True)
class Transmission:
    codeword: Codeword
    link_gain: np.ndarray
    tone_energy: float = 1.0
    offset: int = 0


@dataclass(frozen=True)
class ToneGrid:
    """n x D received energies, one row per OFDM symbol of the slot."""

    energy: np.ndarray

    def __post_init__(self):
        if self.energy.ndim != 2:
            raise DimensionMismatchError(f"tone grid must be 2-D, got shape {self.energy.shape}")
        if np.any(self.energy < 0):
            raise OutOfRangeError("tone grid energies must be nonnegative")

    @property
    def n(self) -> int:
        return self.energy.shape[0]

    @property
    def d(self) -> int:
        return self.energy.shape[1]

    def channel_energy(self, table: np.ndarray) -> np.ndarray:
        """Energy summed over each codebook row's tones (the per-TNID acquisition metric)."""
        return self.energy[np.arange(self.n)[None, :], table].sum(axis=1)


def link_gain(model: ChannelModel, distance: float, rng: np.random.Generator, d: int) -> np.ndarray:
    """Complex per-bin gains of one link for one slot (block fading: redrawn every call)."""
    if distance <= 0:
        raise OutOfRangeError(f"link distance must be > 0, got {distance}")
    amplitude = np.sqrt(model.ref_gain * distance ** (-model.pathloss_exp))
    if model.kind == "awgn":
        return np.full(d, amplitude, dtype=complex)
    fading = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2.0)
    return amplitude * fading


def synthesize_slot(txs: Sequence[Transmission], model: ChannelModel, rng: np.random.Generator,
                    params: FieldParams, random_phase: bool = True) -> ToneGrid:
    """
    Superpose every transmission's tones and add complex AWGN.

    Each transmitter gets one uniform random phase per slot when random_phase is
    set, so same-bin tones from different links add with random relative phase
    even on AWGN links.
    """
    amplitudes = np.zeros((params.n, params.d), dtype=complex)
    symbols = np.arange(params.n)
    for tx in txs:
        if len(tx.codeword) != params.n:
            raise DimensionMismatchError(f"codeword length {len(tx.codeword)} != n={params.n}")
        if len(tx.link_gain) != params.d:
            raise DimensionMismatchError(f"link gain length {len(tx.link_gain)} != D={params.d}")
        if tx.tone_energy < 0:
            raise OutOfRangeError(f"tone energy must be >= 0, got {tx.tone_energy}")
        bins = (np.asarray(tx.codeword, dtype=np.int64) + tx.offset) % params.d
        phase = np.exp(2j * np.pi * rng.random()) if random_phase else 1.0
        np.add.at(amplitudes, (symbols, bins), np.sqrt(tx.tone_energy) * tx.link_gain[bins] * phase)
    if model.noise_var > 0:
        scale = np.sqrt(model.noise_var / 2.0)
        amplitudes += scale * (rng.standard_normal(amplitudes.shape) + 1j * rng.standard_normal(amplitudes.shape))
    return ToneGrid(np.abs(amplitudes) ** 2)


def detect_tones(grid: ToneGrid, gamma: float = 8.0, floor: float = NOISE_FLOOR) -> DetectedTones:
    """Bin b of a symbol is a tone iff its energy exceeds gamma * max(median, floor)."""
    if gamma <= 1:
        raise OutOfRangeError(f"detection factor gamma must be > 1, got {gamma}")
    threshold = gamma * np.maximum(np.median(grid.energy, axis=1), floor)
    hits = grid.energy > threshold[:, None]
    return tuple(frozenset(int(b) for b in np.flatnonzero(row)) for row in hits)


def snr_to_noise(snr_per_sample: float, d: int) -> float:
    """Per-bin noise variance for a unit-energy tone at the given per-sample SNR."""
    if snr_per_sample <= 0:
        raise OutOfRangeError(f"SNR must be > 0, got {snr_per_sample}")
    return 1.0 / (d * snr_per_sample)


def db_to_ratio(db: float) -> float:
    return 10.0 ** (db / 10.0)
