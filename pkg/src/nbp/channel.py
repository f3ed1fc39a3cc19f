"""BPSK over AWGN: modulation, noise, LLRs, SNR bookkeeping.

Sign conventions: bit 0 maps to +1 and bit 1 to -1, and LLRs are
``log P(c=1|y) / P(c=0|y)``, so a positive LLR favours bit 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return 1.0 / math.sqrt(2.0 * rate * 10.0 ** (ebn0_db / 10.0))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float

    @property
    def sigma(self) -> float:
        return sigma_from_ebn0(self.ebn0_db, self.rate)


def modulate(bits) -> np.ndarray:
    b = np.asarray(bits)
    if not np.isin(b, (0, 1)).all():
        raise ValueError("modulate expects bits in {0, 1}")
    return 1.0 - 2.0 * b.astype(float)


def demodulate(symbols) -> np.ndarray:
    return ((1.0 - np.asarray(symbols)) / 2.0).astype(np.uint8)


def transmit(symbols, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s = np.asarray(symbols, dtype=float)
    return s + sigma * rng.standard_normal(s.shape)


def llr(y, sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return -2.0 * np.asarray(y, dtype=float) / sigma**2


def hard_decision(llrs) -> np.ndarray:
    """Bit 1 iff the LLR is positive."""
    return (np.asarray(llrs) > 0).astype(np.uint8)


def frame_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based stream for one (seed, key...) coordinate.

    Philox keyed through a SeedSequence whose spawn key is ``key``; streams
    for different keys are independent and a given key always yields the
    same draws, whatever order frames are simulated in.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uncoded_ber(sigma: float) -> float:
    """Q(1/sigma): raw BPSK bit error probability."""
    return 0.5 * math.erfc(1.0 / (sigma * math.sqrt(2.0)))
