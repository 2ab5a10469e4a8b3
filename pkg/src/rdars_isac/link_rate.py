"""Uplink rate on an LTE 20 MHz resource grid, plus a Shannon ceiling."""
from __future__ import annotations

import math
from dataclasses import dataclass

# Overhead factor (CP, control and reference signals) chosen so the 64-QAM
# grid reproduces the 81.8 Mbit/s measured uplink rate.
CALIBRATED_EFFICIENCY = 0.8115


@dataclass(frozen=True)
class LinkConfig:
    bandwidth_hz: float = 20e6
    subcarriers: int = 1200
    symbols_per_second_per_subcarrier: float = 14_000
    bits_per_symbol: int = 6
    efficiency: float = CALIBRATED_EFFICIENCY

    def __post_init__(self):
        if min(self.bandwidth_hz, self.subcarriers, self.symbols_per_second_per_subcarrier) <= 0:
            raise ValueError("link parameters must be positive")
        if self.bits_per_symbol not in (2, 4, 6, 8):
            raise ValueError("bits_per_symbol must be one of 2, 4, 6, 8")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")


def grid_rate_bps(cfg: LinkConfig = LinkConfig()) -> float:
    return cfg.subcarriers * cfg.symbols_per_second_per_subcarrier * cfg.bits_per_symbol * cfg.efficiency


def shannon_rate_bps(snr_db: float, bandwidth_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    if snr_db == -math.inf:
        return 0.0
    return bandwidth_hz * math.log2(1 + 10 ** (snr_db / 10))


def consistent(cfg: LinkConfig, snr_db: float) -> bool:
    """Shannon gate: the grid rate must stay below capacity at ``snr_db``."""
    return shannon_rate_bps(snr_db, cfg.bandwidth_hz) > grid_rate_bps(cfg)
