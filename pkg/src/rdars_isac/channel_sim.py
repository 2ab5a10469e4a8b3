"""Narrowband uplink channel and RSSI observables.

Three links share one log-distance model: UE->BS (direct), UE->surface and
surface->BS. Randomness enters only through explicit shadowing draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import geometry as geo
from .geometry import ArrayGeometry, Position3D, RdarsPose
from .rdars_model import LEVEL_STEP, RdarsConfiguration


def free_space_reference_loss_db(carrier_hz: float) -> float:
    """Free-space loss at 1 m, 20*log10(4*pi/lambda)."""
    return 20 * math.log10(4 * math.pi / geo.wavelength(carrier_hz))


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(mw)


@dataclass(frozen=True)
class ChannelParams:
    carrier_hz: float = geo.DEFAULT_CARRIER_HZ
    path_loss_exponent: float = 2.0
    reference_loss_db: Optional[float] = None  # None -> free space at 1 m
    shadowing_sigma_db: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.path_loss_exponent > 0:
            raise ValueError("path loss exponent must be positive")
        if not self.shadowing_sigma_db >= 0:
            raise ValueError("shadowing sigma must be non-negative")
        if self.reference_loss_db is None:
            object.__setattr__(self, "reference_loss_db",
                               free_space_reference_loss_db(self.carrier_hz))

    @property
    def wavelength(self) -> float:
        return geo.wavelength(self.carrier_hz)


class ShadowDraws(NamedTuple):
    """Per-link shadowing in dB (positive = extra loss)."""

    ue_bs: float = 0.0
    ue_rdars: float = 0.0
    rdars_bs: float = 0.0

    @classmethod
    def draw(cls, rng: np.random.Generator, sigma_db: float) -> "ShadowDraws":
        if sigma_db == 0:
            return cls()
        return cls(*(float(v) for v in rng.normal(0.0, sigma_db, 3)))


def path_gain_db(d: float, params: ChannelParams, shadow_draw: float = 0.0) -> float:
    if not d >= 1.0:
        raise ValueError(f"distance {d} m is below the 1 m reference distance")
    return -(params.reference_loss_db + 10 * params.path_loss_exponent * math.log10(d) + shadow_draw)


@dataclass(frozen=True)
class Scenario:
    """World geometry plus radio parameters.

    ``noise_floor_dbm`` may be ``-inf`` to disable noise. ``direct_path_loss_db``
    is extra attenuation on the UE->BS link (an obstruction); 0 is line of
    sight and ``inf`` removes the direct path.
    """

    bs_pos: Position3D
    ue_pos: Position3D
    rdars_pose: RdarsPose = RdarsPose()
    geometry: ArrayGeometry = ArrayGeometry()
    channel: ChannelParams = ChannelParams()
    tx_power_dbm: float = 0.0
    noise_floor_dbm: float = -95.0
    connected_set: frozenset = field(default_factory=lambda: ArrayGeometry().corners())
    direct_path_loss_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "connected_set", frozenset(int(i) for i in self.connected_set))
        bad = [i for i in self.connected_set if not 0 <= i < self.geometry.size]
        if bad:
            raise ValueError(f"connected indices out of range: {sorted(bad)}")
        for name in ("bs_pos", "ue_pos"):
            if self.rdars_pose.to_local(getattr(self, name))[2] <= 0:
                raise ValueError(f"{name} is not in front of the surface")
        for a, b in (("bs", "ue"), ("bs", "rdars"), ("ue", "rdars")):
            if self.distance(a, b) <= 1.0:
                raise ValueError(f"{a}-{b} distance must exceed 1 m")

    def _point(self, name):
        if name == "rdars":
            return self.rdars_pose.origin.as_array()
        return getattr(self, f"{name}_pos").as_array()

    def distance(self, a: str, b: str) -> float:
        return float(np.linalg.norm(self._point(a) - self._point(b)))

    @property
    def d_ub(self) -> float:
        return self.distance("ue", "bs")

    @property
    def d_ur(self) -> float:
        return self.distance("ue", "rdars")

    @property
    def d_rb(self) -> float:
        return self.distance("rdars", "bs")

    def local_direction(self, name: str) -> np.ndarray:
        v = self.rdars_pose.to_local(self._point(name))
        return v / np.linalg.norm(v)

    @property
    def ue_dir(self) -> np.ndarray:
        return self.local_direction("ue")

    @property
    def bs_dir(self) -> np.ndarray:
        return self.local_direction("bs")

    @property
    def true_azel(self) -> geo.AzEl:
        return geo.azel_from_vector(self.ue_dir)

    @property
    def wavelength(self) -> float:
        return self.channel.wavelength

    @property
    def direct_phase(self) -> float:
        """Fixed pseudo-random phase of the direct path, drawn from the scenario seed."""
        return float(np.random.default_rng([self.channel.rng_seed, 0xD1]).uniform(0, 2 * math.pi))

    @property
    def noise_mw(self) -> float:
        return float(dbm_to_mw(self.noise_floor_dbm))

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace
        return replace(self, **changes)


class Observables(NamedTuple):
    rssi_bs: float
    rssi_connected: float


class UplinkChannel:
    """Per-trial channel state; evaluates RSSI for any surface configuration.

    Everything independent of the configuration is computed once, so
    repeated calls during a sweep cost one 256-term complex sum each.
    """

    def __init__(self, scenario: Scenario, shadow: ShadowDraws = ShadowDraws()):
        self.scenario = scenario
        self.shadow = ShadowDraws(*shadow)
        ch = scenario.channel
        k = 2 * math.pi / scenario.wavelength
        pos = scenario.geometry.element_positions
        theta = k * (pos @ scenario.ue_dir) + k * (pos @ scenario.bs_dir)
        self._steer = np.exp(1j * theta)
        g_ur = path_gain_db(scenario.d_ur, ch, self.shadow.ue_rdars)
        g_rb = path_gain_db(scenario.d_rb, ch, self.shadow.rdars_bs)
        g_ub = path_gain_db(scenario.d_ub, ch, self.shadow.ue_bs) - scenario.direct_path_loss_db
        self.gain_ur_db = g_ur
        self.gain_element = math.sqrt(dbm_to_mw(g_ur)) * math.sqrt(dbm_to_mw(g_rb))
        self.h_direct = math.sqrt(dbm_to_mw(g_ub)) * complex(math.cos(scenario.direct_phase),
                                                              math.sin(scenario.direct_phase))
        self.p_tx = float(dbm_to_mw(scenario.tx_power_dbm))
        self._lut = np.exp(1j * LEVEL_STEP * np.arange(4))

    def h_reflected(self, config: RdarsConfiguration) -> complex:
        terms = self._lut[config.codes] * self._steer
        if config.a:
            terms = terms[config.reflect_mask]
        return complex(self.gain_element * terms.sum())

    def signal_mw(self, config: RdarsConfiguration) -> float:
        return abs(self.h_direct + self.h_reflected(config)) ** 2 * self.p_tx

    def rssi_bs(self, config: RdarsConfiguration) -> float:
        return float(mw_to_dbm(self.signal_mw(config) + self.scenario.noise_mw))

    def rssi_connected(self, config: RdarsConfiguration) -> float:
        a = config.a
        if a == 0:
            raise ValueError("no connected elements to measure")
        per_element = dbm_to_mw(self.gain_ur_db) * self.p_tx
        return float(mw_to_dbm(a * per_element / a + self.scenario.noise_mw))

    def observables(self, config: RdarsConfiguration) -> Observables:
        return Observables(self.rssi_bs(config), self.rssi_connected(config))


def uplink_observables(scenario: Scenario, config: RdarsConfiguration,
                       shadow_draws: ShadowDraws = ShadowDraws()) -> Observables:
    return UplinkChannel(scenario, shadow_draws).observables(config)


def snr_db(scenario: Scenario, config: RdarsConfiguration,
           shadow_draws: ShadowDraws = ShadowDraws()) -> float:
    signal = UplinkChannel(scenario, shadow_draws).signal_mw(config)
    return float(mw_to_dbm(signal)) - scenario.noise_floor_dbm
