"""Flat key-value experiment files (TOML syntax).

Angles in files are degrees; positions are metres in the world frame.
Unknown keys are rejected.
"""
from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .beam_sweep import SweepGrid
from .channel_sim import ChannelParams, Scenario
from .geometry import ArrayGeometry, Position3D, RdarsPose, wavelength

SCENARIO_KEYS = {
    "bs_pos", "ue_pos", "origin", "rotation", "rows", "cols", "spacing",
    "carrier_hz", "path_loss_exponent", "reference_loss_db", "shadowing_sigma_db", "rng_seed",
    "tx_power_dbm", "noise_floor_dbm", "connected_set", "direct_path_loss_db",
}
GRID_KEYS = {"az_min", "az_max", "el_min", "el_max", "coarse_step", "fine_step", "fine_span"}
EXPERIMENT_KEYS = {"trials", "seed", "calibration_references", "alpha_assumed", "transport",
                   "pb_probe", "repeats"}
ALL_KEYS = SCENARIO_KEYS | GRID_KEYS | EXPERIMENT_KEYS

DEFAULT_SCENARIO = "field_test.toml"


class ConfigError(ValueError):
    pass


def load_mapping(path: Optional[str | Path] = None) -> dict[str, Any]:
    """Read a config file; ``None`` loads the shipped field-test scenario."""
    if path is None:
        text = resources.files("rdars_isac.scenarios").joinpath(DEFAULT_SCENARIO).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path or DEFAULT_SCENARIO}: {exc}") from exc
    unknown = sorted(set(data) - ALL_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {path or DEFAULT_SCENARIO}: {', '.join(unknown)}")
    return data


def scenario_from_mapping(m: Mapping[str, Any]) -> Scenario:
    for key in ("bs_pos", "ue_pos"):
        if key not in m:
            raise ConfigError(f"missing required key {key!r}")
    carrier = float(m.get("carrier_hz", 3.7e9))
    geom = ArrayGeometry(int(m.get("rows", 16)), int(m.get("cols", 16)),
                         float(m.get("spacing", wavelength(carrier) / 2)))
    channel = ChannelParams(
        carrier_hz=carrier,
        path_loss_exponent=float(m.get("path_loss_exponent", 2.0)),
        reference_loss_db=m.get("reference_loss_db"),
        shadowing_sigma_db=float(m.get("shadowing_sigma_db", 0.0)),
        rng_seed=int(m.get("rng_seed", 0)),
    )
    pose = RdarsPose(Position3D(*map(float, m.get("origin", (0.0, 0.0, 0.0)))),
                     tuple(tuple(map(float, r)) for r in m.get("rotation", RdarsPose().rotation)))
    try:
        return Scenario(
            bs_pos=Position3D(*map(float, m["bs_pos"])),
            ue_pos=Position3D(*map(float, m["ue_pos"])),
            rdars_pose=pose,
            geometry=geom,
            channel=channel,
            tx_power_dbm=float(m.get("tx_power_dbm", 0.0)),
            noise_floor_dbm=float(m.get("noise_floor_dbm", -95.0)),
            connected_set=frozenset(m.get("connected_set", geom.corners())),
            direct_path_loss_db=float(m.get("direct_path_loss_db", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def grid_from_mapping(m: Mapping[str, Any]) -> SweepGrid:
    kw = {k: float(m[k]) for k in GRID_KEYS if k in m}
    return SweepGrid.from_degrees(**kw)


def grid_to_mapping(grid: SweepGrid) -> dict[str, float]:
    return {k: math.degrees(getattr(grid, k)) for k in sorted(GRID_KEYS)}
