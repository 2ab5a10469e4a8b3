"""Simulator and toolkit for a dual-mode (reflecting / receiving) surface
assisting uplink communication and user localisation."""

from .beam_sweep import SweepGrid, SweepResult, build_codebook, sweep
from .channel_sim import ChannelParams, Scenario, ShadowDraws, UplinkChannel, uplink_observables
from .geometry import ArrayGeometry, AzEl, Position3D, RdarsPose
from .localization import (Calibration, GeometryInfeasible, RangeEstimate, RangeInputs,
                           calibrate, estimate_range, localize)
from .rdars_model import Connected, RdarsConfiguration, Reflection, conjugate_beam_config

__version__ = "0.1.0"
