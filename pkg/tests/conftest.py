import math

import hypothesis
import numpy as np
import pytest

from rdars_isac.channel_sim import ChannelParams, Scenario
from rdars_isac.geometry import AzEl, Position3D, direction_unit_vector

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("ci")


def place(r, az_deg, el_deg, origin=(0.0, 0.0, 0.0)):
    """World point at range r and (az, el) degrees from an identity-pose surface."""
    v = r * direction_unit_vector(AzEl.from_degrees(az_deg, el_deg))
    return Position3D.from_array(np.asarray(origin) + v)


def make_scenario(ue=(5, 25, -10), bs=(10, -40, 0), sigma=0.0, **kw):
    kw.setdefault("tx_power_dbm", 10.0)
    channel = kw.pop("channel", ChannelParams(shadowing_sigma_db=sigma, rng_seed=kw.pop("rng_seed", 1)))
    return Scenario(bs_pos=place(*bs), ue_pos=place(*ue), channel=channel, **kw)


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def lam():
    return 299_792_458 / 3.7e9


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
