import math

import numpy as np
import pytest
from scipy.ndimage import maximum_filter

from conftest import make_scenario
from rdars_isac.beam_sweep import SweepGrid, TransportError, build_codebook, sweep
from rdars_isac.channel_sim import UplinkChannel
from rdars_isac.geometry import (ArrayGeometry, AzEl, angle_between, direction_unit_vector,
                                 steering_phase)
from rdars_isac.rdars_model import RdarsConfiguration, beam_codes, quantize_phase

INF = math.inf
BORESIGHT = np.array([0.0, 0.0, 1.0])


def run(sc, grid=SweepGrid(), observe=None):
    ch = UplinkChannel(sc)
    return sweep(observe or ch.rssi_bs, grid, sc.bs_dir, sc.connected_set, sc.geometry,
                 sc.wavelength)


def test_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid.from_degrees(az_min=10, az_max=-10)
    with pytest.raises(ValueError):
        SweepGrid.from_degrees(coarse_step=2, fine_step=5)
    with pytest.raises(ValueError):
        SweepGrid.from_degrees(fine_step=0)


def test_grid_points():
    g = SweepGrid()
    coarse = g.coarse_points()
    assert len(coarse) == 13 * 13
    assert coarse[0].degrees() == pytest.approx((-60, -60))
    assert coarse[1].degrees() == pytest.approx((-50, -60))  # azimuth varies fastest
    fine = g.fine_points(AzEl.from_degrees(60, 0))
    az = sorted({round(p.degrees()[0], 6) for p in fine})
    assert az == [56, 58, 60]  # clipped at the upper bound


def test_codebook_single_boresight(lam):
    book = build_codebook([AzEl(0, 0)], BORESIGHT, set(), ArrayGeometry(), lam)
    assert len(book) == 1
    assert book[0][1] == RdarsConfiguration.uniform(0)


def test_codebook_order_and_oracle(lam):
    g = ArrayGeometry()
    pts = SweepGrid.from_degrees(-60, 60, -60, 60, 10, 2).coarse_points()
    bs = direction_unit_vector(AzEl.from_degrees(-40, 0))
    book = build_codebook(pts, bs, {0, 15, 240, 255}, g, lam)
    assert len(book) == 169
    assert [p for p, _ in book] == pts
    for p, cfg in book[::17]:
        u = direction_unit_vector(p)
        ideal = np.array([-(steering_phase(x, u, lam) + steering_phase(x, bs, lam))
                          for x in g.element_positions])
        active = np.ones(256, dtype=bool)
        active[[0, 15, 240, 255]] = False
        _, offset = beam_codes(ideal, active=active)
        expect = RdarsConfiguration([quantize_phase(v + offset) for v in ideal], {0, 15, 240, 255})
        assert cfg == expect


def test_codebook_rejects_empty(lam):
    with pytest.raises(ValueError):
        build_codebook([], BORESIGHT, set(), ArrayGeometry(), lam)


def test_constant_callback_picks_first_sample(scenario):
    res = run(scenario, observe=lambda cfg: -70.0)
    assert res.best == res.samples[0][0]
    assert res.best.degrees() == pytest.approx((-60, -60))


def test_callback_failure_is_transport_error(scenario):
    def broken(cfg):
        raise ConnectionError("link down")

    with pytest.raises(TransportError):
        run(scenario, observe=broken)


def test_observations_are_sequential(scenario):
    active = []

    def observe(cfg):
        assert not active
        active.append(1)
        active.pop()
        return 0.0

    run(scenario, observe=observe)


def test_noiseless_sweep_accuracy():
    # UE at az 20, el 10 (coarse and fine grid point) with no direct path
    sc = make_scenario(ue=(5, 20, 10), direct_path_loss_db=INF)
    res = run(sc)
    assert res.coarse_best.degrees() == pytest.approx((20, 10))
    err = math.degrees(angle_between(direction_unit_vector(res.best), sc.ue_dir))
    assert err <= 1.0 + 2.0


def test_noiseless_sweep_off_grid():
    sc = make_scenario(ue=(5, 23.3, -7.1), direct_path_loss_db=INF)
    res = run(sc)
    err = math.degrees(angle_between(direction_unit_vector(res.best), sc.ue_dir))
    assert err <= 1.0 + 2.0  # fine_step / 2 plus one fine step of quantisation slack


def test_sample_count_bound(scenario):
    g = SweepGrid()
    res = run(scenario, g)
    assert res.n_coarse == 169
    assert len(res.samples) == res.n_coarse + res.n_fine
    assert res.n_fine <= (2 * g.coarse_step / g.fine_step + 1) ** 2 + 1e-9
    assert res.best_rssi >= max(v for _, v in res.samples)
    assert (res.best, res.best_rssi) in res.samples


def test_repeat_and_average(scenario):
    calls = []

    def observe(cfg):
        calls.append(1)
        return -60.0 if len(calls) % 2 else -63.0

    res = sweep(observe, SweepGrid.from_degrees(-10, 10, -10, 10, 10, 5), scenario.bs_dir,
                scenario.connected_set, scenario.geometry, scenario.wavelength, repeats=2)
    mean = 10 * math.log10((10 ** -6.0 + 10 ** -6.3) / 2)
    assert all(v == pytest.approx(mean) for _, v in res.samples)
    assert len(calls) == 2 * len(res.samples)


def _great_circle(a, b):
    return angle_between(direction_unit_vector(a), direction_unit_vector(b))


def _plane_offset(a, u):
    # planar-array response depends on the direction-cosine offset in the array plane
    return float(np.linalg.norm((direction_unit_vector(a) - u)[:2]))


def test_fine_map_peak_is_nearest_grid_point():
    rng = np.random.default_rng(31)
    checked = 0
    while checked < 20:
        ue = (rng.uniform(3, 8), rng.uniform(-50, 50), rng.uniform(-50, 50))
        try:
            sc = make_scenario(ue=ue, direct_path_loss_db=INF, noise_floor_dbm=-INF)
        except ValueError:
            continue
        if math.degrees(angle_between(sc.ue_dir, sc.bs_dir)) < 15:
            continue
        res = run(sc)
        fine = res.fine_samples
        truth = sc.true_azel
        u = sc.ue_dir
        nearest = min(fine, key=lambda s: _plane_offset(s[0], u))[0]

        # unquantised beams: the map peaks exactly at the nearest grid point
        k = 2 * math.pi / sc.wavelength
        pos = sc.geometry.element_positions
        mask = RdarsConfiguration.uniform(0, sc.connected_set).reflect_mask
        ideal_map = [abs(np.exp(1j * k * (pos @ (u - direction_unit_vector(p))))[mask].sum())
                     for p, _ in fine]
        assert fine[int(np.argmax(ideal_map))][0] == nearest

        # 2-bit beams: quantisation ripple may move the peak to a neighbouring point
        peak = max(fine, key=lambda s: s[1])[0]
        step = SweepGrid().fine_step
        assert abs(peak.azimuth - nearest.azimuth) <= step + 1e-9
        assert abs(peak.elevation - nearest.elevation) <= step + 1e-9
        gc_nearest = min(fine, key=lambda s: _great_circle(s[0], truth))[0]
        assert _great_circle(peak, truth) <= _great_circle(gc_nearest, truth) + step
        checked += 1


def test_fine_map_shape(scenario):
    res = run(scenario)
    az, el, m = res.fine_map()
    assert m.shape == (el.size, az.size)
    assert np.max(m) == res.best_rssi


def test_codebook_agrees_with_single_beam_synthesis(lam):
    from rdars_isac.rdars_model import conjugate_beam_config
    g = ArrayGeometry()
    bs = direction_unit_vector(AzEl.from_degrees(-40, 0))
    pts = SweepGrid().coarse_points()
    for p, cfg in build_codebook(pts, bs, {0, 15, 240, 255}, g, lam):
        assert cfg == conjugate_beam_config(direction_unit_vector(p), bs, {0, 15, 240, 255}, g, lam)
