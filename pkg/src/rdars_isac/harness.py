"""Monte Carlo runner for the two-stage localisation and result files."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .beam_sweep import SweepGrid, SweepResult, build_codebook, sweep
from .channel_sim import Scenario, ShadowDraws, UplinkChannel
from .control_link import ControlClient
from .geometry import AzEl, Position3D, angle_between, direction_unit_vector, direction_unit_vectors
from .localization import (Calibration, GeometryInfeasible, RangeInputs, calibrate,
                           estimate_range, localize)
from .rdars_model import RdarsConfiguration, scrambled_config

log = logging.getLogger(__name__)

CALIBRATION_STREAM = 0xCA1B


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    grid: SweepGrid = SweepGrid()
    trials: int = 100
    seed: int = 0
    calibration_references: int = 8
    alpha_assumed: float = 2.0
    transport: str = "oracle"  # or "udp:<host>:<port>"
    pb_probe: str = "connected"  # "connected" | "scrambled"
    repeats: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.calibration_references < 0:
            raise ValueError("calibration_references must be >= 0")
        if self.pb_probe not in ("connected", "scrambled"):
            raise ValueError(f"unknown pb_probe {self.pb_probe!r}")
        parse_transport(self.transport)

    @classmethod
    def from_mapping(cls, m, **overrides) -> "ExperimentSpec":
        kw = {k: m[k] for k in cfgmod.EXPERIMENT_KEYS if k in m}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(scenario=cfgmod.scenario_from_mapping(m), grid=cfgmod.grid_from_mapping(m), **kw)

    @classmethod
    def load(cls, path=None, **overrides) -> "ExperimentSpec":
        return cls.from_mapping(cfgmod.load_mapping(path), **overrides)


def parse_transport(transport: str) -> Optional[tuple[str, int]]:
    if transport == "oracle":
        return None
    if transport.startswith("udp:"):
        host, _, port = transport[4:].rpartition(":")
        if host and port.isdigit():
            return host, int(port)
    raise ValueError(f"transport must be 'oracle' or 'udp:<host>:<port>', got {transport!r}")


@dataclass
class TrialRecord:
    trial: int
    true_az_deg: float
    true_el_deg: float
    true_d_ur: float
    est_az_deg: Optional[float] = None
    est_el_deg: Optional[float] = None
    est_d_ur: Optional[float] = None
    angle_error_deg: Optional[float] = None
    range_error_m: Optional[float] = None
    position_error_m: Optional[float] = None
    ambiguous: Optional[bool] = None
    p_connected_dbm: Optional[float] = None
    p_bs_dbm: Optional[float] = None
    peak_rssi_dbm: Optional[float] = None
    trace: str = ""
    error: str = ""


FIELDS = [f.name for f in fields(TrialRecord)]
SUMMARY_METRICS = ("angle_error_deg", "range_error_m", "position_error_m")


@dataclass
class ExperimentResult:
    records: list[TrialRecord]
    summary: dict[str, Any]
    traces: dict[str, SweepResult] = field(default_factory=dict, repr=False)


class Surface:
    """Where configurations go: straight to the simulator, or over UDP first."""

    def __init__(self, transport: str, timeout: float = 0.2, retries: int = 5):
        endpoint = parse_transport(transport)
        self.client = ControlClient(endpoint, timeout, retries) if endpoint else None

    def apply(self, config: RdarsConfiguration) -> RdarsConfiguration:
        if self.client is not None:
            self.client.apply(config)
        return config

    def close(self):
        if self.client is not None:
            self.client.close()


def great_circle_deg(a: AzEl, b: AzEl) -> float:
    return math.degrees(angle_between(direction_unit_vector(a), direction_unit_vector(b)))


def probe_config(spec: ExperimentSpec) -> RdarsConfiguration:
    """Configuration under which the BS measures the direct-path power."""
    n = spec.scenario.geometry.size
    if spec.pb_probe == "connected":
        # every element receiving, none reflecting
        return RdarsConfiguration.uniform(0, range(n), size=n)
    return scrambled_config(spec.scenario.connected_set, size=n)


def _beam(spec: ExperimentSpec, point: AzEl) -> RdarsConfiguration:
    sc = spec.scenario
    return build_codebook([point], sc.bs_dir, sc.connected_set, sc.geometry, sc.wavelength)[0][1]


def reference_positions(spec: ExperimentSpec) -> list[Position3D]:
    """Known calibration spots, 3-8 m from the surface inside the sweep grid."""
    sc, g = spec.scenario, spec.grid
    rng = np.random.default_rng([spec.seed, CALIBRATION_STREAM])
    out = []
    while len(out) < spec.calibration_references:
        d = rng.uniform(3.0, 8.0)
        az = rng.uniform(g.az_min, g.az_max)
        el = rng.uniform(g.el_min, g.el_max)
        p = Position3D.from_array(sc.rdars_pose.to_world(d * direction_unit_vectors(az, el)))
        try:
            ref = sc.replace(ue_pos=p)
        except ValueError:
            continue
        if math.degrees(angle_between(ref.ue_dir, ref.bs_dir)) < 5:
            continue
        out.append(p)
    return out


def build_calibration(spec: ExperimentSpec, surface: Surface) -> Calibration:
    if spec.calibration_references == 0:
        return Calibration()
    refs = []
    probe = probe_config(spec)
    for p in reference_positions(spec):
        sc = spec.scenario.replace(ue_pos=p)
        ch = UplinkChannel(sc)
        p_b = ch.rssi_bs(surface.apply(probe))
        p_c = ch.rssi_connected(surface.apply(_beam(spec, sc.true_azel)))
        theta = angle_between(sc.ue_dir, sc.bs_dir)
        refs.append((RangeInputs(p_c, p_b, theta, sc.d_rb, spec.alpha_assumed), sc.d_ur))
    return calibrate(refs)


def run_trial(spec: ExperimentSpec, trial: int, calib: Calibration,
              surface: Surface) -> tuple[TrialRecord, SweepResult]:
    sc = spec.scenario
    rng = np.random.default_rng([spec.seed, trial])
    channel = UplinkChannel(sc, ShadowDraws.draw(rng, sc.channel.shadowing_sigma_db))
    truth = sc.true_azel
    rec = TrialRecord(trial, *truth.degrees(), sc.d_ur, trace=f"trial-{trial:04d}")

    def observe(config):
        return channel.rssi_bs(surface.apply(config))

    res = sweep(observe, spec.grid, sc.bs_dir, sc.connected_set, sc.geometry, sc.wavelength,
                repeats=spec.repeats)
    rec.est_az_deg, rec.est_el_deg = res.best.degrees()
    rec.angle_error_deg = great_circle_deg(truth, res.best)
    rec.peak_rssi_dbm = res.best_rssi

    rec.p_bs_dbm = channel.rssi_bs(surface.apply(probe_config(spec)))
    rec.p_connected_dbm = channel.rssi_connected(surface.apply(_beam(spec, res.best)))
    try:
        theta = angle_between(direction_unit_vector(res.best), sc.bs_dir)
        inputs = RangeInputs(rec.p_connected_dbm, rec.p_bs_dbm, theta, sc.d_rb, spec.alpha_assumed)
        est = estimate_range(inputs, calib)
    except GeometryInfeasible as exc:
        rec.error = f"GeometryInfeasible: {exc}"
        return rec, res
    except ValueError as exc:
        rec.error = f"InvalidInputs: {exc}"
        return rec, res
    pos = localize(res.best, est, sc.rdars_pose)
    rec.est_d_ur = est.d_ur
    rec.ambiguous = est.ambiguous
    rec.range_error_m = abs(est.d_ur - sc.d_ur)
    rec.position_error_m = float(np.linalg.norm(pos.as_array() - sc.ue_pos.as_array()))
    return rec, res


def summarize(records: Sequence[TrialRecord], calib: Calibration) -> dict[str, Any]:
    out: dict[str, Any] = {
        "n_trials": len(records),
        "n_failed": sum(1 for r in records if r.error),
        "calibration_offset_db": calib.offset_db,
    }
    for m in SUMMARY_METRICS:
        vals = np.array([getattr(r, m) for r in records if getattr(r, m) is not None], dtype=float)
        out[f"{m}_median"] = float(np.median(vals)) if vals.size else None
        out[f"{m}_p90"] = float(np.percentile(vals, 90)) if vals.size else None
    return out


def run_experiment(spec: ExperimentSpec, keep_traces: bool = False) -> ExperimentResult:
    """Run ``spec.trials`` independent trials, in trial order.

    Trial ``t`` draws its shadowing from a generator seeded with
    ``(spec.seed, t)``, so records do not depend on execution order.
    """
    surface = Surface(spec.transport)
    try:
        calib = build_calibration(spec, surface)
        records, traces = [], {}
        for t in range(spec.trials):
            rec, res = run_trial(spec, t, calib, surface)
            records.append(rec)
            if keep_traces:
                traces[rec.trace] = res
    finally:
        surface.close()
    return ExperimentResult(records, summarize(records, calib), traces)


# -- result files -----------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(name: str, s: str):
    if s == "":
        return "" if name in ("trace", "error") else None
    if name == "ambiguous":
        return s == "true"
    if name == "trial":
        return int(s)
    if name in ("trace", "error"):
        return s
    return float(s)


def results_to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in result.records:
        w.writerow([_cell(getattr(r, f)) for f in FIELDS])
    w.writerow(["#summary"] + [f"{k}={_cell(v)}" for k, v in result.summary.items()])
    return buf.getvalue()


def results_to_json(result: ExperimentResult) -> str:
    doc = {"trials": [asdict(r) for r in result.records], "summary": result.summary}
    return json.dumps(doc, indent=2) + "\n"


def emit_results(result: ExperimentResult, fmt: str, path) -> Path:
    if not result.records:
        raise ValueError("no records to write")
    if fmt == "csv":
        text = results_to_csv(result)
    elif fmt == "json":
        text = results_to_json(result)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc
    return path


def _summary_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return float(s)


def read_results(path) -> ExperimentResult:
    """Load a CSV or JSON results file written by :func:`emit_results`."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return ExperimentResult([TrialRecord(**t) for t in doc["trials"]], doc["summary"])
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if header != FIELDS:
        raise ValueError(f"unexpected CSV header in {path}")
    records, summary = [], {}
    for row in body:
        if row and row[0] == "#summary":
            summary = {k: _summary_value(v) for k, v in (c.split("=", 1) for c in row[1:])}
            continue
        records.append(TrialRecord(**{f: _parse_cell(f, v) for f, v in zip(FIELDS, row)}))
    return ExperimentResult(records, summary)


def trace_rows(result: SweepResult) -> list[dict[str, Any]]:
    return [{"stage": "coarse" if i < result.n_coarse else "fine",
             "az_deg": math.degrees(p.azimuth), "el_deg": math.degrees(p.elevation), "rssi_dbm": v}
            for i, (p, v) in enumerate(result.samples)]


def emit_trace(result: SweepResult, fmt: str, path) -> Path:
    rows = trace_rows(result)
    path = Path(path)
    if fmt == "json":
        doc = {"best": dict(zip(("az_deg", "el_deg"), result.best.degrees())),
               "coarse_best": dict(zip(("az_deg", "el_deg"), result.coarse_best.degrees())),
               "best_rssi_dbm": result.best_rssi, "samples": rows}
        path.write_text(json.dumps(doc, indent=2) + "\n")
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})
        path.write_text(buf.getvalue())
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path
