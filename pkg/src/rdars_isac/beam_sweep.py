"""Two-level azimuth-elevation beam sweep driven by an RSSI callback."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import ArrayGeometry, AzEl, direction_unit_vectors
from .rdars_model import RdarsConfiguration, conjugate_beam_codes

Observe = Callable[[RdarsConfiguration], float]


class TransportError(RuntimeError):
    """The observe callback failed; the sweep was aborted."""


@dataclass(frozen=True)
class SweepGrid:
    """Angular search space in radians.

    The coarse pass tiles [az_min, az_max] x [el_min, el_max] with
    ``coarse_step``; the fine pass covers +-``fine_span`` around the coarse
    winner with ``fine_step``, clipped to the bounds.
    """

    az_min: float = math.radians(-60)
    az_max: float = math.radians(60)
    el_min: float = math.radians(-60)
    el_max: float = math.radians(60)
    coarse_step: float = math.radians(10)
    fine_step: float = math.radians(2)
    fine_span: Optional[float] = None  # half-width of the fine window; None -> coarse_step / 2

    def __post_init__(self):
        if self.fine_span is None:
            object.__setattr__(self, "fine_span", self.coarse_step / 2)
        if not (self.az_min < self.az_max and self.el_min < self.el_max):
            raise ValueError("grid bounds must satisfy min < max")
        if not (self.coarse_step > 0 and self.fine_step > 0):
            raise ValueError("steps must be positive")
        if self.fine_step > self.coarse_step:
            raise ValueError("fine_step must not exceed coarse_step")
        if not 0 <= self.fine_span <= self.coarse_step:
            raise ValueError("fine_span must lie in [0, coarse_step]")
        half = math.pi / 2 + 1e-12
        if max(map(abs, (self.az_min, self.az_max, self.el_min, self.el_max))) > half:
            raise ValueError("grid must stay within [-pi/2, pi/2]")

    @classmethod
    def from_degrees(cls, az_min=-60, az_max=60, el_min=-60, el_max=60, coarse_step=10, fine_step=2,
                     fine_span=None):
        vals = (az_min, az_max, el_min, el_max, coarse_step, fine_step)
        span = None if fine_span is None else math.radians(fine_span)
        return cls(*(math.radians(v) for v in vals), fine_span=span)

    def coarse_points(self) -> list[AzEl]:
        az = _axis(self.az_min, self.az_max, self.coarse_step)
        el = _axis(self.el_min, self.el_max, self.coarse_step)
        return _grid(az, el)

    def fine_axes(self, centre: AzEl) -> tuple[np.ndarray, np.ndarray]:
        m = int(math.floor(self.fine_span / self.fine_step + 1e-9))
        offsets = np.arange(-m, m + 1) * self.fine_step
        return (_clip(centre.azimuth + offsets, self.az_min, self.az_max),
                _clip(centre.elevation + offsets, self.el_min, self.el_max))

    def fine_points(self, centre: AzEl) -> list[AzEl]:
        return _grid(*self.fine_axes(centre))


def _axis(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + np.arange(n + 1) * step


def _clip(values, lo, hi, tol=1e-9):
    return values[(values >= lo - tol) & (values <= hi + tol)]


def _grid(az: np.ndarray, el: np.ndarray) -> list[AzEl]:
    # elevation outer, azimuth inner
    half = math.pi / 2
    return [AzEl(min(max(float(a), -half), half), min(max(float(e), -half), half))
            for e in el for a in az]


@dataclass
class SweepResult:
    samples: list  # (AzEl, rssi_dbm) in sweep order
    best: AzEl
    best_rssi: float
    coarse_best: AzEl
    n_coarse: int

    @property
    def fine_samples(self) -> list:
        return self.samples[self.n_coarse:]

    @property
    def n_fine(self) -> int:
        return len(self.samples) - self.n_coarse

    def fine_map(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fine-stage RSSI as an (n_el, n_az) array plus its axes in radians."""
        fine = self.fine_samples
        az = np.array(sorted({p.azimuth for p, _ in fine}))
        el = np.array(sorted({p.elevation for p, _ in fine}))
        rssi = np.asarray([r for _, r in fine]).reshape(el.size, az.size)
        return az, el, rssi


def build_codebook(grid_points: Sequence[AzEl], bs_dir_local, connected_set,
                   geometry: ArrayGeometry, lam: float,
                   offset_search: bool = True) -> list[tuple[AzEl, RdarsConfiguration]]:
    if not grid_points:
        raise ValueError("codebook needs at least one grid point")
    key = (tuple(grid_points), tuple(float(v) for v in bs_dir_local),
           frozenset(int(i) for i in connected_set), geometry, float(lam), offset_search)
    return list(_codebook_cached(*key))


@lru_cache(maxsize=512)
def _codebook_cached(points, bs_dir, connected, geometry, lam, offset_search):
    from .rdars_model import _check_indices
    from .geometry import _check_unit
    _check_indices(connected, geometry.size)
    bs = _check_unit(np.asarray(bs_dir), "bs_dir_local")
    dirs = direction_unit_vectors([p.azimuth for p in points], [p.elevation for p in points])
    ideal = -(2 * math.pi / lam) * ((dirs + bs) @ geometry.element_positions.T)
    active = np.ones(geometry.size, dtype=bool)
    active[list(connected)] = False
    codes = conjugate_beam_codes(ideal, offset_search, active)
    return tuple((p, RdarsConfiguration(c, connected)) for p, c in zip(points, codes))


def _measure(observe: Observe, config, repeats: int) -> float:
    try:
        if repeats == 1:
            return float(observe(config))
        mw = [10 ** (float(observe(config)) / 10) for _ in range(repeats)]
    except TransportError:
        raise
    except Exception as exc:
        raise TransportError(f"observation failed: {exc}") from exc
    return 10 * math.log10(sum(mw) / repeats)


def sweep(observe: Observe, grid: SweepGrid, bs_dir_local, connected_set,
          geometry: ArrayGeometry, lam: float, repeats: int = 1,
          offset_search: bool = True) -> SweepResult:
    """Coarse pass over the whole grid, then a fine pass around the winner.

    Observations are issued strictly one after another. Ties in RSSI go to
    the earliest sample.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    samples = []

    def run(points):
        book = build_codebook(points, bs_dir_local, connected_set, geometry, lam, offset_search)
        vals = [_measure(observe, cfg, repeats) for _, cfg in book]
        samples.extend(zip(points, vals))
        k = int(np.argmax(vals))
        return points[k], vals[k]

    coarse = grid.coarse_points()
    coarse_best, _ = run(coarse)
    best, best_rssi = run(grid.fine_points(coarse_best))
    return SweepResult(samples, best, best_rssi, coarse_best, len(coarse))
