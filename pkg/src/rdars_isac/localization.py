"""Range from the connected-element / BS power ratio, calibration, 3D fix.

With a common path-loss exponent the ratio P_c / P_b equals
(d_ub / d_ur) ** alpha: transmit power and the reference loss cancel. The
law of cosines then ties d_ub to d_ur through the known surface-BS baseline
and the angle at the surface, giving a quadratic in d_ur.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import AzEl, Position3D, RdarsPose, direction_unit_vector


class GeometryInfeasible(ValueError):
    """No positive range is consistent with the measured ratio and geometry."""


@dataclass(frozen=True)
class RangeInputs:
    p_connected_dbm: float
    p_bs_direct_dbm: float
    theta: float  # angle at the surface between UE and BS directions
    d_br: float
    alpha: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.p_connected_dbm) and math.isfinite(self.p_bs_direct_dbm)):
            raise ValueError("measured powers must be finite")
        if not self.d_br > 0:
            raise ValueError("d_br must be positive")
        if not 0 < self.theta < math.pi:
            raise ValueError("theta must lie in (0, pi)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def ratio_db(self) -> float:
        return self.p_connected_dbm - self.p_bs_direct_dbm


@dataclass(frozen=True)
class RangeEstimate:
    d_ur: float
    d_ub: float
    roots_found: int
    ambiguous: bool


@dataclass(frozen=True)
class Calibration:
    offset_db: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.offset_db):
            raise ValueError("calibration offset must be finite")


def _positive_roots(r: float, d_br: float, cos_t: float) -> list[float]:
    a = r * r - 1.0
    b = 2.0 * d_br * cos_t
    c = -d_br * d_br
    if abs(a) <= 1e-12:
        # cos(pi/2) is ~6e-17, not 0; treat that as perpendicular
        if b <= 1e-12 * d_br:
            raise GeometryInfeasible("equal powers with theta >= 90 deg admit no range")
        return [d_br / (2.0 * cos_t)]
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc < -1e-12 * b * b:
            return []
        disc = 0.0
    sq = math.sqrt(disc)
    # numerically stable pair: q = -(b + sign(b) sq) / 2
    q = -0.5 * (b + math.copysign(sq, b))
    roots = [q / a, c / q]
    return sorted({x for x in roots if math.isfinite(x) and x > 0})


def estimate_range(inputs: RangeInputs, calib: Calibration = Calibration()) -> RangeEstimate:
    ratio_db = inputs.ratio_db - calib.offset_db
    r = 10.0 ** (ratio_db / (10.0 * inputs.alpha))
    cos_t = math.cos(inputs.theta)
    feasible = []
    for d in _positive_roots(r, inputs.d_br, cos_t):
        d_ub_sq = d * d + inputs.d_br ** 2 - 2 * d * inputs.d_br * cos_t
        if r * d > 0 and d_ub_sq > 0:
            feasible.append(d)
    if not feasible:
        raise GeometryInfeasible(
            f"no positive range for ratio {ratio_db:.3f} dB, theta {math.degrees(inputs.theta):.2f} deg")
    d_ur = feasible[0]
    return RangeEstimate(d_ur=d_ur, d_ub=r * d_ur, roots_found=len(feasible),
                         ambiguous=len(feasible) > 1)


def ideal_ratio_db(true_d_ur: float, theta: float, d_br: float, alpha: float) -> float:
    """Power ratio (dB) at which the estimator returns ``true_d_ur`` exactly."""
    d_ub = math.sqrt(true_d_ur ** 2 + d_br ** 2 - 2 * true_d_ur * d_br * math.cos(theta))
    if not d_ub > 0:
        raise GeometryInfeasible("reference geometry puts the UE on the BS")
    return 10.0 * alpha * math.log10(d_ub / true_d_ur)


def calibrate(references: Iterable[tuple[RangeInputs, float]]) -> Calibration:
    """Median offset between measured and model-consistent power ratios."""
    residuals = [inp.ratio_db - ideal_ratio_db(d, inp.theta, inp.d_br, inp.alpha)
                 for inp, d in references]
    if not residuals:
        raise ValueError("calibration needs at least one reference")
    return Calibration(float(np.median(residuals)))


def localize(best_beam: AzEl, range_est: RangeEstimate, pose: RdarsPose) -> Position3D:
    if not range_est.d_ur > 0:
        raise ValueError("range must be positive")
    return Position3D.from_array(pose.to_world(range_est.d_ur * direction_unit_vector(best_beam)))
