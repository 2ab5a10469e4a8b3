"""Range error when the estimator assumes the wrong path-loss exponent.

The channel uses the true exponent; the estimator inverts with
alpha_assumed. Noise off, shadowing off, exact angles.
"""
import argparse
import math

import numpy as np

from rdars_isac.channel_sim import ChannelParams, UplinkChannel
from rdars_isac.geometry import Position3D, angle_between, direction_unit_vectors
from rdars_isac.harness import ExperimentSpec
from rdars_isac.localization import GeometryInfeasible, RangeInputs, estimate_range
from rdars_isac.rdars_model import RdarsConfiguration


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--assumed", type=float, default=2.0)
    args = ap.parse_args()

    base = ExperimentSpec.load().scenario
    rng = np.random.default_rng(args.seed)
    places = []
    while len(places) < args.points:
        d, az, el = rng.uniform(3, 8), *np.radians(rng.uniform(-60, 60, 2))
        p = Position3D.from_array(d * direction_unit_vectors(az, el))
        try:
            base.replace(ue_pos=p)
        except ValueError:
            continue
        places.append(p)

    print(f"{'alpha_true':>10} {'median_rel_err':>14} {'p90_rel_err':>12} {'infeasible':>10}")
    for alpha in (1.6, 1.8, 2.0, 2.2, 2.5, 3.0):
        errs, bad = [], 0
        for p in places:
            sc = base.replace(ue_pos=p, noise_floor_dbm=-math.inf, direct_path_loss_db=0.0,
                              channel=ChannelParams(path_loss_exponent=alpha))
            ch = UplinkChannel(sc)
            p_c = ch.rssi_connected(RdarsConfiguration.uniform(0, sc.connected_set))
            p_b = ch.rssi_bs(RdarsConfiguration.uniform(0, range(sc.geometry.size)))
            theta = angle_between(sc.ue_dir, sc.bs_dir)
            try:
                est = estimate_range(RangeInputs(p_c, p_b, theta, sc.d_rb, args.assumed))
            except GeometryInfeasible:
                bad += 1
                continue
            errs.append(abs(est.d_ur - sc.d_ur) / sc.d_ur)
        errs = np.array(errs)
        print(f"{alpha:10.1f} {np.median(errs):14.2e} {np.percentile(errs, 90):12.2e} {bad:>10}")


if __name__ == "__main__":
    main()
