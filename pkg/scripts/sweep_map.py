"""Print the coarse and fine RSSI maps of one sweep as text grids."""
import argparse
import math

import numpy as np

from rdars_isac.beam_sweep import sweep
from rdars_isac.channel_sim import ShadowDraws, UplinkChannel
from rdars_isac.harness import ExperimentSpec


def show(title, az, el, rssi):
    print(title)
    print("el\\az " + " ".join(f"{a:6.0f}" for a in az))
    for e, row in zip(el[::-1], rssi[::-1]):
        print(f"{e:5.0f} " + " ".join(f"{v:6.1f}" for v in row))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--clean", action="store_true", help="no direct path, no noise, no shadowing")
    args = ap.parse_args()

    spec = ExperimentSpec.load(args.scenario, seed=args.seed)
    sc = spec.scenario
    if args.clean:
        sc = sc.replace(direct_path_loss_db=math.inf, noise_floor_dbm=-math.inf)
        shadow = ShadowDraws(0.0, 0.0, 0.0)
    else:
        shadow = ShadowDraws.draw(np.random.default_rng([spec.seed, 0]), sc.channel.shadowing_sigma_db)
    ch = UplinkChannel(sc, shadow)
    res = sweep(ch.rssi_bs, spec.grid, sc.bs_dir, sc.connected_set, sc.geometry, sc.wavelength)

    g = spec.grid
    caz = np.degrees(np.arange(g.az_min, g.az_max + 1e-9, g.coarse_step))
    cel = np.degrees(np.arange(g.el_min, g.el_max + 1e-9, g.coarse_step))
    coarse = np.array([v for _, v in res.samples[:res.n_coarse]]).reshape(len(cel), len(caz))
    show("coarse RSSI (dBm)", caz, cel, coarse)
    az, el, fine = res.fine_map()
    show("fine RSSI (dBm)", np.degrees(az), np.degrees(el), fine)
    print("true (az, el) = (%.1f, %.1f) deg" % sc.true_azel.degrees())
    print("best (az, el) = (%.1f, %.1f) deg" % res.best.degrees())


if __name__ == "__main__":
    main()
