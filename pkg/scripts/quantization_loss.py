"""Beam power of 2-bit quantized conjugate profiles relative to continuous phases.

Compares plain element-wise rounding with the common-offset search over
random UE/BS direction pairs on the full array.
"""
import argparse
import math

import numpy as np

from rdars_isac.geometry import ArrayGeometry, direction_unit_vectors, wavelength
from rdars_isac.rdars_model import beam_codes, code_phase, ideal_continuous_phases


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-angle", type=float, default=60.0, help="deg, per axis")
    args = ap.parse_args()

    g = ArrayGeometry()
    lam = wavelength(3.7e9)
    rng = np.random.default_rng(args.seed)
    lim = math.radians(args.max_angle)
    ratios = {True: [], False: []}
    for _ in range(args.pairs):
        u = direction_unit_vectors(*rng.uniform(-lim, lim, 2))
        b = direction_unit_vectors(*rng.uniform(-lim, lim, 2))
        ideal = ideal_continuous_phases(u, b, g, lam)
        for search in (True, False):
            codes, _ = beam_codes(ideal, offset_search=search)
            gain = abs(np.exp(1j * (code_phase(codes.astype(float)) - ideal)).sum()) ** 2
            ratios[search].append(gain / g.size ** 2)

    sinc2 = (math.sin(math.pi / 4) / (math.pi / 4)) ** 2
    print(f"sinc^2(pi/4) = {sinc2:.4f}")
    for search, label in ((False, "plain rounding"), (True, "offset search")):
        r = np.array(ratios[search])
        print(f"{label:>15}: mean {r.mean():.4f}  min {r.min():.4f}  "
              f"mean loss {-10 * math.log10(r.mean()):.2f} dB")


if __name__ == "__main__":
    main()
