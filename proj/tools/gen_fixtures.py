#!/usr/bin/env python3
"""Regenerates the files in fixtures/.

Per-dot FSS lists are synthetic: Gaussian draws pushed through an affine
map so that each sample's mean and sample standard deviation equal the
published group summary, then clipped at zero and re-matched.
"""
import math
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

# Sample Sn is sample #n of the growth table (a leading '#' would read as
# a CSV comment).
# sample id, nominal thickness (nm), growth temperature (C), U-DMHy
TABLE1 = [
    ("S1", 0.5, 640, "no"), ("S2", 0.5, 700, "no"), ("S3", 0.5, 730, "no"),
    ("S4", 0.57, 730, "no"), ("S5", 0.8, 730, "no"), ("S6", 1, 730, "no"),
    ("S7", 1.5, 730, "no"), ("S8", 1.75, 730, "no"), ("S9", 0.85, 730, "yes"),
    ("S10", 2, 730, "yes"),
]

# sample id -> (dots, mean, std) of the reported group summaries
GROUPS = {"S3": (10, 3.5, 1.6), "S9": (20, 2.1, 1.2), "S8": (25, 15.4, 10.0)}


def matched(rng, n, mean, std):
    for _ in range(1000):
        x = rng.normal(size=n)
        x = mean + std * (x - x.mean()) / x.std(ddof=1)
        if x.min() >= 0.0:
            # four decimals; the last value absorbs the rounding of the sum
            x = np.round(x, 4)
            x[-1] = round(mean * n - x[:-1].sum(), 4)
            if x.min() >= 0.0:
                return x
    raise RuntimeError("could not draw a nonnegative matched sample")


def fmt(v):
    return f"{v:g}"


def main():
    meta = {sid: (h, t, u) for sid, h, t, u in TABLE1}
    lines = ["# Growth metadata of samples #1..#10 (ids S1..S10); no FSS values.",
             "sample_id,thickness_nm,temp_c,udmhy,e_x_mev,fss_uev"]
    for sid, h, t, u in TABLE1:
        lines.append(f"{sid},{fmt(h)},{t},{u},,")
    (OUT / "table1_samples.csv").write_text("\n".join(lines) + "\n")

    rng = np.random.default_rng(20190611)
    lines = ["# Synthetic per-dot FSS values (ueV). Each group is matched to its",
             "# published summary: S3 3.5 +- 1.6 (10 dots), S9 2.1 +- 1.2,",
             "# S8 15.4 +- 10.0 (mean +- sample std). Dot counts for S8 and S9",
             "# and all values are invented; exciton energies are not published",
             "# per dot and are left empty. Regenerate with tools/gen_fixtures.py.",
             "sample_id,thickness_nm,temp_c,udmhy,e_x_mev,fss_uev"]
    for sid, (n, mean, std) in GROUPS.items():
        h, t, u = meta[sid]
        for v in matched(rng, n, mean, std):
            lines.append(f"{sid},{fmt(h)},{t},{u},,{v:.4f}")
    (OUT / "table1_fss.csv").write_text("\n".join(lines) + "\n")

    # Noiseless polarization series: S = 11 ueV, axis at 20 degrees,
    # 12 analyzer angles, X/XX in anti-phase.
    s, axis = 11.0, 20.0
    lines = ["# Synthetic, noiseless: S = 11 ueV, axis 20 deg, 12 angles.",
             "angle_deg,e_x_uev,e_xx_uev,sigma_uev"]
    for k in range(12):
        th = 15.0 * k
        osc = 0.5 * s * math.cos(math.radians(2.0 * (th - axis)))
        lines.append(f"{th:g},{osc!r},{-osc!r},0.05")
    (OUT / "fss_series_11uev.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
