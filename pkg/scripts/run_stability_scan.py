"""Scan diagonal torus classes for the uniform slope margin.

Enumerates chi = diag(1, b) against omega0 = I over a grid of b, generates
the coordinate-subtorus intersection data, and records the largest uniform
slack at c = c0 together with the angle-branch start for the V = M dataset.

    python scripts/run_stability_scan.py --out out/stability_scan
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from jdhym.stability import (angle_branch, coordinate_subtorus_data,
                             max_uniform_epsilon)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/stability_scan")
    parser.add_argument("--bmax", type=float, default=6.0)
    parser.add_argument("--steps", type=int, default=11)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for b in np.linspace(1.0, args.bmax, args.steps):
        chi = np.diag([1.0, float(b)])
        datasets = coordinate_subtorus_data(chi, np.eye(2))
        c0 = 1.0 + float(b)  # trace of omega0^-1 chi
        eps = max_uniform_epsilon(datasets, c0)
        vm = next(d for d in datasets if d.label == "V=M")
        theta1 = angle_branch(vm, t_max=1e3, samples=256).theta_start
        rows.append([b, c0, eps, theta1])
        print(f"b={b:5.2f}  c0={c0:.2f}  max_eps={eps}  theta_M(1)={theta1:.6f}")

    with (out / "scan.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "c0", "max_uniform_epsilon", "theta_M_at_1"])
        w.writerows(rows)
    print(f"wrote {out / 'scan.csv'}")


if __name__ == "__main__":
    main()
