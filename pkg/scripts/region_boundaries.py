"""Boundary polylines for the three dominant geometries and one original-system example.

Writes one CSV per parameter set (columns kind,user,q1,q2) plus the secrecy
threshold corner points for the original system.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from secrecy_aloha.regions import (
    BOUNDARY_KINDS,
    SystemParams,
    classify_case,
    original_secrecy_thresholds_n2,
    trace_boundaries_n2,
)

# name -> (normalized arrivals, rho)
PARAMETER_SETS = {
    "case1": ((0.01, 0.01), (0.16, 0.16)),
    "case2": ((0.04, 0.04), (0.49, 0.49)),
    "case3": ((0.16, 0.16), (0.49, 0.49)),
    "original_example": ((0.04, 0.04), (0.5, 0.5)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/boundaries"))
    ap.add_argument("--grid", type=int, default=201)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for name, (lam, rho) in PARAMETER_SETS.items():
        p = SystemParams(np.array(lam), np.array([0.5, 0.5]), None, np.array(rho))
        rows = []
        for kind in BOUNDARY_KINDS:
            for pl in trace_boundaries_n2(p, kind, args.grid):
                rows.extend([kind, pl.user, q1, q2] for q1, q2 in pl.points)
        t = original_secrecy_thresholds_n2(lam, rho)
        rows.append(["threshold:q1_star,q2_2star", -1, t.q1_star, t.q2_2star])
        rows.append(["threshold:q1_2star,q2_star", -1, t.q1_2star, t.q2_star])
        path = args.out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "user", "q1", "q2"])
            w.writerows(rows)
        print(f"{name}: {classify_case(lam, rho).value}, {len(rows)} rows -> {path}")


if __name__ == "__main__":
    main()
