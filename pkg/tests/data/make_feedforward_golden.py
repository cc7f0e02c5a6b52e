"""Regenerate feedforward_golden.csv (reference config, default profile).

Written independently of the library: explicit piecewise branches.
"""
import csv

DT, U0, DU = 0.12, 0.30, 0.10
U_MAX, HOLD, PULSE, FLANK, FINAL, U_FINAL, RAMP = 0.8, 0.20, 0.15, 0.30, 1.20, 0.8, 1e-3


def u(t):
    t1 = DT
    t2 = t1 + HOLD
    t3 = t2 + PULSE
    t4 = t3 + FLANK
    t5 = t1 + FINAL
    if t <= t1:
        return U_MAX
    if t <= t1 + RAMP:
        return U_MAX + (U0 - U_MAX) * (t - t1) / RAMP
    if t <= t2:
        return U0
    if t <= t2 + RAMP:
        return U0 + DU * (t - t2) / RAMP
    if t <= t3:
        return U0 + DU
    if t <= t4:
        return U0 + DU - DU * (t - t3) / FLANK
    if t <= t5:
        return U0
    if t <= t5 + RAMP:
        return U0 + (U_FINAL - U0) * (t - t5) / RAMP
    return U_FINAL


if __name__ == "__main__":
    with open("feedforward_golden.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        for k in range(0, 2001):
            t = k * 1e-3 + 2.5e-4
            w.writerow([repr(t), repr(u(t))])
