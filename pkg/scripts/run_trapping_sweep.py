#!/usr/bin/env python3
"""Stationary-light duration sweep.

Freezes a slow pulse inside the medium with balanced counterpropagating
couplings, holds it for a variable duration, releases it and fits the
decay of the released peak.  With balanced couplings the spin ensemble is
dynamically locked and the decay time far exceeds the free dephasing
time; detuning the balance shortens it sharply."""
import argparse
import math
from pathlib import Path

import numpy as np

from slowlight.analysis import fit_decay
from slowlight.dynamics import Grid, balance_residual
from slowlight.experiment import ProtocolParams, sweep_duration
from slowlight.medium import MediumParams, dephasing_time, make_spectral_classes


def run_sweep(ratio: float, out_dir: Path, label: str,
              durations=None) -> float:
    m = MediumParams.from_optical_depth(800.0, gamma_opt=1.0, c=4.0)
    grid = Grid(cells=72)
    classes = make_spectral_classes(30.0, 64, "lorentzian")
    omega_c = math.sqrt(20.0)
    base = ProtocolParams(kind="stationary", omega_c=omega_c,
                          omega_a=ratio * omega_c, probe_duration_us=10.0,
                          p_a_delay_us=33.0, release_window_us=35.0,
                          sample_rate=10.0, peak_guard_us=1.0)
    if durations is None:
        durations = np.arange(3.0, 54.0, 5.0)
    result = sweep_duration(durations, base, m, grid, classes)
    path = out_dir / f"duration_sweep_{label}.csv"
    np.savetxt(path, np.column_stack([result.values, result.intensities]),
               delimiter=",", header="param_us,peak_intensity")
    fit = fit_decay(list(zip(result.values, np.sqrt(result.intensities))),
                    "exponential")
    residual = balance_residual(omega_c, m.g_c, ratio * omega_c, m.g_a)
    print(f"{label}: balance residual {residual:.3f}, "
          f"trapping tau = {fit.tau:.1f} us -> {path}")
    return fit.tau


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/trapping"))
    ap.add_argument("--skip-imbalanced", action="store_true")
    ap.add_argument("--durations", type=float, nargs="+", default=None,
                    help="hold durations in us (default: 3 to 53)")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    print(f"free dephasing time at 30 kHz: {dephasing_time(30.0):.2f} us")
    tau_balanced = run_sweep(1.0, args.out, "balanced", args.durations)
    if not args.skip_imbalanced:
        tau_imbalanced = run_sweep(2.0, args.out, "imbalanced", args.durations)
        print(f"extension factor balanced/imbalanced: "
              f"{tau_balanced / tau_imbalanced:.1f}")


if __name__ == "__main__":
    main()
