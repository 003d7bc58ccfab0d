#!/usr/bin/env python3
"""Plot cbs_sim CSV output.

    plot.py out/spectrum_omega0.5 spectrum_*.csv -> enhancement vs detuning
    plot.py out/pulse_tau200      pulse_*.csv    -> traces and enhancement vs time
    plot.py out/diagnostics       diagnostics_optics.csv -> optical depths

Writes <dir>/plot.png unless --out is given.
"""

import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

LABELS = {"hp_hp": "H+ -> H+", "hp_hm": "H+ -> H-", "hm_hp": "H- -> H+", "hm_hm": "H- -> H-"}


def tag(path):
    return path.stem.split("_", 1)[1]


def plot_spectra(files, ax):
    for f in files:
        d = pd.read_csv(f)
        ax.errorbar(d.delta_over_gamma, d.enhancement, yerr=d.err, marker="o", ms=3, capsize=2,
                    label=LABELS.get(tag(f), tag(f)))
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel("probe detuning / Gamma")
    ax.set_ylabel("enhancement factor")
    ax.legend()


def plot_pulses(files, axes):
    for f in files:
        d = pd.read_csv(f)
        double = d.ladder_2 + d.crossed_2
        label = LABELS.get(tag(f), tag(f))
        axes[0].plot(d.t_gamma, d.single / d.single.max(), label=f"{label} single")
        axes[0].plot(d.t_gamma, double / double.max(), "--", label=f"{label} double")
        axes[1].plot(d.t_gamma, d.enhancement_t, label=label)
    # the time window spans many pulse lengths; show where light comes out
    d = pd.read_csv(files[0])
    live = d.t_gamma[d.single > 1e-4 * d.single.max()]
    pad = 0.2 * (live.max() - live.min())
    axes[1].set_xlim(live.min() - pad, live.max() + pad)
    axes[0].set_ylabel("intensity (normalized)")
    axes[1].set_ylabel("enhancement factor")
    axes[1].set_xlabel("time * Gamma")
    for ax in axes:
        ax.legend()


def plot_optics(path, ax):
    d = pd.read_csv(path)
    for col, label in [("optical_depth_sigma_minus", "sigma-"), ("optical_depth_pi", "pi"),
                       ("optical_depth_sigma_plus", "sigma+")]:
        ax.plot(d.delta_over_gamma, d[col], label=label)
    ax.set_xlabel("probe detuning / Gamma")
    ax.set_ylabel("optical depth through center")
    ax.legend()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dir", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path)
    args = ap.parse_args()
    spectra = sorted(args.dir.glob("spectrum_*.csv"))
    pulses = sorted(args.dir.glob("pulse_*.csv"))
    optics = args.dir / "diagnostics_optics.csv"
    if spectra:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        plot_spectra(spectra, ax)
    elif pulses:
        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 7))
        plot_pulses(pulses, axes)
    elif optics.exists():
        fig, ax = plt.subplots(figsize=(7, 4.5))
        plot_optics(optics, ax)
    else:
        raise SystemExit(f"no cbs_sim CSV output in {args.dir}")
    fig.tight_layout()
    out = args.out or args.dir / "plot.png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
