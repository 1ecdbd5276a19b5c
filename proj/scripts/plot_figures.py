"""Plot the CSV outputs of the iqscc CLI.

    build/iqscc --out out thermal
    build/iqscc --out out roc
    build/iqscc --out out required-sinr
    build/iqscc --out out optimize
    build/iqscc --out out beampattern
    python3 scripts/plot_figures.py out
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def thermal(out: Path) -> None:
    df = pd.read_csv(out / "thermal.csv")
    fig, ax = plt.subplots()
    for t, g in df[df.temperature_k > 0].groupby("temperature_k"):
        ax.loglog(g.frequency_hz, g.n_thermal, label=f"{t:g} K")
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("thermal photons N_n")
    ax.legend()
    fig.savefig(out / "thermal.png", dpi=150)


def roc(out: Path) -> None:
    df = pd.read_csv(out / "roc.csv")
    fig, ax = plt.subplots()
    for (proto, pf), g in df.groupby(["protocol", "pf"]):
        ax.plot(g.gamma_db, g.pd, label=f"{proto}, pf={pf:g}")
    ax.set_xlabel("SINR [dB]")
    ax.set_ylabel("Pd")
    ax.legend()
    fig.savefig(out / "roc.png", dpi=150)


def required_sinr(out: Path) -> None:
    df = pd.read_csv(out / "required_sinr.csv")
    fig, ax = plt.subplots()
    for proto, g in df[df.status == "ok"].groupby("protocol"):
        ax.semilogx(g.pd, g.required_sinr_db, label=proto)
    ax.set_xlabel("Pd")
    ax.set_ylabel("required SINR [dB]")
    ax.legend()
    fig.savefig(out / "required_sinr.png", dpi=150)


def convergence(out: Path) -> None:
    fig, ax = plt.subplots()
    for mode in ("conventional", "iqscc"):
        path = out / f"convergence_{mode}.csv"
        if path.exists():
            df = pd.read_csv(path)
            ax.plot(df.iter, df.sum_rate_bps_hz, marker="o", label=mode)
    ax.set_xlabel("iteration")
    ax.set_ylabel("sum rate [bps/Hz]")
    ax.legend()
    fig.savefig(out / "convergence.png", dpi=150)


def beampattern(out: Path) -> None:
    fig, ax = plt.subplots()
    for mode in ("conventional", "iqscc"):
        path = out / f"beampattern_{mode}.csv"
        if path.exists():
            df = pd.read_csv(path)
            ax.plot(df.angle_deg, df.comm_gain_db, label=f"{mode} V_c")
            ax.plot(df.angle_deg, df.sens_gain_db, "--", label=f"{mode} V_s")
    ax.set_xlabel("angle [deg]")
    ax.set_ylabel("gain [dB]")
    ax.set_ylim(bottom=-60)
    ax.legend()
    fig.savefig(out / "beampattern.png", dpi=150)


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
    for plot, name in ((thermal, "thermal.csv"), (roc, "roc.csv"), (required_sinr, "required_sinr.csv"),
                       (convergence, None), (beampattern, None)):
        if name is None or (out / name).exists():
            plot(out)


if __name__ == "__main__":
    main()
