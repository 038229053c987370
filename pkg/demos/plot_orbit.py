"""Plot the proved enclosure against the Fourier approximant.

Usage: python3 demos/plot_orbit.py demos/out/mg6_values.csv demos/out/mg6_parametric.csv
Needs matplotlib (not a package dependency).
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def main(values_path, parametric_path, out="orbit.png"):
    v = read(values_path)
    p = read(parametric_path)
    fig, (a, b) = plt.subplots(1, 2, figsize=(11, 4))
    a.fill_between(v["t"], v["x_lo"], v["x_hi"], color="tab:red", alpha=0.6, label="enclosure")
    a.plot(v["t"], v["xhat"], color="tab:blue", lw=0.8, label="approximant")
    a.set_xlabel("t")
    a.set_ylabel("x(t)")
    a.legend()
    b.plot(p["xd_lo"], p["x_lo"], color="tab:red", lw=0.8)
    b.plot(p["xhat_delayed"], p["xhat"], color="tab:blue", lw=0.5)
    b.set_xlabel("x(t - tau)")
    b.set_ylabel("x(t)")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
