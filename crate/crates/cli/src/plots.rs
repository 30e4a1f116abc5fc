//! Matplotlib scripts written next to the data files.

pub const PHASE_DIAGRAM: &str = r##"import csv
import json
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

here = sys.argv[1] if len(sys.argv) > 1 else "."
rows = list(csv.DictReader(open(f"{here}/phase_diagram.csv")))
colors = {"NSD": "tab:green", "SDR": "tab:orange", "SD": "tab:red"}
panels = defaultdict(list)
for row in rows:
    panels[(row["C12"], row["purity"])].append(row)

fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4), squeeze=False)
for ax, (key, pts) in zip(axes[0], sorted(panels.items())):
    for phase, color in colors.items():
        sel = [p for p in pts if p["phase"] == phase]
        ax.scatter([float(p["T"]) for p in sel], [float(p["r"]) for p in sel], s=8, c=color, label=phase)
    ok = [p for p in pts if not p["phase"].startswith("ERR")]
    temps = sorted({float(p["T"]) for p in ok})
    by_t = {float(p["T"]): p for p in ok}
    ax.plot(temps, [abs(float(by_t[t]["r_crit"])) for t in temps], "k-", label="|r_crit|")
    ax.plot(temps, [float(by_t[t]["s_crit"]) for t in temps], "-", color="grey", label="S_crit")
    ax.set_xlabel("T")
    ax.set_ylabel("r")
    ax.set_title(f"C12={float(key[0]):g}, purity={float(key[1]):g}")
    ax.legend(loc="upper right", fontsize=7)
fig.tight_layout()
fig.savefig(f"{here}/phase_diagram.png", dpi=150)
"##;

pub const TRAJECTORIES: &str = r##"import csv
import glob
import sys

import matplotlib.pyplot as plt

here = sys.argv[1] if len(sys.argv) > 1 else "."
fig, ax = plt.subplots(figsize=(6, 4))
for path in sorted(glob.glob(f"{here}/trajectory*.csv")):
    rows = list(csv.DictReader(open(path)))
    ax.plot([float(r["t"]) for r in rows], [float(r["EN"]) for r in rows], lw=0.8, label=path.split("/")[-1])
ax.set_xlabel("t")
ax.set_ylabel("E_N")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(f"{here}/trajectories.png", dpi=150)
"##;

pub const COEFFICIENTS: &str = r##"import csv
import glob
import sys

import matplotlib.pyplot as plt

here = sys.argv[1] if len(sys.argv) > 1 else "."
fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
for path in sorted(glob.glob(f"{here}/coefficients*.csv")):
    rows = [r for r in csv.DictReader(l for l in open(path) if not l.startswith("#"))]
    t = [float(r["t"]) for r in rows]
    for ax, key in zip(axes, ["gamma", "delta_omega2", "diffusion"]):
        ax.plot(t, [float(r[key]) for r in rows], lw=0.8, label=path.split("/")[-1])
        ax.set_ylabel(key)
axes[-1].set_xlabel("t")
axes[0].legend(fontsize=7)
fig.tight_layout()
fig.savefig(f"{here}/coefficients.png", dpi=150)
"##;
