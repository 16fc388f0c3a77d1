# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Command line and reproducibility
#
# The `smw` command runs the property suites, single sweeps and the four
# figure presets. Every sweep writes a CSV next to a `.cfg` file with the
# fully resolved configuration; feeding that file back regenerates the CSV
# byte for byte. Here the entry point is called in-process.

# %%
import tempfile
from pathlib import Path

from smw.cli import main
from smw.experiments import read_csv

out = Path(tempfile.mkdtemp())

# %%
main(["verify", "lemma1"])

# %%
main(["sweep", "--family", "backward-eps", "--n", "50", "--k", "3", "--trials", "4",
      "--eps-grid", "1e-8:1e-1:8", "--out", str(out / "first")])
csv = out / "first" / "backward-eps_small_50x3.csv"
print(csv.with_suffix(".cfg").read_text())

# %% [markdown]
# The CSV holds one row per grid point. Derived thresholds and the measured
# instance quantities follow as `#` comment lines.

# %%
print(csv.read_text())
rows, thresholds, meta = read_csv(csv)

# %%
main(["sweep", "--config", str(csv.with_suffix(".cfg")), "--out", str(out / "second")])
print("identical:", csv.read_bytes() == (out / "second" / csv.name).read_bytes())

# %% [markdown]
# Exit status distinguishes usage errors (2) from numerical (3) and I/O (4)
# failures.

# %%
print(main(["figure", "5"]))
