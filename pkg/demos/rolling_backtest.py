"""End-to-end rolling backtest through the command line entry point.

Writes a synthetic price file and a JSON config to a scratch directory, runs
``trackkit run`` on a handful of models and prints the headline table and the
paired t-test p-values (row model beats column model when p is small).

    python3 demos/rolling_backtest.py [outdir]
"""

import csv
import json
import sys
import tempfile
from pathlib import Path

from trackkit.cli import main
from trackkit.synthetic import sparse_index_panel, write_csv

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="trackkit-demo-"))
root.mkdir(parents=True, exist_ok=True)

panel, _ = sparse_index_panel(n=40, n_days=820, k_true=15, noise_sd=5e-4, seed=3)
write_csv(panel, root / "prices.csv")
config = {
    "data": "prices.csv",
    "out": "results",
    "K": 8,
    "seed": 1,
    "models": ["MSE", "TEV", "MAD", "NNL", "Clust2", {"tag": "QR", "params": {"tau": 0.5}}],
}
(root / "config.json").write_text(json.dumps(config, indent=2))

code = main(["run", "--config", str(root / "config.json")])
if code:
    sys.exit(code)

out = root / "results"
with open(out / "metrics.csv", newline="") as fh:
    rows = [r for r in csv.DictReader(fh) if r["scope"] == "window-average"]
print(f"\n{'model':<8} {'TE':>10} {'corr':>7} {'turnover':>9} {'assets':>7}")
for r in rows:
    tr = float(r["turnover"]) if r["turnover"] else float("nan")
    print(f"{r['model']:<8} {float(r['te']):10.3e} {float(r['correlation']):7.4f} {tr:9.3f} "
          f"{float(r['n_assets']):7.1f}")

print("\np-values, H_A: TE(row) < TE(column)")
with open(out / "pvalues.csv", newline="") as fh:
    table = list(csv.reader(fh))
print(" " * 8 + "".join(f"{m:>8}" for m in table[0][1:]))
for row in table[1:]:
    print(f"{row[0]:<8}" + "".join(f"{'-' if v == '' else format(float(v), '.3f'):>8}" for v in row[1:]))
print(f"\nall outputs in {out}")
