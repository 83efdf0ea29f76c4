"""Write a ResultStore to CSV files plus a JSON manifest.

Everything except ``timings.csv`` and ``manifest.json`` is a deterministic
function of the data, config and seed, so reruns reproduce those files
byte for byte. Wall-clock times live only in the two excluded files.
"""

import csv
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .evaluation import METRIC_FIELDS

# solve time is wall-clock and would break reproducibility of metrics.csv
REPORT_METRICS = tuple(f for f in METRIC_FIELDS if f != "solve_time")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if not np.isfinite(v) else repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)  # RFC 4180: comma separated, CRLF line ends, minimal quoting
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def _metric_row(report):
    d = report.as_dict()
    return [d[f] for f in REPORT_METRICS]


def emit_reports(store, out_dir):
    """Write metrics, p-values, per-window rows, cumulative wealth, weights, timings and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = store.plan
    paths = {}

    rows = []
    for scope, table in (("window-average", store.aggregate), ("concatenated", store.concatenated)):
        for tag in store.models:
            if tag in table:
                rows.append([tag, scope] + _metric_row(table[tag]))
        if store.benchmark:
            rows.append(["index", scope] + _metric_row(store.benchmark[scope]))
    paths["metrics"] = out / "metrics.csv"
    _write(paths["metrics"], ["model", "scope", *REPORT_METRICS], rows)

    paths["pvalues"] = out / "pvalues.csv"
    if store.ttest is not None:
        names = store.ttest.models
        _write(paths["pvalues"], ["model", *names],
               [[m] + [None if i == j else store.ttest.pvalues[i, j] for j in range(len(names))]
                for i, m in enumerate(names)])
    else:
        _write(paths["pvalues"], ["model"], [])

    window_fields = [f for f in REPORT_METRICS if f != "turnover"]
    rows = []
    for tag in store.models:
        for rec, rep in zip(store.records[tag], store.window_metrics.get(tag, [])):
            a, b, c, e = plan.windows[rec.window]
            vals = [None] * len(window_fields) if rep is None else [rep.as_dict()[f] for f in window_fields]
            rows.append([tag, rec.window, store.dates[a], store.dates[b - 1], store.dates[c], store.dates[e - 1],
                         rec.status, rec.objective, *vals])
    paths["per_window"] = out / "per_window.csv"
    _write(paths["per_window"], ["model", "window", "train_first", "train_last", "test_first", "test_last",
                                 "status", "objective", *window_fields], rows)

    paths["cumulative"] = out / "cumulative_returns.csv"
    _write(paths["cumulative"], ["date", "index", *store.models], cumulative_rows(store))

    rows = []
    for tag in store.models:
        for rec in store.records[tag]:
            if rec.ok:
                for j in np.flatnonzero(rec.weights > 1e-10):
                    rows.append([tag, rec.window, store.asset_ids[j], rec.weights[j]])
    paths["weights"] = out / "weights.csv"
    _write(paths["weights"], ["model", "window", "asset", "weight"], rows)

    paths["timings"] = out / "timings.csv"
    _write(paths["timings"], ["model", "window", "wall_time", "status", "timeout"],
           [[r.model, r.window, r.wall_time, r.status, r.timeout] for tag in store.models
            for r in store.records[tag]])

    paths["manifest"] = out / "manifest.json"
    manifest = build_manifest(store, paths)
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def cumulative_rows(store):
    """Wealth paths over the concatenated test segments.

    A failed window leaves the model's cells empty and carries its wealth
    forward unchanged. An empty store gives no rows.
    """
    if not store.models:
        return []
    plan = store.plan
    wealth_i = 1.0
    wealth = {t: 1.0 for t in store.models}
    by_window = {t: {r.window: r for r in store.records[t]} for t in store.models}
    rows = []
    for k, (_, _, c, e) in enumerate(plan.windows):
        for off, t in enumerate(range(c, e)):
            wealth_i *= 1.0 + store.index_returns[t]
            row = [store.dates[t], wealth_i]
            for tag in store.models:
                rec = by_window[tag].get(k)
                if rec is None or not rec.ok:
                    row.append(None)
                    continue
                wealth[tag] *= 1.0 + rec.test_returns[off]
                row.append(wealth[tag])
            rows.append(row)
    return rows


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(store, paths):
    cfg = store.config
    data_hash = _sha256(cfg.data) if cfg.data and Path(cfg.data).is_file() else None
    return {
        "trackkit_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "data_sha256": data_hash,
        "seed": cfg.seed,
        "n_assets": len(store.asset_ids),
        "windows": [list(w) for w in store.plan.windows],
        "models": store.models,
        "wall_time_total": {t: float(sum(r.wall_time for r in store.records[t])) for t in store.models},
        "timeouts": [[r.model, r.window] for t in store.models for r in store.records[t] if r.timeout],
        "failures": [{"model": r.model, "window": r.window, "error": r.error} for r in store.failures()],
        "ttest_flags": [list(f) for f in (store.ttest.degenerate if store.ttest else [])],
        "files": {k: Path(p).name for k, p in paths.items() if k != "manifest"},
    }
