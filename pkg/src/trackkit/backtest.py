"""Rolling-window backtest: train every model per window, hold its weights over the test rows."""

import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .catalogue import MODEL_TAGS, WindowData, get_model
from .core import check_portfolio
from .data import compute_returns, filter_complete_assets, load_prices, make_windows
from .errors import TrackkitError
from .evaluation import average_reports, metric_report, paired_t_matrix, turnover
from .numerics import parse_strategy

log = logging.getLogger(__name__)


@dataclass
class SolveRecord:
    model: str
    window: int
    weights: np.ndarray = None
    objective: float = float("nan")
    status: str = "failed"
    wall_time: float = 0.0
    timeout: bool = False
    error: str = None
    test_returns: np.ndarray = None

    @property
    def ok(self):
        return self.weights is not None


@dataclass
class ResultStore:
    config: object
    asset_ids: tuple
    dates: tuple
    plan: object
    index_returns: np.ndarray
    records: dict = field(default_factory=dict)
    window_metrics: dict = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)
    concatenated: dict = field(default_factory=dict)
    benchmark: dict = field(default_factory=dict)
    ttest: object = None

    @property
    def models(self):
        return list(self.records)

    def failures(self):
        return [r for recs in self.records.values() for r in recs if not r.ok]


def task_seed(root, model_index, window_index):
    """Per-(model, window) seed derived from the root seed."""
    ss = np.random.SeedSequence([int(root), int(model_index), int(window_index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _solve(tag, params, data, K):
    spec = get_model(tag)
    t0 = time.perf_counter()
    try:
        port = spec.run(data, params)
        check_portfolio(port, K)
        out = (np.asarray(port.weights, float), float(port.objective), str(port.status), None)
    except Exception as exc:  # one model's failure must not stop the sweep
        if isinstance(exc, TrackkitError):
            msg = f"{type(exc).__name__}: {exc}"
        else:
            msg = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
        out = (None, float("nan"), "failed", msg)
    return out + (time.perf_counter() - t0,)


def load_panel(cfg):
    panel = filter_complete_assets(load_prices(cfg.data, cfg.index_col))
    return panel, compute_returns(panel)


def run_backtest(cfg, panel=None):
    """Run every configured model over the rolling plan and evaluate out of sample."""
    if panel is None:
        panel, rets = load_panel(cfg)
    else:
        rets = compute_returns(panel)
    R, I = rets.returns, rets.index_returns
    plan = make_windows(R.shape[0], cfg.in_len, cfg.out_len, cfg.step)
    n = R.shape[1]
    K = min(cfg.K, n)
    strategy = parse_strategy(cfg.strategy)
    logp = np.log(panel.prices)
    logi = np.log(panel.index_prices)

    tasks = []
    for entry in cfg.models:
        m_idx = MODEL_TAGS.index(entry.tag)
        for k, (a, b, c, e) in enumerate(plan.windows):
            spec = get_model(entry.tag)
            data = WindowData(R[a:b], I[a:b], logp[a:b + 1], logi[a:b + 1], K,
                              seed=task_seed(cfg.seed, m_idx, k),
                              strategy=strategy if spec.searches else None,
                              time_limit=cfg.time_limit)
            tasks.append((entry.tag, entry.params, data, K, k))

    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_solve, t[0], t[1], t[2], t[3]) for t in tasks]
            results = [f.result() for f in futures]
    else:
        results = []
        for t in tasks:
            log.info("solving %s window %d", t[0], t[4])
            results.append(_solve(t[0], t[1], t[2], t[3]))

    store = ResultStore(cfg, tuple(rets.asset_ids), tuple(rets.dates), plan, I)
    for entry in cfg.models:
        store.records[entry.tag] = []
    for (tag, _, _, _, k), (w, obj, status, err, wall) in zip(tasks, results):
        a, b, c, e = plan.windows[k]
        rec = SolveRecord(tag, k, w, obj, status, wall, error=err)
        if cfg.time_limit is not None and wall > cfg.time_limit:
            rec.timeout = True
            if rec.ok:
                rec.status = "timeout"
        if rec.ok:
            rec.test_returns = R[c:e] @ w
        else:
            log.warning("%s failed on window %d: %s", tag, k, err.splitlines()[0] if err else "")
        store.records[tag].append(rec)

    _evaluate(store, R, I, cfg.rf)
    return store


def _evaluate(store, R, I, rf):
    plan = store.plan
    for tag, recs in store.records.items():
        rows = []
        for rec in recs:
            if not rec.ok:
                rows.append(None)
                continue
            c, e = plan.windows[rec.window][2:]
            rows.append(metric_report(rec.test_returns, I[c:e], rf, n_assets=int(np.sum(rec.weights > 1e-10)),
                                      solve_time=rec.wall_time))
        store.window_metrics[tag] = rows
        good = [r for r in rows if r is not None]
        ok = [rec for rec in recs if rec.ok]
        tr = turnover(np.array([rec.weights for rec in ok])) if ok else None
        if good:
            agg = average_reports(good, tr)
            # solve time is the total over windows
            agg.solve_time = float(sum(rec.wall_time for rec in recs))
            store.aggregate[tag] = agg
            rp = np.concatenate([rec.test_returns for rec in ok])
            rb = np.concatenate([I[plan.windows[rec.window][2]:plan.windows[rec.window][3]] for rec in ok])
            conc = metric_report(rp, rb, rf, n_assets=float(np.mean([np.sum(r.weights > 1e-10) for r in ok])),
                                 solve_time=agg.solve_time)
            conc.turnover = tr
            store.concatenated[tag] = conc
    # the benchmark as its own row
    segs = [I[c:e] for (_, _, c, e) in plan.windows]
    bench = [metric_report(s, s, rf, n_assets=R.shape[1]) for s in segs]
    store.benchmark = {"window-average": average_reports(bench, 0.0 if len(segs) > 1 else None),
                       "concatenated": metric_report(np.concatenate(segs), np.concatenate(segs), rf,
                                                     n_assets=R.shape[1])}
    # paired t-tests use windows where every model succeeded
    tags = [t for t in store.records if t in store.aggregate]
    if tags:
        common = [k for k in range(len(plan.windows))
                  if all(store.window_metrics[t][k] is not None for t in tags)]
        te = {t: [store.window_metrics[t][k].te for k in common] for t in tags}
        store.ttest = paired_t_matrix(te, tags)
