"""The 29 tracking models by tag, with their default parameters."""

from dataclasses import dataclass, field

import numpy as np

from .core import TrackingProblem
from .errors import ConfigError
from .models import clustering, forest, optimization, statistical, svr
from .neural import autoencoders, trackers
from .neural.engine import TrainConfig


@dataclass
class WindowData:
    """Training inputs of one rolling window; test rows never enter here."""

    R: np.ndarray
    I: np.ndarray
    log_prices: np.ndarray
    log_index: np.ndarray
    K: int
    seed: int = 0
    strategy: object = None
    time_limit: float = None


@dataclass(frozen=True)
class ModelSpec:
    tag: str
    family: str
    runner: object
    defaults: dict = field(default_factory=dict)
    searches: bool = False

    def resolve(self, params=None):
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ConfigError(f"model {self.tag}: unknown parameters {unknown}; "
                              f"accepted {sorted(self.defaults)}")
        out = dict(self.defaults)
        out.update(params)
        return out

    def run(self, data, params=None):
        return self.runner(data, **self.resolve(params))


def _opt(solver):
    def run(d, lo=0.0, hi=1.0):
        p = TrackingProblem(d.R, d.I, d.K, lo, hi)
        return solver(p, strategy=d.strategy, seed=d.seed, time_limit=d.time_limit)
    return run


def _tmcvar(d, lo=0.0, hi=1.0, alphas=(0.9, 0.75, 0.5, 0.1, 0.01), delta=0.5):
    p = TrackingProblem(d.R, d.I, d.K, lo, hi)
    params = optimization.TmcvarParams(alphas=tuple(alphas), delta=delta)
    return optimization.solve_tmcvar(p, params, strategy=d.strategy, seed=d.seed, time_limit=d.time_limit)


def _lsr(d):
    return statistical.lsr_two_stage(statistical.fit_lines_ols(d.R, d.I), d.K, d.strategy, d.seed)


def _qr(d, tau=0.5):
    return statistical.qr_two_stage(statistical.fit_lines_quantile(d.R, d.I, tau), d.K, d.strategy, d.seed)


def _nnl(d, lam_max=100.0):
    return statistical.track_nnl(d.R, d.I, d.K, lam_max)


def _nnen(d, lambda2_grid=(0.0, 0.01, 0.1, 1.0), lam_max=100.0):
    return statistical.track_nnen(d.R, d.I, d.K, tuple(lambda2_grid), lam_max)


def _coint_sim(d, iters=10_000, max_lag=1, criterion="AIC"):
    return statistical.coint_simulate(d.log_prices, d.log_index, d.K, iters, d.seed, max_lag, criterion)


def _cvx_coint(d):
    return statistical.coint_convex(d.log_prices, d.log_index, d.K, d.strategy, d.seed)


def _fbm(d, k=5):
    return statistical.factor_track(d.log_prices, d.R, d.I, k, d.K)


def _clust1(d):
    return clustering.clust1_track(d.R, d.I, d.K, d.seed)


def _clust2(d, n_clusters=None):
    return clustering.clust2_track(d.R, d.I, d.K, d.seed, n_clusters)


def _svr(variant):
    def run(d, C1=svr.C1_GRID, eps=svr.EPS_GRID, C2=1.0, u=1.0):
        return svr.palm_svr_grid(d.R, d.I, d.K, variant, tuple(C1), tuple(eps), C2, u, d.seed)
    return run


def _rf(fn):
    def run(d, n_trees=100, alpha_range=(1e-4, 1e-2), folds=5):
        return fn(d.R, d.I, d.K, n_trees, d.seed, tuple(alpha_range), folds)
    return run


def _ae(tag):
    def run(d, epochs=50, batch_size=32, learning_rate=1e-3):
        cfg = TrainConfig(epochs, batch_size, learning_rate, d.seed)
        return autoencoders.ae_track(d.R, d.I, d.K, tag, cfg)
    return run


def _dnn(d, ae_epochs=100, ae_batch_size=32, epochs=100, batch_size=16, learning_rate=0.01):
    ae_cfg = TrainConfig(ae_epochs, ae_batch_size, 1e-3, d.seed)
    net_cfg = TrainConfig(epochs, batch_size, learning_rate, d.seed + 1)
    return trackers.dnn_track(d.R, d.I, d.K, d.seed, ae_cfg, net_cfg)


def _dnnf(d, epochs=100, batch_size=16, learning_rate=0.01, dropout=0.5, layers=6, width=64):
    cfg = TrainConfig(epochs, batch_size, learning_rate, d.seed, dropout)
    return trackers.dnnf_track(d.R, d.I, d.K, d.seed, cfg, layers, width)


_BOX = {"lo": 0.0, "hi": 1.0}
_AE = {"epochs": 50, "batch_size": 32, "learning_rate": 1e-3}
_RF = {"n_trees": 100, "alpha_range": [1e-4, 1e-2], "folds": 5}
_SVR = {"C1": list(svr.C1_GRID), "eps": list(svr.EPS_GRID), "C2": 1.0, "u": 1.0}

CATALOGUE = {
    s.tag: s
    for s in [
        ModelSpec("MSE", "optimization", _opt(optimization.solve_mse), dict(_BOX), True),
        ModelSpec("SES", "optimization", _opt(optimization.solve_ses), dict(_BOX), True),
        ModelSpec("MAD", "optimization", _opt(optimization.solve_mad), dict(_BOX), True),
        ModelSpec("MADD", "optimization", _opt(optimization.solve_madd), dict(_BOX), True),
        ModelSpec("MinMax", "optimization", _opt(optimization.solve_minmax), dict(_BOX), True),
        ModelSpec("DMinMax", "optimization", _opt(optimization.solve_dminmax), dict(_BOX), True),
        ModelSpec("TEV", "optimization", _opt(optimization.solve_tev), dict(_BOX), True),
        ModelSpec("TMCVaR", "optimization", _tmcvar,
                  {**_BOX, "alphas": [0.9, 0.75, 0.5, 0.1, 0.01], "delta": 0.5}, True),
        ModelSpec("LSR", "statistical", _lsr, {}, True),
        ModelSpec("QR", "statistical", _qr, {"tau": 0.5}, True),
        ModelSpec("NNL", "statistical", _nnl, {"lam_max": 100.0}),
        ModelSpec("NNEN", "statistical", _nnen, {"lambda2_grid": [0.0, 0.01, 0.1, 1.0], "lam_max": 100.0}),
        ModelSpec("CointSim", "statistical", _coint_sim, {"iters": 10_000, "max_lag": 1, "criterion": "AIC"}),
        ModelSpec("CvxCoInt", "statistical", _cvx_coint, {}, True),
        ModelSpec("FBM", "statistical", _fbm, {"k": 5}),
        ModelSpec("Clust1", "data-driven", _clust1, {}),
        ModelSpec("Clust2", "data-driven", _clust2, {"n_clusters": None}),
        ModelSpec("eps-SVR", "data-driven", _svr("eps"), dict(_SVR)),
        ModelSpec("nu-SVR", "data-driven", _svr("nu"), dict(_SVR)),
        ModelSpec("RF-Clust", "data-driven", _rf(forest.rf_clust_track), dict(_RF)),
        ModelSpec("RF-Reg", "data-driven", _rf(forest.rf_reg_track), dict(_RF)),
        ModelSpec("SH-AE", "data-driven", _ae("SH-AE"), dict(_AE)),
        ModelSpec("SP-AE", "data-driven", _ae("SP-AE"), dict(_AE)),
        ModelSpec("CON-AE", "data-driven", _ae("CON-AE"), dict(_AE)),
        ModelSpec("STCK-AE", "data-driven", _ae("STCK-AE"), dict(_AE)),
        ModelSpec("DEN-AE", "data-driven", _ae("DEN-AE"), dict(_AE)),
        ModelSpec("VAR-AE", "data-driven", _ae("VAR-AE"), dict(_AE)),
        ModelSpec("DNN", "data-driven", _dnn,
                  {"ae_epochs": 100, "ae_batch_size": 32, "epochs": 100, "batch_size": 16, "learning_rate": 0.01}),
        ModelSpec("DNNF", "data-driven", _dnnf,
                  {"epochs": 100, "batch_size": 16, "learning_rate": 0.01, "dropout": 0.5, "layers": 6,
                   "width": 64}),
    ]
}

MODEL_TAGS = tuple(CATALOGUE)


def get_model(tag):
    try:
        return CATALOGUE[tag]
    except KeyError:
        raise ConfigError(f"unknown model {tag!r}; valid tags: {', '.join(MODEL_TAGS)}") from None
