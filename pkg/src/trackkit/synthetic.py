"""Synthetic panels with a known tracking portfolio, for demos and tests."""

import numpy as np

from .data import PricePanel


def factor_returns(T, n, rng, market_sd=0.008, idio_sd=0.005, drift=3e-4):
    """One-factor simple returns: ``r_it = b_i m_t + e_it``."""
    m = rng.normal(drift, market_sd, T)
    beta = rng.uniform(0.7, 1.3, n)
    return np.outer(m, beta) + rng.normal(0.0, idio_sd, (T, n))


def sparse_index_panel(n=50, n_days=756, k_true=10, noise_sd=1e-4, seed=0, w_min=0.05,
                       kind="geometric", idio_sd=0.005):
    """Prices whose index is a fixed ``k_true``-asset mix plus Gaussian noise.

    ``kind="arithmetic"`` mixes simple returns, ``I_t = r_t w + e_t``.
    ``kind="geometric"`` mixes log-prices, ``log J_t = log p_t w + e_t``, so the
    log-level relation used by cointegration holds exactly and the return
    relation holds up to the cross-sectional variance term (about 1e-5 a day).
    Returns ``(panel, true_weights)``; ``n_days`` counts price rows.
    """
    rng = np.random.default_rng(seed)
    r = factor_returns(n_days - 1, n, rng, idio_sd=idio_sd)
    support = np.sort(rng.choice(n, k_true, replace=False))
    raw = rng.dirichlet(np.ones(k_true))
    mix = w_min + (1.0 - k_true * w_min) * raw
    w = np.zeros(n)
    w[support] = mix
    prices = 100.0 * np.vstack([np.ones(n), np.cumprod(1.0 + r, axis=0)])
    if kind == "arithmetic":
        I = r @ w + rng.normal(0.0, noise_sd, n_days - 1)
        index = 1000.0 * np.concatenate([[1.0], np.cumprod(1.0 + I)])
    elif kind == "geometric":
        index = 10.0 * np.exp(np.log(prices) @ w + rng.normal(0.0, noise_sd, n_days))
    else:
        raise ValueError(f"unknown index kind {kind!r}")
    dates = tuple(f"d{t:05d}" for t in range(n_days))
    assets = tuple(f"A{i:03d}" for i in range(n))
    return PricePanel(dates, assets, prices, index, "INDEX"), w


def write_csv(panel, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(("date",) + tuple(panel.asset_ids) + (panel.index_id,)) + "\n")
        for t, d in enumerate(panel.dates):
            cells = [repr(float(x)) for x in panel.prices[t]] + [repr(float(panel.index_prices[t]))]
            fh.write(d + "," + ",".join(cells) + "\n")
