"""Two-stage neural trackers: autoencoder + sensitivity DNN, and fixed-noise DNNF."""

import numpy as np

from ..core import Portfolio, finalize_weights, uniform_on
from ..models.optimization import mse_objective
from .autoencoders import AE_VARIANTS, rank_by_reconstruction, standardize, train_autoencoder
from .engine import (
    Adam,
    Mlp,
    TrainConfig,
    check_finite,
    minibatches,
    mlp_backward,
    mlp_forward,
    regression_mse_loss,
    rng_streams,
    softmax_tracking_loss,
)


def input_sensitivity(net, X):
    """``mean_t |d f(x_t) / d x_t|`` for a single-output net."""
    out, cache = mlp_forward(net, X)
    _, dX = mlp_backward(net, cache, np.ones_like(out))
    return np.mean(np.abs(dX), axis=0)


def fit_regressor(X, y, hidden=(64, 32), cfg=None):
    cfg = cfg or TrainConfig(epochs=100, batch_size=16, learning_rate=0.01)
    init_rng, order_rng = rng_streams(cfg.seed, 2)
    net = Mlp([X.shape[1], *hidden, 1], rng=init_rng)
    opt = Adam(net.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for rows in minibatches(X.shape[0], cfg.batch_size, order_rng):
            loss, grads = regression_mse_loss(net, X[rows], y[rows])
            check_finite(loss, epoch)
            opt.step(grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return net, history


def dnn_track(R, I, K, seed=0, ae_cfg=None, net_cfg=None, hidden=(64, 32)):
    """Stacked-autoencoder selection of the K best-reconstructed assets, then
    sensitivity weights from a network predicting the index.

    Inputs and target are standardised for training; sensitivities are
    mapped back to raw-return units by the chain rule, and the common target
    scale cancels in the normalisation.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    T, n = R.shape
    K = min(int(K), n)
    ae_cfg = ae_cfg or TrainConfig(epochs=100, batch_size=32, seed=seed)
    net_cfg = net_cfg or TrainConfig(epochs=100, batch_size=16, learning_rate=0.01, seed=seed + 1)
    Z, _, _ = standardize(R)
    _, report = train_autoencoder(Z, AE_VARIANTS["STCK-AE"], ae_cfg)
    support = np.sort(rank_by_reconstruction(report)[:K])
    info = {"support": support.tolist()}
    sd_I = I.std()
    if sd_I <= 1e-15:
        w = uniform_on(support, n)
        return Portfolio(w, mse_objective(R, I, w), "DNN", status="uniform-fallback", info=info)
    Xs, _, sd_x = standardize(R[:, support])
    ys = (I - I.mean()) / sd_I
    net, history = fit_regressor(Xs, ys, hidden, net_cfg)
    s = input_sensitivity(net, Xs) / sd_x
    info["train_loss"] = history[-1]
    if not np.all(np.isfinite(s)) or s.sum() <= 1e-12:
        w = uniform_on(support, n)
        status = "uniform-fallback"
    else:
        w = np.zeros(n)
        w[support] = s / s.sum()
        w = finalize_weights(w)
        status = "ok"
    return Portfolio(w, mse_objective(R, I, w), "DNN", status=status, info=info)


def train_fixed_noise(R, I, cfg, layers=6, width=64):
    """Fit a softmax-headed net on a fixed noise input; returns its weight vector."""
    T, n = R.shape
    init_rng, order_rng, noise_rng, drop_rng = rng_streams(cfg.seed, 4)
    # dropout sits after the last hidden layer only; masking all six layers
    # makes the softmax saturate onto a single asset
    net = Mlp([n] + [width] * layers + [n], output="softmax", rng=init_rng, dropout=cfg.dropout_rate,
              dropout_layers=(layers - 1,))
    xi = noise_rng.standard_normal(n)
    opt = Adam(net.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for rows in minibatches(T, cfg.batch_size, order_rng):
            masks = net.dropout_masks(1, drop_rng)
            loss, grads = softmax_tracking_loss(net, xi, R[rows], I[rows], masks)
            check_finite(loss, epoch)
            opt.step(grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    # inverted dropout: no rescaling at evaluation
    w = net(xi[None, :])[0]
    return w, history


def dnnf_track(R, I, K, seed=0, cfg=None, layers=6, width=64):
    """Fixed-noise network: top-K of the stage-one weights, stage two refits on those K."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    I = np.asarray(I, dtype=float).ravel()
    T, n = R.shape
    K = min(int(K), n)
    cfg = cfg or TrainConfig(epochs=100, batch_size=16, learning_rate=0.01, dropout_rate=0.5, seed=seed)
    w1, h1 = train_fixed_noise(R, I, cfg, layers, width)
    order = np.lexsort((np.arange(n), -w1))
    support = np.sort(order[:K])
    cfg2 = TrainConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.seed + 1, cfg.dropout_rate,
                       cfg.beta1, cfg.beta2, cfg.adam_eps)
    w2, h2 = train_fixed_noise(R[:, support], I, cfg2, layers, width)
    w = np.zeros(n)
    w[support] = w2
    w = finalize_weights(w, K)
    return Portfolio(w, mse_objective(R, I, w), "DNNF",
                     info={"support": support.tolist(), "stage1_loss": h1[-1], "stage2_loss": h2[-1]})
