"""Autoencoder asset ranking: six variants sharing one training and selection pipeline."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation
from ..models.clustering import mse_on_support
from .engine import (
    Adam,
    Mlp,
    TrainConfig,
    ae_loss,
    check_finite,
    mlp_forward,
    minibatches,
    rng_streams,
    vae_loss,
)


@dataclass(frozen=True)
class AeVariant:
    kind: str
    hidden: int = 16
    encoder: tuple = (16,)
    l1: float = 0.0
    contractive: float = 0.0
    noise_sigma: float = 0.0
    latent: int = 16
    kl: float = 0.0
    vae_hidden: int = 64

    def __post_init__(self):
        if self.kind not in ("SH", "SP", "CON", "STCK", "DEN", "VAR"):
            raise ContractViolation(f"unknown autoencoder kind {self.kind!r}")
        if min(self.l1, self.contractive, self.noise_sigma, self.kl) < 0:
            raise ContractViolation("penalty coefficients must be nonnegative")

    def encoder_dims(self):
        if self.kind == "STCK":
            return tuple(self.encoder)
        return (self.hidden,)


AE_VARIANTS = {
    "SH-AE": AeVariant("SH"),
    "SP-AE": AeVariant("SP", l1=1e-4),
    "CON-AE": AeVariant("CON", contractive=1e-4),
    "STCK-AE": AeVariant("STCK", encoder=(64, 32, 16)),
    "DEN-AE": AeVariant("DEN", noise_sigma=0.1),
    "VAR-AE": AeVariant("VAR", latent=16, kl=1e-4),
}


@dataclass
class ReconstructionReport:
    per_asset_loss: np.ndarray
    total_loss: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)


@dataclass
class AutoencoderModel:
    variant: AeVariant
    nets: list

    def reconstruct(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant.kind == "VAR":
            enc, dec = self.nets
            h = enc(X)
            # posterior mean as the code at evaluation time
            return dec(h[:, : h.shape[1] // 2])
        return self.nets[0](X)

    def code(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.variant.kind == "VAR":
            h = self.nets[0](X)
            return h[:, : h.shape[1] // 2]
        net = self.nets[0]
        k = len(self.variant.encoder_dims())
        _, cache = mlp_forward(net, X)
        return cache["h"][k]


def standardize(R):
    """Column z-scores over the window; flat columns keep unit scale."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    mean = R.mean(axis=0)
    sd = R.std(axis=0, ddof=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (R - mean) / sd, mean, sd


def build_autoencoder(n, variant, rng):
    if variant.kind == "VAR":
        enc = Mlp([n, variant.vae_hidden, 2 * variant.latent], rng=rng)
        dec = Mlp([variant.latent, variant.vae_hidden, n], rng=rng)
        return [enc, dec]
    enc = list(variant.encoder_dims())
    dims = [n] + enc + enc[-2::-1] + [n]
    return [Mlp(dims, rng=rng)]


def ae_batch_loss(variant, nets, X_in, X_target, vae_noise=None):
    """Loss and gradients for one batch under ``variant``'s head."""
    if variant.kind == "VAR":
        return vae_loss(nets[0], nets[1], X_in, vae_noise, variant.kl)
    k = len(variant.encoder_dims())
    if variant.kind == "SP":
        return ae_loss(nets[0], X_in, X_target, "mse_l1", variant.l1, code_layer=k - 1)
    if variant.kind == "CON":
        return ae_loss(nets[0], X_in, X_target, "mse_frob", variant.contractive, n_encoder=k)
    return ae_loss(nets[0], X_in, X_target, "mse")


def train_autoencoder(Z, variant, cfg=None):
    """Mini-batch Adam on standardised returns ``Z`` (T x n).

    DEN corrupts every batch with ``N(0, sigma^2)`` noise; VAR samples the
    reparameterisation noise per batch. Independent random streams drive
    initialisation, batch order and noise, so ``DEN`` with ``sigma = 0``
    reproduces ``SH`` exactly under the same seed.
    """
    cfg = cfg or TrainConfig()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    T, n = Z.shape
    init_rng, order_rng, noise_rng = rng_streams(cfg.seed, 3)
    nets = build_autoencoder(n, variant, init_rng)
    params = [p for net in nets for p in net.params()]
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    model = AutoencoderModel(variant, nets)
    report = ReconstructionReport(np.zeros(n))
    report.total_loss.append(float(np.sum((model.reconstruct(Z) - Z) ** 2)))
    for epoch in range(1, cfg.epochs + 1):
        batch_losses = []
        for rows in minibatches(T, cfg.batch_size, order_rng):
            X = Z[rows]
            X_in = X
            vae_noise = None
            if variant.kind == "DEN":
                X_in = X + variant.noise_sigma * noise_rng.standard_normal(X.shape)
            elif variant.kind == "VAR":
                vae_noise = noise_rng.standard_normal((X.shape[0], variant.latent))
            loss, grads = ae_batch_loss(variant, nets, X_in, X, vae_noise)
            check_finite(loss, epoch)
            opt.step(grads)
            batch_losses.append(loss)
        report.train_loss.append(float(np.mean(batch_losses)))
        total = float(np.sum((model.reconstruct(Z) - Z) ** 2))
        check_finite(total, epoch, "reconstruction loss")
        report.total_loss.append(total)
    report.per_asset_loss = np.sum((model.reconstruct(Z) - Z) ** 2, axis=0)
    return model, report


def rank_by_reconstruction(report):
    """Assets ordered by ascending reconstruction loss (ties to the lower index)."""
    L = report.per_asset_loss if isinstance(report, ReconstructionReport) else np.asarray(report, float)
    return np.argsort(L, kind="stable")


def select_mixed(order, K, share=0.7):
    """``floor(share*K)`` assets from the head of ``order`` plus the rest from its tail."""
    order = np.asarray(order, dtype=int)
    n = order.size
    K = int(K)
    if not 1 <= K <= n:
        raise ContractViolation(f"K must lie in [1, {n}], got {K}")
    head = int(np.floor(share * K + 1e-12))
    tail = K - head
    picked = list(order[:head]) + list(order[::-1][:tail])
    return np.array(picked, dtype=int)


def ae_track(R, I, K, tag="SH-AE", cfg=None, variant=None):
    """Rank by reconstruction, take the 70/30 mixed set, weight by MSE."""
    variant = variant or AE_VARIANTS[tag]
    Z, _, _ = standardize(R)
    model, report = train_autoencoder(Z, variant, cfg)
    support = np.sort(select_mixed(rank_by_reconstruction(report), min(K, Z.shape[1])))
    port = mse_on_support(R, I, support, tag)
    port.info.update({"reconstruction_loss": report.total_loss[-1], "epochs": len(report.train_loss)})
    return port
