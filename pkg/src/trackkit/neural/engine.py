"""Small feed-forward network engine: forward/backward passes, loss heads, Adam.

Everything is plain numpy so gradients can be checked against central
differences. Randomness used inside a loss (dropout masks, corruption noise,
VAE draws) is always passed in explicitly, which keeps the losses
deterministic functions of the parameters.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, DivergenceError


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    dropout_rate: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ContractViolation("epochs must be at least 1")
        if int(self.batch_size) < 1:
            raise ContractViolation("batch_size must be at least 1")
        if not self.learning_rate > 0:
            raise ContractViolation("learning_rate must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ContractViolation("dropout_rate must lie in [0, 1)")
        self.epochs = int(self.epochs)
        self.batch_size = int(self.batch_size)


class Mlp:
    """ReLU hidden layers with a linear or softmax output layer.

    ``weights[l]`` has shape ``(dims[l], dims[l+1])`` so a batch ``X`` of
    row vectors maps through ``X @ W + b``.
    """

    def __init__(self, dims, output="linear", rng=None, dropout=0.0, dropout_layers=None):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ContractViolation(f"bad layer widths {dims}")
        if output not in ("linear", "softmax"):
            raise ContractViolation(f"unknown output {output!r}")
        self.dims = dims
        self.output = output
        self.dropout = float(dropout)
        # hidden layers that carry dropout; None means all of them
        self.dropout_layers = None if dropout_layers is None else tuple(int(l) for l in dropout_layers)
        rng = np.random.default_rng(rng)
        # He initialisation, zero biases
        self.weights = [rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
        self.biases = [np.zeros(b) for b in dims[1:]]

    @property
    def n_layers(self):
        return len(self.weights)

    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def copy(self):
        net = Mlp.__new__(Mlp)
        net.dims, net.output, net.dropout = list(self.dims), self.output, self.dropout
        net.dropout_layers = self.dropout_layers
        net.weights = [W.copy() for W in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def dropout_masks(self, rows, rng):
        """Inverted-dropout masks for each hidden layer (None when dropout is off)."""
        if self.dropout <= 0:
            return None
        keep = 1.0 - self.dropout
        hidden = self.dims[1:-1]
        active = range(len(hidden)) if self.dropout_layers is None else self.dropout_layers
        masks = [np.ones((rows, d)) for d in hidden]
        for l in active:
            masks[l] = (rng.random((rows, hidden[l])) < keep) / keep
        return masks

    def __call__(self, X):
        return mlp_forward(self, X)[0]


def softmax(u):
    u = np.asarray(u, dtype=float)
    z = np.exp(u - u.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def mlp_forward(net, X, masks=None):
    """Return ``(output, cache)``; ``cache['h']`` holds each layer's input."""
    h = np.atleast_2d(np.asarray(X, dtype=float))
    hs, zs = [h], []
    L = net.n_layers
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W + b
        zs.append(z)
        if l < L - 1:
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[l]
            hs.append(h)
    out = softmax(z) if net.output == "softmax" else z
    return out, {"h": hs, "z": zs, "out": out, "masks": masks}


def mlp_backward(net, cache, d_out, extra=None):
    """Backpropagate ``d_out`` (gradient w.r.t. the network output).

    ``extra`` maps a hidden-layer index to an additional gradient with
    respect to that layer's (post-dropout) activation. Returns
    ``(grads, dX)`` where ``grads`` follows :meth:`Mlp.params` order.
    """
    hs, zs, masks = cache["h"], cache["z"], cache["masks"]
    L = net.n_layers
    if net.output == "softmax":
        s = cache["out"]
        dz = s * (d_out - np.sum(d_out * s, axis=-1, keepdims=True))
    else:
        dz = np.asarray(d_out, dtype=float)
    grads = [None] * (2 * L)
    for l in range(L - 1, -1, -1):
        grads[2 * l] = hs[l].T @ dz
        grads[2 * l + 1] = dz.sum(axis=0)
        dh = dz @ net.weights[l].T
        if l == 0:
            return grads, dh
        if extra and (l - 1) in extra:
            dh = dh + extra[l - 1]
        if masks is not None:
            dh = dh * masks[l - 1]
        dz = dh * (zs[l - 1] > 0)
    return grads, None


# -- loss heads -------------------------------------------------------------------
# Each returns (loss, grads) with grads aligned to the parameter list it documents.

def regression_mse_loss(net, X, y, masks=None):
    """``mean_t (f(x_t) - y_t)^2`` for a single-output net."""
    out, cache = mlp_forward(net, X, masks)
    y = np.asarray(y, dtype=float).reshape(out.shape)
    r = out - y
    B = out.shape[0]
    loss = float(np.sum(r * r) / B)
    grads, _ = mlp_backward(net, cache, 2.0 * r / B)
    return loss, grads


def ae_loss(net, X_in, X_target, head="mse", coef=0.0, code_layer=0, n_encoder=1):
    """Autoencoder reconstruction loss, averaged over the batch.

    ``head``: ``"mse"`` plain ``||x - xhat||^2``; ``"mse_l1"`` adds
    ``coef * sum |h_code|``; ``"mse_frob"`` adds ``coef * sum ||W_l||_F^2``
    over the first ``n_encoder`` weight matrices.
    """
    out, cache = mlp_forward(net, X_in)
    r = out - X_target
    B = out.shape[0]
    loss = float(np.sum(r * r) / B)
    extra = None
    if head == "mse_l1":
        code = cache["h"][code_layer + 1]
        loss += coef * float(np.sum(np.abs(code)) / B)
        extra = {code_layer: coef * np.sign(code) / B}
    elif head == "mse_frob":
        loss += coef * sum(float(np.sum(W * W)) for W in net.weights[:n_encoder])
    elif head != "mse":
        raise ContractViolation(f"unknown autoencoder head {head!r}")
    grads, _ = mlp_backward(net, cache, 2.0 * r / B, extra)
    if head == "mse_frob":
        for l in range(n_encoder):
            grads[2 * l] = grads[2 * l] + 2.0 * coef * net.weights[l]
    return loss, grads


def kl_standard_normal(mu, logvar):
    """Per-row ``KL(N(mu, diag exp(logvar)) || N(0, I))``."""
    return 0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0, axis=-1)


def vae_loss(enc, dec, X, noise, kl=1e-4):
    """Batch-mean of ``||x - g(z)||^2 + kl * KL`` with ``z = mu + exp(logvar/2) * noise``.

    ``enc`` outputs ``[mu, logvar]`` stacked along columns. Gradients are
    returned as ``enc.params() + dec.params()``.
    """
    h, ec = mlp_forward(enc, X)
    d = h.shape[1] // 2
    mu, logvar = h[:, :d], h[:, d:]
    sd = np.exp(0.5 * logvar)
    z = mu + sd * noise
    out, dc = mlp_forward(dec, z)
    r = out - X
    B = X.shape[0]
    klv = kl_standard_normal(mu, logvar)
    loss = float((np.sum(r * r) + kl * np.sum(klv)) / B)
    gdec, dz = mlp_backward(dec, dc, 2.0 * r / B)
    dmu = dz + kl * mu / B
    dlogvar = dz * noise * 0.5 * sd + kl * 0.5 * (np.exp(logvar) - 1.0) / B
    genc, _ = mlp_backward(enc, ec, np.hstack([dmu, dlogvar]))
    return loss, genc + gdec


def softmax_tracking_loss(net, xi, R, I, masks=None):
    """``(1/T) sum_t (I_t - w . r_t)^2`` with ``w = softmax(net(xi))``."""
    w, cache = mlp_forward(net, np.reshape(xi, (1, -1)), masks)
    w = w[0]
    e = I - R @ w
    T = R.shape[0]
    loss = float(e @ e / T)
    dw = -2.0 * (R.T @ e) / T
    grads, _ = mlp_backward(net, cache, dw[None, :])
    return loss, grads


# -- optimiser ------------------------------------------------------------------

class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def check_finite(loss, epoch, what="training loss"):
    if not np.isfinite(loss):
        raise DivergenceError(f"{what} became {loss} in epoch {epoch}", epoch=epoch)


def rng_streams(seed, k):
    """``k`` independent generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def minibatches(T, batch_size, rng):
    order = rng.permutation(T)
    return [order[i:i + batch_size] for i in range(0, T, batch_size)]


# -- gradient checking ----------------------------------------------------------

def gradient_check(loss_fn, params, n_checks=10, seed=0, h=1e-6):
    """Largest relative error between analytic and central-difference gradients.

    ``loss_fn()`` must return ``(loss, grads)`` computed from the live
    ``params`` arrays, which are perturbed in place and restored.
    """
    rng = np.random.default_rng(seed)
    _, grads = loss_fn()
    sizes = np.array([p.size for p in params])
    worst = 0.0
    for _ in range(n_checks):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        idx = int(rng.integers(params[k].size))
        flat = params[k].reshape(-1)
        old = flat[idx]
        flat[idx] = old + h
        fp = loss_fn()[0]
        flat[idx] = old - h
        fm = loss_fn()[0]
        flat[idx] = old
        num = (fp - fm) / (2 * h)
        ana = float(grads[k].reshape(-1)[idx])
        denom = max(abs(num), abs(ana), 1e-7)
        worst = max(worst, abs(num - ana) / denom)
    return worst
