"""Shared test utilities: independent oracles kept free of library code paths."""

from __future__ import annotations

import numpy as np

from surrkit.mlp import MlpArchitecture, MlpModel, init_model, loss_gradients, mse_loss


def direct_gpr_oracle(K_noisy, Ks, Kss_diag, Y):
    """Mean/variance/lml via explicit inverse and determinant, no Cholesky.

    K_noisy: (N, N) kernel matrix including noise; Ks: (N, N*) cross matrix;
    Kss_diag: (N*,) prior variances at the queries; Y: (N, q) targets.
    """
    K_inv = np.linalg.inv(K_noisy)
    mean = Ks.T @ K_inv @ Y
    var = Kss_diag - np.einsum("ij,ik,kj->j", Ks, K_inv, Ks)
    sign, logdet = np.linalg.slogdet(K_noisy)
    assert sign > 0
    n, q = Y.shape
    lml = float(
        -0.5 * np.einsum("ij,ik,kj->", Y, K_inv, Y)
        - 0.5 * q * logdet
        - 0.5 * q * n * np.log(2.0 * np.pi)
    )
    return mean, var, lml


def finite_difference_gradients(model: MlpModel, X, Y, eps: float = 1e-5):
    """Central-difference gradient of the MSE loss for every parameter."""
    grads_w = []
    for P in model.weights:
        grads_w.append(_fd_array(model, P, X, Y, eps))
    grads_b = []
    for P in model.biases:
        grads_b.append(_fd_array(model, P, X, Y, eps))
    return grads_w, grads_b


def _fd_array(model, P, X, Y, eps):
    grad = np.zeros_like(P)
    it = np.nditer(P, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = P[idx]
        P[idx] = orig + eps
        up = mse_loss(model, X, Y)
        P[idx] = orig - eps
        down = mse_loss(model, X, Y)
        P[idx] = orig
        grad[idx] = (up - down) / (2.0 * eps)
    return grad


def max_gradient_error(arch: MlpArchitecture, seed: int = 0, n: int = 5, eps: float = 1e-5):
    """Worst relative disagreement between backprop and finite differences."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, arch.input_dim))
    Y = rng.standard_normal((n, arch.output_dim))
    model = init_model(arch, seed + 1)
    # Nudge biases so ReLU pre-activations sit away from the kink, where
    # finite differences are ill-defined.
    for b in model.biases:
        b += 0.1 * rng.standard_normal(b.shape)
    _, gw, gb = loss_gradients(model, X, Y)
    fd_w, fd_b = finite_difference_gradients(model, X, Y, eps)
    worst = 0.0
    for analytic, numeric in zip(gw + gb, fd_w + fd_b):
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst


def pooled_r2(y_true, y_pred) -> float:
    """Plain R^2 oracle, written independently of the metrics module."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    ss_res = np.sum((y_true - y_pred) ** 2)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    return 1.0 - ss_res / ss_tot
