"""Distribution-weighted combination of the base regressors.

For a mixture weight ``z`` and smoothing ``eta > 0`` the combined predictor is

    h_z(x) = sum_k (z_k D_k(x) + eta U(x)/p) / (D_z(x) + eta U(x)) * h_k(x)
           = J_z(x) / K_z(x)

with ``D_z = sum_k z_k D_k`` and ``U(x) = 1/n`` the uniform marginal.
"""

import numpy as np

from .simplex import check_simplex

DEFAULT_ETA = 1e-3


def _check_eta(eta):
    if not eta > 0 or not np.isfinite(eta):
        raise ValueError(f"eta must be positive and finite, got {eta!r}")


def jk(inst, z, eta):
    """Per-point ``(J_z, K_z)``, both affine in ``z``."""
    D, h = inst.densities, inst.predictions
    u = inst.uniform_mass
    J = (D * h) @ z + eta * u * h.mean(axis=1)
    K = D @ z + eta * u
    return J, K


def all_weights(inst, z, eta=DEFAULT_ETA):
    """``(n, p)`` matrix of per-point combination weights."""
    z = check_simplex(z, name="z")
    _check_eta(eta)
    num = inst.densities * z + eta * inst.uniform_mass / inst.p
    return num / num.sum(axis=1, keepdims=True)


def combine_weights(inst, z, eta, point_index):
    """Combination weights at one support point; a probability vector."""
    z = check_simplex(z, name="z")
    _check_eta(eta)
    num = inst.densities[point_index] * z + eta * inst.uniform_mass / inst.p
    return num / (inst.densities[point_index] @ z + eta * inst.uniform_mass)


def predict_all(inst, z, eta=DEFAULT_ETA):
    """Combined prediction ``h_z(x)`` at every support point."""
    z = check_simplex(z, name="z")
    _check_eta(eta)
    J, K = jk(inst, z, eta)
    # clip guards the convex-hull property against last-ulp rounding
    return np.clip(J / K, inst.predictions.min(axis=1), inst.predictions.max(axis=1))


def predict(inst, z, eta, point_index):
    w = combine_weights(inst, z, eta, point_index)
    return float(w @ inst.predictions[point_index])


def squared_loss_at(inst, pred):
    """``E[(pred(x) - y)^2 | x]`` from the label moments, per point."""
    return pred ** 2 - 2.0 * pred * inst.y_mean + inst.y_sq_mean


def predictor_domain_losses(inst, pred):
    """Expected squared loss of an arbitrary pointwise predictor under every domain."""
    return inst.densities.T @ squared_loss_at(inst, np.asarray(pred, dtype=float))


def domain_losses(inst, z, eta=DEFAULT_ETA):
    """Vector of ``L(D_k, h_z)`` for k = 1..p."""
    return predictor_domain_losses(inst, predict_all(inst, z, eta))


def domain_loss(inst, k, z, eta=DEFAULT_ETA):
    return float(domain_losses(inst, z, eta)[k])


def mixture_loss(inst, z, eta, lam):
    """Loss of ``h_z`` under the mixture target ``sum_k lam_k D_k``."""
    lam = check_simplex(lam, name="lambda")
    return float(lam @ domain_losses(inst, z, eta))


def slack_to_params(delta, M):
    """Smoothing parameters ``(eta, eta_prime)`` achieving total slack ``delta``.

    Uses ``eta = delta / (2 M)`` and ``eta' = delta / 2``.
    """
    if not delta > 0 or not M > 0:
        raise ValueError("delta and M must be positive")
    return delta / (2.0 * M), delta / 2.0
