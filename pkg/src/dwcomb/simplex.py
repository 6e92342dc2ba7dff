"""Helpers for points of the probability simplex."""

import itertools

import numpy as np

SIMPLEX_TOL = 1e-9


def check_simplex(w, tol=SIMPLEX_TOL, name="weights"):
    """Return ``w`` as a float array after checking it lies on the simplex."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(w)) or np.any(w < -tol):
        raise ValueError(f"{name} must be finite and nonnegative")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {w.sum():.12g})")
    return w


def uniform(p):
    return np.full(p, 1.0 / p)


def vertex(p, k):
    e = np.zeros(p)
    e[k] = 1.0
    return e


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based algorithm, O(p log p).
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def random_simplex(rng, p, size=None):
    """Uniform (flat Dirichlet) draws from the simplex."""
    return rng.dirichlet(np.ones(p), size=size)


def simplex_grid(p, resolution):
    """All points of the simplex whose coordinates are multiples of 1/resolution.

    Returns an array of shape ``(C(resolution + p - 1, p - 1), p)``.
    """
    if p == 1:
        return np.ones((1, 1))
    rows = []
    for bars in itertools.combinations(range(resolution + p - 1), p - 1):
        cuts = np.array((-1,) + bars + (resolution + p - 1,))
        rows.append(np.diff(cuts) - 1)
    return np.array(rows, dtype=float) / resolution
