"""Two-dimensional Gaussian-mixture benchmark.

Four unit-variance Gaussians with means (1, 1), (-1, 1), (-1, -1), (1, -1).
In the two-domain variant domain 1 is a uniform mixture of the first three and
domain 2 of the last three; labels are ``f(x) = x1^2 + x2^2``. The four-domain
variant mixes ``g_k`` and ``g_{k+1 mod 4}`` for domain ``k``.
"""

from dataclasses import dataclass

import numpy as np

from .model import from_arrays

MEANS = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])

COMPONENTS = {
    "two_domain": ((0, 1, 2), (1, 2, 3)),
    "four_domain": ((0, 1), (1, 2), (2, 3), (3, 0)),
}


@dataclass(frozen=True)
class GaussianBenchConfig:
    n_train: int = 200
    n_support: int = 500
    seed: int = 0
    variant: str = "two_domain"

    def __post_init__(self):
        if self.n_train < 3:
            raise ValueError("n_train must be >= 3 for a 2-d fit with intercept")
        if self.n_support < 1:
            raise ValueError("n_support must be >= 1")
        if self.variant not in COMPONENTS:
            raise ValueError(f"variant must be one of {sorted(COMPONENTS)}")


def label(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def gaussian_pdf(x, mean):
    d = np.asarray(x) - mean
    return np.exp(-0.5 * np.sum(d * d, axis=-1)) / (2.0 * np.pi)


def mixture_pdf(x, components):
    return np.mean([gaussian_pdf(x, MEANS[c]) for c in components], axis=0)


def sample_mixture(rng, components, size):
    comp = rng.choice(np.asarray(components), size=size)
    return MEANS[comp] + rng.standard_normal((size, 2))


def fit_linear(X, y):
    """Least-squares plane ``y ~ X @ a + b`` via the normal equations.

    Parameters
    ----------
    X : array_like, shape (m, 2)
    y : array_like, shape (m,)

    Returns
    -------
    a : ndarray, shape (2,)
    b : float
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 3:
        raise ValueError("need at least 3 points with matching labels")
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    G = A.T @ A
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise np.linalg.LinAlgError("singular normal matrix: points are collinear")
    beta = np.linalg.solve(G, A.T @ y)
    return beta[:-1], float(beta[-1])


def make_gaussian_problem(config=None):
    """Build the benchmark as a ``ProblemInstance`` with exact mixture densities.

    Each domain's regressor is fit on ``n_train`` fresh draws from that domain;
    the support is ``n_support`` draws from the equal-weight union of all
    domains. Density columns are the mixture pdfs renormalized over the
    support.
    """
    cfg = config or GaussianBenchConfig()
    rng = np.random.default_rng(cfg.seed)
    comps = COMPONENTS[cfg.variant]
    p = len(comps)
    coefs = []
    for k, c in enumerate(comps):
        X = sample_mixture(rng, c, cfg.n_train)
        try:
            coefs.append(fit_linear(X, label(X)))
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"domain {k}: {exc} (seed={cfg.seed})") from None
    union = tuple(i for c in comps for i in c)
    S = sample_mixture(rng, union, cfg.n_support)
    dens = np.column_stack([mixture_pdf(S, c) for c in comps])
    dens /= dens.sum(axis=0)
    preds = np.column_stack([S @ a + b for a, b in coefs])
    y = label(S)
    names = [f"D{k + 1}" for k in range(p)]
    return from_arrays(dens, preds, y, y * y, names)
