import numpy as np

from dwcomb.model import from_arrays


def t1_instance():
    """Two points, two domains, each domain concentrated on its own point."""
    return from_arrays(
        densities=[[1.0, 0.0], [0.0, 1.0]],
        predictions=[[1.0, 0.0], [1.0, 0.0]],
        y_mean=[1.0, 0.0],
        y_sq_mean=[1.0, 0.0],
    )


def random_instance(rng, p=2, n=None, sparse=False, noisy=True):
    """Random instance with Dirichlet densities and Gaussian predictions/labels."""
    n = n or int(rng.integers(2, 51))
    D = rng.dirichlet(np.full(n, 0.5), size=p).T
    if sparse:
        D[rng.random((n, p)) < 0.3] = 0.0
        D[0] += 1e-3
        D /= D.sum(axis=0)
    H = rng.normal(0.0, 2.0, size=(n, p))
    y = rng.normal(0.0, 2.0, size=n)
    var = rng.exponential(0.5, size=n) * (rng.random(n) < 0.5) if noisy else 0.0
    return from_arrays(D, H, y, y * y + var)


def identical_domains_instance(rng, p=3, n=20):
    d = rng.dirichlet(np.ones(n))
    D = np.repeat(d[:, None], p, axis=1)
    H = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    return from_arrays(D, H, y, y * y)
