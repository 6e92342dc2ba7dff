"""Rényi divergences of discrete distributions and the adaptation bounds built on them.

``D_alpha(P || Q) = 1/(alpha-1) log sum_x P(x)^alpha Q(x)^(1-alpha)`` with the
KL divergence at ``alpha = 1`` and ``log max P/Q`` at ``alpha = inf``;
``d_alpha = exp(D_alpha)``.

Summands with ``P(x) = 0`` contribute nothing; a summand with ``P(x) > 0`` and
``Q(x) = 0`` makes the divergence infinite for ``alpha >= 1``.
"""

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .simplex import project_simplex, simplex_grid, uniform

PROB_TOL = 1e-9


class SupportWarning(RuntimeWarning):
    """A support-containment requirement failed; the affected value is infinite."""


def as_distribution(mass, tol=PROB_TOL):
    """Validate a discrete distribution (nonnegative, sums to one)."""
    mass = np.asarray(mass, dtype=float)
    if mass.ndim != 1 or mass.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    if not np.all(np.isfinite(mass)) or np.any(mass < 0):
        raise ValueError("distribution must be finite and nonnegative")
    if abs(mass.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {mass.sum():.12g}, expected 1")
    return mass


def _pair(P, Q):
    P, Q = as_distribution(P), as_distribution(Q)
    if P.shape != Q.shape:
        raise ValueError(f"support size mismatch: {P.size} vs {Q.size}")
    return P, Q


def _log_power_sum(P, Q, alpha):
    """``log sum_x P^alpha Q^(1-alpha)`` over ``supp(P)``; may be +-inf."""
    pos = P > 0
    p, q = P[pos], Q[pos]
    if alpha > 1 and np.any(q == 0):
        return math.inf
    with np.errstate(divide="ignore"):
        terms = alpha * np.log(p) + (1.0 - alpha) * np.log(q)
    return float(logsumexp(terms))


def renyi_divergence(P, Q, alpha):
    """Order-``alpha`` Rényi divergence ``D_alpha(P || Q)`` in nats."""
    P, Q = _pair(P, Q)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    pos = P > 0
    if math.isinf(alpha):
        if np.any(Q[pos] == 0):
            return math.inf
        return float(np.max(np.log(P[pos]) - np.log(Q[pos])))
    if alpha == 1:
        if np.any(Q[pos] == 0):
            return math.inf
        return float(max(np.sum(P[pos] * (np.log(P[pos]) - np.log(Q[pos]))), 0.0))
    s = _log_power_sum(P, Q, alpha)
    if math.isinf(s):
        return math.inf
    return max(s / (alpha - 1.0), 0.0)


def d_alpha(P, Q, alpha):
    """Exponentiated divergence ``exp(D_alpha(P || Q)) >= 1``."""
    D = renyi_divergence(P, Q, alpha)
    return math.inf if math.isinf(D) else math.exp(D)


class FamilyFit(NamedTuple):
    lam: np.ndarray
    value: float
    feasible: bool


def _family_sup_ratio(P, dens):
    # min_lam max_x P/D_lam as an LP in mu = t*lam: min sum(mu) s.t. D mu >= P
    pos = P > 0
    A = -dens[pos]
    res = linprog(np.ones(dens.shape[1]), A_ub=A, b_ub=-P[pos],
                  bounds=[(0, None)] * dens.shape[1], method="highs")
    if res.status != 0:
        raise RuntimeError(f"sup-ratio LP failed: {res.message}")
    t = res.x.sum()
    return FamilyFit(res.x / t, float(t), True)


def d_alpha_to_family(P, densities, alpha, grid_resolution=None, max_iter=20000,
                      tol=1e-12):
    """Infimum of ``d_alpha(P || sum_k lam_k D_k)`` over the simplex.

    Parameters
    ----------
    P : array_like, shape (n,)
        Target distribution over the instance support.
    densities : ndarray, shape (n, p) or ProblemInstance
        Columns are the family generators ``D_k``.
    alpha : float
        Order, ``alpha > 1`` (``inf`` allowed).
    grid_resolution : int, optional
        Evaluate a simplex grid of this resolution first and warm start from
        its best point.

    Returns
    -------
    FamilyFit
        ``(lam, value, feasible)``; ``value`` is infinite and ``feasible`` False
        when ``P`` has mass outside the union of the generators' supports.

    Notes
    -----
    ``log sum_x P^alpha / D_lam^(alpha-1)`` is convex in ``lam``; it is
    minimized by projected gradient with backtracking.
    """
    dens = getattr(densities, "densities", densities)
    dens = np.asarray(dens, dtype=float)
    P = as_distribution(P)
    if dens.ndim != 2 or dens.shape[0] != P.size:
        raise ValueError("densities must have shape (len(P), p)")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    p = dens.shape[1]
    pos = P > 0
    if np.any(dens[pos].sum(axis=1) == 0):
        return FamilyFit(uniform(p), math.inf, False)
    if math.isinf(alpha):
        return _family_sup_ratio(P, dens)

    Pp, Dp = P[pos], dens[pos]
    logP = np.log(Pp)

    # each summand is log-convex in lam, so the log of the sum is convex too
    def obj_grad(lam):
        Dl = Dp @ lam
        if np.any(Dl <= 0):
            return math.inf, None
        terms = alpha * logP - (alpha - 1.0) * np.log(Dl)
        ls = logsumexp(terms)
        w = np.exp(terms - ls)
        return float(ls), -(alpha - 1.0) * (Dp.T @ (w / Dl))

    lam = uniform(p)
    if grid_resolution:
        grid = simplex_grid(p, int(grid_resolution))
        vals = [obj_grad(g)[0] for g in grid]
        lam = grid[int(np.argmin(vals))].copy()
        if not np.isfinite(min(vals)):
            lam = uniform(p)
    f, g = obj_grad(lam)
    step = 1.0
    stalled = 0
    for _ in range(max_iter):
        while True:
            cand = project_simplex(lam - step * g)
            fc, gc = obj_grad(cand)
            if fc <= f + g @ (cand - lam) + 0.5 / step * np.sum((cand - lam) ** 2):
                break
            step *= 0.5
            if step < 1e-20:
                break
        moved = np.max(np.abs(cand - lam))
        # objective flat at working precision: further steps only zigzag
        stalled = stalled + 1 if fc > f - 1e-15 * max(1.0, abs(f)) else 0
        if fc <= f:
            lam, f, g = cand, fc, gc
        if moved < tol or step < 1e-20 or stalled >= 3:
            break
        step *= 2.0
    return FamilyFit(lam, math.exp(max(f, 0.0) / (alpha - 1.0)), True)


def guarantee_bound(epsilon_term, d_alpha_value, M, alpha):
    """``[(eps) * d_alpha]^((alpha-1)/alpha) * M^(1/alpha)``.

    ``epsilon_term`` is whichever loss level applies (``eps + delta``,
    ``eps_hat + delta`` or ``eps_T + delta``). At ``alpha = inf`` this is
    ``epsilon_term * d_alpha_value``.
    """
    if min(epsilon_term, d_alpha_value, M) < 0:
        raise ValueError("bound inputs must be nonnegative")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if epsilon_term == 0:
        return 0.0
    if math.isinf(alpha):
        return float(epsilon_term * d_alpha_value)
    return float((epsilon_term * d_alpha_value) ** ((alpha - 1.0) / alpha)
                 * M ** (1.0 / alpha))


@dataclass(frozen=True)
class GuaranteeBound:
    alpha: float
    epsilon_term: float
    d_alpha_value: float
    M: float
    bound_value: float

    @classmethod
    def compute(cls, epsilon_term, d_alpha_value, M, alpha):
        return cls(float(alpha), float(epsilon_term), float(d_alpha_value), float(M),
                   guarantee_bound(epsilon_term, d_alpha_value, M, alpha))


def epsilon_hat(instance_true, instance_estimated, epsilon, M, alpha):
    """Loss level for regressors combined with estimated domain densities.

    ``max_k [eps * d_alpha(Dhat_k || D_k)]^((alpha-1)/alpha) * M^(1/alpha)``.
    Infinite, with a ``SupportWarning`` naming the domain, when
    ``supp(Dhat_k)`` is not contained in ``supp(D_k)``.
    """
    D = getattr(instance_true, "densities", instance_true)
    Dh = getattr(instance_estimated, "densities", instance_estimated)
    D, Dh = np.asarray(D, dtype=float), np.asarray(Dh, dtype=float)
    if D.shape != Dh.shape:
        raise ValueError("true and estimated instances must share support and domains")
    names = getattr(instance_true, "domain_names", None) or range(D.shape[1])
    worst = 0.0
    for k, name in enumerate(names):
        d = d_alpha(Dh[:, k], D[:, k], alpha)
        if math.isinf(d) and epsilon > 0:
            warnings.warn(f"supp(estimate) not contained in supp(true) for domain "
                          f"{name!r}", SupportWarning, stacklevel=2)
        worst = max(worst, guarantee_bound(epsilon, d, M, alpha))
    return worst


def epsilon_T(instance, target_cond, epsilon, M, alpha):
    """Loss level when the source conditionals differ from the target's.

    Parameters
    ----------
    instance : ProblemInstance
        Must carry ``label_cond`` of shape (n, p, m).
    target_cond : array_like, shape (n, m)
        Target conditional label distribution at every support point.
    """
    if not getattr(instance, "has_label_dist", False):
        raise ValueError("instance has no per-domain label distributions")
    T = np.asarray(target_cond, dtype=float)
    n, p, m = instance.label_cond.shape
    if T.shape != (n, m):
        raise ValueError(f"target_cond must have shape ({n}, {m})")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    worst = 0.0
    for k in range(p):
        Dk = instance.densities[:, k]
        pts = np.nonzero(Dk > 0)[0]
        if math.isinf(alpha):
            # limit of (E a^(alpha-1))^(1/alpha) is the max over supp(D_k)
            factor = max(d_alpha(T[x], instance.label_cond[x, k], alpha) for x in pts)
        else:
            logs = np.array([_log_power_sum(as_distribution(T[x]),
                                            as_distribution(instance.label_cond[x, k]),
                                            alpha) for x in pts])
            if np.any(np.isinf(logs)):
                factor = math.inf
            else:
                factor = math.exp(logsumexp(logs, b=Dk[pts]) / alpha)
        if math.isinf(factor) and epsilon > 0:
            warnings.warn(f"conditional support violation for domain "
                          f"{instance.domain_names[k]!r}", SupportWarning, stacklevel=2)
            return math.inf
        if math.isinf(alpha):
            val = factor * epsilon
        else:
            val = factor * epsilon ** ((alpha - 1.0) / alpha) * M ** (1.0 / alpha)
        worst = max(worst, val)
    return float(worst)
