"""DC programming for the robust mixture weight ``z``.

We look for ``z`` in the simplex minimizing

    f(z) = max_k L(D_k, h_z) - sum_j z_j L(D_j, h_z)  >= 0,

where ``h_z`` is the distribution-weighted combination. Each constraint
``L(D_k, h_z) - L(D_z, h_z)`` splits as ``u_k(z) - v_k(z)`` with

    u_k(z) = sum_x W_k(x) l_z(x)                     - 2M sum_x W_k(x) log K_z(x)
    v_k(z) = sum_x [J_z^2/K_z - 2 ybar J_z + y2 K_z] - 2M sum_x W_k(x) log K_z(x)

where ``W_k = D_k + eta U``, ``l_z(x) = E[(h_z(x) - y)^2 | x]`` and ``M`` bounds
the pointwise loss of every base regressor. ``M`` may be a single constant or
a per-point bound ``M(x)``; convexity only needs ``M(x) >= (ybar(x) - h_z(x))^2``
at each point, and the tighter per-point bound makes each DCA step much
longer. Both are convex; DCA replaces
``v_k`` by its tangent at the current iterate and solves the resulting convex
min-max problem over the simplex.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .combiner import DEFAULT_ETA, _check_eta, jk
from .simplex import check_simplex, project_simplex, uniform, vertex

log = logging.getLogger(__name__)

M_SAFETY = 1.01
ACT_TOL = 1e-7
ZERO_TOL = 1e-10


def default_M(inst, per_point=True):
    """Loss bound for the DC split, with a 1.01 safety factor.

    Per point, ``1.01 * max_k E[(h_k(x) - y)^2 | x]``; with
    ``per_point=False`` the single constant ``1.01 * max_{x,k}`` of the same.
    """
    worst = inst.pointwise_losses.max(axis=1)
    if per_point:
        return M_SAFETY * worst
    return M_SAFETY * float(np.max(worst))


def check_M(inst, M):
    """Return ``M`` as a scalar or (n,) array after checking it bounds every loss."""
    M = np.asarray(M, dtype=float)
    if M.ndim > 1 or (M.ndim == 1 and M.shape != (inst.n,)):
        raise ValueError(f"M must be a scalar or have one entry per point ({inst.n})")
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise ValueError("M must be finite and nonnegative")
    worst = inst.pointwise_losses.max(axis=1)
    if np.any(M < worst - 1e-12 * np.maximum(1.0, worst)):
        raise ValueError("M must bound the pointwise loss of every base regressor")
    return float(M) if M.ndim == 0 else M


@dataclass(frozen=True)
class SolverConfig:
    eta: float = DEFAULT_ETA
    eta_prime: float = 1e-4
    M: object = None
    z0: np.ndarray = None
    max_outer: int = 200
    max_inner: int = 2000
    inner_tol: float = 1e-10
    outer_tol: float = 1e-8
    global_tol: float = 1e-2
    gamma_stop: float = 1e-10
    inner_method: str = "subgradient"
    restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        _check_eta(self.eta)
        if not self.eta_prime > 0:
            raise ValueError("eta_prime must be positive")
        if self.M is not None:
            M = np.asarray(self.M, dtype=float)
            if not np.all(np.isfinite(M)) or np.any(M < 0):
                raise ValueError("M must be finite and nonnegative")
        for name in ("max_outer", "max_inner"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if int(self.restarts) < 0:
            raise ValueError("restarts must be >= 0")
        for name in ("inner_tol", "outer_tol", "global_tol", "gamma_stop"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_method not in ("slsqp", "subgradient"):
            raise ValueError(f"unknown inner_method {self.inner_method!r}")
        if self.z0 is not None:
            object.__setattr__(self, "z0", check_simplex(self.z0, name="z0"))

    def resolve(self, inst):
        """Copy with ``M`` and ``z0`` filled in for ``inst``; checks ``M``."""
        M = default_M(inst) if self.M is None else check_M(inst, self.M)
        z0 = uniform(inst.p) if self.z0 is None else self.z0
        if z0.size != inst.p:
            raise ValueError(f"z0 has {z0.size} entries, instance has {inst.p} domains")
        return replace(self, M=M, z0=z0)


@dataclass
class Solution:
    z_star: np.ndarray
    gamma_star: float
    per_domain_losses: np.ndarray
    trace: list = field(default_factory=list)
    status: str = "converged"

    @property
    def gammas(self):
        return np.array([g for _, g in self.trace])


@dataclass(frozen=True)
class Certificate:
    gamma_value: float
    is_near_global: bool
    lemma1_residual: float
    kkt_residual: float


# --------------------------------------------------------------------------
# values and gradients


def _pieces(inst, z, eta):
    J, K = jk(inst, z, eta)
    h = J / K
    ybar, y2 = inst.y_mean, inst.y_sq_mean
    loss = h * h - 2.0 * h * ybar + y2
    W = inst.densities + eta * inst.uniform_mass
    return J, K, h, loss, W


def domain_losses_exact(inst, z, eta):
    _, _, _, loss, _ = _pieces(inst, z, eta)
    return inst.densities.T @ loss


def objective(inst, z, eta=DEFAULT_ETA):
    """``(f(z), per-domain losses)``; ``f`` is max loss minus z-weighted loss."""
    z = check_simplex(z, name="z")
    _check_eta(eta)
    L = domain_losses_exact(inst, z, eta)
    return float(np.max(L) - z @ L), L


def uv_all(inst, z, eta, M):
    """Values and gradients of every ``u_k`` and ``v_k`` at ``z``.

    Returns ``(u, grad_u, v, grad_v)`` with ``u, v`` of shape (p,) and the
    gradients of shape (p, p), row k holding the gradient of the k-th function.
    """
    z = np.asarray(z, dtype=float)
    D, H = inst.densities, inst.predictions
    J, K, h, loss, W = _pieces(inst, z, eta)
    ybar, y2 = inst.y_mean, inst.y_sq_mean
    Mx = np.broadcast_to(np.asarray(M, dtype=float), K.shape)
    logK = np.log(K)
    barrier = -2.0 * (W.T @ (Mx * logK))
    DK = D / K[:, None]
    # d h / d z_j = D_j (h_j - h) / K
    dh = DK * (H - h[:, None])
    dloss = 2.0 * (h - ybar)[:, None] * dh
    d_barrier = -2.0 * (W.T @ (Mx[:, None] * DK))
    u = W.T @ loss + barrier
    grad_u = W.T @ dloss + d_barrier
    phi = float(np.sum(J * J / K - 2.0 * ybar * J + y2 * K))
    dphi = np.sum(D * (2.0 * h[:, None] * H - (h * h)[:, None]
                       - 2.0 * ybar[:, None] * H + y2[:, None]), axis=0)
    v = phi + barrier
    grad_v = dphi[None, :] + d_barrier
    return u, grad_u, v, grad_v


def uk_value_grad(inst, k, z, eta, M):
    u, gu, _, _ = uv_all(inst, z, eta, M)
    return float(u[k]), gu[k]


def vk_value_grad(inst, k, z, eta, M):
    _, _, v, gv = uv_all(inst, z, eta, M)
    return float(v[k]), gv[k]


def fz_gz_decomposition(inst, z, eta, M, point_index, y):
    """Pointwise split ``(h_z(x) - y)^2 = f_z(x, y) - g_z(x)``.

    Returns ``(f_z(x, y), g_z(x))`` with ``g_z(x) = -2M log K_z(x)``.
    """
    J, K = jk(inst, np.asarray(z, dtype=float), eta)
    h = J[point_index] / K[point_index]
    g = -2.0 * M * math.log(K[point_index])
    return (h - y) ** 2 + g, g


# --------------------------------------------------------------------------
# inner convex problem


class _Linearized:
    """``F_t(z) = max_k u_k(z) - v_k(z_t) - (z - z_t) . grad v_k(z_t)``."""

    def __init__(self, inst, z_t, eta, M):
        self.inst, self.eta, self.M = inst, eta, M
        self.z_t = np.asarray(z_t, dtype=float)
        _, _, self.v_t, self.gv_t = uv_all(inst, self.z_t, eta, M)

    def pieces(self, z):
        u, gu, _, _ = uv_all(self.inst, z, self.eta, self.M)
        c = u - self.v_t - self.gv_t @ (z - self.z_t)
        return c, gu - self.gv_t

    def __call__(self, z):
        return float(np.max(self.pieces(z)[0]))


def _inner_subgradient(F, z_t, max_iter, tol):
    # step radius/sqrt(i) within blocks; radius shrinks when a block stalls
    z = z_t.copy()
    c, G = F.pieces(z)
    best_z, best_f = z.copy(), float(np.max(c))
    radius, block, it = 0.5, 25, 0
    while it < max_iter and radius > 1e-14:
        start_f = best_f
        for i in range(1, block + 1):
            g = G[int(np.argmax(c))]
            g = g - g.mean()
            gn = np.linalg.norm(g)
            if gn == 0:
                return best_z, best_f
            z = project_simplex(z - radius / math.sqrt(i) * g / gn)
            c, G = F.pieces(z)
            fz = float(np.max(c))
            if fz < best_f:
                best_z, best_f = z.copy(), fz
        it += block
        if start_f - best_f <= tol * max(1.0, abs(best_f)):
            radius *= 0.1
        z = best_z.copy()
        c, G = F.pieces(z)
    return best_z, best_f


def _inner_slsqp(F, z_t, max_iter, tol):
    p = z_t.size

    def fun(x):
        return x[-1], np.r_[np.zeros(p), 1.0]

    def cons(x):
        c, _ = F.pieces(x[:p])
        return x[-1] - c

    def cons_jac(x):
        _, G = F.pieces(x[:p])
        return np.hstack([-G, np.ones((p, 1))])

    x0 = np.r_[z_t, F(z_t)]
    res = minimize(
        lambda x: fun(x)[0], x0, jac=lambda x: fun(x)[1], method="SLSQP",
        bounds=[(0.0, 1.0)] * p + [(None, None)],
        constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac},
                     {"type": "eq", "fun": lambda x: np.sum(x[:p]) - 1.0,
                      "jac": lambda x: np.r_[np.ones(p), 0.0]}],
        options={"maxiter": max_iter, "ftol": tol},
    )
    z = project_simplex(np.clip(res.x[:p], 0.0, None))
    return z, F(z)


def solve_inner(inst, z_t, eta, M, config=None):
    """One DCA step: approximately minimize the linearized problem at ``z_t``.

    Returns ``(z_next, F_t(z_next))``. The result is never worse than ``z_t``
    itself, for which ``F_t(z_t) = f(z_t)``.
    """
    config = config or SolverConfig(eta=eta, M=M)
    z_t = check_simplex(z_t, name="z_t")
    F = _Linearized(inst, z_t, eta, M)
    f_t = F(z_t)
    if config.inner_method == "slsqp":
        z, fz = _inner_slsqp(F, z_t, config.max_inner, config.inner_tol)
        # SLSQP may stall on a kink; a few subgradient steps from its point help
        if not fz <= f_t:
            z, fz = _inner_subgradient(F, z_t, config.max_inner, config.inner_tol)
    else:
        z, fz = _inner_subgradient(F, z_t, config.max_inner, config.inner_tol)
    if not fz <= f_t + 1e-12:
        return z_t.copy(), f_t
    return z, fz


# --------------------------------------------------------------------------
# outer loop


def _dca_run(inst, cfg, z0):
    eta, M = cfg.eta, cfg.M
    z = z0.copy()
    gamma, L = objective(inst, z, eta)
    trace = [(z.copy(), gamma)]
    status = "budget_exhausted"
    for t in range(cfg.max_outer):
        if gamma < cfg.gamma_stop:
            status = "converged"
            break
        z_new, _ = solve_inner(inst, z, eta, M, cfg)
        gamma_new, L_new = objective(inst, z_new, eta)
        step = abs(gamma - gamma_new)
        z, L, gamma = z_new, L_new, gamma_new
        trace.append((z.copy(), gamma))
        log.debug("outer %d: gamma=%.6g", t, gamma)
        if step < cfg.outer_tol:
            status = "converged"
            break
    else:
        if gamma < cfg.gamma_stop:
            status = "converged"
    return Solution(z, gamma, L, trace, status)


def restart_points(p, count, seed):
    """Starting points tried after an uncertified run: vertices, then random."""
    rng = np.random.default_rng(seed)
    pts = [vertex(p, k) for k in range(p)]
    pts += list(rng.dirichlet(np.ones(p), size=max(0, count - p)))
    return pts[:count]


def dca_solve(inst, config=None):
    """Minimize ``f`` over the simplex by DCA.

    A run stops when ``gamma`` drops below ``gamma_stop``, when one outer step
    changes ``gamma`` by less than ``outer_tol``, or after ``max_outer`` steps.
    DCA only reaches stationary points; if the run from ``z0`` ends with
    ``gamma > global_tol`` it is repeated from up to ``restarts`` other
    starting points (vertices first, then seeded random draws) and the best
    run is returned. ``Solution.trace`` belongs to that run.
    """
    cfg = (config or SolverConfig()).resolve(inst)
    if inst.p == 1:
        gamma, L = objective(inst, cfg.z0, cfg.eta)
        return Solution(cfg.z0.copy(), 0.0, L, [(cfg.z0.copy(), 0.0)], "converged")
    best = _dca_run(inst, cfg, cfg.z0)
    for z0 in restart_points(inst.p, cfg.restarts, cfg.seed):
        if best.gamma_star <= cfg.global_tol:
            break
        if np.allclose(z0, cfg.z0):
            continue
        run = _dca_run(inst, cfg, z0)
        log.debug("restart from %s: gamma=%.6g", z0, run.gamma_star)
        if run.gamma_star < best.gamma_star:
            best = run
    return best


# --------------------------------------------------------------------------
# diagnostics


def _residual_given_g(g, free):
    """``min_{beta, alpha} ||g + beta 1 - alpha||`` with ``alpha`` >= 0 on fixed coords."""
    def phi(beta):
        r = g + beta
        r_fixed = np.minimum(r[~free], 0.0)
        return float(np.sum(r[free] ** 2) + np.sum(r_fixed ** 2))

    lo, hi = -np.max(g) - 1.0, -np.min(g) + 1.0
    res = minimize_scalar(phi, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, hi - lo)})
    beta = res.x
    r = g + beta
    r[~free] = np.minimum(r[~free], 0.0)
    return r


def kkt_residual(inst, z, eta=DEFAULT_ETA, act_tol=ACT_TOL, max_iter=1000):
    """Distance from the stationarity inclusion for ``min f`` over the simplex.

    With ``d_k`` the gradient of ``L(D_k, h_z) - L(D_z, h_z)`` for every active
    ``k``, returns ``min ||sum_k mu_k d_k + beta 1 - alpha||`` over ``mu`` in the
    simplex of active indices, free ``beta`` and ``alpha >= 0`` supported on
    the zero coordinates of ``z``.
    """
    z = check_simplex(z, name="z")
    p = z.size
    if p == 1:
        return 0.0
    # the barrier terms cancel in u_k - v_k, so M plays no role here
    _, gu, _, gv = uv_all(inst, z, eta, 0.0)
    L = domain_losses_exact(inst, z, eta)
    c = L - z @ L
    scale = max(1.0, float(np.max(np.abs(c))))
    active = np.nonzero(c >= np.max(c) - act_tol * scale)[0]
    Dm = (gu - gv)[active]
    free = z > ZERO_TOL
    mu = np.full(active.size, 1.0 / active.size)
    if active.size == 1:
        return float(np.linalg.norm(_residual_given_g(Dm[0], free)))
    lip = 2.0 * np.linalg.norm(Dm, 2) ** 2 + 1e-300
    best = math.inf
    for _ in range(max_iter):
        r = _residual_given_g(mu @ Dm, free)
        best = min(best, float(np.linalg.norm(r)))
        mu = project_simplex(mu - (2.0 / lip) * (Dm @ r))
    return best


def certify(inst, solution_or_z, eta=DEFAULT_ETA, eta_prime=1e-4, global_tol=1e-2):
    """Global-optimality and stationarity diagnostics for a candidate ``z``."""
    z = getattr(solution_or_z, "z_star", solution_or_z)
    gamma, _ = objective(inst, z, eta)
    return Certificate(
        gamma_value=gamma,
        is_near_global=bool(gamma <= global_tol),
        lemma1_residual=gamma - eta_prime,
        kkt_residual=kkt_residual(inst, z, eta),
    )


def parse_z0(choice, p):
    """``uniform``, ``vertex:k`` (1-based) or an explicit weight list."""
    if choice is None or choice == "uniform":
        return uniform(p)
    if isinstance(choice, str) and choice.startswith("vertex:"):
        k = int(choice.split(":", 1)[1]) - 1
        if not 0 <= k < p:
            raise ValueError(f"vertex index out of range 1..{p}")
        return vertex(p, k)
    return check_simplex(choice, name="z0")
