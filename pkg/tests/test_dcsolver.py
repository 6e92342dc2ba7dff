import math

import numpy as np
import pytest

from dwcomb.dcsolver import (
    SolverConfig,
    _Linearized,
    certify,
    check_M,
    dca_solve,
    default_M,
    fz_gz_decomposition,
    kkt_residual,
    objective,
    parse_z0,
    solve_inner,
    uk_value_grad,
    uv_all,
    vk_value_grad,
)
from dwcomb.combiner import domain_losses, predict_all
from dwcomb.model import from_arrays
from helpers import identical_domains_instance, random_instance


def _interior(rng, p):
    return rng.dirichlet(np.full(p, 2.0))


# --------------------------------------------------------------------------
# independent oracle for the T1 values: plain loops over the defining sums

def t1_uv_by_hand(k, z, eta, M):
    D = [[1.0, 0.0], [0.0, 1.0]]
    H = [[1.0, 0.0], [1.0, 0.0]]
    ybar, y2 = [1.0, 0.0], [1.0, 0.0]
    n, p = 2, 2
    U = 1.0 / n
    u = v = 0.0
    for x in range(n):
        J = sum(z[j] * D[x][j] * H[x][j] for j in range(p)) + eta * U * sum(H[x]) / p
        K = sum(z[j] * D[x][j] for j in range(p)) + eta * U
        h = J / K
        W = D[x][k] + eta * U
        u += W * (h * h - 2 * h * ybar[x] + y2[x]) - 2 * M * W * math.log(K)
        v += J * J / K - 2 * ybar[x] * J + y2[x] * K - 2 * M * W * math.log(K)
    return u, v


def test_t1_values_against_hand_sum(t1):
    z, eta, M = [0.5, 0.5], 0.2, 1.01
    for k in range(2):
        u_ref, v_ref = t1_uv_by_hand(k, z, eta, M)
        assert uk_value_grad(t1, k, z, eta, M)[0] == pytest.approx(u_ref, abs=1e-13)
        assert vk_value_grad(t1, k, z, eta, M)[0] == pytest.approx(v_ref, abs=1e-13)


def test_t1_gz_value(t1):
    f, g = fz_gz_decomposition(t1, [0.5, 0.5], 0.2, 1.01, 0, 1.0)
    assert g == pytest.approx(-2 * 1.01 * math.log(0.6), abs=1e-14)
    assert f - g == pytest.approx((1 - 0.55 / 0.6) ** 2, abs=1e-14)


# --------------------------------------------------------------------------
# gradients, convexity, identities


def _fd_grad(fun, z, step=1e-6):
    g = np.empty_like(z)
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = step
        g[j] = (fun(z + e) - fun(z - e)) / (2 * step)
    return g


def test_gradients_match_finite_differences(rng):
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(2, 5))
        inst = random_instance(rng, p=p, n=int(rng.integers(3, 30)))
        M = default_M(inst)
        z = _interior(rng, p)
        k = int(rng.integers(p))
        for which in (0, 2):
            grad = uv_all(inst, z, 1e-3, M)[which + 1][k]
            fd = _fd_grad(lambda w: uv_all(inst, w, 1e-3, M)[which][k], z)
            rel = np.linalg.norm(fd - grad) / max(1.0, np.linalg.norm(grad))
            worst = max(worst, rel)
    assert worst <= 1e-5


def test_scalar_and_per_point_M_gradients(rng):
    inst = random_instance(rng, p=3, n=12)
    z = _interior(rng, 3)
    Ms = default_M(inst, per_point=False)
    assert np.isscalar(Ms)
    for k in range(3):
        u, gu = uk_value_grad(inst, k, z, 1e-3, Ms)
        fd = _fd_grad(lambda w: uk_value_grad(inst, k, w, 1e-3, Ms)[0], z)
        np.testing.assert_allclose(gu, fd, rtol=1e-5, atol=1e-5)


def test_midpoint_convexity_u_v(rng):
    for _ in range(300):
        p = int(rng.integers(2, 5))
        inst = random_instance(rng, p=p, n=int(rng.integers(2, 20)), sparse=bool(rng.random() < 0.5))
        M = default_M(inst, per_point=bool(rng.random() < 0.5))
        eta = 10 ** rng.uniform(-4, 0)
        a, b = rng.dirichlet(np.ones(p), size=2)
        ua, _, va, _ = uv_all(inst, a, eta, M)
        ub, _, vb, _ = uv_all(inst, b, eta, M)
        um, _, vm, _ = uv_all(inst, (a + b) / 2, eta, M)
        assert np.all(um <= 0.5 * (ua + ub) + 1e-9)
        assert np.all(vm <= 0.5 * (va + vb) + 1e-9)


def test_decomposition_identity(rng):
    for _ in range(200):
        p = int(rng.integers(1, 5))
        inst = random_instance(rng, p=p)
        z = rng.dirichlet(np.ones(p))
        eta = 10 ** rng.uniform(-4, 0)
        u, _, v, _ = uv_all(inst, z, eta, default_M(inst))
        L = domain_losses(inst, z, eta)
        np.testing.assert_allclose(u - v, L - z @ L, atol=1e-10)


def test_pointwise_split(rng):
    for _ in range(300):
        p = int(rng.integers(2, 5))
        inst = random_instance(rng, p=p, n=10)
        i = int(rng.integers(inst.n))
        lo = min(inst.predictions[i].min(), inst.y_mean[i])
        hi = max(inst.predictions[i].max(), inst.y_mean[i])
        y = rng.uniform(lo, hi)
        M = 1.01 * (hi - lo) ** 2 + 1e-12
        eta = 10 ** rng.uniform(-3, 0)
        a, b = rng.dirichlet(np.ones(p), size=2)
        fa, ga = fz_gz_decomposition(inst, a, eta, M, i, y)
        fb, gb = fz_gz_decomposition(inst, b, eta, M, i, y)
        fm, gm = fz_gz_decomposition(inst, (a + b) / 2, eta, M, i, y)
        assert fm <= 0.5 * (fa + fb) + 1e-9
        assert gm <= 0.5 * (ga + gb) + 1e-9
        h = predict_all(inst, a, eta)[i]
        assert fa - ga == pytest.approx((h - y) ** 2, abs=1e-10)


# --------------------------------------------------------------------------
# objective


def test_objective_examples(t1):
    assert objective(t1, [0.5, 0.5], 0.2)[0] == pytest.approx(0.0, abs=1e-15)
    assert objective(t1, [1.0, 0.0], 0.01)[0] > 0.1
    single = from_arrays([[0.4], [0.6]], [[1.0], [2.0]], [0.0, 3.0])
    assert objective(single, [1.0], 1e-3)[0] == pytest.approx(0.0, abs=1e-15)


def test_objective_nonnegative(rng):
    for _ in range(20):
        inst = random_instance(rng, p=int(rng.integers(2, 5)))
        for z in rng.dirichlet(np.ones(inst.p), size=200):
            assert objective(inst, z, 1e-3)[0] >= -1e-9


# --------------------------------------------------------------------------
# M and config


def test_default_M_bounds_losses(rng):
    inst = random_instance(rng, p=3)
    M = default_M(inst)
    assert M.shape == (inst.n,)
    np.testing.assert_allclose(M, 1.01 * inst.pointwise_losses.max(axis=1))
    assert default_M(inst, per_point=False) == pytest.approx(M.max())


def test_check_M_rejects_small(rng):
    inst = random_instance(rng, p=2, n=10)
    with pytest.raises(ValueError):
        check_M(inst, 0.5 * default_M(inst, per_point=False))
    with pytest.raises(ValueError):
        check_M(inst, np.ones(3))
    with pytest.raises(ValueError):
        SolverConfig(M=-1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(eta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(inner_method="newton")
    with pytest.raises(ValueError):
        SolverConfig(max_outer=0)
    with pytest.raises(ValueError):
        SolverConfig(z0=[0.7, 0.7])


def test_parse_z0():
    np.testing.assert_array_equal(parse_z0("uniform", 4), np.full(4, 0.25))
    np.testing.assert_array_equal(parse_z0("vertex:2", 3), [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        parse_z0("vertex:4", 3)
    with pytest.raises(ValueError):
        parse_z0([0.5, 0.6], 2)


# --------------------------------------------------------------------------
# inner problem


def test_inner_descent(rng):
    for _ in range(20):
        inst = random_instance(rng, p=int(rng.integers(2, 4)), n=15)
        M = default_M(inst)
        z_t = rng.dirichlet(np.ones(inst.p))
        F = _Linearized(inst, z_t, 1e-3, M)
        z, fz = solve_inner(inst, z_t, 1e-3, M)
        assert fz <= F(z_t) + 1e-12
        assert fz == pytest.approx(F(z))
        assert abs(z.sum() - 1) < 1e-9 and np.all(z >= 0)


@pytest.mark.parametrize("method", ["subgradient", "slsqp"])
def test_inner_matches_grid(rng, method):
    grid = np.linspace(0.0, 1.0, 2001)
    for _ in range(8):
        inst = random_instance(rng, p=2, n=int(rng.integers(3, 30)))
        M = default_M(inst)
        z_t = rng.dirichlet(np.ones(2))
        F = _Linearized(inst, z_t, 1e-3, M)
        grid_min = min(F(np.array([a, 1 - a])) for a in grid)
        cfg = SolverConfig(M=M, inner_method=method)
        _, fz = solve_inner(inst, z_t, 1e-3, M, cfg)
        assert fz <= grid_min + 1e-3


def test_inner_symmetric_fixed_point(t1):
    M = default_M(t1, per_point=False)
    z, _ = solve_inner(t1, [0.5, 0.5], 1e-3, M)
    np.testing.assert_allclose(z, [0.5, 0.5], atol=1e-9)


def test_linearization_dominates_objective(rng):
    for _ in range(30):
        inst = random_instance(rng, p=int(rng.integers(2, 5)), n=12)
        M = default_M(inst)
        F = _Linearized(inst, rng.dirichlet(np.ones(inst.p)), 1e-3, M)
        for z in rng.dirichlet(np.ones(inst.p), size=20):
            assert F(z) >= objective(inst, z, 1e-3)[0] - 1e-9


# --------------------------------------------------------------------------
# outer loop


def test_identical_domains_zero_at_start(rng):
    inst = identical_domains_instance(rng)
    sol = dca_solve(inst)
    assert sol.gamma_star <= 1e-12
    assert len(sol.trace) == 1 and sol.status == "converged"


def test_single_domain_returns_immediately():
    inst = from_arrays([[0.4], [0.6]], [[1.0], [2.0]], [0.0, 3.0])
    sol = dca_solve(inst)
    np.testing.assert_array_equal(sol.z_star, [1.0])
    assert sol.gamma_star == 0.0 and sol.status == "converged"


def test_trace_nonincreasing_and_feasible(rng):
    for _ in range(6):
        inst = random_instance(rng, p=int(rng.integers(2, 4)), n=20)
        sol = dca_solve(inst, SolverConfig(max_outer=40, restarts=0))
        g = sol.gammas
        assert np.all(np.diff(g) <= 1e-9)
        assert sol.gamma_star >= -1e-9
        for z, gamma in sol.trace:
            assert objective(inst, z, 1e-3)[0] == pytest.approx(gamma, abs=1e-15)


def test_dca_matches_grid_p2(rng):
    grid = np.linspace(0.0, 1.0, 2001)
    for _ in range(4):
        inst = random_instance(rng, p=2, n=int(rng.integers(3, 30)))
        grid_min = min(objective(inst, [a, 1 - a], 1e-3)[0] for a in grid)
        sol = dca_solve(inst)
        assert abs(sol.gamma_star - grid_min) <= 1e-3


def test_budget_status(rng):
    inst = random_instance(rng, p=3, n=20)
    cfg = SolverConfig(max_outer=1, restarts=0)
    sol = dca_solve(inst, cfg)
    assert len(sol.trace) == 2
    g0, g1 = sol.gammas
    assert g0 > 1e-2 and g0 - g1 > cfg.outer_tol
    assert sol.status == "budget_exhausted"


# --------------------------------------------------------------------------
# certificate and stationarity


def test_certify_vertex_not_global(t1):
    cert = certify(t1, [1.0, 0.0], 1e-3, 1e-4, 1e-2)
    assert not cert.is_near_global
    assert cert.lemma1_residual > 0
    assert cert.gamma_value == pytest.approx(objective(t1, [1.0, 0.0], 1e-3)[0])


def test_certify_identical_domains(rng):
    inst = identical_domains_instance(rng)
    for z in rng.dirichlet(np.ones(3), size=5):
        cert = certify(inst, z, 1e-3, 1e-4, 1e-2)
        assert cert.lemma1_residual == pytest.approx(-1e-4, abs=1e-12)
        assert cert.is_near_global


def test_certify_flag_consistency(rng):
    for _ in range(10):
        inst = random_instance(rng, p=3, n=10)
        cert = certify(inst, rng.dirichlet(np.ones(3)), 1e-3, 1e-4, 1e-2)
        if cert.is_near_global:
            assert cert.lemma1_residual <= 1e-2


def test_kkt_symmetric_t1(t1):
    assert kkt_residual(t1, [0.5, 0.5], 1e-3) <= 1e-6
    assert kkt_residual(t1, [0.5, 0.5], 0.2) <= 1e-6


def test_kkt_single_domain():
    inst = from_arrays([[0.4], [0.6]], [[1.0], [2.0]], [0.0, 3.0])
    assert kkt_residual(inst, [1.0], 1e-3) == 0.0


def test_kkt_small_at_solution(rng):
    inst = random_instance(rng, p=3, n=20)
    sol = dca_solve(inst)
    assert sol.gamma_star <= 1e-8
    at_solution = kkt_residual(inst, sol.z_star, 1e-3)
    assert at_solution <= 1e-3
    assert kkt_residual(inst, rng.dirichlet(np.ones(3)), 1e-3) > 10 * at_solution
