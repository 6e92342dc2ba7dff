"""Mixture sweeps comparing the distribution-weighted predictor with baselines.

Predictors evaluated for every target mixture ``lam``:

* each source regressor ``h_k`` on its own (named after its domain),
* ``unif``: the plain average of all ``h_k``,
* ``lambda-comb``: ``sum_k lam_k h_k``, rebuilt for every ``lam`` (an oracle,
  since it needs the unknown target weights),
* ``DW``: the single distribution-weighted predictor ``h_z`` for the solved ``z``.

All losses are exact expectations over the instance support.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .combiner import DEFAULT_ETA, predict_all, predictor_domain_losses
from .simplex import check_simplex, simplex_grid, uniform, vertex

UNIFORM = "unif"
LAMBDA_COMB = "lambda-comb"
DW = "DW"


def default_lambda_grid(p, step=0.1):
    """Vertices, ``step``-spaced points on every edge, and the centre."""
    pts = [vertex(p, k) for k in range(p)]
    m = int(round(1.0 / step))
    for i in range(p):
        for j in range(i + 1, p):
            for s in range(1, m):
                lam = np.zeros(p)
                lam[i], lam[j] = s / m, 1.0 - s / m
                pts.append(lam)
    pts.append(uniform(p))
    out, seen = [], set()
    for lam in pts:
        key = tuple(np.round(lam, 12))
        if key not in seen:
            seen.add(key)
            out.append(lam)
    return np.array(out)


@dataclass
class EvalReport:
    """MSE table keyed by ``(predictor, lambda)``."""

    domain_names: tuple
    lambdas: np.ndarray
    predictors: list
    mse: dict = field(default_factory=dict)

    def value(self, predictor, lam):
        return self.mse[(predictor, tuple(float(v) for v in lam))]

    def column(self, predictor):
        return np.array([self.value(predictor, lam) for lam in self.lambdas])

    def rows(self):
        for name in self.predictors:
            for lam in self.lambdas:
                yield name, lam, self.value(name, lam)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        p = len(self.domain_names)
        w.writerow(["predictor"] + [f"lambda_{k + 1}" for k in range(p)] + ["mse"])
        for name, lam, v in self.rows():
            w.writerow([name] + [f"{x:.12g}" for x in lam] + [f"{v:.12g}"])
        return buf.getvalue()


def evaluate_predictors(inst, z_star, eta=DEFAULT_ETA, lambda_grid=None):
    """Sweep target mixtures and tabulate the MSE of every predictor."""
    z_star = check_simplex(z_star, name="z_star")
    lams = default_lambda_grid(inst.p) if lambda_grid is None else np.atleast_2d(
        np.asarray(lambda_grid, dtype=float))
    for lam in lams:
        check_simplex(lam, name="lambda")
    H = inst.predictions
    fixed = {name: predictor_domain_losses(inst, H[:, k])
             for k, name in enumerate(inst.domain_names)}
    fixed[UNIFORM] = predictor_domain_losses(inst, H.mean(axis=1))
    fixed[DW] = predictor_domain_losses(inst, predict_all(inst, z_star, eta))
    names = list(inst.domain_names) + [UNIFORM, LAMBDA_COMB, DW]
    report = EvalReport(inst.domain_names, lams, names)
    for lam in lams:
        key = tuple(float(v) for v in lam)
        for name, losses in fixed.items():
            report.mse[(name, key)] = float(lam @ losses)
        comb = predictor_domain_losses(inst, H @ lam)
        report.mse[(LAMBDA_COMB, key)] = float(lam @ comb)
    return report


def brute_force_min(inst, eta=DEFAULT_ETA, grid_resolution=2000):
    """Grid minimum of the min-max objective over the simplex (``p <= 3``).

    Returns ``(z_grid, gamma_grid)``. With ``p = 2`` and the default resolution
    the grid has 2001 points.
    """
    if inst.p > 3:
        raise ValueError(f"grid search limited to p <= 3 (got p={inst.p})")
    grid = simplex_grid(inst.p, grid_resolution)
    vals = objective_on_grid(inst, grid, eta)
    i = int(np.argmin(vals))
    return grid[i], float(vals[i])


def objective_on_grid(inst, Z, eta=DEFAULT_ETA, chunk=4096):
    """Objective ``f`` at every row of ``Z``, evaluated in vectorized chunks."""
    D, H = inst.densities, inst.predictions
    u = inst.uniform_mass
    DH = D * H
    Jc = eta * u * H.mean(axis=1)[:, None]
    out = np.empty(len(Z))
    for s in range(0, len(Z), chunk):
        Zc = Z[s:s + chunk].T
        h = (DH @ Zc + Jc) / (D @ Zc + eta * u)
        loss = h * h - 2.0 * h * inst.y_mean[:, None] + inst.y_sq_mean[:, None]
        L = D.T @ loss
        out[s:s + chunk] = L.max(axis=0) - np.sum(Zc * L, axis=0)
    return out
