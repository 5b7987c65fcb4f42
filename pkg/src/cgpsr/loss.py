"""Mean-squared loss over a dataset, its exact derivatives w.r.t. the
constants, and the one-step Newton update restricted to active constants.

A constant is active when its loss-gradient entry is exactly nonzero;
gradient and Hessian restricted to the active set give the Newton system.
The step is skipped (constants returned unchanged) whenever the loss is
non-finite, the active set is empty, the solve fails, or the update would
leave the finite domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .genotype import CgpParams, Genotype, active_terminals, evaluate, evaluate_dual


@dataclass(frozen=True)
class LossReport:
    """Loss with gradient/Hessian over all m constants and their active restriction."""

    loss: float
    grad: np.ndarray  # (m,)
    hess: np.ndarray  # (m, m)
    active: np.ndarray  # indices with exactly nonzero gradient entries
    active_grad: np.ndarray
    active_hess: np.ndarray
    finite: bool


def _check_width(params: CgpParams, data: Dataset) -> None:
    if data.n_features != params.n_features:
        raise ValueError(
            f"dataset has {data.n_features} features, program expects {params.n_features}"
        )


def predictions(g: Genotype, params: CgpParams, data: Dataset) -> np.ndarray:
    """Model outputs on every row, shape (N,)."""
    _check_width(params, data)
    out = np.asarray(evaluate(g, params, data.feature_columns))
    return np.broadcast_to(out, data.targets.shape).astype(float, copy=False)


def mse_loss(g: Genotype, params: CgpParams, data: Dataset) -> float:
    """Mean of squared residuals; non-finite when any prediction is."""
    _check_width(params, data)
    with np.errstate(all="ignore"):
        out = np.asarray(evaluate(g, params, data.feature_columns))
        r = data.targets - out
        return float(np.mean(r * r))


def loss_with_derivatives(g: Genotype, params: CgpParams, data: Dataset) -> LossReport:
    """Loss plus exact gradient G and Hessian H w.r.t. the constants.

    With residual r_i = y_i - yhat_i and per-sample gradient/Hessian of the
    prediction, G = mean(-2 r_i * grad_i) and
    H = mean(2 * (grad_i grad_i^T - r_i * hess_i)).

    Differentiation is seeded only over the constants the expressed program
    can reach; unreachable ones have exactly zero derivatives, so the full
    (m, m) report is assembled by scattering.
    """
    _check_width(params, data)
    m = params.n_constants
    n = data.n_rows
    reachable = sorted(
        t - params.n_features
        for t in active_terminals(g, params)
        if t >= params.n_features
    )
    k = len(reachable)
    with np.errstate(all="ignore"):
        out = evaluate_dual(g, params, data.feature_columns, seed_indices=reachable)
        pred = np.broadcast_to(np.asarray(out.value), (n,))
        r = data.targets - pred
        loss = float(np.mean(r * r))
        if not np.isfinite(loss):
            empty = np.empty(0, dtype=int)
            return LossReport(
                loss=loss,
                grad=np.full(m, np.nan),
                hess=np.full((m, m), np.nan),
                active=empty,
                active_grad=np.empty(0),
                active_hess=np.empty((0, 0)),
                finite=False,
            )
        gb = np.broadcast_to(np.asarray(out.grad), (n, k))
        hb = np.broadcast_to(np.asarray(out.hess), (n, k, k))
        grad_r = (-2.0 / n) * (r @ gb)
        hess_r = (2.0 / n) * (gb.T @ gb - np.tensordot(r, hb, axes=(0, 0)))
        hess_r = 0.5 * (hess_r + hess_r.T)  # enforce exact symmetry
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    if k:
        grad[reachable] = grad_r
        hess[np.ix_(reachable, reachable)] = hess_r
    active = np.flatnonzero(grad != 0.0)
    return LossReport(
        loss=loss,
        grad=grad,
        hess=hess,
        active=active,
        active_grad=grad[active],
        active_hess=hess[np.ix_(active, active)],
        finite=True,
    )


def newton_step(c: np.ndarray, report: LossReport) -> np.ndarray:
    """One Newton update of the active constants; skipped when unsafe.

    Solves H_active @ delta = G_active and subtracts delta from the active
    components.  Inactive components are never touched.  Returns the input
    constants unchanged when the report is non-finite, the active set is
    empty, the system is singular, or the update is non-finite.
    """
    c = np.asarray(c, dtype=float)
    if not report.finite or report.active.size == 0:
        return c.copy()
    try:
        delta = np.linalg.solve(report.active_hess, report.active_grad)
    except np.linalg.LinAlgError:
        return c.copy()
    if not np.all(np.isfinite(delta)):
        return c.copy()
    updated = c.copy()
    updated[report.active] -= delta
    if not np.all(np.isfinite(updated)):
        return c.copy()
    return updated
