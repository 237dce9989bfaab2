"""Entropy-regularized discrete optimal transport.

Solves

    min_T  <T, C> - beta * H(T),    H(T) = -sum_ij T_ij ln T_ij

over nonnegative matrices with prescribed row and column sums.  The main
solver is a log-domain Sinkhorn iteration (stable at small ``beta``); a
grid-search oracle for tiny instances is provided so the solver can be
validated against an independent path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import (
    DegenerateMarginalsError,
    InvalidConfigError,
    NonFiniteCostError,
    ShapeMismatchError,
    TooLargeError,
)

BRUTE_FORCE_MAX_CELLS = 9


@dataclass(frozen=True)
class Marginals:
    """Prescribed row and column masses of a transport plan.

    Weights must be strictly positive and both sides must carry the same
    total mass (within 1e-12).  Masses need not sum to one: unit-mass-per-row
    marginals (total mass N) are as valid as probability vectors.
    """

    row_weights: np.ndarray
    col_weights: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.row_weights, dtype=float)
        col = np.asarray(self.col_weights, dtype=float)
        object.__setattr__(self, "row_weights", row)
        object.__setattr__(self, "col_weights", col)
        if row.ndim != 1 or col.ndim != 1 or row.size == 0 or col.size == 0:
            raise DegenerateMarginalsError("marginals must be non-empty 1-D vectors")
        if not (np.isfinite(row).all() and np.isfinite(col).all()):
            raise DegenerateMarginalsError("marginal weights must be finite")
        if (row <= 0).any() or (col <= 0).any():
            raise DegenerateMarginalsError("marginal weights must be strictly positive")
        if abs(float(row.sum()) - float(col.sum())) > 1e-12:
            raise DegenerateMarginalsError(
                f"total mass mismatch: rows sum to {row.sum()!r}, columns to {col.sum()!r}"
            )

    @staticmethod
    def uniform(n: int, m: int, total_mass: float = 1.0) -> "Marginals":
        """Uniform weights on both sides with the given total mass."""
        return Marginals(np.full(n, total_mass / n), np.full(m, total_mass / m))

    @staticmethod
    def unit_rows(n: int) -> "Marginals":
        """Square marginals with one unit of mass per row and per column."""
        return Marginals(np.ones(n), np.ones(n))


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver knobs.

    ``beta`` weights the entropy term; smaller values sharpen the plan and
    slow convergence.  Iterations stop when the max-norm marginal residual
    drops to ``tolerance`` or after ``max_iters`` sweeps, whichever is first.
    ``epsilon_floor`` clamps logarithms of user-supplied weights.
    """

    beta: float = 0.1
    max_iters: int = 10_000
    tolerance: float = 1e-9
    epsilon_floor: float = 1e-300

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidConfigError(f"beta must be positive, got {self.beta}")
        if self.max_iters < 1:
            raise InvalidConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tolerance > 0:
            raise InvalidConfigError(f"tolerance must be positive, got {self.tolerance}")
        if not self.epsilon_floor > 0:
            raise InvalidConfigError(f"epsilon_floor must be positive, got {self.epsilon_floor}")


@dataclass(frozen=True)
class TransportPlan:
    """A coupling together with how well it met its marginal constraints.

    ``row_residual``/``col_residual`` are max-norm deviations of the plan's
    row/column sums from the requested marginals.  Non-convergence is not an
    error: callers inspect the residuals and decide.
    """

    matrix: np.ndarray
    row_residual: float
    col_residual: float
    iterations_used: int

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", matrix)
        if matrix.ndim != 2:
            raise ShapeMismatchError("transport plan must be a 2-D matrix")
        if (matrix < 0).any():
            raise ShapeMismatchError("transport plan entries must be nonnegative")

    def converged(self, tolerance: float) -> bool:
        return max(self.row_residual, self.col_residual) <= tolerance


def _validated_cost(cost, marginals: Marginals) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ShapeMismatchError(f"cost must be a 2-D matrix, got ndim={c.ndim}")
    if not np.isfinite(c).all():
        raise NonFiniteCostError("cost matrix contains NaN or infinite entries")
    expected = (marginals.row_weights.size, marginals.col_weights.size)
    if c.shape != expected:
        raise ShapeMismatchError(f"cost shape {c.shape} does not match marginals {expected}")
    return c


def sinkhorn(cost, marginals: Marginals, config: SinkhornConfig = SinkhornConfig()) -> TransportPlan:
    """Solve entropy-regularized transport with log-domain Sinkhorn sweeps.

    One sweep rescales rows then columns of exp(-cost/beta) via log-sum-exp,
    so the plan stays representable even when cost/beta is in the hundreds.
    The row residual is checked after every sweep; both residuals of the
    returned plan are measured exactly on exit.

    Returns a plan whose entries are strictly positive (up to floating-point
    underflow) and deterministic for identical inputs.
    """
    c = _validated_cost(cost, marginals)
    u = marginals.row_weights
    v = marginals.col_weights

    log_u = np.log(np.maximum(u, config.epsilon_floor))
    log_v = np.log(np.maximum(v, config.epsilon_floor))
    log_kernel = -c / config.beta

    g = np.zeros(v.size)
    # log of row sums of the scaled kernel under the current column potential
    row_lse = logsumexp(log_kernel, axis=1)
    f = np.zeros(u.size)
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        f = log_u - row_lse
        g = log_v - logsumexp(log_kernel + f[:, None], axis=0)
        row_lse = logsumexp(log_kernel + g[None, :], axis=1)
        row_residual = float(np.abs(np.exp(f + row_lse) - u).max())
        if row_residual <= config.tolerance:
            break

    plan = np.exp(f[:, None] + log_kernel + g[None, :])
    row_residual = float(np.abs(plan.sum(axis=1) - u).max())
    col_residual = float(np.abs(plan.sum(axis=0) - v).max())
    return TransportPlan(plan, row_residual, col_residual, iterations)


def ot_objective(plan, cost, beta: float) -> float:
    """Evaluate <T, C> - beta * H(T) for a plan (``TransportPlan`` or array).

    Zero entries contribute nothing to the entropy (the t ln t -> 0 limit).
    """
    t = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    c = np.asarray(cost, dtype=float)
    if t.shape != c.shape:
        raise ShapeMismatchError(f"plan shape {t.shape} does not match cost shape {c.shape}")
    return float((t * c).sum() + beta * xlogy(t, t).sum())


def independent_coupling(marginals: Marginals) -> np.ndarray:
    """The product coupling, i.e. the maximum-entropy feasible plan."""
    u = marginals.row_weights
    v = marginals.col_weights
    return np.outer(u, v) / v.sum()


def _assemble_plans(free: np.ndarray, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand free-block values into full plans and flag feasible ones.

    The (N-1)x(M-1) upper-left block determines the rest of the plan through
    the marginal constraints.  ``free`` has shape (G, N-1, M-1).
    """
    g = free.shape[0]
    n, m = u.size, v.size
    plans = np.empty((g, n, m))
    plans[:, : n - 1, : m - 1] = free
    plans[:, : n - 1, m - 1] = u[: n - 1] - free.sum(axis=2)
    plans[:, n - 1, : m - 1] = v[: m - 1] - free.sum(axis=1)
    plans[:, n - 1, m - 1] = u[n - 1] - plans[:, n - 1, : m - 1].sum(axis=1)
    feasible = (plans >= -1e-12).all(axis=(1, 2))
    return plans, feasible


def _objectives(plans: np.ndarray, cost: np.ndarray, beta: float) -> np.ndarray:
    clipped = np.clip(plans, 0.0, None)
    return (clipped * cost).sum(axis=(1, 2)) + beta * xlogy(clipped, clipped).sum(axis=(1, 2))


def brute_force_ot(cost, marginals: Marginals, beta: float, grid_points: int = 9) -> TransportPlan:
    """Minimize the entropic transport objective by exhaustive search.

    Restricted to instances with at most ``BRUTE_FORCE_MAX_CELLS`` cells.
    A dense grid over the free parameters of the transport polytope locates
    the basin; a shrinking pattern search then refines the minimizer.  Used
    as the independent reference for the Sinkhorn solver.
    """
    c = _validated_cost(cost, marginals)
    n, m = c.shape
    if n * m > BRUTE_FORCE_MAX_CELLS:
        raise TooLargeError(f"{n}x{m} exceeds the {BRUTE_FORCE_MAX_CELLS}-cell oracle limit")
    u = marginals.row_weights
    v = marginals.col_weights

    if n == 1 or m == 1:
        plan = np.outer(u, v) / v.sum()
        row_res = float(np.abs(plan.sum(axis=1) - u).max())
        col_res = float(np.abs(plan.sum(axis=0) - v).max())
        return TransportPlan(plan, row_res, col_res, 0)

    dims = (n - 1) * (m - 1)
    uppers = np.array(
        [min(u[i], v[j]) for i in range(n - 1) for j in range(m - 1)]
    )

    axes = [np.linspace(0.0, upper, grid_points) for upper in uppers]
    mesh = np.array(list(itertools.product(*axes)))
    # seed the search with the product coupling as well
    product_free = independent_coupling(marginals)[: n - 1, : m - 1].reshape(1, dims)
    candidates = np.vstack([mesh, product_free])

    plans, feasible = _assemble_plans(candidates.reshape(-1, n - 1, m - 1), u, v)
    objectives = np.where(feasible, _objectives(plans, c, beta), np.inf)
    best_idx = int(np.argmin(objectives))
    best_x = candidates[best_idx]
    best_obj = float(objectives[best_idx])

    offsets = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=dims)))
    step = float(uppers.max()) / (grid_points - 1)
    rounds = 0
    while step > 1e-10 and rounds < 500:
        rounds += 1
        trial = np.clip(best_x[None, :] + step * offsets, 0.0, uppers[None, :])
        plans, feasible = _assemble_plans(trial.reshape(-1, n - 1, m - 1), u, v)
        objectives = np.where(feasible, _objectives(plans, c, beta), np.inf)
        idx = int(np.argmin(objectives))
        if objectives[idx] < best_obj:
            best_obj = float(objectives[idx])
            best_x = trial[idx]
        else:
            step *= 0.5

    plan, _ = _assemble_plans(best_x.reshape(1, n - 1, m - 1), u, v)
    plan = np.clip(plan[0], 0.0, None)
    row_res = float(np.abs(plan.sum(axis=1) - u).max())
    col_res = float(np.abs(plan.sum(axis=0) - v).max())
    return TransportPlan(plan, row_res, col_res, rounds)
