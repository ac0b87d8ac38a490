"""Closed-form variance of the walk estimator and speed-up analysis.

The variance of one walk's value decomposes into a first moment <h, x>
and a second-moment term driven by the squared-weight operators: the
per-slice matrices Hhat with entries H_ij^2 / P_ij, their m-fold product
Htilde, and the prefix-product sum G.  Everything here applies slices
matrix-free; dense products only ever appear in test oracles.
"""

import warnings
import numpy as np
from dataclasses import dataclass

from .sparse import matvec
from .transitions import (build_hypermatrix, initial_distribution_from)

_ENTRY_WARN_LIMIT = 1e12


class VarianceDiverged(RuntimeError):
    """The Neumann evaluation of the second-moment series did not converge."""


@dataclass(frozen=True)
class HatOperators:
    h_hat: np.ndarray
    hat_slices: tuple

    @property
    def m(self):
        return len(self.hat_slices)

    @property
    def n(self):
        return len(self.h_hat)


@dataclass(frozen=True)
class VarianceReport:
    variance: float
    first_moment: float
    second_moment_term: float
    h_tilde_norm: float
    neumann_iterations: int
    converged: bool


@dataclass(frozen=True)
class SpeedupResult:
    var_standard: float
    var_multiway: float
    speedup: float


@dataclass(frozen=True)
class DivergenceTrace:
    """Partial-sum behaviour of the second-moment series, plus an optional
    batched empirical variance trace.  growth_factors near rho(Htilde)."""
    term_values: np.ndarray
    partial_sums: np.ndarray
    growth_factors: np.ndarray
    empirical_variance_trace: np.ndarray
    diverging: bool


def build_hat_operators(problem, P, p):
    h, H = problem.h, problem.H
    bad = np.nonzero((h != 0.0) & (p.p == 0.0))[0]
    if len(bad):
        raise ValueError(f"p is zero at index {bad[0]} where h is nonzero")
    h_hat = np.zeros(problem.n)
    nz = h != 0.0
    h_hat[nz] = h[nz] ** 2 / p.p[nz]
    hat_slices = []
    for ell, sl in enumerate(P.slices):
        if np.any(sl.data <= 0.0):
            j = int(np.argmax(sl.data <= 0.0))
            raise ValueError(
                f"slice {ell + 1} has nonpositive probability at entry "
                f"({sl._rows[j]}, {sl.indices[j]})")
        hat_slices.append(sl.with_data(H.data ** 2 / sl.data))
    worst = max(float(h_hat.max(initial=0.0)),
                max(float(s.data.max()) for s in hat_slices))
    if worst > _ENTRY_WARN_LIMIT:
        warnings.warn(
            f"squared-weight operator entry {worst:.3e} is extremely large; "
            "tiny transition probabilities will dominate the variance",
            RuntimeWarning)
    return HatOperators(h_hat, tuple(hat_slices))


def apply_h_tilde(ops, v):
    """Htilde v = Hhat^(1) ... Hhat^(m) v, applied right to left."""
    w = np.asarray(v, dtype=np.float64)
    for sl in reversed(ops.hat_slices):
        w = matvec(sl, w)
    return w


def apply_G(ops, v):
    """G v = v + Hhat^(1) v + ... + Hhat^(1)...Hhat^(m-1) v by Horner."""
    v = np.asarray(v, dtype=np.float64)
    s = v
    for ell in range(ops.m - 1, 0, -1):
        s = v + matvec(ops.hat_slices[ell - 1], s)
    return s


def solve_x(problem, tol=1e-12, max_iters=1_000_000, dense_threshold=512):
    """Solution of x = Hx + b: dense direct solve for small n, otherwise
    Richardson iteration with divergence detection."""
    H, b = problem.H, problem.b
    n = problem.n
    if n <= dense_threshold:
        return np.linalg.solve(np.eye(n) - H.to_dense(), b)
    bnorm = max(float(np.abs(b).max()), 1e-300)
    x = b.copy()
    prev_res = np.inf
    growing = 0
    for _ in range(max_iters):
        x_new = matvec(H, x) + b
        res = float(np.abs(x_new - x).max())
        x = x_new
        if res <= tol * bnorm:
            return x
        if res > prev_res:
            growing += 1
            if growing >= 10:
                raise VarianceDiverged(
                    "Richardson iteration diverges: spectral radius of H "
                    "appears to be >= 1")
        else:
            growing = 0
        prev_res = res
    raise VarianceDiverged("Richardson iteration did not converge")


def _neumann_sum(ops, w, tol, max_cycles):
    """s = sum_i Htilde^i w; returns (s, cycles, converged)."""
    wnorm = float(np.abs(w).max(initial=0.0))
    if wnorm == 0.0:
        return np.zeros_like(w), 0, True
    s = w.copy()
    term = w
    prev = np.inf
    growing = 0
    for cycle in range(1, max_cycles + 1):
        term = apply_h_tilde(ops, term)
        s += term
        tnorm = float(np.abs(term).max())
        if tnorm <= tol * wnorm:
            return s, cycle, True
        if tnorm > prev:
            growing += 1
            if growing >= 20:
                return s, cycle, False
        else:
            growing = 0
        prev = tnorm
    return s, max_cycles, False


def closed_form_variance(problem, P, p, tol=1e-10, max_cycles=50_000,
                         x=None):
    """Var of a single walk value, via the resolvent series.

    Returns a diverged report (variance = nan) when the series does not
    converge within the budget; never a fabricated number.
    """
    ops = build_hat_operators(problem, P, p)
    if x is None:
        x = solve_x(problem)
    first = float(problem.h @ x)
    w = apply_G(ops, problem.b * (2.0 * matvec(problem.H, x) + problem.b))
    s, cycles, converged = _neumann_sum(ops, w, tol, max_cycles)
    htn = float(np.max(apply_h_tilde(ops, np.ones(problem.n))))
    if not converged:
        return VarianceReport(
            variance=float("nan"), first_moment=first,
            second_moment_term=float("nan"), h_tilde_norm=htn,
            neumann_iterations=cycles, converged=False)
    second = float(ops.h_hat @ s)
    return VarianceReport(
        variance=second - first * first, first_moment=first,
        second_moment_term=second, h_tilde_norm=htn,
        neumann_iterations=cycles, converged=True)


def speedup_vs_standard(problem, m, tol=1e-10, max_cycles=50_000):
    """Var of the 1-way walk divided by Var of the m-way walk, with both
    hypermatrices built fresh and the same initial distribution."""
    p = initial_distribution_from(problem.h)
    x = solve_x(problem)
    one = closed_form_variance(
        problem, build_hypermatrix(problem.H, 1), p, tol, max_cycles, x=x)
    if not one.converged:
        raise VarianceDiverged("1-way variance series diverged")
    multi = closed_form_variance(
        problem, build_hypermatrix(problem.H, m), p, tol, max_cycles, x=x)
    if not multi.converged:
        raise VarianceDiverged(f"{m}-way variance series diverged")
    return SpeedupResult(one.variance, multi.variance,
                         one.variance / multi.variance)


def divergence_demo(problem, P, p, budget=40, walk_batches=0,
                    batch_size=10_000, seed=0):
    """Empirical demonstration that the second-moment series can blow up.

    Runs the Neumann series for `budget` cycles and reports per-term
    growth factors; optionally traces the batched empirical sample
    variance, which fails to stabilize in the divergent regime.
    """
    ops = build_hat_operators(problem, P, p)
    x = solve_x(problem)
    w = apply_G(ops, problem.b * (2.0 * matvec(problem.H, x) + problem.b))
    terms = np.empty(budget + 1)
    terms[0] = float(ops.h_hat @ w)
    t = w
    for k in range(1, budget + 1):
        t = apply_h_tilde(ops, t)
        terms[k] = float(ops.h_hat @ t)
    sums = np.cumsum(terms)
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = np.abs(terms[1:]) / np.abs(terms[:-1])
    tail = growth[np.isfinite(growth)][-max(budget // 2, 1):]
    diverging = bool(len(tail)) and float(np.median(tail)) >= 1.0

    trace = np.empty(0)
    if walk_batches > 0:
        # only meaningful when every slice row is genuinely stochastic
        from .walk import WalkSpec, run_walks
        rows_ok = all(
            np.allclose(np.bincount(s._rows, weights=s.data,
                                    minlength=s.n_rows), 1.0, atol=1e-9)
            for s in P.slices)
        if rows_ok:
            spec = WalkSpec(epsilon=1e-8, max_steps=100_000,
                            num_walks=walk_batches * batch_size, seed=seed)
            z, _, _ = run_walks(problem, P, p, spec)
            trace = np.array([
                float(np.var(z[: (i + 1) * batch_size], ddof=1))
                for i in range(walk_batches)])
    return DivergenceTrace(terms, sums, growth, trace, diverging)
