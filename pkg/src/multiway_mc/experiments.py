"""Synthetic problem generation and the ratio / speed-up experiments."""

import numpy as np
from dataclasses import dataclass

from .sparse import (ProblemInstance, sprand_like, rescale_to_radius, matvec,
                     abs_matrix)
from .transitions import build_hypermatrix
from .variance import (closed_form_variance, solve_x, VarianceDiverged)
from . import transitions

# Appendix-B style degenerate matrices (|H| e constant) make every slice
# identical, so they are excluded from speed-up statistics
_CONSTANT_ROWSUM_TOL = 1e-12


@dataclass(frozen=True)
class RatioRow:
    rho: float
    m: int
    solvable_fraction: float
    trials: int


@dataclass(frozen=True)
class SpeedupRow:
    rho: float
    m: int
    mean_speedup: float
    trials_used: int
    trials_excluded: int


def trial_seed(seed, *indices):
    """Stable per-trial sub-seed derived from the master seed."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *indices])
    return int(ss.generate_state(1)[0])


def synthesize_H(n, density, rho, seed, max_retries=100):
    """sprand + rescale; regenerates on zero rows/columns (possible at low
    density).  Returns (H, retries)."""
    for retry in range(max_retries + 1):
        M = sprand_like(n, density, trial_seed(seed, retry))
        if len(M.zero_rows()) == 0 and len(M.zero_cols()) == 0:
            return rescale_to_radius(M, rho), retry
    raise RuntimeError(
        f"could not generate a matrix without zero rows/columns in "
        f"{max_retries} retries (n={n}, density={density})")


def random_problem(n, density, rho, seed):
    """Synthetic instance in the style of the experiments: H from
    sprand/rescale, b and h uniform on (0, 1)."""
    H, _ = synthesize_H(n, density, rho, seed)
    rng = np.random.default_rng(trial_seed(seed, 999))
    return ProblemInstance(H, rng.random(n), rng.random(n))


def solvability_by_m(H, max_m):
    """eta_max(m) = max element of (|H|)^m e for m = 1..max_m.

    This is the builder's recurrence without materializing slices; the
    m-way walk is solvable (norm of the squared-weight product < 1) iff
    eta_max(m) < 1.
    """
    absH = abs_matrix(H)
    v = np.ones(H.n_rows)
    out = np.empty(max_m)
    for k in range(max_m):
        v = matvec(absH, v)
        out[k] = v.max()
    return out


def has_constant_abs_rowsums(H, tol=_CONSTANT_ROWSUM_TOL):
    sums = matvec(abs_matrix(H), np.ones(H.n_rows))
    return float(sums.max() - sums.min()) <= tol


def run_ratio_experiment(n, density, radius_list, m_list, trials, seed):
    """Fraction of random problems solvable per (rho, m) cell.  The same
    matrix set is shared across m within a rho so fractions are comparable."""
    m_list = sorted(m_list)
    max_m = m_list[-1]
    rows = []
    for rho in radius_list:
        solvable = np.zeros(len(m_list), dtype=np.int64)
        for t in range(trials):
            H, _ = synthesize_H(n, density, rho, trial_seed(seed, 0, t))
            eta_max = solvability_by_m(H, max_m)
            for j, m in enumerate(m_list):
                if eta_max[m - 1] < 1.0:
                    solvable[j] += 1
        for j, m in enumerate(m_list):
            rows.append(RatioRow(rho, m, solvable[j] / trials, trials))
    return rows


def run_speedup_experiment(n, density, radius_list, m_list, trials, seed,
                           tol=1e-10, max_cycles=50_000):
    """Mean Var[1-way] / Var[m-way] per (rho, m) cell.

    A trial is excluded for a whole rho when the matrix has constant |H| e
    (the multi-way walk degenerates to the standard one) or when the 1-way
    variance series diverges; per-cell when the m-way series diverges.
    """
    m_list = sorted(m_list)
    if 1 in m_list:
        raise ValueError("m_list must not contain 1 (the implicit baseline)")
    max_m = m_list[-1]
    rows = []
    for rho in radius_list:
        sums = np.zeros(len(m_list))
        used = np.zeros(len(m_list), dtype=np.int64)
        for t in range(trials):
            s = trial_seed(seed, 1, t)
            problem = _speedup_trial_problem(n, density, rho, s)
            if problem is None:
                continue
            full = build_hypermatrix(problem.H, max_m)
            p = transitions.initial_distribution_from(problem.h)
            x = solve_x(problem, dense_threshold=2048)
            one = closed_form_variance(problem, full.suffix(1), p,
                                       tol, max_cycles, x=x)
            if not one.converged:
                continue
            for j, m in enumerate(m_list):
                multi = closed_form_variance(problem, full.suffix(m), p,
                                             tol, max_cycles, x=x)
                if multi.converged and multi.variance > 0.0:
                    sums[j] += one.variance / multi.variance
                    used[j] += 1
        for j, m in enumerate(m_list):
            mean = sums[j] / used[j] if used[j] else float("nan")
            rows.append(SpeedupRow(rho, m, mean, int(used[j]),
                                   trials - int(used[j])))
    return rows


def _speedup_trial_problem(n, density, rho, seed):
    problem = random_problem(n, density, rho, seed)
    if has_constant_abs_rowsums(problem.H):
        return None
    return problem
