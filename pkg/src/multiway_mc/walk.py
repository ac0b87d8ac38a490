"""Multi-way random-walk estimation of <h, x> for x = Hx + b."""

import math
import numpy as np
from dataclasses import dataclass

from . import kernels
from .sparse import ProblemInstance
from .transitions import TransitionHypermatrix, InitialDistribution


@dataclass(frozen=True)
class WalkSpec:
    epsilon: float = 1e-6
    max_steps: int = 100_000
    num_walks: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.num_walks < 1:
            raise ValueError("num_walks must be >= 1")


@dataclass(frozen=True)
class WalkOutcome:
    z_value: float
    steps_taken: int
    truncated_by_cap: bool


@dataclass(frozen=True)
class EstimateReport:
    estimate: float
    sample_variance: float
    probable_error: float
    mean_walk_length: float
    cap_hit_fraction: float
    num_walks: int


def default_max_steps(P, epsilon):
    """Step cap from the per-step decay proxy eta_max = (max eta)^(1/m),
    clipped to [100, 1_000_000]."""
    eta_max = float(np.max(P.eta_history[0])) ** (1.0 / P.m)
    if eta_max >= 1.0 or eta_max <= 0.0:
        steps = 1_000_000
    else:
        steps = 10 * math.ceil(math.log(epsilon) / math.log(eta_max))
    return int(min(max(steps, 100), 1_000_000))


def validate_walk_inputs(problem, P, p):
    """Batch-level precondition checks shared by all walk entry points."""
    H = problem.H
    n = problem.n
    if P.n != n or len(p.p) != n:
        raise ValueError("dimension mismatch between H, P and p")
    pat = P.slices[0]
    if not (np.array_equal(pat.indptr, H.indptr)
            and np.array_equal(pat.indices, H.indices)):
        raise ValueError("hypermatrix sparsity does not match H")
    for ell, s in enumerate(P.slices):
        if np.any(s.data <= 0.0):
            raise ValueError(f"slice {ell + 1} has nonpositive probabilities")
    bad = np.nonzero((problem.h != 0.0) & (p.p == 0.0))[0]
    if len(bad):
        raise ValueError(
            f"p is zero at index {bad[0]} where h is nonzero")


def _pack(P):
    """Stack slice probabilities and their per-row cumulative sums into
    (m, nnz) arrays for the kernel."""
    pat = P.slices[0]
    m, nnz = P.m, pat.nnz
    probs = np.empty((m, nnz))
    cdf = np.empty((m, nnz))
    for s, sl in enumerate(P.slices):
        probs[s] = sl.data
        for i in range(pat.n_rows):
            lo, hi = pat.indptr[i], pat.indptr[i + 1]
            cdf[s, lo:hi] = np.cumsum(probs[s, lo:hi])
    return probs, cdf


def run_walks(problem, P, p, spec, walk_offset=0):
    """Raw per-walk results: (z_values, steps, capped) arrays.

    Deterministic for fixed (spec.seed, walk_offset) regardless of
    threading; walk i uses RNG stream walk_offset + i.
    """
    validate_walk_inputs(problem, P, p)
    probs, cdf = _pack(P)
    p_cum = np.cumsum(p.p)
    out_z = np.empty(spec.num_walks)
    out_steps = np.empty(spec.num_walks, dtype=np.int64)
    out_capped = np.empty(spec.num_walks, dtype=np.bool_)
    with np.errstate(over="ignore"):  # uint64 RNG wraps by design
        kernels.run_walks(
            problem.H.indptr, problem.H.indices, problem.H.data,
            probs, cdf, problem.b, problem.h, p.p, p_cum,
            float(spec.epsilon), int(spec.max_steps), int(spec.num_walks),
            int(walk_offset), np.uint64(spec.seed & 0xFFFFFFFFFFFFFFFF),
            out_z, out_steps, out_capped)
    return out_z, out_steps, out_capped


def sample_walk(problem, P, p, spec, walk_index=0):
    """One walk from stream walk_index of spec.seed."""
    one = WalkSpec(epsilon=spec.epsilon, max_steps=spec.max_steps,
                   num_walks=1, seed=spec.seed)
    z, steps, capped = run_walks(problem, P, p, one, walk_offset=walk_index)
    return WalkOutcome(float(z[0]), int(steps[0]), bool(capped[0]))


def estimate_functional(problem, P, p, spec):
    """Mean of spec.num_walks independent walks with probable error."""
    if spec.num_walks < 2:
        raise ValueError("num_walks must be >= 2 for a sample variance")
    z, steps, capped = run_walks(problem, P, p, spec)
    mean = float(np.mean(z))
    var = float(np.var(z, ddof=1))
    return EstimateReport(
        estimate=mean,
        sample_variance=var,
        probable_error=0.6745 * math.sqrt(var / spec.num_walks),
        mean_walk_length=float(np.mean(steps)),
        cap_hit_fraction=float(np.mean(capped)),
        num_walks=spec.num_walks,
    )


def empirical_variance_of_Z(problem, P, p, spec):
    return estimate_functional(problem, P, p, spec).sample_variance
