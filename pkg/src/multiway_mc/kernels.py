"""Hot walk-simulation kernels.

Compiled with numba by default; set MULTIWAY_MC_NO_NUMBA=1 to run the
identical code as plain Python/numpy (slow, but bit-identical output).
The per-walk RNG is a splitmix64 stream keyed by (seed, walk index), so
results never depend on thread scheduling.
"""

import os
import numpy as np

USE_NUMBA = os.environ.get("MULTIWAY_MC_NO_NUMBA", "").lower() not in (
    "1", "true", "yes")

if USE_NUMBA:
    from numba import njit, prange
else:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

    prange = range

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD2B74407B1CE6E93)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _stream_state(seed, walk_index):
    return _mix64(seed ^ ((np.uint64(walk_index) + _ONE) * _STREAM))


@njit(cache=True)
def _uniform(state):
    """Advance one splitmix64 step; returns (new_state, u in [0, 1))."""
    state = state + _GOLDEN
    return state, float(_mix64(state) >> _S11) * _INV53


@njit(cache=True)
def _pick(cdf, u):
    """First index with cdf[idx] > u, clamped to the last bin.  The strict
    inequality skips zero-probability entries sitting on flat segments."""
    idx = np.searchsorted(cdf, u, side="right")
    if idx >= len(cdf):
        idx = len(cdf) - 1
    return idx


@njit(cache=True, parallel=True)
def run_walks(indptr, indices, hdata, probs, cdf, b, h, p, p_cum,
              eps, max_steps, num_walks, walk_offset, seed,
              out_z, out_steps, out_capped):
    """Simulate num_walks truncated multi-way walks.

    probs/cdf are (m, nnz): per-slice transition probabilities on H's CSR
    pattern and their within-row cumulative sums.  Walk w uses RNG stream
    walk_offset + w.  Each walk accumulates z = sum_l W_l b_{k_l}, stopping
    at the first step with |W| <= eps |W_0| or at max_steps.
    """
    m = probs.shape[0]
    base = np.uint64(seed)
    for w in prange(num_walks):
        state = _stream_state(base, walk_offset + w)
        state, u = _uniform(state)
        k = _pick(p_cum, u)
        weight = h[k] / p[k]
        z = weight * b[k]
        thresh = eps * abs(weight)
        steps = 0
        capped = False
        while True:
            if steps >= max_steps:
                capped = True
                break
            s = steps % m
            lo = indptr[k]
            hi = indptr[k + 1]
            state, u = _uniform(state)
            idx = lo + _pick(cdf[s, lo:hi], u)
            weight *= hdata[idx] / probs[s, idx]
            k = indices[idx]
            z += weight * b[k]
            steps += 1
            if abs(weight) <= thresh:
                break
        out_z[w] = z
        out_steps[w] = steps
        out_capped[w] = capped
