import numpy as np
import pytest

from multiway_mc import (SparseMatrix, ProblemInstance, sprand_like,
                         rescale_to_radius)


def random_instance(n, rho, density=0.5, seed=0, signed=False):
    """Dense-ish random test instance with prescribed rho(|H|), uniform
    positive b and h.  No zero rows/columns by construction (density high
    enough and retried)."""
    rng = np.random.default_rng(seed)
    for retry in range(50):
        M = sprand_like(n, density, seed * 1000 + retry)
        if len(M.zero_rows()) == 0 and len(M.zero_cols()) == 0:
            break
    else:
        raise RuntimeError("could not build a test matrix")
    H = rescale_to_radius(M, rho)
    if signed:
        signs = rng.choice([-1.0, 1.0], size=H.nnz)
        H = H.with_data(H.data * signs)
    return ProblemInstance(H, rng.random(n), rng.random(n))


def dense_hat_slices(H, slices):
    """Explicit squared-weight slices (test oracle only)."""
    Hd = H.to_dense()
    out = []
    for sl in slices:
        Pd = sl.to_dense()
        hat = np.zeros_like(Hd)
        nz = Hd != 0
        hat[nz] = Hd[nz] ** 2 / Pd[nz]
        out.append(hat)
    return out


def dense_h_tilde(H, slices):
    hats = dense_hat_slices(H, slices)
    prod = hats[0]
    for hat in hats[1:]:
        prod = prod @ hat
    return prod


@pytest.fixture
def tiny_H():
    return SparseMatrix.from_dense([[0.2, 0.3], [0.4, 0.1]])
