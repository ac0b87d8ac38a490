"""Row-stochastic transition hypermatrix construction.

The m slices are built back-to-front: each pass propagates the row-sum
vector eta through |H| and normalizes the weighted rows.  Built slices are
never recomputed when m grows, so the walk order can be extended one slice
at a time until the contraction test max_i eta_i < 1 is met.
"""

import struct
import numpy as np
from dataclasses import dataclass

from .sparse import SparseMatrix, matvec, abs_matrix

# rows whose propagated weight drops below this are indistinguishable from
# all-zero rows and make the transition probabilities meaningless
_ETA_FLOOR = 1e-300

_DUMP_MAGIC = b"MWHM"
_DUMP_VERSION = 1


@dataclass(frozen=True)
class TransitionHypermatrix:
    """m row-stochastic slices sharing H's sparsity, in walk order.

    slices[0] drives the first step of the walk; eta_history[k] is the
    row-sum vector produced while building slices[k], so
    eta_history[0] = (|H|)^m e.
    """

    slices: tuple
    eta_history: tuple

    @property
    def m(self):
        return len(self.slices)

    @property
    def n(self):
        return self.slices[0].n_rows

    def h_tilde_norm(self):
        """Infinity norm of the m-slice squared-weight product, from the
        eta identity: max_i (eta^(1)_i)^2.  No matrices are formed."""
        return float(np.max(self.eta_history[0]) ** 2)

    def suffix(self, m):
        """The m-way hypermatrix embedded in this deeper build.  Extending
        a build prepends slices, so the last m slices are exactly what a
        fresh m-slice build would produce."""
        if not 1 <= m <= self.m:
            raise ValueError(f"need 1 <= m <= {self.m}, got {m}")
        return TransitionHypermatrix(self.slices[-m:], self.eta_history[-m:])


@dataclass(frozen=True)
class InitialDistribution:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class BuildOutcome:
    hypermatrix: TransitionHypermatrix
    h_tilde_norm: float
    converged: bool
    m_used: int
    phi_max_hit: bool


def initial_distribution_from(h):
    """MAO start: p_i proportional to |h_i|."""
    h = np.asarray(h, dtype=np.float64)
    total = np.abs(h).sum()
    if total == 0.0:
        raise ValueError("h must not be the zero vector")
    return InitialDistribution(np.abs(h) / total)


def _extend_one(absH, slices, etas):
    """Prepend one slice: the new first slice is normalized from the
    current front eta (all-ones on the first call)."""
    omega = etas[0] if etas else np.ones(absH.n_rows)
    eta = matvec(absH, omega)
    bad = np.nonzero(eta < _ETA_FLOOR)[0]
    if len(bad):
        raise ValueError(
            f"row {bad[0]} has vanishing transition weight "
            f"(eta = {eta[bad[0]]:.3e}); treat as an all-zero row")
    probs = omega[absH.indices] * absH.data / eta[absH._rows]
    # pin the row-stochastic invariant against accumulated rounding
    row_sums = np.bincount(absH._rows, weights=probs, minlength=absH.n_rows)
    probs /= row_sums[absH._rows]
    new_slice = absH.with_data(probs)
    return [new_slice] + slices, [eta] + etas


def build_hypermatrix(H, m):
    """Run the back-to-front construction for exactly m slices."""
    if m < 1:
        raise ValueError("m must be >= 1")
    zr = H.zero_rows()
    if len(zr):
        raise ValueError(f"H has all-zero row {zr[0]}")
    absH = abs_matrix(H)
    slices, etas = [], []
    for _ in range(m):
        slices, etas = _extend_one(absH, slices, etas)
    return TransitionHypermatrix(tuple(slices), tuple(etas))


def build_until_contractive(H, phi_max=64):
    """Grow m one slice at a time until all eta_i < 1 or m = phi_max."""
    if phi_max < 1:
        raise ValueError("phi_max must be >= 1")
    zr = H.zero_rows()
    if len(zr):
        raise ValueError(f"H has all-zero row {zr[0]}")
    absH = abs_matrix(H)
    slices, etas = [], []
    converged = False
    while len(slices) < phi_max:
        slices, etas = _extend_one(absH, slices, etas)
        if np.max(etas[0]) < 1.0:
            converged = True
            break
    P = TransitionHypermatrix(tuple(slices), tuple(etas))
    return BuildOutcome(
        hypermatrix=P,
        h_tilde_norm=P.h_tilde_norm(),
        converged=converged,
        m_used=P.m,
        phi_max_hit=not converged and P.m == phi_max,
    )


def h_tilde_norm(obj):
    """Accepts a BuildOutcome or a TransitionHypermatrix."""
    if isinstance(obj, BuildOutcome):
        return obj.h_tilde_norm
    return obj.h_tilde_norm()


def dump_hypermatrix(P, path):
    """Binary dump: header (magic, version, n, m, nnz), shared CSR pattern,
    then per-slice values and eta vectors, all little-endian."""
    pat = P.slices[0]
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<IQQQ", _DUMP_VERSION, pat.n_rows, P.m, pat.nnz))
        fh.write(pat.indptr.astype("<i8").tobytes())
        fh.write(pat.indices.astype("<i8").tobytes())
        for s in P.slices:
            fh.write(s.data.astype("<f8").tobytes())
        for eta in P.eta_history:
            fh.write(eta.astype("<f8").tobytes())


def load_hypermatrix(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise ValueError(f"{path}: not a hypermatrix dump")
        version, n, m, nnz = struct.unpack("<IQQQ", fh.read(28))
        if version != _DUMP_VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        indptr = np.frombuffer(fh.read(8 * (n + 1)), dtype="<i8").astype(np.int64)
        indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8").astype(np.int64)
        slices = []
        for _ in range(m):
            data = np.frombuffer(fh.read(8 * nnz), dtype="<f8").astype(np.float64)
            slices.append(SparseMatrix(n, n, indptr, indices, data))
        etas = []
        for _ in range(m):
            etas.append(np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64))
    return TransitionHypermatrix(tuple(slices), tuple(etas))
