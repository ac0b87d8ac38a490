"""CSR sparse matrices, Matrix Market I/O, preconditioning and synthesis."""

import numpy as np
from dataclasses import dataclass, field


class MatrixFormatError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge within the iteration budget."""

    def __init__(self, msg, iterations):
        super().__init__(msg)
        self.iterations = iterations


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable CSR matrix.

    Stored entries are never exactly zero and column indices are strictly
    increasing within each row.  Use the class methods to construct; they
    enforce both invariants.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray   # int64, len n_rows + 1
    indices: np.ndarray  # int64, len nnz
    data: np.ndarray     # float64, len nnz
    # row index of each stored entry; cached for bincount-based matvec
    _rows: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._rows is None:
            rows = np.repeat(
                np.arange(self.n_rows, dtype=np.int64), np.diff(self.indptr)
            )
            object.__setattr__(self, "_rows", rows)

    @property
    def nnz(self):
        return len(self.data)

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals):
        """Build from coordinate triplets: duplicates summed, zeros dropped."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of range")
        # sum duplicates via a flat key
        key = rows * n_cols + cols
        order = np.argsort(key, kind="stable")
        key = key[order]
        vals = vals[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals, start) if len(vals) else vals
        keep = summed != 0.0
        uniq, summed = uniq[keep], summed[keep]
        rows = uniq // n_cols
        cols = uniq % n_cols
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n_rows, n_cols, indptr, cols.astype(np.int64), summed)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols))
        out[self._rows, self.indices] = self.data
        return out

    def row_slice(self, i):
        """(columns, values) of row i as views."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def with_data(self, data):
        """Same sparsity pattern, new values (must contain no exact zeros)."""
        data = np.asarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise ValueError("data length does not match sparsity pattern")
        return SparseMatrix(
            self.n_rows, self.n_cols, self.indptr, self.indices, data, self._rows
        )

    def zero_rows(self):
        """Indices of structurally empty rows."""
        return np.nonzero(np.diff(self.indptr) == 0)[0]

    def zero_cols(self):
        present = np.zeros(self.n_cols, dtype=bool)
        present[self.indices] = True
        return np.nonzero(~present)[0]


@dataclass(frozen=True)
class ProblemInstance:
    """A square system x = Hx + b with a functional weight vector h."""

    H: SparseMatrix
    b: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = self.H
        if H.n_rows != H.n_cols:
            raise ValueError("H must be square")
        b = np.asarray(self.b, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        if b.shape != (H.n_rows,) or h.shape != (H.n_rows,):
            raise ValueError("b and h must have length n")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "h", h)
        zr = H.zero_rows()
        if len(zr):
            raise ValueError(f"H has all-zero row {zr[0]}")
        zc = H.zero_cols()
        if len(zc):
            raise ValueError(f"H has all-zero column {zc[0]}")
        if not np.any(h):
            raise ValueError("h must not be the zero vector")

    @property
    def n(self):
        return self.H.n_rows


def matvec(M, v):
    """Mv for CSR M."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (M.n_cols,):
        raise ValueError(f"dimension mismatch: matrix is {M.n_rows}x{M.n_cols}, "
                         f"vector has length {v.shape}")
    return np.bincount(M._rows, weights=M.data * v[M.indices],
                       minlength=M.n_rows)


def abs_matrix(M):
    return M.with_data(np.abs(M.data))


def infinity_norm(M):
    if M.nnz == 0:
        return 0.0
    sums = np.bincount(M._rows, weights=np.abs(M.data), minlength=M.n_rows)
    return float(sums.max())


def spectral_radius_nonneg(M, tol=1e-10, max_iters=10_000):
    """Dominant eigenvalue of a nonnegative matrix by power iteration.

    Starts from the all-ones vector (never orthogonal to the Perron vector)
    and stops when successive Rayleigh quotients agree to tol.
    """
    if np.any(M.data < 0):
        raise ValueError("matrix must be nonnegative")
    if len(M.zero_rows()):
        raise ValueError(f"matrix has all-zero row {M.zero_rows()[0]}")
    x = np.ones(M.n_rows)
    lam = 0.0
    for it in range(max_iters):
        y = matvec(M, x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        lam_new = float(x @ y) / float(x @ x)
        x = y / norm
        if abs(lam_new - lam) < tol:
            return lam_new
        lam = lam_new
    raise PowerIterationError(
        f"power iteration did not converge in {max_iters} iterations "
        "(cyclic or ill-conditioned structure?)", max_iters)


def spectral_radius(M, tol=1e-10, max_iters=10_000, dense_fallback_n=64):
    """spectral_radius_nonneg with a dense eigensolve fallback for small n."""
    try:
        return spectral_radius_nonneg(M, tol=tol, max_iters=max_iters)
    except PowerIterationError:
        if M.n_rows <= dense_fallback_n:
            return float(np.max(np.abs(np.linalg.eigvals(M.to_dense()))))
        raise


def load_matrix_market(path):
    """Read a coordinate Matrix Market file (real, general or symmetric)."""
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.strip().lower().split()
        if len(parts) != 5 or parts[0] != "%%matrixmarket":
            raise MatrixFormatError(f"{path}:1: not a Matrix Market header")
        _, obj, fmt, fieldkind, symmetry = parts
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixFormatError(
                f"{path}:1: only coordinate matrix files are supported")
        if fieldkind not in ("real", "integer"):
            raise MatrixFormatError(
                f"{path}:1: unsupported field type '{fieldkind}' "
                "(only real is supported)")
        if symmetry not in ("general", "symmetric"):
            raise MatrixFormatError(
                f"{path}:1: unsupported symmetry '{symmetry}' "
                "(only general and symmetric are supported)")
        lineno = 1
        size_line = None
        for line in fh:
            lineno += 1
            stripped = line.strip()
            if stripped and not stripped.startswith("%"):
                size_line = stripped
                break
        if size_line is None:
            raise MatrixFormatError(f"{path}: missing size line")
        try:
            n_rows, n_cols, nnz = map(int, size_line.split())
        except ValueError:
            raise MatrixFormatError(f"{path}:{lineno}: bad size line") from None
        rows, cols, vals = [], [], []
        for line in fh:
            lineno += 1
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            toks = stripped.split()
            try:
                i, j = int(toks[0]), int(toks[1])
                v = float(toks[2])
            except (ValueError, IndexError):
                raise MatrixFormatError(
                    f"{path}:{lineno}: malformed entry line") from None
            if not (1 <= i <= n_rows and 1 <= j <= n_cols):
                raise MatrixFormatError(
                    f"{path}:{lineno}: index ({i},{j}) out of range")
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            if symmetry == "symmetric" and i != j:
                rows.append(j - 1)
                cols.append(i - 1)
                vals.append(v)
    if symmetry == "general" and len(vals) != nnz:
        raise MatrixFormatError(
            f"{path}: expected {nnz} entries, found {len(vals)}")
    return SparseMatrix.from_coo(n_rows, n_cols, rows, cols, vals)


def diagonal_precondition(A):
    """H = I - Diag(A)^-1 A; the diagonal of H is structurally absent."""
    if A.n_rows != A.n_cols:
        raise ValueError("matrix must be square")
    dense_diag = np.zeros(A.n_rows)
    on_diag = A._rows == A.indices
    dense_diag[A._rows[on_diag]] = A.data[on_diag]
    missing = np.nonzero(dense_diag == 0.0)[0]
    if len(missing):
        raise ValueError(f"zero diagonal entry in row {missing[0]}")
    off = ~on_diag
    vals = -A.data[off] / dense_diag[A._rows[off]]
    return SparseMatrix.from_coo(
        A.n_rows, A.n_cols, A._rows[off], A.indices[off], vals)


def sprand_like(n, density, seed):
    """n x n random sparse matrix with iid Bernoulli(density) fill and
    uniform(0,1) values; deterministic for a fixed seed."""
    if not 0.0 < density <= 1.0:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < density
    rows, cols = np.nonzero(mask)
    vals = rng.random(len(rows))
    return SparseMatrix.from_coo(n, n, rows, cols, vals)


def rescale_to_radius(M, r, tol=1e-10, max_iters=10_000):
    """Scale a nonnegative M so its spectral radius becomes r."""
    if not 0.0 < r < 1.0:
        raise ValueError("target radius must be in (0, 1)")
    rho = spectral_radius(M, tol=tol, max_iters=max_iters)
    if rho == 0.0:
        raise ValueError("cannot rescale a nilpotent-like matrix with rho = 0")
    return M.with_data(M.data * (r / rho))
