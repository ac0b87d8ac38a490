import numpy as np
import pytest

from multiway_mc import (SparseMatrix, matvec, abs_matrix, infinity_norm,
                         build_hypermatrix, build_until_contractive,
                         h_tilde_norm, initial_distribution_from,
                         dump_hypermatrix, load_hypermatrix,
                         rescale_to_radius, sprand_like)

from conftest import dense_h_tilde


def test_single_slice_is_row_normalized_abs(tiny_H):
    P = build_hypermatrix(tiny_H, 1)
    assert np.allclose(P.slices[0].to_dense(), [[0.4, 0.6], [0.8, 0.2]])


def test_two_slice_trace(tiny_H):
    P = build_hypermatrix(tiny_H, 2)
    # |H| e is constant for this matrix, so both slices coincide
    assert np.allclose(P.slices[1].to_dense(), [[0.4, 0.6], [0.8, 0.2]])
    assert np.allclose(P.slices[0].to_dense(), [[0.4, 0.6], [0.8, 0.2]])
    assert np.allclose(P.eta_history[1], [0.5, 0.5])
    assert np.allclose(P.eta_history[0], [0.25, 0.25])


def test_h_tilde_norm_values(tiny_H):
    assert h_tilde_norm(build_hypermatrix(tiny_H, 1)) == pytest.approx(
        infinity_norm(tiny_H) ** 2, abs=1e-12)
    assert h_tilde_norm(build_hypermatrix(tiny_H, 2)) == pytest.approx(
        0.0625, abs=1e-12)
    D = SparseMatrix.from_dense(np.diag([0.5, 0.5]))
    for m in (1, 2, 3):
        assert h_tilde_norm(build_hypermatrix(D, m)) == pytest.approx(
            (0.5 ** m) ** 2, abs=1e-12)


def test_rows_are_stochastic():
    H = rescale_to_radius(sprand_like(40, 0.3, 3), 0.8)
    P = build_hypermatrix(H, 4)
    for sl in P.slices:
        sums = np.bincount(sl._rows, weights=sl.data, minlength=40)
        assert np.allclose(sums, 1.0, atol=1e-12)
        assert np.array_equal(sl.indptr, H.indptr)
        assert np.array_equal(sl.indices, H.indices)
        assert np.all(sl.data > 0)


def test_eta_is_abs_power_of_ones():
    H = rescale_to_radius(sprand_like(30, 0.4, 9), 0.9)
    m = 4
    P = build_hypermatrix(H, m)
    v = np.ones(30)
    for _ in range(m):
        v = matvec(abs_matrix(H), v)
    assert np.max(np.abs(P.eta_history[0] - v)) <= 1e-12 * np.max(v)


def test_constant_rowsum_slices_identical():
    # |H| e = gamma e: the multi-way build degenerates to the 1-way one
    rng = np.random.default_rng(12)
    dense = rng.random((6, 6)) * rng.choice([-1, 1], size=(6, 6))
    dense *= (0.7 / np.abs(dense).sum(axis=1))[:, None]
    H = SparseMatrix.from_dense(dense)
    P = build_hypermatrix(H, 4)
    first = P.slices[0].to_dense()
    for sl in P.slices[1:]:
        assert np.max(np.abs(sl.to_dense() - first)) <= 1e-14


def test_build_until_contractive_stops_at_one(tiny_H):
    out = build_until_contractive(tiny_H, phi_max=5)
    assert out.m_used == 1
    assert out.converged
    assert not out.phi_max_hit


def test_contractive_despite_norm_above_one():
    # infinity norm 1.2-ish but small spectral radius: finite m suffices
    H = SparseMatrix.from_dense([[0.1, 1.1], [0.2, 0.1]])
    assert infinity_norm(H) > 1.0
    out = build_until_contractive(H, phi_max=64)
    assert out.converged
    assert out.h_tilde_norm < 1.0


def test_never_contractive_above_radius_one():
    H = rescale_to_radius(sprand_like(25, 0.4, 4), 0.5)
    grown = H.with_data(H.data * (1.05 / 0.5))
    out = build_until_contractive(grown, phi_max=50)
    assert not out.converged
    assert out.phi_max_hit
    assert out.m_used == 50


def test_incremental_matches_fresh_builds():
    H = rescale_to_radius(sprand_like(20, 0.4, 8), 0.97)
    out = build_until_contractive(H, phi_max=64)
    assert out.converged
    for k in range(1, out.m_used + 1):
        fresh = build_hypermatrix(H, k)
        sub = out.hypermatrix.suffix(k)
        for a, b in zip(fresh.slices, sub.slices):
            assert np.array_equal(a.data, b.data)
        for ea, eb in zip(fresh.eta_history, sub.eta_history):
            assert np.array_equal(ea, eb)


def test_contractive_whenever_radius_below_one():
    # forward direction of the iff: rho(|H|) < 0.99 always reaches a
    # contractive m
    for seed in range(8):
        n = 20 + 20 * seed
        H = rescale_to_radius(sprand_like(n, 0.2, seed + 100), 0.3 + 0.08 * seed)
        out = build_until_contractive(H, phi_max=200)
        assert out.converged, f"seed {seed} failed"


def test_minimality_small_scale():
    # Algorithm-built hypermatrix is never beaten by random row-stochastic
    # competitors sharing the sparsity pattern (small smoke version of the
    # acceptance run)
    rng = np.random.default_rng(77)
    for trial in range(20):
        n = int(rng.integers(3, 9))
        H = rescale_to_radius(sprand_like(n, 0.6, 5000 + trial), 0.8)
        m = int(rng.integers(1, 4))
        P = build_hypermatrix(H, m)
        ours = np.abs(dense_h_tilde(H, P.slices)).sum(axis=1).max()
        for _ in range(20):
            comp = []
            for _ in range(m):
                vals = rng.random(H.nnz) + 1e-3
                sums = np.bincount(H._rows, weights=vals, minlength=n)
                comp.append(H.with_data(vals / sums[H._rows]))
            theirs = np.abs(dense_h_tilde(H, comp)).sum(axis=1).max()
            assert theirs >= ours - 1e-10


def test_all_zero_row_rejected():
    H = SparseMatrix.from_coo(2, 2, [0, 0], [0, 1], [0.5, 0.5])
    with pytest.raises(ValueError, match="zero row 1"):
        build_hypermatrix(H, 1)


def test_initial_distribution_examples():
    p = initial_distribution_from([1.0, 3.0])
    assert np.allclose(p.p, [0.25, 0.75])
    p2 = initial_distribution_from([0.0, -2.0, 2.0])
    assert np.allclose(p2.p, [0, 0.5, 0.5])
    p3 = initial_distribution_from(np.ones(4))
    assert np.allclose(p3.p, 0.25)
    with pytest.raises(ValueError, match="zero"):
        initial_distribution_from([0.0, 0.0])


def test_dump_load_roundtrip(tmp_path):
    H = rescale_to_radius(sprand_like(15, 0.3, 21), 0.9)
    P = build_hypermatrix(H, 3)
    path = tmp_path / "hyper.bin"
    dump_hypermatrix(P, path)
    Q = load_hypermatrix(path)
    assert Q.m == P.m
    for a, b in zip(P.slices, Q.slices):
        assert np.array_equal(a.data, b.data)
        assert np.array_equal(a.indices, b.indices)
    for ea, eb in zip(P.eta_history, Q.eta_history):
        assert np.array_equal(ea, eb)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="not a hypermatrix"):
        load_hypermatrix(path)
