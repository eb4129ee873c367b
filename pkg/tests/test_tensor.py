import numpy as np
import pytest

from forumevents.tensor import (
    CPModel,
    SolverOptions,
    SparseTensor3,
    autoten_rank,
    core_tensor,
    corcondia,
    cp_als_nn_l1,
    cp_apr,
    load_factors,
    mttkrp,
    reconstruct,
    reconstruct_dense,
    save_factors,
)
from oracles import dense_core, dense_mttkrp, dense_reconstruct, jaccard


def random_model(rng, shape, rank, scale=1.0):
    return CPModel(
        rank=rank,
        U=rng.uniform(0, scale, (shape[0], rank)),
        T=rng.uniform(0, scale, (shape[1], rank)),
        W=rng.uniform(0, scale, (shape[2], rank)),
    )


def planted_tensor(rng, shape, rank, scale=2.0):
    model = random_model(rng, shape, rank, scale)
    return SparseTensor3.from_dense(reconstruct_dense(model)), model


def random_sparse(rng, shape, density=0.3):
    dense = rng.poisson(1.0, shape) * (rng.random(shape) < density)
    if dense.sum() == 0:
        dense[0, 0, 0] = 1
    return SparseTensor3.from_dense(dense.astype(float))


# ---------------------------------------------------------------- reconstruct


def test_reconstruct_rank1_by_hand():
    m = CPModel(rank=1, U=np.full((3, 1), 2.0), T=np.full((4, 1), 3.0), W=np.full((2, 1), 5.0))
    assert reconstruct(m, (1, 2, 0)) == pytest.approx(30.0)


def test_reconstruct_zero_week_factor():
    rng = np.random.default_rng(0)
    m = random_model(rng, (3, 3, 3), 2)
    m.W[1, :] = 0.0
    for i in range(3):
        for j in range(3):
            assert reconstruct(m, (i, j, 1)) == 0.0


def test_reconstruct_matches_triple_loop():
    rng = np.random.default_rng(1)
    m = random_model(rng, (2, 2, 2), 2)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert reconstruct(m, (i, j, k)) == pytest.approx(
                    dense_reconstruct(m, (i, j, k)), abs=1e-12)


def test_reconstruct_out_of_range():
    m = CPModel(rank=1, U=np.ones((2, 1)), T=np.ones((2, 1)), W=np.ones((2, 1)))
    with pytest.raises(IndexError):
        reconstruct(m, (2, 0, 0))


# ---------------------------------------------------------------------- mttkrp


def test_mttkrp_zero_tensor():
    x = SparseTensor3.from_entries((3, 3, 3), [], [])
    rng = np.random.default_rng(2)
    m = random_model(rng, (3, 3, 3), 2)
    for mode in ("user", "thread", "week"):
        assert np.all(mttkrp(x, m, mode) == 0.0)


@pytest.mark.parametrize("shape", [(2, 2, 2), (3, 3, 3), (4, 5, 3)])
def test_mttkrp_matches_dense_oracle(shape):
    rng = np.random.default_rng(3)
    x = random_sparse(rng, shape)
    m = random_model(rng, shape, 3)
    dense = x.to_dense()
    for mode_i, mode in enumerate(("user", "thread", "week")):
        got = mttkrp(x, m, mode)
        want = dense_mttkrp(dense, m.U, m.T, m.W, mode_i)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_mttkrp_shape_mismatch():
    x = SparseTensor3.from_entries((3, 3, 3), [(0, 0, 0)], [1.0])
    m = random_model(np.random.default_rng(0), (2, 3, 3), 2)
    with pytest.raises(ValueError):
        mttkrp(x, m, "user")


# ----------------------------------------------------------------- cp_als_nn_l1


def test_als_recovers_planted_rank2():
    rng = np.random.default_rng(7)
    x, _ = planted_tensor(rng, (8, 9, 7), 2)
    model = cp_als_nn_l1(x, 2, SolverOptions(lam=0.0, max_sweeps=2000, tolerance=1e-14, seed=5))
    err = np.linalg.norm(x.to_dense() - reconstruct_dense(model)) / x.norm()
    assert err <= 1e-6


def test_als_l1_sparsifies():
    rng = np.random.default_rng(8)
    dense = np.zeros((10, 10, 6))
    dense[:4, :4, :2] = 3.0
    dense[6:, 6:, 4:] = 3.0
    dense += rng.poisson(0.2, dense.shape)
    x = SparseTensor3.from_dense(dense)
    counts = []
    for lam in (0.0, 1.0):
        m = cp_als_nn_l1(x, 2, SolverOptions(lam=lam, seed=3))
        counts.append(sum(int((f > 0).sum()) for f in m.factors()))
    assert counts[1] <= counts[0]


def test_als_sparsity_monotone_in_lambda():
    rng = np.random.default_rng(9)
    x = random_sparse(rng, (8, 8, 8), density=0.5)
    counts = []
    for lam in (0.0, 0.5, 1.0, 2.0):
        m = cp_als_nn_l1(x, 3, SolverOptions(lam=lam, seed=11))
        counts.append(sum(int((f > 0).sum()) for f in m.factors()))
    assert counts == sorted(counts, reverse=True)


@pytest.mark.parametrize("seed", range(5))
def test_als_contracts(seed):
    rng = np.random.default_rng(seed)
    x = random_sparse(rng, (6, 7, 5), density=0.4)
    m = cp_als_nn_l1(x, 3, SolverOptions(lam=1.0, seed=seed))
    trace = np.array(m.objective_trace)
    assert np.all(trace[1:] <= trace[:-1] * (1 + 1e-8))
    assert all(f.min() >= 0 for f in m.factors())


def test_als_determinism():
    rng = np.random.default_rng(12)
    x = random_sparse(rng, (6, 6, 6), density=0.4)
    m1 = cp_als_nn_l1(x, 3, SolverOptions(lam=1.0, seed=42))
    m2 = cp_als_nn_l1(x, 3, SolverOptions(lam=1.0, seed=42))
    for a, b in zip(m1.factors(), m2.factors()):
        assert np.array_equal(a, b)
    assert m1.objective_trace == m2.objective_trace


def test_als_rank_above_min_dim_warns():
    x = SparseTensor3.from_entries((2, 5, 5), [(0, 0, 0), (1, 1, 1)], [1.0, 2.0])
    with pytest.warns(UserWarning):
        cp_als_nn_l1(x, 3, SolverOptions(max_sweeps=5))


# --------------------------------------------------------------------- cp_apr


def test_apr_rank1_uniform_counts():
    dense = np.full((4, 5, 3), 2.0)
    x = SparseTensor3.from_dense(dense)
    m = cp_apr(x, 1, SolverOptions(max_sweeps=500, tolerance=1e-12, seed=1))
    approx = reconstruct_dense(m)
    assert np.all(np.abs(approx - dense) / dense <= 0.01)


def test_apr_kl_trace_non_increasing():
    rng = np.random.default_rng(13)
    for seed in range(4):
        x = random_sparse(rng, (6, 6, 6), density=0.4)
        m = cp_apr(x, 2, SolverOptions(seed=seed))
        trace = np.array(m.objective_trace)
        slack = 1e-8 * np.maximum(np.abs(trace[:-1]), 1.0)
        assert np.all(trace[1:] <= trace[:-1] + slack)


def test_apr_planted_blocks_support_recovery():
    rng = np.random.default_rng(14)
    dense = np.zeros((12, 12, 8))
    dense[:5, :5, :3] = rng.poisson(6.0, (5, 5, 3))
    dense[7:, 7:, 5:] = rng.poisson(6.0, (5, 5, 3))
    x = SparseTensor3.from_dense(dense.astype(float))
    m = cp_apr(x, 2, SolverOptions(max_sweeps=500, seed=2))
    blocks = [(set(range(5)), set(range(5)), set(range(3))),
              (set(range(7, 12)), set(range(7, 12)), set(range(5, 8)))]
    for r in range(2):
        support = [set(np.nonzero(f[:, r] > 0.1 * f[:, r].max())[0]) for f in m.factors()]
        best = max(
            min(jaccard(s, b) for s, b in zip(support, block))
            for block in blocks
        )
        assert best >= 0.8


def test_apr_zero_tensor_errors():
    x = SparseTensor3.from_entries((3, 3, 3), [], [])
    with pytest.raises(ValueError, match="degenerate"):
        cp_apr(x, 1)


# ------------------------------------------------------------------ corcondia


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_corcondia_exact_at_true_rank(rank):
    rng = np.random.default_rng(20 + rank)
    x, model = planted_tensor(rng, (6, 7, 5), rank)
    fitted = cp_als_nn_l1(x, rank, SolverOptions(lam=0.0, max_sweeps=3000, tolerance=1e-15, seed=4))
    assert corcondia(x, fitted) == pytest.approx(100.0, abs=1e-6)


def test_corcondia_degrades_when_overfactored():
    rng = np.random.default_rng(25)
    x, _ = planted_tensor(rng, (6, 7, 5), 2)
    at_true = corcondia(x, cp_als_nn_l1(x, 2, SolverOptions(lam=0.0, max_sweeps=3000, tolerance=1e-15, seed=4)))
    over = corcondia(x, cp_als_nn_l1(x, 3, SolverOptions(lam=0.0, max_sweeps=3000, tolerance=1e-15, seed=4)))
    assert over < at_true
    assert over < 100.0 - 1e-6


def test_core_matches_dense_kronecker_oracle():
    rng = np.random.default_rng(26)
    x = random_sparse(rng, (2, 2, 2), density=0.9)
    m = random_model(rng, (2, 2, 2), 2, scale=1.0)
    got, flag = core_tensor(x, m)
    want = dense_core(x.to_dense(), m.U, m.T, m.W)
    np.testing.assert_allclose(got, want, atol=1e-8)
    assert not flag


@pytest.mark.parametrize("shape", [(3, 4, 5), (5, 5, 5), (4, 2, 3)])
def test_core_dense_oracle_more_shapes(shape):
    rng = np.random.default_rng(27)
    x = random_sparse(rng, shape, density=0.5)
    m = random_model(rng, shape, 2, scale=1.0)
    got, _ = core_tensor(x, m)
    want = dense_core(x.to_dense(), m.U, m.T, m.W)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_corcondia_flags_rank_deficiency():
    rng = np.random.default_rng(28)
    x = random_sparse(rng, (4, 4, 4), density=0.6)
    m = random_model(rng, (4, 4, 4), 2)
    m.U[:, 1] = m.U[:, 0]  # collinear columns
    _, _, flagged = corcondia(x, m, return_details=True)
    assert flagged


# ---------------------------------------------------------------- autoten_rank


def test_autoten_planted_rank3():
    rng = np.random.default_rng(30)
    dense = np.zeros((60, 80, 16))
    blocks = [((0, 15), (0, 20), (0, 4)), ((15, 30), (20, 40), (5, 9)), ((30, 45), (40, 60), (10, 14))]
    for (i0, i1), (j0, j1), (k0, k1) in blocks:
        dense[i0:i1, j0:j1, k0:k1] = rng.poisson(3.0, (i1 - i0, j1 - j0, k1 - k0))
    n_noise = int(0.05 * dense.sum())
    np.add.at(dense, (rng.integers(0, 60, n_noise), rng.integers(0, 80, n_noise),
                      rng.integers(0, 16, n_noise)), 1.0)
    x = SparseTensor3.from_dense(dense)
    sel = autoten_rank(x, r_max=5, opts=SolverOptions(lam=1.0, seed=0))
    assert sel.rank == 3


def test_autoten_rank1_noiseless():
    rng = np.random.default_rng(31)
    x, _ = planted_tensor(rng, (8, 8, 8), 1)
    sel = autoten_rank(x, r_max=4, opts=SolverOptions(lam=0.0, seed=0))
    assert sel.rank == 1


def test_autoten_table_covers_both_families():
    rng = np.random.default_rng(32)
    x = random_sparse(rng, (6, 6, 6), density=0.5)
    sel = autoten_rank(x, r_max=3, opts=SolverOptions(seed=0))
    families = {row["family"] for row in sel.table}
    assert families == {"als", "apr"}
    assert 1 <= sel.rank <= 3


# -------------------------------------------------------------- factor file IO


def test_factor_file_roundtrip(tmp_path):
    rng = np.random.default_rng(33)
    m = random_model(rng, (5, 6, 7), 3)
    path = tmp_path / "factors.bin"
    save_factors(path, m)
    loaded = load_factors(path)
    assert loaded.rank == 3
    for a, b in zip(m.factors(), loaded.factors()):
        assert np.array_equal(a, b)
    raw = path.read_bytes()
    assert raw[:4] == b"CPF1"
    import struct

    assert struct.unpack("<4I", raw[4:20]) == (5, 6, 7, 3)
