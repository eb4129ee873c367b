"""Sparse 3-mode tensor algebra and nonnegative CP decomposition.

Fits two model families on a coordinate-format count tensor: a least-squares
CP with L1 sparsity solved by nonnegative HALS, and a Poisson CP solved by
multiplicative updates. Core consistency scores both across candidate ranks
to pick the decomposition rank automatically.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CPF1"

MODES = ("user", "thread", "week")


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SparseTensor3:
    """Coordinate-format 3-mode tensor of positive counts."""

    shape: tuple[int, int, int]
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_entries(cls, shape, coords, values) -> "SparseTensor3":
        i = np.asarray([c[0] for c in coords], dtype=np.int64)
        j = np.asarray([c[1] for c in coords], dtype=np.int64)
        k = np.asarray([c[2] for c in coords], dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
        t = cls(tuple(int(s) for s in shape), i, j, k, vals)
        t.validate()
        return t

    def validate(self) -> None:
        I, J, K = self.shape
        if len({(a, b, c) for a, b, c in zip(self.i, self.j, self.k)}) != self.nnz:
            raise ValueError("duplicate coordinates")
        if self.nnz and (self.vals <= 0).any():
            raise ValueError("all stored values must be > 0")
        for arr, dim, name in ((self.i, I, "i"), (self.j, J, "j"), (self.k, K, "k")):
            if arr.size and (arr.min() < 0 or arr.max() >= dim):
                raise ValueError(f"index {name} out of range")

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def total(self) -> float:
        return float(self.vals.sum())

    def norm(self) -> float:
        return float(np.sqrt((self.vals ** 2).sum()))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        dense[self.i, self.j, self.k] = self.vals
        return dense

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseTensor3":
        dense = np.asarray(dense, dtype=np.float64)
        ii, jj, kk = np.nonzero(dense)
        return cls(tuple(dense.shape), ii.astype(np.int64), jj.astype(np.int64),
                   kk.astype(np.int64), dense[ii, jj, kk])


@dataclass
class SolverOptions:
    lam: float = 1.0
    max_sweeps: int = 200
    tolerance: float = 1e-6
    seed: int = 0
    # unregularized warm-up sweeps used as initialization for the L1 fit;
    # dead columns are re-seeded only during this phase
    warm_sweeps: int = 15

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class CPModel:
    rank: int
    U: np.ndarray
    T: np.ndarray
    W: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    method: str = "als_nn_l1"

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.U.shape[0], self.T.shape[0], self.W.shape[0])

    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.U, self.T, self.W)


def reconstruct(model: CPModel, at: tuple[int, int, int]) -> float:
    """Model value at one coordinate: sum over components of the factor products."""
    i, j, k = at
    I, J, K = model.shape
    if not (0 <= i < I and 0 <= j < J and 0 <= k < K):
        raise IndexError(f"coordinate {at} outside shape {(I, J, K)}")
    return float(np.sum(model.U[i] * model.T[j] * model.W[k]))


def reconstruct_dense(model: CPModel) -> np.ndarray:
    return np.einsum("ir,jr,kr->ijk", model.U, model.T, model.W)


def _mttkrp_factors(x: SparseTensor3, U, T, W, mode: int) -> np.ndarray:
    """Streaming MTTKRP over the sparse entries, one bincount per component."""
    R = U.shape[1]
    if mode == 0:
        idx, A, B, ia, ib, n = x.i, T, W, x.j, x.k, x.shape[0]
    elif mode == 1:
        idx, A, B, ia, ib, n = x.j, U, W, x.i, x.k, x.shape[1]
    elif mode == 2:
        idx, A, B, ia, ib, n = x.k, U, T, x.i, x.j, x.shape[2]
    else:
        raise ValueError(f"mode must be 0, 1, or 2, got {mode}")
    out = np.empty((n, R))
    for r in range(R):
        out[:, r] = np.bincount(idx, weights=x.vals * A[ia, r] * B[ib, r], minlength=n)
    return out


def mttkrp(x: SparseTensor3, model: CPModel, mode: str) -> np.ndarray:
    if model.shape != x.shape:
        raise ValueError(f"model shape {model.shape} does not match tensor {x.shape}")
    return _mttkrp_factors(x, model.U, model.T, model.W, MODES.index(mode))


def _reconstruct_at_nnz(x: SparseTensor3, U, T, W) -> np.ndarray:
    return np.einsum("nr,nr,nr->n", U[x.i], T[x.j], W[x.k])


def _ls_objective(x: SparseTensor3, U, T, W, lam: float, norm_x2: float) -> float:
    inner = float(x.vals @ _reconstruct_at_nnz(x, U, T, W))
    norm_d2 = float(np.sum((U.T @ U) * (T.T @ T) * (W.T @ W)))
    l1 = U.sum() + T.sum() + W.sum()
    return norm_x2 - 2.0 * inner + norm_d2 + lam * l1


def cp_als_nn_l1(x: SparseTensor3, rank: int, opts: SolverOptions | None = None) -> CPModel:
    """Nonnegative CP with L1 sparsity by column-wise HALS.

    Minimizes ||X - D||_F^2 + lam * (sum of all factor entries) with all
    factors >= 0. The L1 term shifts each column's closed-form update down
    before clamping, which produces exact zeros.
    """
    if opts is None:
        opts = SolverOptions()
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if x.nnz == 0:
        raise ValueError("empty tensor")
    if rank > min(x.shape):
        warnings.warn(f"rank {rank} exceeds smallest tensor dimension {min(x.shape)}")

    rng = np.random.default_rng(opts.seed)
    factors = [rng.uniform(0.0, 1.0, size=(dim, rank)) for dim in x.shape]
    # scale init so the initial reconstruction mass roughly matches the data
    scale = (x.total() / max(_reconstruct_at_nnz(x, *factors).sum(), 1e-12)) ** (1.0 / 3.0)
    factors = [f * scale for f in factors]

    norm_x2 = float((x.vals ** 2).sum())
    half_lam = opts.lam / 2.0

    def hals_sweep(half_lam_phase: float) -> None:
        for mode in range(3):
            A = factors[mode]
            others = [factors[m] for m in range(3) if m != mode]
            G = (others[0].T @ others[0]) * (others[1].T @ others[1])
            M = _mttkrp_factors(x, *factors, mode)
            for r in range(rank):
                denom = G[r, r]
                if denom <= 1e-15:
                    A[:, r] = 0.0
                    continue
                numer = M[:, r] - A @ G[:, r] + A[:, r] * denom - half_lam_phase
                A[:, r] = np.maximum(0.0, numer / denom)

    def rebalance() -> None:
        # the fit term is invariant under per-component rescaling with unit
        # product; equalizing the three column sums minimizes the L1 term, so
        # this step never increases the objective
        for r in range(rank):
            sums = np.array([f[:, r].sum() for f in factors])
            if np.any(sums <= 1e-300):
                continue
            g = float(sums.prod()) ** (1.0 / 3.0)
            for f, s in zip(factors, sums):
                f[:, r] *= g / s

    # warm phase: unregularized sweeps with dead-column revival; a zero column
    # is an absorbing state for HALS, so revival is only safe before the
    # monotone (traced) phase starts
    for _ in range(opts.warm_sweeps):
        hals_sweep(0.0)
        rebalance()
        for f in factors:
            dead = f.sum(axis=0) <= 1e-15
            if dead.any():
                f[:, dead] = rng.uniform(0.0, 1.0, size=(f.shape[0], int(dead.sum()))) * scale

    trace: list[float] = []
    for sweep in range(opts.max_sweeps):
        hals_sweep(half_lam)
        rebalance()
        obj = _ls_objective(x, *factors, opts.lam, norm_x2)
        if not np.isfinite(obj):
            raise SolverFailure(f"non-finite objective at sweep {sweep}")
        trace.append(obj)
        if sweep > 0 and abs(trace[-2] - obj) <= opts.tolerance * max(abs(trace[-2]), 1e-12):
            break

    return CPModel(rank=rank, U=factors[0], T=factors[1], W=factors[2],
                   objective_trace=trace, method="als_nn_l1")


_POIS_EPS = 1e-12


def _kl_objective(x: SparseTensor3, U, T, W) -> float:
    d_nz = np.maximum(_reconstruct_at_nnz(x, U, T, W), _POIS_EPS)
    total_d = float(np.sum(U.sum(axis=0) * T.sum(axis=0) * W.sum(axis=0)))
    return total_d - float(x.vals @ np.log(d_nz))


def cp_apr(x: SparseTensor3, rank: int, opts: SolverOptions | None = None) -> CPModel:
    """Poisson CP fit (KL divergence) via multiplicative updates.

    Columns of the thread and week factors are renormalized to unit sum each
    sweep, pushing all scale into the user factor; the KL objective is
    invariant under this rebalancing.
    """
    if opts is None:
        opts = SolverOptions()
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if x.nnz == 0:
        raise ValueError("degenerate Poisson fit: zero tensor")

    rng = np.random.default_rng(opts.seed)
    factors = [rng.uniform(0.1, 1.0, size=(dim, rank)) for dim in x.shape]

    trace: list[float] = []
    for sweep in range(opts.max_sweeps):
        for mode in range(3):
            A = factors[mode]
            others = [factors[m] for m in range(3) if m != mode]
            d_nz = np.maximum(_reconstruct_at_nnz(x, *factors), _POIS_EPS)
            ratio_vals = x.vals / d_nz
            scaled = SparseTensor3(x.shape, x.i, x.j, x.k, ratio_vals)
            numer = _mttkrp_factors(scaled, *factors, mode)
            denom = others[0].sum(axis=0) * others[1].sum(axis=0)
            safe = denom > _POIS_EPS
            A[:, safe] *= numer[:, safe] / denom[safe]
            A[:, ~safe] = 0.0
        # rebalance: unit-sum thread and week columns, scale absorbed by users
        for m in (1, 2):
            s = factors[m].sum(axis=0)
            pos = s > _POIS_EPS
            factors[m][:, pos] /= s[pos]
            factors[0][:, pos] *= s[pos]
        obj = _kl_objective(x, *factors)
        if not np.isfinite(obj):
            raise SolverFailure(f"non-finite KL objective at sweep {sweep}")
        trace.append(obj)
        if sweep > 0 and abs(trace[-2] - obj) <= opts.tolerance * max(abs(trace[-2]), 1e-12):
            break

    return CPModel(rank=rank, U=factors[0], T=factors[1], W=factors[2],
                   objective_trace=trace, method="apr")


def core_tensor(x: SparseTensor3, model: CPModel) -> tuple[np.ndarray, bool]:
    """Least-squares R x R x R core given fixed factors.

    Returns (core, rank_deficient). Computed as the sparse tensor contracted
    with the pseudo-inverse of each factor, staged per mode to stay sparse.
    """
    R = model.rank
    rank_deficient = any(np.linalg.matrix_rank(f) < R for f in model.factors())
    PU, PT, PW = (np.linalg.pinv(f) for f in model.factors())

    # stage 1: contract the user mode, grouping entries by (j, k)
    K = x.shape[2]
    jk = x.j * K + x.k
    groups, inv = np.unique(jk, return_inverse=True)
    Y = np.empty((groups.size, R))
    for r in range(R):
        Y[:, r] = np.bincount(inv, weights=x.vals * PU[r, x.i], minlength=groups.size)
    gj = groups // K
    gk = groups % K

    # stage 2: contract the thread mode per distinct week slot
    Z = np.zeros((K, R, R))
    for kk in np.unique(gk):
        mask = gk == kk
        Z[kk] = Y[mask].T @ PT[:, gj[mask]].T

    # stage 3: contract the week mode
    G = np.einsum("kpq,sk->pqs", Z, PW)
    return G, rank_deficient


def corcondia(x: SparseTensor3, model: CPModel, return_details: bool = False):
    """Core consistency: 100 when the least-squares core is the identity superdiagonal."""
    G, rank_deficient = core_tensor(x, model)
    R = model.rank
    ideal = np.zeros((R, R, R))
    ideal[np.arange(R), np.arange(R), np.arange(R)] = 1.0
    score = 100.0 * (1.0 - float(((G - ideal) ** 2).sum()) / R)
    if return_details:
        return score, G, rank_deficient
    return score


@dataclass
class RankSelection:
    rank: int
    als_rank: int
    apr_rank: int
    table: list[dict]
    fallback: bool


DIFFUSE_SHARE = 0.5
CONGRUENCE_MAX = 0.3


def degenerate_components(model: CPModel) -> list[int]:
    """Components that cannot stand as clusters.

    Three degeneracies: a dead mode (zero column), a background component
    diffuse (effective support over half the dimension) in every mode, or a
    pair of components so congruent across all three modes that they split
    one underlying event.
    """
    bad = set()
    for r in range(model.rank):
        dead = False
        diffuse_all = True
        for f in model.factors():
            col = f[:, r]
            s = col.sum()
            if s <= 1e-12:
                dead = True
                break
            n_eff = (s * s) / float(col @ col)
            if n_eff / f.shape[0] <= DIFFUSE_SHARE:
                diffuse_all = False
        if dead or diffuse_all:
            bad.add(r)
    if model.rank > 1:
        cong = np.ones((model.rank, model.rank))
        for f in model.factors():
            n = f / np.maximum(np.linalg.norm(f, axis=0), 1e-300)
            cong *= n.T @ n
        for r in range(model.rank):
            for s in range(r):
                if cong[r, s] > CONGRUENCE_MAX:
                    bad.update((r, s))
    return sorted(bad)


def autoten_rank(x: SparseTensor3, r_max: int, opts: SolverOptions | None = None,
                 threshold: float = 50.0) -> RankSelection:
    """Sweep candidate ranks for both fit families and pick the rank to use.

    Per family: the largest candidate whose core consistency meets the
    threshold and whose fit has no degenerate component (dead column, or a
    background component diffuse across all three modes). If no candidate
    qualifies, fall back to the best-scoring candidate and flag it. The
    selected rank is the max across the two families.
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    if opts is None:
        opts = SolverOptions()

    table: list[dict] = []
    family_rank: dict[str, int] = {}
    fallback = False
    for family, fit in (("als", cp_als_nn_l1), ("apr", cp_apr)):
        scores: dict[int, float] = {}
        admissible: dict[int, bool] = {}
        for r in range(1, r_max + 1):
            if r > min(x.shape):
                break
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    model = fit(x, r, opts)
                    score = corcondia(x, model)
                    ok = not degenerate_components(model)
                except SolverFailure:
                    score = float("-inf")
                    ok = False
            scores[r] = score
            admissible[r] = ok
            table.append({"family": family, "rank": r, "score": score, "admissible": ok})
        passing = [r for r, s in scores.items() if s >= threshold and admissible[r]]
        if passing:
            family_rank[family] = max(passing)
        else:
            family_rank[family] = min(r for r in scores if scores[r] == max(scores.values()))
            fallback = True

    return RankSelection(
        rank=max(family_rank.values()),
        als_rank=family_rank["als"],
        apr_rank=family_rank["apr"],
        table=table,
        fallback=fallback,
    )


def save_factors(path, model: CPModel) -> None:
    """Binary factor file: magic + I,J,K,R as LE u32, then U,T,W row-major LE f64."""
    I, J, K = model.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", I, J, K, model.rank))
        for f in model.factors():
            fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def load_factors(path) -> CPModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad factor file magic: {magic!r}")
        I, J, K, R = struct.unpack("<4I", fh.read(16))
        mats = []
        for dim in (I, J, K):
            buf = fh.read(dim * R * 8)
            mats.append(np.frombuffer(buf, dtype="<f8").reshape(dim, R).copy())
    return CPModel(rank=R, U=mats[0], T=mats[1], W=mats[2])


def write_manifest(path, model: CPModel, opts: SolverOptions,
                   selection: RankSelection | None = None) -> None:
    manifest = {
        "rank": model.rank,
        "method": model.method,
        "lambda": opts.lam,
        "seed": opts.seed,
        "sweeps": len(model.objective_trace),
        "objective_trace": model.objective_trace,
        "corcondia_table": selection.table if selection else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
