"""Core data model: block sensing matrices, guess ensembles, and selectors.

A problem instance couples a sensing matrix split into ``theta`` blocks of
``n`` columns with a guess ensemble of ``theta`` candidate matrices, one per
block.  Exactly one column per block (the planted one) reproduces the hidden
block of the sparse vector; selecting it across all blocks reconstructs the
whole signal.  Everything downstream (solver, oracle, bounds) works on these
types.

Indices are 0-based everywhere in memory; file formats and CLI output use
1-based labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BlockSensingMatrix",
    "SupportPattern",
    "GuessEnsemble",
    "Selector",
    "RelaxedInstance",
    "lp_norm",
    "effective_matrix",
    "solver_weights",
    "apply_selector",
]


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class BlockSensingMatrix:
    """Sensing matrix stored as ``theta`` blocks of shape (m, n).

    The full matrix is the horizontal concatenation of the blocks and acts on
    vectors of length ``n * theta``.
    """

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(_as_matrix(b) for b in self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        m, n = blocks[0].shape
        for b in blocks:
            if b.shape != (m, n):
                raise ValueError("all blocks must share one (m, n) shape")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def n(self) -> int:
        return self.blocks[0].shape[1]

    @property
    def theta(self) -> int:
        return len(self.blocks)

    @property
    def ncols(self) -> int:
        """Total columns of the concatenated matrix, n * theta."""
        return self.n * self.theta

    def full(self) -> np.ndarray:
        """Dense (m, n*theta) concatenation of the blocks."""
        return np.hstack(self.blocks)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply the concatenated matrix without forming it."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ncols,):
            raise ValueError(f"expected vector of length {self.ncols}")
        out = np.zeros(self.m)
        n = self.n
        for l, b in enumerate(self.blocks):
            out += b @ x[l * n : (l + 1) * n]
        return out


@dataclass(frozen=True)
class SupportPattern:
    """Support of the hidden vector, global and per block.

    ``indices`` are sorted 0-based positions into the length ``n * theta``
    vector; ``block(l)`` gives the positions local to block ``l``.
    """

    indices: tuple[int, ...]
    n: int
    theta: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= self.n * self.theta):
            raise ValueError("support index out of range")
        object.__setattr__(self, "indices", idx)

    def block(self, l: int) -> np.ndarray:
        """Sorted 0-based positions of the support inside block ``l``."""
        lo, hi = l * self.n, (l + 1) * self.n
        return np.array([i - lo for i in self.indices if lo <= i < hi], dtype=int)

    def block_sizes(self) -> np.ndarray:
        return np.array([len(self.block(l)) for l in range(self.theta)], dtype=int)

    @property
    def max_block_size(self) -> int:
        """Largest per-block support size (the s-bar of the failure bounds)."""
        return int(self.block_sizes().max())

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class GuessEnsemble:
    """Candidate matrices, one (n, r) block per sensing block.

    ``planted_cols[l]`` is the column of block ``l`` that holds the hidden
    block verbatim.  Columns live in [-1, 1].  All-zero columns are legal in
    the bare container (the concentration studies draw from laws that can
    produce them) but are rejected when an instance is assembled, because a
    zero column gets zero weight in every objective.
    """

    blocks: tuple[np.ndarray, ...]
    planted_cols: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(_as_matrix(b) for b in self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        n, r = blocks[0].shape
        for b in blocks:
            if b.shape != (n, r):
                raise ValueError("all guess blocks must share one (n, r) shape")
        if len(self.planted_cols) != len(blocks):
            raise ValueError("one planted column index per block required")
        cols = tuple(int(k) for k in self.planted_cols)
        for k in cols:
            if not 0 <= k < r:
                raise ValueError("planted column index out of range")
        for l, b in enumerate(blocks):
            if np.abs(b).max(initial=0.0) > 1.0 + 1e-12:
                raise ValueError(f"guess block {l} has entries outside [-1, 1]")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "planted_cols", cols)

    def zero_columns(self) -> list[tuple[int, int]]:
        """(block, column) pairs of all-zero columns, empty when none."""
        out = []
        for l, b in enumerate(self.blocks):
            for k in np.flatnonzero(np.abs(b).max(axis=0) == 0.0):
                out.append((l, int(k)))
        return out

    @property
    def n(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def r(self) -> int:
        return self.blocks[0].shape[1]

    @property
    def theta(self) -> int:
        return len(self.blocks)

    @property
    def ncols(self) -> int:
        """Total selector length, r * theta."""
        return self.r * self.theta

    def planted_global_cols(self) -> np.ndarray:
        """Global (0-based) selector indices of the planted columns."""
        return np.array([l * self.r + k for l, k in enumerate(self.planted_cols)], dtype=int)

    def dense(self) -> np.ndarray:
        """Block-diagonal (n*theta, r*theta) matrix."""
        n, r = self.n, self.r
        out = np.zeros((n * self.theta, r * self.theta))
        for l, b in enumerate(self.blocks):
            out[l * n : (l + 1) * n, l * r : (l + 1) * r] = b
        return out


@dataclass(frozen=True)
class Selector:
    """Relaxed selector vector: one length-r coefficient slice per block."""

    z: np.ndarray
    r: int
    theta: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.shape != (self.r * self.theta,):
            raise ValueError(f"selector must have length r*theta = {self.r * self.theta}")
        object.__setattr__(self, "z", z)

    @classmethod
    def discrete(cls, planted_cols, r: int, theta: int) -> "Selector":
        """Hard selector: entry 1 at the given column of each block, else 0."""
        if len(planted_cols) != theta:
            raise ValueError("one column per block required")
        z = np.zeros(r * theta)
        for l, k in enumerate(planted_cols):
            if not 0 <= k < r:
                raise ValueError("column index out of range")
            z[l * r + k] = 1.0
        return cls(z=z, r=r, theta=theta)

    def block(self, l: int) -> np.ndarray:
        return self.z[l * self.r : (l + 1) * self.r]

    def is_discrete(self, tol: float = 0.0) -> bool:
        """True when each block slice is a coordinate vector (a single 1)."""
        for l in range(self.theta):
            zl = self.block(l)
            nz = np.flatnonzero(np.abs(zl) > tol)
            if nz.size != 1 or zl[nz[0]] != 1.0:
                return False
        return True


@dataclass(frozen=True)
class RelaxedInstance:
    """A planted problem: sensing matrix, ensemble, hidden vector, observations.

    Invariants checked on construction: ``y = A x``, ``x`` vanishes off the
    support, and each planted column stores its hidden block verbatim.
    ``dist_params`` carries (p_x, p_X, nu): second moment of the planted
    alphabet, second moment of a non-planted guess entry, and the guess
    density.
    """

    A: BlockSensingMatrix
    X: GuessEnsemble
    x: np.ndarray
    support: SupportPattern
    y: np.ndarray
    dist_params: tuple[float, float, float]
    master_seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        A, X, S = self.A, self.X, self.support
        if A.n != X.n or A.theta != X.theta:
            raise ValueError("sensing matrix and ensemble disagree on (n, theta)")
        if (S.n, S.theta) != (A.n, A.theta):
            raise ValueError("support pattern does not match (n, theta)")
        if x.shape != (A.ncols,):
            raise ValueError("hidden vector has wrong length")
        if y.shape != (A.m,):
            raise ValueError("observation vector has wrong length")
        off = np.ones(A.ncols, dtype=bool)
        off[list(S.indices)] = False
        if x[off].any():
            raise ValueError("hidden vector has mass off the declared support")
        dead = X.zero_columns()
        if dead:
            raise ValueError(f"ensemble has all-zero columns {dead}; every column needs weight")
        scale = 1.0 + np.abs(y).max(initial=0.0)
        if np.abs(A.matvec(x) - y).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("y does not equal A x")
        n = A.n
        for l, k in enumerate(X.planted_cols):
            if not np.array_equal(X.blocks[l][:, k], x[l * n : (l + 1) * n]):
                raise ValueError(f"planted column of block {l} does not store the hidden block")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def theta(self) -> int:
        return self.A.theta

    @property
    def r(self) -> int:
        return self.X.r

    def planted_selector(self) -> Selector:
        return Selector.discrete(self.X.planted_cols, self.X.r, self.X.theta)


def lp_norm(v: np.ndarray, p: float) -> float:
    """Sum of |v_i|**p for 0 < p <= 1 (the nonconvex sparsity surrogate)."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    v = np.asarray(v, dtype=float)
    return float(np.sum(np.abs(v) ** p))


def effective_matrix(A: BlockSensingMatrix, X: GuessEnsemble) -> np.ndarray:
    """Dense (m, r*theta) matrix whose column l*r+k is A_block_l @ X_block_l[:, k].

    This is the constraint matrix of the relaxed selection program: feasible
    selectors satisfy ``effective_matrix(A, X) @ z = y``.
    """
    if A.n != X.n or A.theta != X.theta:
        raise ValueError("sensing matrix and ensemble disagree on (n, theta)")
    return np.hstack([A.blocks[l] @ X.blocks[l] for l in range(A.theta)])


def solver_weights(X: GuessEnsemble, p: float) -> np.ndarray:
    """Per-column objective weights: w_k = sum_i |X_col_k[i]|**p.

    Raises if any weight collapses below 1e-12 while the column itself is
    nonzero, since a zero-weight column makes the weighted objective blind to
    it.  (All-zero columns are already rejected by GuessEnsemble.)
    """
    w = np.empty(X.ncols)
    for l, b in enumerate(X.blocks):
        w[l * X.r : (l + 1) * X.r] = np.sum(np.abs(b) ** p, axis=0)
    col_norms = np.concatenate([np.linalg.norm(b, axis=0) for b in X.blocks])
    bad = np.flatnonzero((w < 1e-12) & (col_norms > 1e-12))
    if bad.size:
        raise ValueError(f"columns {bad.tolist()} have vanishing weight but nonzero norm")
    return w


def apply_selector(X: GuessEnsemble, z: Selector | np.ndarray) -> np.ndarray:
    """Reconstruction X z, block by block.

    When a block slice of ``z`` is a plain coordinate vector the stored column
    is copied rather than recomputed, so a discrete selector at the planted
    columns returns the hidden vector bit for bit.
    """
    zv = z.z if isinstance(z, Selector) else np.asarray(z, dtype=float)
    if zv.shape != (X.ncols,):
        raise ValueError(f"selector must have length {X.ncols}")
    n, r = X.n, X.r
    out = np.empty(n * X.theta)
    for l, b in enumerate(X.blocks):
        zl = zv[l * r : (l + 1) * r]
        nz = np.flatnonzero(zl)
        if nz.size == 1 and zl[nz[0]] == 1.0:
            out[l * n : (l + 1) * n] = b[:, nz[0]]
        else:
            out[l * n : (l + 1) * n] = b @ zl
    return out
