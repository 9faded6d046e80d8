"""Exhaustive reference oracles.

Everything here trades speed for being obviously correct: full enumeration of
discrete selector combinations, of column subsets, or of grid points, with no
pruning.  Hard guards refuse problem sizes where exhaustion stops being a
sane idea.  Minimizer ties are found in a second pass over the same
enumeration so the reported set never depends on scan order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import RelaxedInstance, solver_weights

__all__ = [
    "OracleResult",
    "enumerate_selectors",
    "SubsetOracleResult",
    "l0_min_oracle",
    "GridOracleResult",
    "discrete_lp_oracle",
]

ENUMERATION_GUARD = 10**6
SUBSET_GUARD = 12
GRID_GUARD = 10**7

_TIE_REL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    """Best discrete selector combinations by exhaustive scan.

    ``best_combos`` lists all objective minimizers among feasible
    combinations, in lexicographic order; a tie means the instance cannot have
    a unique discrete optimum.
    """

    best_combos: tuple[tuple[int, ...], ...]
    best_objective: float
    feasible_count: int
    evaluated_count: int

    @property
    def unique(self) -> bool:
        return len(self.best_combos) == 1


def _selector_scan(instance, p, feas_tol):
    """Yield (head, feasible_cols, objectives) per innermost-vectorized slice."""
    r, theta = instance.r, instance.theta
    cols = [instance.A.blocks[l] @ instance.X.blocks[l] for l in range(theta)]
    w = solver_weights(instance.X, p)
    y = instance.y
    last = cols[theta - 1]
    w_last = w[(theta - 1) * r : theta * r]
    for head in itertools.product(range(r), repeat=theta - 1):
        partial = y.copy()
        obj_head = 0.0
        for l, k in enumerate(head):
            partial = partial - cols[l][:, k]
            obj_head += w[l * r + k]
        resid = np.linalg.norm(partial[:, None] - last, axis=0)
        ok = np.flatnonzero(resid <= feas_tol)
        if ok.size:
            yield head, ok, obj_head + w_last[ok]


def enumerate_selectors(
    instance: RelaxedInstance, p: float, tol_feas: float = 1e-8
) -> OracleResult:
    """Scan all r**theta discrete selectors of an instance.

    A combination (k_1, ..., k_theta) is feasible when the selected columns
    reproduce y within ``tol_feas * (1 + ||y||)``; its objective is the sum of
    the selected columns' weights at exponent p.  All minimizers within a
    relative 1e-9 of the best objective are reported, in lexicographic order.
    """
    r, theta = instance.r, instance.theta
    total = r**theta
    if total > ENUMERATION_GUARD:
        raise ValueError(f"r**theta = {total} exceeds the enumeration guard {ENUMERATION_GUARD}")
    feas_tol = tol_feas * (1.0 + float(np.linalg.norm(instance.y)))

    best_obj = np.inf
    feasible = 0
    for _, ok, objs in _selector_scan(instance, p, feas_tol):
        feasible += ok.size
        best_obj = min(best_obj, float(objs.min()))

    best: list[tuple[int, ...]] = []
    if np.isfinite(best_obj):
        tie = best_obj + _TIE_REL * (1.0 + abs(best_obj))
        for head, ok, objs in _selector_scan(instance, p, feas_tol):
            for k, obj in zip(ok, objs):
                if obj <= tie:
                    best.append(head + (int(k),))
    return OracleResult(
        best_combos=tuple(best),
        best_objective=float(best_obj),
        feasible_count=feasible,
        evaluated_count=total,
    )


@dataclass(frozen=True)
class SubsetOracleResult:
    feasible: bool
    min_support: int | None
    witnesses: tuple[tuple[int, ...], ...]


def l0_min_oracle(
    A: np.ndarray, y: np.ndarray, max_support: int, tol: float = 1e-8
) -> SubsetOracleResult:
    """Smallest support size admitting an exact solution of A x = y.

    Scans support sizes 0, 1, ... up to ``max_support`` and within each size
    every column subset, declaring a subset feasible when its least-squares
    residual drops to ``tol * (1 + ||y||)``.  Returns the first (smallest)
    feasible size together with all witness subsets of that size.
    """
    if max_support > SUBSET_GUARD:
        raise ValueError(f"max_support {max_support} exceeds the subset guard {SUBSET_GUARD}")
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    ncols = A.shape[1]
    thresh = tol * (1.0 + float(np.linalg.norm(y)))
    if float(np.linalg.norm(y)) <= thresh:
        return SubsetOracleResult(feasible=True, min_support=0, witnesses=((),))
    for k in range(1, min(max_support, ncols) + 1):
        witnesses = []
        for subset in itertools.combinations(range(ncols), k):
            sol, *_ = np.linalg.lstsq(A[:, subset], y, rcond=None)
            if float(np.linalg.norm(A[:, subset] @ sol - y)) <= thresh:
                witnesses.append(subset)
        if witnesses:
            return SubsetOracleResult(feasible=True, min_support=k, witnesses=tuple(witnesses))
    return SubsetOracleResult(feasible=False, min_support=None, witnesses=())


@dataclass(frozen=True)
class GridOracleResult:
    feasible: bool
    min_objective: float | None
    witnesses: tuple[tuple[float, ...], ...]
    evaluated_count: int


def _grid_chunks(gridv: np.ndarray, ncols: int, total: int):
    """All grid points as (chunk, ncols) arrays, in mixed-radix index order."""
    chunk = 1 << 14
    base = len(gridv)
    for start in range(0, total, chunk):
        count = min(chunk, total - start)
        rem = np.arange(start, start + count)
        digits = np.empty((count, ncols), dtype=int)
        for j in range(ncols - 1, -1, -1):
            digits[:, j] = rem % base
            rem = rem // base
        yield gridv[digits]


def discrete_lp_oracle(
    A: np.ndarray,
    y: np.ndarray,
    p: float,
    grid: tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0),
    tol: float = 1e-8,
) -> GridOracleResult:
    """Minimize sum |x_i|**p over all grid-valued x with A x = y (full scan).

    Every one of len(grid)**ncols candidate points is evaluated (in chunks);
    feasibility means residual <= tol * (1 + ||y||).  All minimizers within a
    1e-9 relative tie window are returned.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    ncols = A.shape[1]
    gridv = np.asarray(grid, dtype=float)
    total = len(gridv) ** ncols
    if total > GRID_GUARD:
        raise ValueError(f"len(grid)**ncols = {total} exceeds the grid guard {GRID_GUARD}")
    thresh = tol * (1.0 + float(np.linalg.norm(y)))

    best_obj = np.inf
    feasible = False
    for points in _grid_chunks(gridv, ncols, total):
        ok = np.linalg.norm(points @ A.T - y, axis=1) <= thresh
        if ok.any():
            feasible = True
            best_obj = min(best_obj, float(np.sum(np.abs(points[ok]) ** p, axis=1).min()))

    witnesses: list[tuple[float, ...]] = []
    if feasible:
        tie = best_obj + _TIE_REL * (1.0 + abs(best_obj))
        for points in _grid_chunks(gridv, ncols, total):
            ok = np.linalg.norm(points @ A.T - y, axis=1) <= thresh
            if not ok.any():
                continue
            pts = points[ok]
            objs = np.sum(np.abs(pts) ** p, axis=1)
            for obj, pt in zip(objs, pts):
                if obj <= tie:
                    witnesses.append(tuple(float(v) for v in pt))
    return GridOracleResult(
        feasible=feasible,
        min_objective=best_obj if feasible else None,
        witnesses=tuple(witnesses),
        evaluated_count=total,
    )
