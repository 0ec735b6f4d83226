"""Exact 0/1 minimizer: best-first branch-and-bound over LP relaxations.

The engine is problem-agnostic: it minimizes c @ x over binary x subject to
A_ub x <= b_ub and A_eq x = b_eq, with an optional `lazy_cuts` callback that
inspects integral candidates and may reject them by returning additional
valid <=-rows (classic lazy-constraint pattern).  LP relaxations are solved
with HiGHS via scipy.  Deterministic: nodes are ordered by (bound, insertion
counter) and branching picks the fractional variable closest to 0.5 with ties
broken by lowest index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import RhtpError, SolverLimitError

_INT_TOL = 1e-6
_GAP_TOL = 1e-9


@dataclass
class BnbResult:
    x: np.ndarray  # optimal binary assignment
    objective: float  # c @ x
    nodes: int  # LP relaxations solved
    n_cuts: int  # lazy rows added


def minimize_binary_lp(
    c: np.ndarray,
    a_ub: sparse.csr_matrix | None,
    b_ub: np.ndarray | None,
    a_eq: sparse.csr_matrix | None,
    b_eq: np.ndarray | None,
    *,
    lazy_cuts: Callable[[np.ndarray], list[tuple[np.ndarray, float]]] | None = None,
    warm_start: tuple[np.ndarray, float] | None = None,
    node_cap: int = 1_000_000,
) -> BnbResult:
    c = np.asarray(c, dtype=float)
    n = len(c)
    base_bounds = np.tile((0.0, 1.0), (n, 1))

    cut_rows: list[np.ndarray] = []
    cut_rhs: list[float] = []
    stacked_ub = a_ub
    stacked_rhs = np.asarray(b_ub, dtype=float) if b_ub is not None else None
    cuts_dirty = False

    def solve_relaxation(fixes):
        nonlocal stacked_ub, stacked_rhs, cuts_dirty
        if cuts_dirty:
            extra = sparse.csr_matrix(np.vstack(cut_rows))
            stacked_ub = (
                sparse.vstack([a_ub, extra], format="csr")
                if a_ub is not None
                else extra
            )
            base_rhs = (
                np.asarray(b_ub, dtype=float) if b_ub is not None else np.empty(0)
            )
            stacked_rhs = np.concatenate([base_rhs, np.asarray(cut_rhs)])
            cuts_dirty = False
        bounds = base_bounds.copy()
        for var, val in fixes:
            bounds[var] = (val, val)
        res = linprog(
            c,
            A_ub=stacked_ub,
            b_ub=stacked_rhs,
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
        )
        if res.status == 2:  # infeasible
            return None
        if res.status != 0:
            raise RhtpError(f"LP relaxation failed with status {res.status}")
        return res.fun, res.x

    best_val = np.inf
    best_x = None
    if warm_start is not None:
        best_x, best_val = np.asarray(warm_start[0]), float(warm_start[1])

    counter = 0
    heap: list[tuple[float, int, tuple]] = [(-np.inf, counter, ())]
    nodes = 0

    while heap:
        bound, _, fixes = heapq.heappop(heap)
        if bound >= best_val - _GAP_TOL:
            break  # best-first: every remaining node is at least as bad
        if nodes >= node_cap:
            raise SolverLimitError(f"node budget of {node_cap} exhausted")
        nodes += 1
        solved = solve_relaxation(fixes)
        if solved is None:
            continue
        obj, x = solved
        if obj >= best_val - _GAP_TOL:
            continue
        frac = np.abs(x - np.round(x))
        if frac.max() <= _INT_TOL:
            x_int = np.round(x)
            x_int[x_int == 0.0] = 0.0  # normalize -0.0
            new_cuts = lazy_cuts(x_int) if lazy_cuts is not None else []
            if new_cuts:
                for row, rhs in new_cuts:
                    cut_rows.append(np.asarray(row, dtype=float))
                    cut_rhs.append(float(rhs))
                cuts_dirty = True
                # the node's bound is still valid: re-queue and re-solve with
                # the tightened relaxation
                counter += 1
                heapq.heappush(heap, (obj, counter, fixes))
                continue
            value = float(c @ x_int)
            if value < best_val:
                best_val = value
                best_x = x_int
            continue
        # branch on the fractional variable closest to one half
        cand = np.where(frac > _INT_TOL)[0]
        var = cand[np.argmin(np.abs(x[cand] - 0.5))]
        for val in (0.0, 1.0):
            counter += 1
            heapq.heappush(heap, (obj, counter, fixes + ((int(var), val),)))

    if best_x is None:
        raise RhtpError("no feasible binary solution")
    return BnbResult(
        x=best_x, objective=best_val, nodes=nodes, n_cuts=len(cut_rows)
    )
