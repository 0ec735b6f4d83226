"""Stop selection and routing: pick regions, order them, place base poses.

The planner minimizes expected cycle energy

    cost = (number of stops) + gamma * (path length start -> stops -> goal)

subject to a per-target success-probability threshold delta.  Region choice
uses the joint-failure form 1 - prod_j (1 - phi_j P[i,j]) >= delta, which is
linearized exactly for binary phi by summing -log(1 - P[i,j]).  Routing uses
degree constraints over an upper-triangular edge set with lazy cycle-breaking
cuts, solved to optimality by branch-and-bound.  A final dynamic program
places one concrete base pose per selected region.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .bnb import minimize_binary_lp
from .errors import InfeasibleCoverageError, RhtpError
from .ioutil import atomic_write_text
from .partition import PartitionSet, complete_partition
from .reachability import Ptrm, build_ptrm
from .scene import ArmParams, Point, Scene

_CLAMP = 1e-9  # success probabilities are clamped to 1 - _CLAMP before logs


@dataclass(frozen=True)
class PlanningConfig:
    """Knobs shared by every planning call."""

    cell_size: float = 0.02
    mc_samples: int = 2000
    gamma: float = 1.12
    delta: float = 0.7
    candidate_cap: int = 256
    node_cap: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")


@dataclass(frozen=True)
class SelectionModel:
    """Inputs of the stop-selection problem.

    p: (n_targets, r) region success probabilities.
    dist: (r+2, r+2) distances over vertices {0=start, 1..r=regions, r+1=goal}.
    """

    p: np.ndarray
    dist: np.ndarray
    gamma: float
    delta: float

    def __post_init__(self):
        n, r = self.p.shape
        if self.dist.shape != (r + 2, r + 2):
            raise ValueError("dist must have shape (r+2, r+2)")
        if self.gamma <= 0 or not (0 < self.delta < 1):
            raise ValueError("need gamma > 0 and delta in (0, 1)")

    @property
    def n_targets(self) -> int:
        return self.p.shape[0]

    @property
    def n_regions(self) -> int:
        return self.p.shape[1]


def coverage_probability(phi: np.ndarray, p: np.ndarray, target: int) -> float:
    """Joint success probability 1 - prod_j(1 - phi_j P[target, j]).

    Evaluated in log space; returns exactly 1.0 when any selected region is
    certain.
    """
    sel = np.asarray(phi, dtype=bool)
    probs = p[target, sel]
    if probs.size == 0:
        return 0.0
    if np.any(probs >= 1.0):
        return 1.0
    return float(-np.expm1(np.sum(np.log1p(-probs))))


# ---------------------------------------------------------------------------
# Model assembly


def _edges(r: int) -> list[tuple[int, int]]:
    """Upper-triangular vertex pairs over {0, 1..r, r+1}, lexicographic."""
    return [(j, k) for j in range(r + 2) for k in range(j + 1, r + 2)]


class _Formulation:
    """Variable layout plus constraint matrices for one SelectionModel."""

    def __init__(self, model: SelectionModel):
        self.model = model
        r = model.n_regions
        self.r = r
        self.edges = _edges(r)
        self.edge_index = {e: r + k for k, e in enumerate(self.edges)}
        self.n_vars = r + len(self.edges)

        d = model.dist
        self.c = np.concatenate(
            [np.ones(r), [model.gamma * d[j, k] for j, k in self.edges]]
        )

        # degree rows: every selected region is entered and left exactly once;
        # start and goal each touch exactly one edge (possibly the direct
        # start-goal edge when no region is needed)
        rows, cols, vals = [], [], []
        b_eq = []
        row = 0
        for v in range(1, r + 1):
            for e, (j, k) in enumerate(self.edges):
                if v == j or v == k:
                    rows.append(row)
                    cols.append(r + e)
                    vals.append(1.0)
            rows.append(row)
            cols.append(v - 1)
            vals.append(-2.0)
            b_eq.append(0.0)
            row += 1
        for v in (0, r + 1):
            for e, (j, k) in enumerate(self.edges):
                if v == j or v == k:
                    rows.append(row)
                    cols.append(r + e)
                    vals.append(1.0)
            b_eq.append(1.0)
            row += 1
        self.a_eq = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(row, self.n_vars)
        )
        self.b_eq = np.asarray(b_eq)

        # coverage rows, linearized: sum_j w[i,j] phi_j >= W  with
        # w = -log(1 - p) (clamped).  The right side is loosened by a hair so
        # rounding can never exclude a solution that satisfies the exact
        # product form; integral candidates are re-verified exactly.
        self.w = -np.log1p(-np.minimum(model.p, 1.0 - _CLAMP))
        self.w_rhs = -math.log1p(-model.delta)
        slack = 1e-9 * (1.0 + self.w_rhs)
        cov = np.zeros((model.n_targets, self.n_vars))
        cov[:, :r] = -self.w
        self.a_ub = sparse.csr_matrix(cov)
        self.b_ub = np.full(model.n_targets, -(self.w_rhs - slack))

    # -- lazy verification of integral candidates --------------------------

    def lazy_cuts(self, x: np.ndarray) -> list[tuple[np.ndarray, float]]:
        cuts = []
        phi = x[: self.r] > 0.5
        for i in range(self.model.n_targets):
            if coverage_probability(phi, self.model.p, i) < self.model.delta:
                # forbid exactly this selection set
                row = np.zeros(self.n_vars)
                row[: self.r][phi] = 1.0
                row[: self.r][~phi] = -1.0
                cuts.append((row, float(phi.sum()) - 1.0))
                break
        if cuts:
            return cuts
        for component in self._region_cycles(x):
            row = np.zeros(self.n_vars)
            for j in component:
                for k in component:
                    if j < k:
                        row[self.edge_index[(j, k)]] = 1.0
            cuts.append((row, float(len(component)) - 1.0))
        return cuts

    def _region_cycles(self, x: np.ndarray) -> list[list[int]]:
        """Connected components of the chosen edges that miss the start.

        Degree constraints make those components cycles through regions only,
        which a single start-to-goal path must not contain.
        """
        adj: dict[int, list[int]] = {}
        for e, (j, k) in enumerate(self.edges):
            if x[self.r + e] > 0.5:
                adj.setdefault(j, []).append(k)
                adj.setdefault(k, []).append(j)
        seen = set()
        cycles = []
        for root in sorted(adj):
            if root in seen:
                continue
            comp = []
            stack = [root]
            seen.add(root)
            while stack:
                v = stack.pop()
                comp.append(v)
                for u in adj[v]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
            if 0 not in comp:
                cycles.append(sorted(comp))
        return cycles

    # -- helpers ------------------------------------------------------------

    def walk(self, x: np.ndarray) -> list[int]:
        """Vertex sequence of the selected path from start to goal."""
        adj: dict[int, list[int]] = {}
        for e, (j, k) in enumerate(self.edges):
            if x[self.r + e] > 0.5:
                adj.setdefault(j, []).append(k)
                adj.setdefault(k, []).append(j)
        seq = [0]
        prev = None
        cur = 0
        while cur != self.r + 1:
            nxt = [v for v in adj.get(cur, []) if v != prev]
            if len(nxt) != 1:
                raise RhtpError("selected edges do not form a single path")
            prev, cur = cur, nxt[0]
            seq.append(cur)
        return seq

    def path_objective(self, seq: list[int], kappa: int) -> float:
        d = self.model.dist
        length = 0.0
        for a, b in zip(seq, seq[1:]):
            length += d[a, b]
        return kappa + self.model.gamma * length


@dataclass
class Solution:
    phi: np.ndarray  # (r,) 0/1 region selection
    edges: tuple[tuple[int, int], ...]  # chosen path edges
    sequence: tuple[int, ...]  # vertices 0 ... r+1 in visit order
    objective: float  # kappa + gamma * sum of leg distances
    nodes: int
    n_cuts: int
    wall_time: float


def _greedy_warm_start(form: _Formulation):
    """Cheap feasible solution used as the initial incumbent, if one exists."""
    model = form.model
    r = form.r
    needed = np.full(model.n_targets, form.w_rhs)
    chosen: list[int] = []
    available = list(range(r))
    while np.any(needed > 0):
        gains = [
            (np.minimum(form.w[:, j], np.maximum(needed, 0.0)).sum(), -j)
            for j in available
        ]
        if not gains:
            return None
        best_gain, neg_j = max(gains)
        if best_gain <= 0:
            return None
        j = -neg_j
        chosen.append(j)
        available.remove(j)
        needed -= form.w[:, j]
    phi = np.zeros(r, dtype=bool)
    phi[chosen] = True
    for i in range(model.n_targets):
        if coverage_probability(phi, model.p, i) < model.delta:
            return None
    # order by nearest neighbor from the start
    d = model.dist
    seq = [0]
    rest = set(v + 1 for v in chosen)
    while rest:
        cur = seq[-1]
        nxt = min(rest, key=lambda v: (d[cur, v], v))
        seq.append(nxt)
        rest.remove(nxt)
    seq.append(r + 1)
    x = np.zeros(form.n_vars)
    x[chosen] = 1.0
    for a, b in zip(seq, seq[1:]):
        x[form.edge_index[(min(a, b), max(a, b))]] = 1.0
    return x, float(form.c @ x)


def solve(model: SelectionModel, node_cap: int = 1_000_000) -> Solution:
    """Optimal region selection and visiting order.

    Raises InfeasibleCoverageError when some target cannot reach delta even
    with every region selected, SolverLimitError past the node budget.
    """
    t0 = time.perf_counter()
    all_phi = np.ones(model.n_regions, dtype=bool)
    bad = [
        i
        for i in range(model.n_targets)
        if coverage_probability(all_phi, model.p, i) < model.delta
    ]
    if bad:
        raise InfeasibleCoverageError(bad)
    form = _Formulation(model)
    warm = _greedy_warm_start(form)
    result = minimize_binary_lp(
        form.c,
        form.a_ub,
        form.b_ub,
        form.a_eq,
        form.b_eq,
        lazy_cuts=form.lazy_cuts,
        warm_start=warm,
        node_cap=node_cap,
    )
    phi = (result.x[: form.r] > 0.5).astype(np.int8)
    seq = form.walk(result.x)
    kappa = int(phi.sum())
    if kappa != len(seq) - 2:
        raise RhtpError("selected regions and path disagree")
    edges = tuple(
        (min(a, b), max(a, b)) for a, b in zip(seq, seq[1:])
    )
    return Solution(
        phi=phi,
        edges=edges,
        sequence=tuple(seq),
        objective=form.path_objective(seq, kappa),
        nodes=result.nodes,
        n_cuts=result.n_cuts,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Pose placement


def farthest_point_sample(points: np.ndarray, count: int) -> np.ndarray:
    """Indices of `count` well-spread rows; starts at row 0, ties lowest index."""
    n = len(points)
    if n <= count:
        return np.arange(n)
    chosen = np.empty(count, dtype=np.int64)
    chosen[0] = 0
    d = np.linalg.norm(points - points[0], axis=1)
    for k in range(1, count):
        idx = int(np.argmax(d))
        chosen[k] = idx
        d = np.minimum(d, np.linalg.norm(points - points[idx], axis=1))
    return np.sort(chosen)


@dataclass(frozen=True)
class Stop:
    region: int  # region id == tour vertex
    pose: Point
    targets: tuple[int, ...]  # target indices observed (and attempted) here


@dataclass(frozen=True)
class Plan:
    stops: tuple[Stop, ...]
    kappa: int
    path_length: float
    total_cost: float
    sequence: tuple[int, ...]
    start: Point
    goal: Point


# Path lengths are compared on a 1 nm integer grid inside the pose DP, so
# physically identical routes (e.g. mirror poses straddling the start-goal
# line) count as exact ties instead of being ordered by float rounding noise.
_COST_QUANTUM = 1e-9


def _quantize(lengths: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(lengths) / _COST_QUANTUM).astype(np.int64)


def _refine_poses(poses, region_seq, partition, scene, ptrm):
    """Coordinate-descent over all region cells, holding neighbour stops fixed.

    The DP above runs on a subsample, so the cost-tie set it sees can miss
    cells an exact tie-break would prefer; each sweep re-solves every stop
    against the full cell list.  Converges because (cost, -reliability) is
    lexicographically non-increasing and the cell sets are finite.
    """
    centers = partition.grid.centers
    anchors = [scene.start] + list(poses) + [scene.goal]
    for _ in range(4):
        changed = False
        for k, region in enumerate(region_seq):
            cells = np.asarray(region.cells)
            pts = centers[cells]
            cost = _quantize(
                np.linalg.norm(pts - np.asarray(anchors[k]), axis=1)
            ) + _quantize(np.linalg.norm(pts - np.asarray(anchors[k + 2]), axis=1))
            if ptrm is not None and region.parents:
                score = ptrm.prob[list(region.parents)][:, cells].min(axis=0)
            else:
                score = np.zeros(len(cells))
            old = anchors[k + 1]
            old_cost = _quantize(
                [math.dist(old, anchors[k]) + math.dist(old, anchors[k + 2])]
            )[0]
            old_score = (
                float(
                    ptrm.prob[list(region.parents), partition.grid.point_to_cell(old)].min()
                )
                if ptrm is not None and region.parents
                else 0.0
            )
            tied = np.where(cost == cost.min(), score, -np.inf)
            j = int(np.argmax(tied))
            if (cost[j], -tied[j]) < (old_cost, -old_score):
                anchors[k + 1] = (float(pts[j][0]), float(pts[j][1]))
                changed = True
        if not changed:
            break
    return anchors[1:-1]


def extract_plan(
    solution: Solution,
    partition: PartitionSet,
    scene: Scene,
    gamma: float,
    ptrm: Ptrm | None = None,
    candidate_cap: int = 256,
) -> Plan:
    """Choose one base pose per selected region and assign targets to stops.

    Poses minimize the total path length start -> poses -> goal by dynamic
    programming over per-region candidate cells (farthest-point subsampled
    above `candidate_cap`).  Ties in path length are broken toward poses with
    the highest worst-case reach probability over the region's parent targets
    (when `ptrm` is given), then toward the lowest cell index.  Each target is
    assigned to the earliest stop whose region serves it.
    """
    centers = partition.grid.centers
    region_seq = [partition.regions[v - 1] for v in solution.sequence[1:-1]]
    cand_pts = []
    cand_score = []
    for region in region_seq:
        cells = np.asarray(region.cells)
        keep = farthest_point_sample(centers[cells], candidate_cap)
        cand_pts.append(centers[cells][keep])
        if ptrm is not None and region.parents:
            score = ptrm.prob[list(region.parents)][:, cells[keep]].min(axis=0)
        else:
            score = np.zeros(len(keep))
        cand_score.append(score)

    start = np.asarray(scene.start)
    goal = np.asarray(scene.goal)
    if not region_seq:
        poses: list[Point] = []
    else:
        cost = _quantize(np.linalg.norm(cand_pts[0] - start, axis=1))
        score = cand_score[0].copy()
        back: list[np.ndarray] = []
        for k in range(1, len(cand_pts)):
            legs = _quantize(
                np.linalg.norm(
                    cand_pts[k][None, :, :] - cand_pts[k - 1][:, None, :], axis=2
                )
            )
            total = cost[:, None] + legs
            best = total.min(axis=0)
            # among cost-tied predecessors keep the most reliable chain
            tied = np.where(total == best[None, :], score[:, None], -np.inf)
            arg = np.argmax(tied, axis=0)
            back.append(arg)
            cost = best
            score = score[arg] + cand_score[k]
        final = cost + _quantize(np.linalg.norm(cand_pts[-1] - goal, axis=1))
        tied = np.where(final == final.min(), score, -np.inf)
        pick = int(np.argmax(tied))
        picks = [pick]
        for arg in reversed(back):
            picks.append(int(arg[picks[-1]]))
        picks.reverse()
        poses = [
            (float(cand_pts[k][i][0]), float(cand_pts[k][i][1]))
            for k, i in enumerate(picks)
        ]
        poses = _refine_poses(poses, region_seq, partition, scene, ptrm)

    assigned: set[int] = set()
    stops = []
    for region, pose in zip(region_seq, poses):
        fresh = tuple(i for i in region.parents if i not in assigned)
        assigned.update(fresh)
        stops.append(Stop(region=region.id, pose=pose, targets=fresh))

    path_len = 0.0
    prev = scene.start
    for stop in stops:
        path_len += math.dist(prev, stop.pose)
        prev = stop.pose
    path_len += math.dist(prev, scene.goal)
    kappa = len(stops)
    return Plan(
        stops=tuple(stops),
        kappa=kappa,
        path_length=path_len,
        total_cost=kappa + gamma * path_len,
        sequence=solution.sequence,
        start=scene.start,
        goal=scene.goal,
    )


# ---------------------------------------------------------------------------
# One-call pipeline and plan serialization


@dataclass
class PlanningResult:
    ptrm: Ptrm
    partition: PartitionSet
    model: SelectionModel
    solution: Solution
    plan: Plan


def plan_scene(scene: Scene, arm: ArmParams, config: PlanningConfig) -> PlanningResult:
    """Reachability fields -> partition -> optimal stops -> concrete plan."""
    ptrm = build_ptrm(
        scene, arm, config.cell_size, config.mc_samples, config.seed
    )
    partition = complete_partition(ptrm, scene.start, scene.goal)
    model = SelectionModel(
        p=partition.prob_matrix,
        dist=partition.dist,
        gamma=config.gamma,
        delta=config.delta,
    )
    solution = solve(model, node_cap=config.node_cap)
    plan = extract_plan(
        solution, partition, scene, config.gamma,
        ptrm=ptrm, candidate_cap=config.candidate_cap,
    )
    return PlanningResult(
        ptrm=ptrm, partition=partition, model=model, solution=solution, plan=plan
    )


def plan_to_dict(plan: Plan, scene: Scene) -> dict:
    return {
        "stops": [
            {
                "region": s.region,
                "pose": list(s.pose),
                "targets": [scene.targets[i].id for i in s.targets],
            }
            for s in plan.stops
        ],
        "kappa": plan.kappa,
        "path_length": plan.path_length,
        "cost": plan.total_cost,
        "sequence": list(plan.sequence),
    }


def save_plan(plan: Plan, scene: Scene, path: str) -> None:
    atomic_write_text(path, json.dumps(plan_to_dict(plan, scene), indent=2) + "\n")
