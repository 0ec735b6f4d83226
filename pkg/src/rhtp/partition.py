"""Task-space partition: group reachable cells by their parent-target set.

Cells that can serve exactly the same subset of targets form one region,
even when that set of cells is geometrically disconnected.  Regions tile the
union of all target supports, carry the per-target mean success probability,
and a distance matrix bordered by the start (vertex 0) and goal (vertex r+1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyTaskSpaceError
from .reachability import BaseGrid, Ptrm
from .scene import Point


@dataclass(frozen=True)
class Region:
    """One partition class: all cells sharing a parent-target signature."""

    id: int  # 1-based; doubles as the region's tour-vertex index
    cells: np.ndarray  # sorted global cell indices
    parents: tuple[int, ...]  # sorted target indices reachable from every cell
    rep_cells: np.ndarray  # boundary subset of `cells`, for distance queries


@dataclass(frozen=True)
class PartitionSet:
    """Regions plus (optionally) the probability and distance matrices."""

    grid: BaseGrid
    n_targets: int
    regions: tuple[Region, ...]
    prob_matrix: np.ndarray | None = None  # (n_targets, r) region means
    dist: np.ndarray | None = None  # (r+2, r+2), 0 = start, r+1 = goal

    @property
    def n_regions(self) -> int:
        return len(self.regions)


def _boundary_cells(grid: BaseGrid, cells: np.ndarray) -> np.ndarray:
    """Cells of the set with at least one 4-neighbor outside the set.

    The closest pair between two disjoint cell sets is always realized on
    their boundaries, so distance queries only need these.
    """
    nx, ny = grid.nx, grid.ny
    mask = np.zeros(nx * ny, dtype=bool)
    mask[cells] = True
    m = mask.reshape(ny, nx)
    interior = np.ones_like(m)
    interior[1:, :] &= m[:-1, :]
    interior[:-1, :] &= m[1:, :]
    interior[:, 1:] &= m[:, :-1]
    interior[:, :-1] &= m[:, 1:]
    # grid-edge cells are boundary by definition
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    boundary = m & ~interior
    return np.flatnonzero(boundary.ravel())


def compute_partition(ptrm: Ptrm) -> PartitionSet:
    """Group covered cells by signature; region ids follow lexicographic
    order of the sorted parent tuples."""
    support = ptrm.support_mask
    covered = support.any(axis=0)
    cell_idx = np.flatnonzero(covered)
    if cell_idx.size == 0:
        raise EmptyTaskSpaceError("no base cell reaches any target")
    # pack each covered cell's target-membership column into bytes so that
    # np.unique can group arbitrary target counts
    cols = support[:, cell_idx]
    keys = np.packbits(cols, axis=0).T  # (n_covered, ceil(n/8))
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    parent_sets = []
    for row in uniq:
        bits = np.unpackbits(row, count=ptrm.n_targets)
        parent_sets.append(tuple(int(i) for i in np.flatnonzero(bits)))
    order = sorted(range(len(parent_sets)), key=lambda k: parent_sets[k])
    regions = []
    for new_id, old in enumerate(order, start=1):
        cells = np.sort(cell_idx[inverse == old])
        regions.append(
            Region(
                id=new_id,
                cells=cells,
                parents=parent_sets[old],
                rep_cells=_boundary_cells(ptrm.grid, cells),
            )
        )
    return PartitionSet(
        grid=ptrm.grid, n_targets=ptrm.n_targets, regions=tuple(regions)
    )


def probability_matrix(partition: PartitionSet, ptrm: Ptrm) -> np.ndarray:
    """P[i, j] = mean success probability of target i over region j's cells."""
    n, r = ptrm.n_targets, partition.n_regions
    p = np.zeros((n, r))
    for j, region in enumerate(partition.regions):
        p[:, j] = ptrm.prob[:, region.cells].mean(axis=1)
    return p


def region_distances(
    partition: PartitionSet, start: Point, goal: Point
) -> np.ndarray:
    """Minimum cell-center distances between regions, bordered by the start
    (index 0) and goal (index r+1) poses."""
    r = partition.n_regions
    centers = partition.grid.centers
    dist = np.zeros((r + 2, r + 2))
    start_a = np.asarray(start)
    goal_a = np.asarray(goal)
    dist[0, r + 1] = dist[r + 1, 0] = float(np.linalg.norm(goal_a - start_a))
    trees = [cKDTree(centers[reg.rep_cells]) for reg in partition.regions]
    for j, reg in enumerate(partition.regions, start=1):
        cells = centers[reg.cells]
        dist[0, j] = dist[j, 0] = float(
            np.min(np.linalg.norm(cells - start_a, axis=1))
        )
        dist[j, r + 1] = dist[r + 1, j] = float(
            np.min(np.linalg.norm(cells - goal_a, axis=1))
        )
    for j in range(r):
        for k in range(j + 1, r):
            a, b = partition.regions[j], partition.regions[k]
            # query the smaller boundary against the bigger tree
            if len(a.rep_cells) <= len(b.rep_cells):
                d, _ = trees[k].query(centers[a.rep_cells], k=1)
            else:
                d, _ = trees[j].query(centers[b.rep_cells], k=1)
            dist[j + 1, k + 1] = dist[k + 1, j + 1] = float(np.min(d))
    return dist


def complete_partition(ptrm: Ptrm, start: Point, goal: Point) -> PartitionSet:
    """Partition with probability and distance matrices filled in."""
    part = compute_partition(ptrm)
    return replace(
        part,
        prob_matrix=probability_matrix(part, ptrm),
        dist=region_distances(part, start, goal),
    )


def dump_partition(partition: PartitionSet, out_dir: str) -> list[str]:
    """Write the region label map and region table as CSV files."""
    import os

    from .ioutil import atomic_write_text

    labels = np.zeros(partition.grid.n_cells, dtype=np.int64)
    for reg in partition.regions:
        labels[reg.cells] = reg.id
    lines = ["cell,region"]
    nonzero = np.flatnonzero(labels)
    lines.extend(f"{c},{labels[c]}" for c in nonzero)
    lpath = os.path.join(out_dir, "region_labels.csv")
    atomic_write_text(lpath, "\n".join(lines) + "\n")
    rows = ["region,n_cells,parents"]
    rows.extend(
        f"{reg.id},{len(reg.cells)},{';'.join(str(p) for p in reg.parents)}"
        for reg in partition.regions
    )
    rpath = os.path.join(out_dir, "regions.csv")
    atomic_write_text(rpath, "\n".join(rows) + "\n")
    return [lpath, rpath]
