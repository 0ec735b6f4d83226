"""Probabilistic reachability over a discretized base workspace.

For every target the robot keeps a field over grid cells: the probability
that parking the base at a cell lets the arm reach the target's (unknown)
manipulation point.  Fields for unobserved targets are Monte Carlo estimates
over the belief; observed targets have exact 0/1 fields (the manipulation
annulus of the known point).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ContainmentError, ObservationError
from .ioutil import atomic_write_bytes, atomic_write_text
from .scene import (
    ArmParams,
    CollapsedBelief,
    Point,
    Scene,
    Troi,
    TruncatedBelief,
    sample_truncated,
)


@dataclass(frozen=True)
class Annulus:
    """Closed ring {p : r_inner <= |p - center| <= r_outer}."""

    center: Point
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0 <= self.r_inner < self.r_outer):
            raise ValueError("annulus: need 0 <= r_inner < r_outer")

    def contains(self, p: Point) -> bool:
        d2 = (p[0] - self.center[0]) ** 2 + (p[1] - self.center[1]) ** 2
        return self.r_inner**2 <= d2 <= self.r_outer**2

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        delta = np.asarray(points) - np.asarray(self.center)
        d2 = np.einsum("ij,ij->i", delta, delta)
        return (d2 >= self.r_inner**2) & (d2 <= self.r_outer**2)


def manipulation_region(mpoi: Point, arm: ArmParams) -> Annulus:
    """Base poses from which the arm reaches a known manipulation point."""
    return Annulus(center=mpoi, r_inner=arm.manip_r_min, r_outer=arm.manip_r_max)


def observation_region(troi: Troi, arm: ArmParams) -> Annulus:
    """Base poses from which the sensor covers the whole target disk."""
    return Annulus(center=troi.center, r_inner=arm.obs_r_min, r_outer=arm.obs_r_max)


def check_containment(troi: Troi, arm: ArmParams) -> bool:
    """True iff every manipulation annulus of a point inside the target disk
    lies inside the target's observation annulus.

    Closed form: sweeping the annulus center over the disk shrinks the safe
    band by the disk radius on both sides.
    """
    r = troi.radius
    return (
        arm.obs_r_min + r <= arm.manip_r_min
        and arm.manip_r_max + r <= arm.obs_r_max
    )


# ---------------------------------------------------------------------------
# Base-pose grid


@dataclass(frozen=True)
class BaseGrid:
    """Uniform cell grid over the inflated workspace; poses are cell centers.

    Row-major indexing: cell k has column k % nx and row k // nx.
    """

    origin: Point  # lower-left corner of cell (0, 0)
    cell_size: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("grid: cell_size must be > 0")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid: empty extent")

    @classmethod
    def for_scene(cls, scene: Scene, arm: ArmParams, cell_size: float) -> "BaseGrid":
        # Inflating by manip_r_max guarantees every manipulation annulus of a
        # point inside the workspace stays on the grid.
        pad = arm.manip_r_max
        ws = scene.workspace
        origin = (ws.x_min - pad, ws.y_min - pad)
        nx = int(math.ceil((ws.width + 2 * pad) / cell_size - 1e-9))
        ny = int(math.ceil((ws.height + 2 * pad) / cell_size - 1e-9))
        return cls(origin=origin, cell_size=cell_size, nx=nx, ny=ny)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @cached_property
    def xs(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.cell_size

    @cached_property
    def ys(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.cell_size

    @cached_property
    def centers(self) -> np.ndarray:
        """(n_cells, 2) array of cell centers in row-major order."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_center(self, index: int) -> Point:
        c = self.centers[index]
        return (float(c[0]), float(c[1]))

    def point_to_cell(self, p: Point) -> int:
        ix = int((p[0] - self.origin[0]) / self.cell_size)
        iy = int((p[1] - self.origin[1]) / self.cell_size)
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"point {p} outside the grid")
        return iy * self.nx + ix

    def box_indices(self, center: Point, radius: float) -> np.ndarray:
        """Cell indices whose centers lie in the axis-aligned box of half
        width `radius` around `center` (cheap superset of a disk)."""
        ix0 = max(0, int(math.floor((center[0] - radius - self.origin[0]) / self.cell_size)))
        ix1 = min(self.nx - 1, int(math.ceil((center[0] + radius - self.origin[0]) / self.cell_size)))
        iy0 = max(0, int(math.floor((center[1] - radius - self.origin[1]) / self.cell_size)))
        iy1 = min(self.ny - 1, int(math.ceil((center[1] + radius - self.origin[1]) / self.cell_size)))
        if ix1 < ix0 or iy1 < iy0:
            return np.empty(0, dtype=np.int64)
        cols = np.arange(ix0, ix1 + 1)
        rows = np.arange(iy0, iy1 + 1)
        return (rows[:, None] * self.nx + cols[None, :]).ravel()


# ---------------------------------------------------------------------------
# Per-target probability fields


@dataclass(frozen=True)
class Ptrm:
    """Per-target reachability fields over a shared base grid.

    prob has shape (n_targets, n_cells); row i is the probability that the
    arm reaches target i's manipulation point from each cell center.  The
    support of a target is exactly the set of cells with positive probability.
    """

    grid: BaseGrid
    arm: ArmParams
    trois: tuple[Troi, ...]
    prob: np.ndarray

    @property
    def n_targets(self) -> int:
        return len(self.trois)

    def support(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.prob[i] > 0)

    @cached_property
    def support_mask(self) -> np.ndarray:
        return self.prob > 0


def _annulus_counts(
    cand: np.ndarray, samples: np.ndarray, r_in: float, r_out: float
) -> np.ndarray:
    """For each candidate point, count samples whose annulus covers it."""
    counts = np.zeros(len(cand), dtype=np.int64)
    lo2, hi2 = r_in**2, r_out**2
    # chunk the sample axis to bound the (cells x samples) temporaries
    for s0 in range(0, len(samples), 128):
        block = samples[s0 : s0 + 128]
        dx = cand[:, 0:1] - block[None, :, 0]
        dy = cand[:, 1:2] - block[None, :, 1]
        d2 = dx * dx + dy * dy
        counts += np.count_nonzero((d2 >= lo2) & (d2 <= hi2), axis=1)
    return counts


def reach_probability(
    cell_center: Point,
    belief,
    arm: ArmParams,
    mc_samples: int,
    seed: int,
) -> float:
    """Probability that the arm reaches the target's point from one pose.

    Collapsed beliefs give exact membership (0 or 1); truncated beliefs are
    estimated from `mc_samples` Monte Carlo draws.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if isinstance(belief, CollapsedBelief):
        region = manipulation_region(belief.point, arm)
        return 1.0 if region.contains(cell_center) else 0.0
    rng = np.random.default_rng(seed)
    pts = sample_truncated(rng, belief, mc_samples)
    cand = np.asarray([cell_center], dtype=float)
    counts = _annulus_counts(cand, pts, arm.manip_r_min, arm.manip_r_max)
    return float(counts[0]) / mc_samples


def build_ptrm(
    scene: Scene,
    arm: ArmParams,
    cell_size: float,
    mc_samples: int,
    seed: int,
) -> Ptrm:
    """Estimate all per-target fields on a fresh grid for the scene.

    Each unobserved target gets one shared Monte Carlo sample set (size
    `mc_samples`, seeded per target); a cell's probability is the fraction of
    sampled points whose manipulation annulus covers the cell center.
    Observed targets get their exact annulus indicator.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    for troi in scene.targets:
        if not check_containment(troi, arm):
            raise ContainmentError(
                f"target {troi.id}: manipulation annuli not contained in the "
                f"observation annulus (radius {troi.radius} too large for arm "
                f"{arm})"
            )
    grid = BaseGrid.for_scene(scene, arm, cell_size)
    prob = np.zeros((len(scene.targets), grid.n_cells))
    centers = grid.centers
    for i, (troi, belief) in enumerate(zip(scene.targets, scene.beliefs)):
        if isinstance(belief, CollapsedBelief):
            prob[i] = _collapsed_row(grid, arm, belief.point)
            continue
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        )
        samples = sample_truncated(rng, belief, mc_samples)
        reach = arm.manip_r_max + troi.radius + cell_size
        cand_idx = grid.box_indices(troi.center, reach)
        counts = _annulus_counts(
            centers[cand_idx], samples, arm.manip_r_min, arm.manip_r_max
        )
        prob[i, cand_idx] = counts / mc_samples
    return Ptrm(grid=grid, arm=arm, trois=scene.targets, prob=prob)


def _collapsed_row(grid: BaseGrid, arm: ArmParams, point: Point) -> np.ndarray:
    row = np.zeros(grid.n_cells)
    idx = grid.box_indices(point, arm.manip_r_max + grid.cell_size)
    region = manipulation_region(point, arm)
    inside = region.contains_many(grid.centers[idx])
    row[idx[inside]] = 1.0
    return row


def collapse(ptrm: Ptrm, target: int, observed: Point) -> Ptrm:
    """Replace a target's field with the exact annulus of the observed point."""
    troi = ptrm.trois[target]
    dx = observed[0] - troi.center[0]
    dy = observed[1] - troi.center[1]
    if math.hypot(dx, dy) > troi.radius + 1e-12:
        raise ObservationError(
            f"target {troi.id}: observed point {observed} outside the target disk"
        )
    prob = ptrm.prob.copy()
    prob[target] = _collapsed_row(ptrm.grid, ptrm.arm, observed)
    return replace(ptrm, prob=prob)


# ---------------------------------------------------------------------------
# Debug dumps


def dump_ptrm(ptrm: Ptrm, out_dir: str) -> list[str]:
    """Write one 8-bit grayscale PGM per target plus a JSON header.

    Returns the list of written paths.  Pixel value 255 = probability 1; the
    image is laid out top row = highest y so standard viewers show the map
    with north up.
    """
    import os

    paths = []
    header = {
        "origin": list(ptrm.grid.origin),
        "cell_size": ptrm.grid.cell_size,
        "nx": ptrm.grid.nx,
        "ny": ptrm.grid.ny,
        "targets": [t.id for t in ptrm.trois],
    }
    hpath = os.path.join(out_dir, "ptrm_header.json")
    atomic_write_text(hpath, json.dumps(header, indent=2) + "\n")
    paths.append(hpath)
    for i, troi in enumerate(ptrm.trois):
        img = ptrm.prob[i].reshape(ptrm.grid.ny, ptrm.grid.nx)
        pixels = np.flipud(np.round(img * 255).astype(np.uint8))
        head = f"P5\n{ptrm.grid.nx} {ptrm.grid.ny}\n255\n".encode("ascii")
        ppath = os.path.join(out_dir, f"ptrm_target_{troi.id}.pgm")
        atomic_write_bytes(ppath, head + pixels.tobytes())
        paths.append(ppath)
    return paths
