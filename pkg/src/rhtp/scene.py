"""Scene model: workspace, disk targets, manipulation-point beliefs, arm geometry.

A scene is a rectangular base workspace containing disk-shaped target regions.
Each target hides one manipulation point.  Before the robot has observed a
target, the point's location is believed to follow a bivariate normal
truncated to the target disk; after observation the belief collapses to the
measured point.  Scenes are immutable value objects and serialize to JSON.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import GenerationError, SceneFormatError, SceneValidationError
from .ioutil import atomic_write_text

Point = tuple[float, float]


def _as_point(value, field: str) -> Point:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise SceneFormatError(f"{field}: expected [x, y], got {value!r}")
    return (float(value[0]), float(value[1]))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, used for the base workspace."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise SceneValidationError(
                f"workspace: degenerate rectangle {self.bounds()}"
            )

    @classmethod
    def from_corners(cls, lo, hi) -> "Rect":
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains_point(self, p: Point) -> bool:
        return self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max

    def contains_disk(self, center: Point, radius: float) -> bool:
        return (
            self.x_min <= center[0] - radius
            and center[0] + radius <= self.x_max
            and self.y_min <= center[1] - radius
            and center[1] + radius <= self.y_max
        )

    def expanded_to(self, p: Point) -> "Rect":
        """Smallest rectangle covering self and the point p."""
        return Rect(
            min(self.x_min, p[0]),
            min(self.y_min, p[1]),
            max(self.x_max, p[0]),
            max(self.y_max, p[1]),
        )


@dataclass(frozen=True)
class Troi:
    """Disk-shaped target region of interest."""

    id: str
    center: Point
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneValidationError(f"target {self.id}: radius must be > 0")


@dataclass(frozen=True)
class TruncatedBelief:
    """Bivariate normal truncated to a disk of `radius` around `mean`."""

    mean: Point
    cov: tuple[tuple[float, float], tuple[float, float]]
    radius: float

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (2, 2) or abs(c[0, 1] - c[1, 0]) > 0:
            raise SceneValidationError("belief.cov: expected symmetric 2x2 matrix")
        if np.linalg.eigvalsh(c).min() <= 0:
            raise SceneValidationError("belief.cov: not positive definite")
        if self.radius <= 0:
            raise SceneValidationError("belief: truncation radius must be > 0")


@dataclass(frozen=True)
class CollapsedBelief:
    """Deterministic manipulation point after a successful observation."""

    point: Point


BeliefState = TruncatedBelief | CollapsedBelief


@dataclass(frozen=True)
class ArmParams:
    """Annulus radii of the manipulation and observation regions (meters).

    A base pose can manipulate a point at planar distance d iff
    manip_r_min <= d <= manip_r_max, and observe a target's disk from
    distances within [obs_r_min, obs_r_max].
    """

    manip_r_min: float
    manip_r_max: float
    obs_r_min: float
    obs_r_max: float

    def __post_init__(self):
        if not (0 <= self.manip_r_min < self.manip_r_max):
            raise SceneValidationError("arm: need 0 <= manip_r_min < manip_r_max")
        if not (0 <= self.obs_r_min < self.obs_r_max):
            raise SceneValidationError("arm: need 0 <= obs_r_min < obs_r_max")


@dataclass(frozen=True)
class Scene:
    """Immutable scene: targets with beliefs plus start/goal base poses."""

    workspace: Rect
    start: Point
    goal: Point
    targets: tuple[Troi, ...]
    beliefs: tuple[BeliefState, ...]

    def __post_init__(self):
        if len(self.targets) != len(self.beliefs):
            raise SceneValidationError("beliefs: one belief per target required")
        ids = [t.id for t in self.targets]
        if len(set(ids)) != len(ids):
            raise SceneValidationError("targets: ids must be unique")
        for label, p in (("start", self.start), ("goal", self.goal)):
            if not self.workspace.contains_point(p):
                raise SceneValidationError(f"{label}: outside the workspace")
        for t, b in zip(self.targets, self.beliefs):
            if not self.workspace.contains_disk(t.center, t.radius):
                raise SceneValidationError(
                    f"target {t.id}: disk extends beyond the workspace"
                )
            if isinstance(b, TruncatedBelief):
                if b.radius != t.radius:
                    raise SceneValidationError(
                        f"target {t.id}: belief truncation radius must equal "
                        "the target radius"
                    )
            else:
                dx = b.point[0] - t.center[0]
                dy = b.point[1] - t.center[1]
                if math.hypot(dx, dy) > t.radius + 1e-12:
                    raise SceneValidationError(
                        f"target {t.id}: collapsed point outside the target disk"
                    )

    @property
    def density(self) -> float:
        """Targets per square meter of workspace."""
        return len(self.targets) / self.workspace.area

    def with_beliefs(self, beliefs) -> "Scene":
        return replace(self, beliefs=tuple(beliefs))


# ---------------------------------------------------------------------------
# JSON serialization


def _belief_from_json(obj, field: str, troi: Troi) -> BeliefState:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SceneFormatError(f"{field}: expected an object with a 'kind'")
    kind = obj["kind"]
    if kind == "truncated":
        try:
            mean = _as_point(obj["mean"], f"{field}.mean")
            cov = obj["cov"]
        except KeyError as e:
            raise SceneFormatError(f"{field}: missing {e.args[0]}") from None
        try:
            cov_t = tuple(tuple(float(v) for v in row) for row in cov)
        except (TypeError, ValueError):
            raise SceneFormatError(f"{field}.cov: expected a 2x2 matrix") from None
        return TruncatedBelief(mean=mean, cov=cov_t, radius=troi.radius)
    if kind == "collapsed":
        try:
            return CollapsedBelief(point=_as_point(obj["point"], f"{field}.point"))
        except KeyError:
            raise SceneFormatError(f"{field}: missing point") from None
    raise SceneFormatError(f"{field}.kind: unknown kind {kind!r}")


def _belief_to_json(belief: BeliefState) -> dict:
    if isinstance(belief, TruncatedBelief):
        return {
            "kind": "truncated",
            "mean": list(belief.mean),
            "cov": [list(row) for row in belief.cov],
        }
    return {"kind": "collapsed", "point": list(belief.point)}


def scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise SceneFormatError("scene: top level must be an object")
    for key in ("workspace", "start", "goal", "targets"):
        if key not in data:
            raise SceneFormatError(f"scene: missing '{key}'")
    ws = data["workspace"]
    if not isinstance(ws, dict) or "min" not in ws or "max" not in ws:
        raise SceneFormatError("workspace: expected {'min': [x,y], 'max': [x,y]}")
    workspace = Rect.from_corners(
        _as_point(ws["min"], "workspace.min"), _as_point(ws["max"], "workspace.max")
    )
    targets = []
    beliefs = []
    if not isinstance(data["targets"], list):
        raise SceneFormatError("targets: expected a list")
    for k, t in enumerate(data["targets"]):
        field = f"targets[{k}]"
        if not isinstance(t, dict):
            raise SceneFormatError(f"{field}: expected an object")
        try:
            troi = Troi(
                id=str(t["id"]),
                center=_as_point(t["center"], f"{field}.center"),
                radius=float(t["radius"]),
            )
            belief_obj = t["belief"]
        except KeyError as e:
            raise SceneFormatError(f"{field}: missing {e.args[0]}") from None
        targets.append(troi)
        beliefs.append(_belief_from_json(belief_obj, f"{field}.belief", troi))
    return Scene(
        workspace=workspace,
        start=_as_point(data["start"], "start"),
        goal=_as_point(data["goal"], "goal"),
        targets=tuple(targets),
        beliefs=tuple(beliefs),
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "workspace": {
            "min": [scene.workspace.x_min, scene.workspace.y_min],
            "max": [scene.workspace.x_max, scene.workspace.y_max],
        },
        "start": list(scene.start),
        "goal": list(scene.goal),
        "targets": [
            {
                "id": t.id,
                "center": list(t.center),
                "radius": t.radius,
                "belief": _belief_to_json(b),
            }
            for t, b in zip(scene.targets, scene.beliefs)
        ],
    }


def load_scene(path: str | os.PathLike) -> Scene:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneFormatError(f"scene file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    return scene_from_dict(data)


def save_scene(scene: Scene, path: str | os.PathLike) -> None:
    atomic_write_text(path, json.dumps(scene_to_dict(scene), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Random scenes and belief sampling


def generate_scene(
    density: float,
    workspace: Rect,
    radius: float,
    seed: int,
) -> Scene:
    """Draw floor(density * area) targets uniformly, disks fully inside.

    Start and goal sit at the midpoints of the workspace's two long edges.
    Overlapping target disks are legal.  Deterministic in `seed`.
    """
    if density <= 0:
        raise GenerationError("density must be > 0")
    n = int(math.floor(density * workspace.area))
    if n < 1:
        raise GenerationError("density * area < 1: no targets to place")
    lo = (workspace.x_min + radius, workspace.y_min + radius)
    hi = (workspace.x_max - radius, workspace.y_max - radius)
    if not (lo[0] < hi[0] and lo[1] < hi[1]):
        raise GenerationError(
            f"radius {radius} too large for workspace {workspace.bounds()}"
        )
    rng = np.random.default_rng(seed)
    centers = rng.uniform(low=lo, high=hi, size=(n, 2))
    if workspace.width >= workspace.height:
        cx = 0.5 * (workspace.x_min + workspace.x_max)
        start = (cx, workspace.y_min)
        goal = (cx, workspace.y_max)
    else:
        cy = 0.5 * (workspace.y_min + workspace.y_max)
        start = (workspace.x_min, cy)
        goal = (workspace.x_max, cy)
    targets = tuple(
        Troi(id=f"t{i}", center=(float(c[0]), float(c[1])), radius=radius)
        for i, c in enumerate(centers)
    )
    beliefs = tuple(
        TruncatedBelief(
            mean=t.center,
            cov=((radius, 0.0), (0.0, radius)),
            radius=radius,
        )
        for t in targets
    )
    return Scene(
        workspace=workspace, start=start, goal=goal, targets=targets, beliefs=beliefs
    )


def sample_truncated(
    rng: np.random.Generator, belief: TruncatedBelief, count: int
) -> np.ndarray:
    """Rejection-sample `count` points from the disk-truncated normal."""
    mean = np.asarray(belief.mean)
    cov = np.asarray(belief.cov)
    out = np.empty((count, 2))
    have = 0
    batch = max(64, count)
    while have < count:
        draws = rng.multivariate_normal(mean, cov, size=batch, method="cholesky")
        d2 = np.sum((draws - mean) ** 2, axis=1)
        keep = draws[d2 <= belief.radius**2]
        take = min(count - have, len(keep))
        out[have : have + take] = keep[:take]
        have += take
    return out


def sample_mpoi(belief: BeliefState, seed: int) -> Point:
    """Draw one manipulation point from a belief (identity for collapsed)."""
    if isinstance(belief, CollapsedBelief):
        return belief.point
    rng = np.random.default_rng(seed)
    p = sample_truncated(rng, belief, 1)[0]
    return (float(p[0]), float(p[1]))
