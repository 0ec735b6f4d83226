"""Benchmark harness: sweep scenes, run both algorithms, write CSV and charts.

A run is fully described by a RunConfig (JSON-serializable).  Scenes come
either from files or from the seeded generator over a density x radius grid.
Every episode is reproducible: scene seeds and truth seeds derive from the
master seed by stable mixing, and the per-scene initial plan is computed once
and shared across truth draws (it does not depend on the truth).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, RhtpError
from .executor import EpisodeMetrics, draw_truth, naive_capm_episode, simulate_episode
from .ioutil import atomic_write_bytes, atomic_write_text, derived_seed
from .planner import PlanningConfig, plan_scene
from .reachability import build_ptrm
from .scene import ArmParams, Rect, Scene, generate_scene, load_scene

ALGORITHMS = ("rhtp", "naive")

CSV_COLUMNS = (
    "scene_id",
    "algorithm",
    "density",
    "radius",
    "gamma",
    "delta",
    "truth_seed",
    "path_length_m",
    "stops",
    "energy",
    "replans",
    "completed",
)


@dataclass(frozen=True)
class GeneratorSpec:
    densities: tuple[float, ...] = (1.0, 3.0, 5.0, 7.0)
    radii: tuple[float, ...] = (0.15,)
    scenes_per_setting: int = 10
    workspace: Rect = field(default_factory=lambda: Rect(0.0, 0.0, 1.0, 1.0))


@dataclass(frozen=True)
class RunConfig:
    arm: ArmParams = ArmParams(0.15, 1.05, 0.0, 1.25)
    generator: GeneratorSpec | None = field(default_factory=GeneratorSpec)
    scene_files: tuple[str, ...] = ()
    cell_size: float = 0.02
    mc_samples: int = 2000
    gamma: float = 1.12
    delta: float = 0.7
    truth_samples: int = 1000
    algorithms: tuple[str, ...] = ALGORITHMS
    seed: int = 0
    out_dir: str = "out"
    charts: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError("config: gamma must be > 0")
        if not (0 < self.delta < 1):
            raise InputError("config: delta must lie in (0, 1)")
        if self.mc_samples < 100:
            raise InputError("config: mc_samples must be >= 100")
        if self.cell_size <= 0:
            raise InputError("config: cell_size must be > 0")
        if self.truth_samples < 1:
            raise InputError("config: truth_samples must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise InputError(f"config: unknown algorithm {a!r}")
        if not self.generator and not self.scene_files:
            raise InputError("config: no scenes (need generator or scene_files)")

    def planning(self, seed: int) -> PlanningConfig:
        return PlanningConfig(
            cell_size=self.cell_size,
            mc_samples=self.mc_samples,
            gamma=self.gamma,
            delta=self.delta,
            seed=seed,
        )


_CONFIG_KEYS = frozenset(
    {
        "arm",
        "generator",
        "scene_files",
        "algorithms",
        "cell_size",
        "mc_samples",
        "gamma",
        "delta",
        "truth_samples",
        "seed",
        "out_dir",
        "charts",
        "jobs",
    }
)


def config_from_dict(data: dict, **overrides) -> RunConfig:
    """Build a RunConfig from parsed JSON plus keyword overrides."""
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise InputError(f"config: unknown keys {', '.join(unknown)}")
    kwargs: dict = {}
    if "arm" in data:
        kwargs["arm"] = ArmParams(**data["arm"])
    if "generator" in data:
        g = data["generator"]
        if g is None:
            kwargs["generator"] = None
        else:
            gkw = {}
            if "densities" in g:
                gkw["densities"] = tuple(float(d) for d in g["densities"])
            if "radii" in g:
                gkw["radii"] = tuple(float(r) for r in g["radii"])
            if "scenes_per_setting" in g:
                gkw["scenes_per_setting"] = int(g["scenes_per_setting"])
            if "workspace" in g:
                ws = g["workspace"]
                gkw["workspace"] = Rect.from_corners(ws["min"], ws["max"])
            kwargs["generator"] = GeneratorSpec(**gkw)
    if "scene_files" in data:
        kwargs["scene_files"] = tuple(data["scene_files"])
        kwargs.setdefault("generator", None)
    for key in (
        "cell_size",
        "mc_samples",
        "gamma",
        "delta",
        "truth_samples",
        "seed",
        "out_dir",
        "charts",
        "jobs",
    ):
        if key in data:
            kwargs[key] = data[key]
    if "algorithms" in data:
        kwargs["algorithms"] = tuple(data["algorithms"])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**kwargs)
    except TypeError as e:
        raise InputError(f"config: {e}") from None


def load_config(path: str, **overrides) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(data, **overrides)


# ---------------------------------------------------------------------------
# Scene enumeration


@dataclass(frozen=True)
class SceneCase:
    scene_id: str
    scene: Scene
    density: float
    radius: float
    index: int  # position in the run, drives the planning seed
    truth_stream: tuple[int, ...]  # radius-independent key for truth seeds


def enumerate_scenes(config: RunConfig) -> list[SceneCase]:
    cases: list[SceneCase] = []
    idx = 0
    for path in config.scene_files:
        scene = load_scene(path)
        radius = float(np.mean([t.radius for t in scene.targets])) if scene.targets else 0.0
        cases.append(
            SceneCase(
                scene_id=os.path.splitext(os.path.basename(path))[0],
                scene=scene,
                density=scene.density,
                radius=radius,
                index=idx,
                truth_stream=(2, idx),
            )
        )
        idx += 1
    if config.generator is not None:
        g = config.generator
        for di, density in enumerate(g.densities):
            for radius in g.radii:
                for k in range(g.scenes_per_setting):
                    # the layout seed ignores the radius so a radius sweep
                    # reuses the same target centers at every radius (paired
                    # comparison); truth seeds are matched the same way
                    seed = derived_seed(config.seed, 101, di, k)
                    scene = generate_scene(density, g.workspace, radius, seed)
                    cases.append(
                        SceneCase(
                            scene_id=f"gen-d{density:g}-r{radius:g}-{k}",
                            scene=scene,
                            density=density,
                            radius=radius,
                            index=idx,
                            truth_stream=(1, di, k),
                        )
                    )
                    idx += 1
    if not cases:
        raise InputError("config: scene list is empty")
    return cases


# ---------------------------------------------------------------------------
# Episode records


@dataclass(frozen=True)
class EpisodeRecord:
    scene_id: str
    algorithm: str
    density: float
    radius: float
    truth_seed: int
    metrics: EpisodeMetrics

    def csv_row(self, config: RunConfig) -> str:
        m = self.metrics
        return ",".join(
            [
                self.scene_id,
                self.algorithm,
                repr(self.density),
                repr(self.radius),
                repr(config.gamma),
                repr(config.delta),
                str(self.truth_seed),
                repr(m.path_length),
                str(m.stops),
                repr(m.energy),
                str(m.replans),
                "true" if m.completed else "false",
            ]
        )


def run_scene_case(case: SceneCase, config: RunConfig) -> list[EpisodeRecord]:
    """All episodes of one scene: shared initial plan, per-truth execution."""
    plan_seed = derived_seed(config.seed, 211, case.index)
    pcfg = config.planning(plan_seed)
    records: list[EpisodeRecord] = []

    first_round = None
    shared_ptrm = None
    failure: RhtpError | None = None
    if "rhtp" in config.algorithms:
        try:
            first_round = plan_scene(case.scene, config.arm, pcfg)
            shared_ptrm = first_round.ptrm
        except RhtpError as e:
            failure = e
    if shared_ptrm is None and "naive" in config.algorithms:
        try:
            shared_ptrm = build_ptrm(
                case.scene, config.arm, pcfg.cell_size, pcfg.mc_samples, pcfg.seed
            )
        except RhtpError as e:
            failure = e

    for t in range(config.truth_samples):
        truth_seed = derived_seed(config.seed, 307, *case.truth_stream, t)
        truth = draw_truth(case.scene, truth_seed) if failure is None else None
        for algorithm in config.algorithms:
            if failure is not None or truth is None:
                metrics = EpisodeMetrics(0.0, 0, 0.0, 0, False)
            elif algorithm == "rhtp":
                if first_round is None:
                    metrics = EpisodeMetrics(0.0, 0, 0.0, 0, False)
                else:
                    metrics = simulate_episode(
                        case.scene, config.arm, pcfg, truth, first_round
                    )
            else:
                metrics = naive_capm_episode(
                    case.scene, config.arm, pcfg, truth, shared_ptrm
                )
            records.append(
                EpisodeRecord(
                    scene_id=case.scene_id,
                    algorithm=algorithm,
                    density=case.density,
                    radius=case.radius,
                    truth_seed=truth_seed,
                    metrics=metrics,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Aggregation and outputs


@dataclass(frozen=True)
class SummaryRow:
    density: float
    radius: float
    algorithm: str
    episodes: int
    mean: dict
    stderr: dict


_METRICS = ("path_length", "stops", "energy", "replans")


def summarize(records: list[EpisodeRecord]) -> list[SummaryRow]:
    """Mean and standard error per (density, radius, algorithm) group."""
    groups: dict[tuple, list[EpisodeRecord]] = {}
    for rec in records:
        groups.setdefault((rec.density, rec.radius, rec.algorithm), []).append(rec)
    rows = []
    for (density, radius, algorithm), recs in sorted(groups.items()):
        mean = {}
        stderr = {}
        for metric in _METRICS:
            vals = np.asarray([getattr(r.metrics, metric) for r in recs], dtype=float)
            mean[metric] = float(vals.mean())
            stderr[metric] = (
                float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            )
        rows.append(
            SummaryRow(
                density=density,
                radius=radius,
                algorithm=algorithm,
                episodes=len(recs),
                mean=mean,
                stderr=stderr,
            )
        )
    return rows


def format_summary(rows: list[SummaryRow]) -> str:
    header = (
        f"{'density':>7} {'radius':>6} {'algo':>6} {'n':>5} "
        f"{'energy':>16} {'path_m':>16} {'stops':>13} {'replans':>13}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.density:>7g} {r.radius:>6g} {r.algorithm:>6} {r.episodes:>5} "
            f"{r.mean['energy']:>8.3f}±{r.stderr['energy']:<7.3f} "
            f"{r.mean['path_length']:>8.3f}±{r.stderr['path_length']:<7.3f} "
            f"{r.mean['stops']:>6.2f}±{r.stderr['stops']:<6.3f} "
            f"{r.mean['replans']:>6.2f}±{r.stderr['replans']:<6.3f}"
        )
    return "\n".join(lines)


def write_csv(records: list[EpisodeRecord], config: RunConfig, path: str) -> None:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(rec.csv_row(config) for rec in records)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_charts(rows: list[SummaryRow], config: RunConfig, out_dir: str) -> list[str]:
    """One SVG per metric, x-axis = whichever parameter the run sweeps."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "rhtp"
    import matplotlib.pyplot as plt

    densities = sorted({r.density for r in rows})
    radii = sorted({r.radius for r in rows})
    if len(radii) > 1 and len(densities) == 1:
        x_of = lambda r: r.radius
        x_label = "target radius [m]"
        stem = "radius"
    else:
        x_of = lambda r: r.density
        x_label = "target density [1/m^2]"
        stem = "density"
    paths = []
    labels = {
        "energy": "mean cycle energy",
        "path_length": "mean path length [m]",
        "stops": "mean stops",
        "replans": "mean replans",
    }
    for metric in _METRICS:
        fig, ax = plt.subplots(figsize=(4.2, 3.2), dpi=100)
        for algorithm in sorted({r.algorithm for r in rows}):
            pts = sorted(
                (x_of(r), r.mean[metric], r.stderr[metric])
                for r in rows
                if r.algorithm == algorithm
            )
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            es = [p[2] for p in pts]
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=algorithm)
        ax.set_xlabel(x_label)
        ax.set_ylabel(labels[metric])
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"{metric}_vs_{stem}.svg")
        import io

        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        atomic_write_bytes(path, buf.getvalue())
        paths.append(path)
    return paths


@dataclass
class ExperimentResult:
    records: list[EpisodeRecord]
    summary: list[SummaryRow]
    csv_path: str
    chart_paths: list[str]


def run_experiment(config: RunConfig, progress=None) -> ExperimentResult:
    """Run every scene/algorithm/truth combination and write the outputs.

    Episode rows are flushed to a .partial.csv as scenes finish so an aborted
    run leaves usable data; the final results.csv is renamed into place.
    """
    cases = enumerate_scenes(config)
    os.makedirs(config.out_dir, exist_ok=True)
    partial_path = os.path.join(config.out_dir, "results.partial.csv")
    records: list[EpisodeRecord] = []

    if config.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(run_scene_case, case, config) for case in cases]
            with open(partial_path, "w", encoding="utf-8") as fh:
                fh.write(",".join(CSV_COLUMNS) + "\n")
                for case, fut in zip(cases, futures):
                    recs = fut.result()
                    records.extend(recs)
                    for rec in recs:
                        fh.write(rec.csv_row(config) + "\n")
                    fh.flush()
                    if progress:
                        progress(case.scene_id)
    else:
        with open(partial_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for case in cases:
                recs = run_scene_case(case, config)
                records.extend(recs)
                for rec in recs:
                    fh.write(rec.csv_row(config) + "\n")
                fh.flush()
                if progress:
                    progress(case.scene_id)

    csv_path = os.path.join(config.out_dir, "results.csv")
    write_csv(records, config, csv_path)
    os.unlink(partial_path)
    summary = summarize(records)
    chart_paths = write_charts(summary, config, config.out_dir) if config.charts else []
    return ExperimentResult(
        records=records, summary=summary, csv_path=csv_path, chart_paths=chart_paths
    )
