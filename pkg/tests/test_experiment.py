import json
import math

import numpy as np
import pytest

from rhtp.errors import InputError
from rhtp.executor import EpisodeMetrics
from rhtp.experiment import (
    ALGORITHMS,
    CSV_COLUMNS,
    EpisodeRecord,
    GeneratorSpec,
    RunConfig,
    config_from_dict,
    enumerate_scenes,
    load_config,
    run_experiment,
    run_scene_case,
    summarize,
    write_csv,
)
from rhtp.scene import ArmParams, Rect

TEST_ARM = ArmParams(0.15, 1.05, 0.0, 1.25)


def tiny_config(out_dir, **kw):
    defaults = dict(
        arm=TEST_ARM,
        generator=GeneratorSpec(
            densities=(2.0,), radii=(0.15,), scenes_per_setting=1
        ),
        truth_samples=2,
        mc_samples=500,
        seed=7,
        out_dir=str(out_dir),
        charts=False,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(InputError):
            tiny_config("x", gamma=0.0)
        with pytest.raises(InputError):
            tiny_config("x", delta=1.0)
        with pytest.raises(InputError):
            tiny_config("x", mc_samples=10)
        with pytest.raises(InputError):
            tiny_config("x", truth_samples=0)
        with pytest.raises(InputError):
            tiny_config("x", algorithms=("rhtp", "unknown"))
        with pytest.raises(InputError):
            tiny_config("x", generator=None, scene_files=())

    def test_from_dict_and_overrides(self):
        cfg = config_from_dict(
            {
                "arm": {
                    "manip_r_min": 0.15,
                    "manip_r_max": 1.05,
                    "obs_r_min": 0.0,
                    "obs_r_max": 1.25,
                },
                "generator": {
                    "densities": [1, 5],
                    "radii": [0.15, 0.3],
                    "scenes_per_setting": 3,
                    "workspace": {"min": [0, 0], "max": [2, 1]},
                },
                "gamma": 1.12,
                "truth_samples": 50,
            },
            seed=9,
            out_dir="elsewhere",
        )
        assert cfg.generator.densities == (1.0, 5.0)
        assert cfg.generator.radii == (0.15, 0.3)
        assert cfg.generator.workspace == Rect(0.0, 0.0, 2.0, 1.0)
        assert cfg.seed == 9 and cfg.out_dir == "elsewhere"

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(InputError):
            config_from_dict({"bogus_key": 1, "generator": {}, "arm": {
                "manip_r_min": 0.15, "manip_r_max": 1.05,
                "obs_r_min": 0.0, "obs_r_max": 1.25}})

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_config(str(tmp_path / "nope.json"))

    def test_load_config_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"truth_samples": 5, "seed": 3}))
        cfg = load_config(str(path))
        assert cfg.truth_samples == 5 and cfg.seed == 3


class TestEnumerateScenes:
    def test_ids_and_indices(self):
        cfg = tiny_config(
            "x",
            generator=GeneratorSpec(
                densities=(1.0, 3.0), radii=(0.15,), scenes_per_setting=2
            ),
        )
        cases = enumerate_scenes(cfg)
        assert [c.index for c in cases] == list(range(4))
        assert len({c.scene_id for c in cases}) == 4
        assert cases[0].scene_id == "gen-d1-r0.15-0"

    def test_radius_sweep_reuses_layouts_and_truth_streams(self):
        cfg = tiny_config(
            "x",
            generator=GeneratorSpec(
                densities=(5.0,), radii=(0.15, 0.3), scenes_per_setting=2
            ),
        )
        cases = enumerate_scenes(cfg)
        by_radius = {}
        for c in cases:
            by_radius.setdefault(c.radius, []).append(c)
        small, large = by_radius[0.15], by_radius[0.3]

        def unit_draws(case):
            # invert the wall-clearance scaling back to the raw uniforms
            ws = case.scene.workspace
            r = case.radius
            centers = np.asarray([t.center for t in case.scene.targets])
            lo = np.asarray([ws.x_min + r, ws.y_min + r])
            span = np.asarray([ws.width - 2 * r, ws.height - 2 * r])
            return (centers - lo) / span

        for a, b in zip(small, large):
            # same underlying draws, same truth stream: scenes are paired and
            # only the radius (plus the implied wall clearance) changes
            assert np.allclose(unit_draws(a), unit_draws(b), atol=1e-9)
            assert a.truth_stream == b.truth_stream
            assert all(t.radius == 0.15 for t in a.scene.targets)
            assert all(t.radius == 0.3 for t in b.scene.targets)

    def test_density_sets_target_count(self):
        cfg = tiny_config(
            "x",
            generator=GeneratorSpec(
                densities=(3.0, 6.0), radii=(0.15,), scenes_per_setting=1,
                workspace=Rect(0.0, 0.0, 1.0, 1.0),
            ),
        )
        cases = enumerate_scenes(cfg)
        assert [len(c.scene.targets) for c in cases] == [3, 6]


class TestRecordsAndSummary:
    def test_run_scene_case_shape_and_determinism(self, tmp_path):
        cfg = tiny_config(tmp_path)
        case = enumerate_scenes(cfg)[0]
        recs = run_scene_case(case, cfg)
        assert len(recs) == cfg.truth_samples * len(cfg.algorithms)
        # truth seeds shared across algorithms within each draw
        for t in range(cfg.truth_samples):
            pair = recs[2 * t : 2 * t + 2]
            assert {r.algorithm for r in pair} == set(ALGORITHMS)
            assert len({r.truth_seed for r in pair}) == 1
        again = run_scene_case(case, cfg)
        assert [r.csv_row(cfg) for r in again] == [r.csv_row(cfg) for r in recs]

    def test_summarize_hand_check(self):
        def rec(alg, energy):
            return EpisodeRecord(
                scene_id="s",
                algorithm=alg,
                density=1.0,
                radius=0.15,
                truth_seed=0,
                metrics=EpisodeMetrics(
                    path_length=2.0, stops=1, energy=energy, replans=0, completed=True
                ),
            )

        rows = summarize([rec("rhtp", 2.0), rec("rhtp", 4.0), rec("naive", 6.0)])
        assert len(rows) == 2
        naive, rhtp = rows[0], rows[1]
        assert (naive.algorithm, rhtp.algorithm) == ("naive", "rhtp")
        assert rhtp.episodes == 2
        assert rhtp.mean["energy"] == 3.0
        expect_se = np.std([2.0, 4.0], ddof=1) / math.sqrt(2)
        assert rhtp.stderr["energy"] == pytest.approx(expect_se)
        assert naive.stderr["energy"] == 0.0

    def test_csv_layout(self, tmp_path):
        cfg = tiny_config(tmp_path)
        rec = EpisodeRecord(
            scene_id="s1",
            algorithm="rhtp",
            density=1.0,
            radius=0.15,
            truth_seed=42,
            metrics=EpisodeMetrics(1.5, 2, 3.68, 1, True),
        )
        path = tmp_path / "r.csv"
        write_csv([rec], cfg, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        cells = lines[1].split(",")
        assert cells[0] == "s1" and cells[1] == "rhtp"
        assert float(cells[7]) == 1.5 and cells[8] == "2"
        assert cells[11] == "true"


class TestRunExperiment:
    def test_outputs_and_byte_determinism(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        res_a = run_experiment(tiny_config(out_a))
        res_b = run_experiment(tiny_config(out_b))
        csv_a = (out_a / "results.csv").read_bytes()
        csv_b = (out_b / "results.csv").read_bytes()
        assert csv_a == csv_b
        assert not (out_a / "results.partial.csv").exists()
        n_rows = len(csv_a.decode().splitlines()) - 1
        assert n_rows == len(res_a.records) == 4  # 1 scene x 2 truths x 2 algos
        assert all(r.metrics.completed for r in res_a.records)
        assert [round(r.mean["energy"], 12) for r in res_a.summary] == [
            round(r.mean["energy"], 12) for r in res_b.summary
        ]

    def test_charts_written_when_enabled(self, tmp_path):
        cfg = tiny_config(tmp_path, charts=True)
        res = run_experiment(cfg)
        assert len(res.chart_paths) == 4
        for p in res.chart_paths:
            data = open(p, "rb").read()
            assert data.startswith(b"<?xml") and b"<svg" in data

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial = run_experiment(tiny_config(tmp_path / "s", jobs=1))
        parallel = run_experiment(tiny_config(tmp_path / "p", jobs=2))
        assert (tmp_path / "s" / "results.csv").read_bytes() == (
            tmp_path / "p" / "results.csv"
        ).read_bytes()
        assert len(serial.records) == len(parallel.records)
