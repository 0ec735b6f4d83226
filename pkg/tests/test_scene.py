import json
import math

import numpy as np
import pytest

from rhtp.errors import GenerationError, SceneFormatError, SceneValidationError
from rhtp.scene import (
    ArmParams,
    CollapsedBelief,
    Rect,
    Scene,
    Troi,
    TruncatedBelief,
    generate_scene,
    load_scene,
    sample_mpoi,
    sample_truncated,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)


def make_scene(centers, radius=0.15, workspace=None):
    workspace = workspace or Rect(0.0, 0.0, 2.0, 2.0)
    targets = tuple(Troi(id=f"t{i}", center=c, radius=radius) for i, c in enumerate(centers))
    beliefs = tuple(
        TruncatedBelief(
            mean=c, cov=((radius, 0.0), (0.0, radius)), radius=radius
        )
        for c in centers
    )
    cx = workspace.x_min + workspace.width / 2
    return Scene(
        targets=targets,
        beliefs=beliefs,
        start=(cx, workspace.y_min),
        goal=(cx, workspace.y_max),
        workspace=workspace,
    )


class TestRect:
    def test_basic_properties(self):
        r = Rect(0.0, 1.0, 3.0, 2.0)
        assert r.width == 3.0
        assert r.height == 1.0
        assert r.area == 3.0

    def test_contains(self):
        r = Rect(0.0, 0.0, 1.0, 1.0)
        assert r.contains_point((0.5, 0.5))
        assert r.contains_point((0.0, 1.0))  # boundary counts
        assert not r.contains_point((1.2, 0.5))
        assert r.contains_disk((0.5, 0.5), 0.4)
        assert not r.contains_disk((0.5, 0.5), 0.6)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Rect(1.0, 0.0, 1.0, 2.0)

    def test_expanded_to(self):
        r = Rect(0.0, 0.0, 1.0, 1.0)
        assert r.expanded_to((0.5, 0.5)) == r
        grown = r.expanded_to((-0.5, 2.0))
        assert grown.contains_point((-0.5, 2.0))
        assert grown.x_min == -0.5 and grown.y_max == 2.0


class TestBeliefs:
    def test_covariance_must_be_spd(self):
        with pytest.raises(ValueError):
            TruncatedBelief(mean=(0, 0), cov=((1.0, 2.0), (2.0, 1.0)), radius=0.5)
        with pytest.raises(ValueError):
            TruncatedBelief(mean=(0, 0), cov=((1.0, 0.1), (0.2, 1.0)), radius=0.5)

    def test_truncated_samples_stay_in_disk(self):
        rng = np.random.default_rng(5)
        b = TruncatedBelief(mean=(1.0, -2.0), cov=((0.3, 0.0), (0.0, 0.3)), radius=0.4)
        pts = sample_truncated(rng, b, 4000)
        d = np.linalg.norm(pts - np.array([1.0, -2.0]), axis=1)
        assert pts.shape == (4000, 2)
        assert d.max() <= 0.4

    def test_truncated_sampling_nearly_uniform_for_wide_cov(self):
        # with sigma much larger than the disk the density is close to flat,
        # so the mean radial distance approaches the uniform-disk value 2R/3
        rng = np.random.default_rng(11)
        b = TruncatedBelief(mean=(0.0, 0.0), cov=((0.15, 0.0), (0.0, 0.15)), radius=0.15)
        pts = sample_truncated(rng, b, 20000)
        mean_d = np.linalg.norm(pts, axis=1).mean()
        assert abs(mean_d - 2 * 0.15 / 3) < 0.003

    def test_sample_mpoi_deterministic(self):
        b = TruncatedBelief(mean=(0.2, 0.8), cov=((0.2, 0.0), (0.0, 0.2)), radius=0.3)
        assert sample_mpoi(b, seed=9) == sample_mpoi(b, seed=9)
        assert sample_mpoi(b, seed=9) != sample_mpoi(b, seed=10)

    def test_sample_mpoi_collapsed_is_exact(self):
        assert sample_mpoi(CollapsedBelief(point=(0.3, 0.4)), seed=1) == (0.3, 0.4)


class TestSceneValidation:
    def test_duplicate_ids_rejected(self):
        t = Troi(id="t1", center=(0.5, 0.5), radius=0.1)
        b = TruncatedBelief(mean=(0.5, 0.5), cov=((0.1, 0), (0, 0.1)), radius=0.1)
        with pytest.raises(SceneValidationError):
            Scene(
                targets=(t, t),
                beliefs=(b, b),
                start=(0.5, 0.0),
                goal=(0.5, 1.0),
                workspace=Rect(0, 0, 1, 1),
            )

    def test_disk_must_fit_workspace(self):
        with pytest.raises(SceneValidationError):
            make_scene([(0.05, 0.5)], radius=0.15, workspace=Rect(0, 0, 1, 1))

    def test_start_must_lie_in_workspace(self):
        t = Troi(id="t0", center=(0.5, 0.5), radius=0.1)
        b = TruncatedBelief(mean=(0.5, 0.5), cov=((0.1, 0), (0, 0.1)), radius=0.1)
        with pytest.raises(SceneValidationError):
            Scene(
                targets=(t,),
                beliefs=(b,),
                start=(-0.5, 0.0),
                goal=(0.5, 1.0),
                workspace=Rect(0, 0, 1, 1),
            )

    def test_truncation_radius_must_match_troi(self):
        t = Troi(id="t0", center=(0.5, 0.5), radius=0.1)
        b = TruncatedBelief(mean=(0.5, 0.5), cov=((0.1, 0), (0, 0.1)), radius=0.2)
        with pytest.raises(SceneValidationError):
            Scene(
                targets=(t,),
                beliefs=(b,),
                start=(0.5, 0.0),
                goal=(0.5, 1.0),
                workspace=Rect(0, 0, 1, 1),
            )

    def test_density(self):
        scene = make_scene([(0.5, 0.5), (1.5, 1.5)])
        assert scene.density == 2 / 4.0


class TestGenerator:
    def test_target_count_is_floor_of_density_times_area(self):
        ws = Rect(0, 0, 1, 1)
        for density, expected in [(1.0, 1), (3.0, 3), (7.0, 7), (2.9, 2)]:
            scene = generate_scene(density, ws, 0.15, seed=3)
            assert len(scene.targets) == expected

    def test_generated_scene_is_valid_and_deterministic(self):
        ws = Rect(0, 0, 1, 1)
        a = generate_scene(5.0, ws, 0.15, seed=12)
        b = generate_scene(5.0, ws, 0.15, seed=12)
        c = generate_scene(5.0, ws, 0.15, seed=13)
        assert scene_to_dict(a) == scene_to_dict(b)
        assert scene_to_dict(a) != scene_to_dict(c)
        for t in a.targets:
            assert ws.contains_disk(t.center, t.radius)

    def test_start_goal_on_long_edge_midpoints(self):
        scene = generate_scene(1.0, Rect(0, 0, 2, 1), 0.15, seed=2)
        assert scene.start == (1.0, 0.0)
        assert scene.goal == (1.0, 1.0)
        tall = generate_scene(1.0, Rect(0, 0, 1, 2), 0.15, seed=2)
        assert tall.start == (0.0, 1.0)
        assert tall.goal == (1.0, 1.0)

    def test_covariance_scale_equals_radius(self):
        scene = generate_scene(3.0, Rect(0, 0, 1, 1), 0.2, seed=4)
        for b in scene.beliefs:
            assert b.cov == ((0.2, 0.0), (0.0, 0.2))

    def test_impossible_radius_raises(self):
        with pytest.raises(GenerationError):
            generate_scene(1.0, Rect(0, 0, 0.5, 0.5), 0.3, seed=1)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        scene = generate_scene(4.0, Rect(0, 0, 1, 1), 0.15, seed=8)
        path = tmp_path / "scene.json"
        save_scene(scene, str(path))
        again = load_scene(str(path))
        assert scene_to_dict(again) == scene_to_dict(scene)

    def test_collapsed_round_trip(self):
        scene = make_scene([(0.5, 0.5)])
        collapsed = scene.with_beliefs((CollapsedBelief(point=(0.52, 0.48)),))
        data = scene_to_dict(collapsed)
        again = scene_from_dict(data)
        assert isinstance(again.beliefs[0], CollapsedBelief)
        assert again.beliefs[0].point == (0.52, 0.48)

    def test_missing_field_is_format_error(self):
        data = scene_to_dict(make_scene([(0.5, 0.5)]))
        del data["start"]
        with pytest.raises(SceneFormatError):
            scene_from_dict(data)

    def test_bad_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SceneFormatError):
            load_scene(str(path))

    def test_load_missing_file(self):
        with pytest.raises(SceneFormatError):
            load_scene("/nonexistent/scene.json")


class TestArmParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ArmParams(0.5, 0.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            ArmParams(-0.1, 0.5, 0.0, 1.0)
        arm = ArmParams(0.15, 1.05, 0.0, 1.25)
        assert arm.manip_r_max == 1.05
