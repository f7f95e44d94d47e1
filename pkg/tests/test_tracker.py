"""Tracking loop tests: init modes, state purity, frame filtering, pose files."""

import numpy as np
import pytest

from clothtrack.config import RunConfig
from clothtrack.geometry import CanonicalMesh, PointCloudFrame, SequenceDataset
from clothtrack.pipeline import build_models
from clothtrack.synth.templates import make_template
from clothtrack.synth.sequences import generate_sequence
from clothtrack import tracker
from clothtrack.tracker import (
    AlignmentError,
    InitPose,
    init,
    read_init_pose,
    remove_static_frames,
    step,
    subsample_frames,
    write_init_pose,
)


def tiny_config(**kw):
    defaults = dict(
        n_pc=64,
        n_mesh=96,
        encoder_dim=16,
        fusion_dim=32,
        num_bins=8,
        grid_size=8,
        volume_dim=16,
        volume_base=8,
        channel_scale=32,
        template_resolution=6,
        frames_per_sequence=4,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


@pytest.fixture(scope="module")
def sequence():
    tpl = make_template("Top", resolution=6, shape_jitter=0.0, jitter_seed=0)
    return generate_sequence(tpl, "fold_lr", frames=4, seed=3, category="Top", n_samples=300, raster_res=48)


@pytest.fixture(scope="module")
def models():
    import torch

    torch.manual_seed(0)
    return build_models(tiny_config())


def gt_pose(sequence):
    return InitPose(source="ground_truth", nocs=None, mesh=sequence.canonical_mesh.copy())


class TestInit:
    def test_ground_truth_uses_frame_labels(self, sequence):
        cfg = tiny_config()
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        assert state.frame_index == 0
        assert state.prev_points.shape == (cfg.n_pc, 3)
        assert state.prev_nocs.shape == (cfg.n_pc, 3)
        assert state.mesh_refine_budget == cfg.mesh_refine_budget
        # labels must correspond to the same resampled subset
        f0 = sequence.frames[0]
        rng = np.random.default_rng(0)
        sel = tracker.resample_points(f0.points, cfg.n_pc, rng)
        assert np.array_equal(state.prev_points, f0.points[sel])
        assert np.array_equal(state.prev_nocs, f0.gt_nocs[sel])

    def test_ground_truth_without_labels_rejected(self, sequence):
        f0 = sequence.frames[0]
        bare = PointCloudFrame(points=f0.points.copy())
        with pytest.raises(AlignmentError):
            init(bare, gt_pose(sequence), tiny_config(), seed=0)

    def test_perturbed_differs_from_ground_truth(self, sequence):
        cfg = tiny_config()
        clean = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        noisy_pose = InitPose(source="perturbed", nocs=None, mesh=sequence.canonical_mesh.copy())
        noisy = init(sequence.frames[0], noisy_pose, cfg, seed=0)
        assert np.array_equal(clean.prev_points, noisy.prev_points)
        assert not np.array_equal(clean.prev_nocs, noisy.prev_nocs)
        assert not np.array_equal(clean.canonical_mesh.vertices, noisy.canonical_mesh.vertices)
        assert (noisy.prev_nocs >= 0).all() and (noisy.prev_nocs <= 1).all()

    def test_unknown_source_rejected(self, sequence):
        bad = InitPose(source="telepathy", nocs=None, mesh=sequence.canonical_mesh.copy())
        with pytest.raises(ValueError):
            init(sequence.frames[0], bad, tiny_config(), seed=0)

    def test_external_file_size_mismatch(self, sequence):
        cfg = tiny_config()
        pose = InitPose(
            source="external_file",
            nocs=np.zeros((cfg.n_pc + 1, 3)),
            mesh=sequence.canonical_mesh.copy(),
            points=np.zeros((cfg.n_pc + 1, 3)),
        )
        with pytest.raises(AlignmentError):
            init(sequence.frames[0], pose, cfg, seed=0)


class TestStep:
    def test_output_shapes_and_frame_advance(self, sequence, models):
        cfg = tiny_config()
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        out = step(state, sequence.frames[1], models, cfg)
        assert out.prediction.points.shape == (cfg.n_pc, 3)
        assert out.prediction.coords.shape == (cfg.n_pc, 3)
        assert out.prediction.raw_logits.shape == (cfg.n_pc, 3, cfg.num_bins)
        assert out.task_mesh_vertices.shape == sequence.canonical_mesh.vertices.shape
        assert out.surface_nocs.shape == (cfg.n_mesh, 3)
        assert out.surface_task.shape == (cfg.n_mesh, 3)
        assert out.state.frame_index == state.frame_index + 1
        assert set(out.timings) == {"encoder", "fusion", "refiner", "scatter_densify", "warp"}
        assert all(t >= 0 for t in out.timings.values())

    def test_step_does_not_mutate_state(self, sequence, models):
        cfg = tiny_config()
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        before = state.copy()
        step(state, sequence.frames[1], models, cfg)
        assert np.array_equal(state.prev_points, before.prev_points)
        assert np.array_equal(state.prev_nocs, before.prev_nocs)
        assert np.array_equal(state.canonical_mesh.vertices, before.canonical_mesh.vertices)
        assert state.frame_index == before.frame_index
        assert state.mesh_refine_budget == before.mesh_refine_budget

    def test_step_deterministic(self, sequence, models):
        cfg = tiny_config()
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        a = step(state, sequence.frames[1], models, cfg)
        b = step(state, sequence.frames[1], models, cfg)
        assert np.array_equal(a.prediction.coords, b.prediction.coords)
        assert np.array_equal(a.task_mesh_vertices, b.task_mesh_vertices)

    def test_refined_prediction_feeds_forward(self, sequence, models):
        cfg = tiny_config()
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        out = step(state, sequence.frames[1], models, cfg)
        assert np.array_equal(out.state.prev_nocs, out.prediction.coords)
        assert np.array_equal(out.state.prev_points, out.prediction.points)
        # decoded coordinates come from the refined logits
        bins = cfg.num_bins
        expected = (out.prediction.refined_logits.argmax(axis=-1) + 0.5) / bins
        assert np.allclose(out.prediction.coords, expected)

    def test_mesh_refine_budget_freezes_mesh(self, sequence, models):
        cfg = tiny_config(mesh_refine_budget=1)
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        out1 = step(state, sequence.frames[1], models, cfg)
        assert out1.state.mesh_refine_budget == 0
        out2 = step(out1.state, sequence.frames[2], models, cfg)
        assert np.array_equal(out2.canonical_mesh.vertices, out1.canonical_mesh.vertices)
        out3 = step(out2.state, sequence.frames[3], models, cfg)
        assert np.array_equal(out3.canonical_mesh.vertices, out1.canonical_mesh.vertices)

    def test_disabled_refiners_are_identity(self, sequence, models):
        cfg = tiny_config(use_pc_refiner=False, use_mesh_refiner=False)
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        out = step(state, sequence.frames[1], models, cfg)
        assert np.array_equal(out.prediction.refined_logits, out.prediction.raw_logits)
        assert np.array_equal(out.canonical_mesh.vertices, state.canonical_mesh.vertices)

    def test_resampling_depends_on_frame_index(self, sequence, models):
        cfg = tiny_config(use_mesh_refiner=False)
        state = init(sequence.frames[0], gt_pose(sequence), cfg, seed=0)
        out1 = step(state, sequence.frames[1], models, cfg)
        # same raw frame at a later index draws a different subset
        out2 = step(out1.state, sequence.frames[1], models, cfg)
        assert not np.array_equal(out1.prediction.point_indices, out2.prediction.point_indices)


class TestFrameFiltering:
    def test_subsample_stride(self, sequence):
        half = subsample_frames(sequence, 0.5)
        assert len(half) == 2
        assert np.array_equal(half.frames[0].points, sequence.frames[0].points)
        assert np.array_equal(half.frames[1].points, sequence.frames[2].points)
        assert half.manifest["keep_ratio"] == 0.5

    def test_subsample_identity(self, sequence):
        full = subsample_frames(sequence, 1.0)
        assert len(full) == len(sequence)

    def test_subsample_invalid_ratio(self, sequence):
        with pytest.raises(ValueError):
            subsample_frames(sequence, 0.3)

    def test_subsample_too_few_frames(self, sequence):
        with pytest.raises(ValueError):
            subsample_frames(sequence, 0.125)

    def test_remove_static_frames(self):
        verts = np.random.default_rng(0).uniform(0, 1, (5, 3))
        faces = np.array([[0, 1, 2], [1, 2, 3], [2, 3, 4]])
        mesh = CanonicalMesh(verts, faces)

        def frame(shift):
            v = verts * 0.1 + shift
            return PointCloudFrame(points=v.copy(), mesh_vertices_task=v.copy())

        frames = [frame(0.0), frame(0.0), frame(0.01), frame(0.01 + 5e-4), frame(0.05)]
        seq = SequenceDataset(category="Top", frames=frames, canonical_mesh=mesh)
        kept = remove_static_frames(seq, threshold_m=0.001)
        assert len(kept) == 3
        assert np.array_equal(kept.frames[1].points, frames[2].points)
        assert np.array_equal(kept.frames[2].points, frames[4].points)

    def test_remove_static_keeps_frame_zero(self):
        verts = np.random.default_rng(1).uniform(0, 1, (4, 3))
        mesh = CanonicalMesh(verts, np.array([[0, 1, 2], [1, 2, 3]]))
        frames = [PointCloudFrame(points=verts, mesh_vertices_task=verts) for _ in range(4)]
        seq = SequenceDataset(category="Top", frames=frames, canonical_mesh=mesh)
        with pytest.raises(ValueError):
            remove_static_frames(seq, threshold_m=0.001)


class TestPoseExchange:
    def test_round_trip(self, tmp_path, sequence):
        cfg = tiny_config()
        rng = np.random.default_rng(0)
        points = rng.standard_normal((cfg.n_pc, 3))
        coord = rng.uniform(0, 1, (cfg.n_pc, 3))
        write_init_pose(tmp_path / "pose", points, coord, sequence.canonical_mesh)
        pose = read_init_pose(tmp_path / "pose")
        assert pose.source == "external_file"
        assert np.allclose(pose.points, points, atol=1e-6)
        assert np.allclose(pose.nocs, coord, atol=1e-7)
        assert np.array_equal(pose.mesh.faces, sequence.canonical_mesh.faces)
        state = init(sequence.frames[0], pose, cfg, seed=0)
        assert np.array_equal(state.prev_points, pose.points)

    def test_bad_magic(self, tmp_path, sequence):
        cfg = tiny_config()
        points = np.zeros((cfg.n_pc, 3))
        p = write_init_pose(tmp_path / "pose", points, points, sequence.canonical_mesh)
        manifest = (p / "manifest.json").read_text().replace("clothtrack-init-pose", "something-else")
        (p / "manifest.json").write_text(manifest)
        with pytest.raises(AlignmentError):
            read_init_pose(p)

    def test_truncated_array(self, tmp_path, sequence):
        cfg = tiny_config()
        points = np.zeros((cfg.n_pc, 3))
        p = write_init_pose(tmp_path / "pose", points, points, sequence.canonical_mesh)
        (p / "points.bin").write_bytes((p / "points.bin").read_bytes()[:-8])
        with pytest.raises(AlignmentError):
            read_init_pose(p)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(AlignmentError):
            read_init_pose(tmp_path)
