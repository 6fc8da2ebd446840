import json

import numpy as np
import pytest

from sldmotion.errors import SchemaError
from sldmotion.metrics import ade
from sldmotion.motion import (
    MotionWindow,
    PoseSequence,
    Skeleton,
    WindowDataset,
    build_multimodal_index,
    center_normalize,
    denormalize,
    load_dataset,
    load_motion,
    make_windows,
    save_manifest,
    save_motion,
    window_source,
    zero_velocity_baseline,
)
from sldmotion.numkit import Rng


def chain_skeleton(v=4, names=None):
    return Skeleton(joint_count=v, parents=tuple([-1] + list(range(v - 1))), joint_names=names)


def random_sequence(seed, t=10, v=4, fps=10):
    rng = Rng(seed)
    base = np.zeros((t, v, 3))
    # spread joints along x so bone lengths stay positive
    base[:, :, 0] = np.arange(v)
    frames = base + 0.1 * rng.normal((t, v, 3))
    return PoseSequence(skeleton=chain_skeleton(v), fps=fps, frames=frames)


class TestSkeleton:
    def test_root_and_bones(self):
        skel = chain_skeleton(4)
        assert skel.root == 0
        assert skel.bones == ((1, 0), (2, 1), (3, 2))

    def test_two_roots_rejected(self):
        with pytest.raises(SchemaError, match="root"):
            Skeleton(joint_count=3, parents=(-1, -1, 0))

    def test_parent_out_of_range(self):
        with pytest.raises(SchemaError, match="out of range"):
            Skeleton(joint_count=4, parents=(-1, 0, 0, 5))

    def test_cycle_rejected(self):
        with pytest.raises(SchemaError, match="cycle"):
            Skeleton(joint_count=3, parents=(-1, 2, 1))


class TestMotionFile:
    def test_round_trip_bit_exact(self, tmp_path):
        seq = random_sequence(1)
        # awkward values that stress decimal round trips
        frames = seq.frames.copy()
        frames[0, 0, 0] = 0.1
        frames[0, 1, 1] = 1.0 / 3.0
        frames[1, 2, 2] = 1e-17 + 1.5
        seq = PoseSequence(skeleton=seq.skeleton, fps=seq.fps, frames=frames)
        path = tmp_path / "m.json"
        save_motion(seq, path)
        loaded = load_motion(path)
        assert np.array_equal(loaded.frames, seq.frames)
        assert loaded.skeleton == seq.skeleton
        assert loaded.fps == seq.fps
        # saving the loaded copy reproduces the file bytes
        path2 = tmp_path / "m2.json"
        save_motion(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_parent_out_of_range_in_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "fps": 10, "joint_count": 4, "parents": [-1, 0, 0, 5],
            "frames": [[[float(j), 0.0, 0.0] for j in range(4)]],
        }))
        with pytest.raises(SchemaError, match="out of range"):
            load_motion(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"fps": 10,\n  "joint_count": }')
        with pytest.raises(SchemaError, match=r":2:"):
            load_motion(path)

    def test_frame_arity_mismatch(self, tmp_path):
        path = tmp_path / "arity.json"
        path.write_text(json.dumps({
            "fps": 10, "joint_count": 3, "parents": [-1, 0, 1],
            "frames": [[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]],
        }))
        with pytest.raises(SchemaError, match="frame 0"):
            load_motion(path)

    def test_single_frame(self, tmp_path):
        seq = random_sequence(2, t=1)
        path = tmp_path / "one.json"
        save_motion(seq, path)
        assert len(load_motion(path)) == 1

    def test_zero_length_bone_rejected(self, tmp_path):
        frames = np.zeros((2, 3, 3))
        seq = PoseSequence(skeleton=chain_skeleton(3), fps=10, frames=frames + 0.0)
        with pytest.raises(SchemaError, match="bone"):
            save_motion(seq, tmp_path / "degenerate.json")


class TestWindows:
    def test_exact_length_one_window(self):
        seq = random_sequence(3, t=8)
        ds = make_windows([seq], 3, 5, 1)
        assert len(ds.windows) == 1

    def test_length_plus_two_three_windows(self):
        seq = random_sequence(4, t=10)
        assert len(make_windows([seq], 3, 5, 1).windows) == 3

    def test_stride_five(self):
        seq = random_sequence(5, t=8 + 9)
        assert len(make_windows([seq], 3, 5, 5).windows) == 2

    def test_short_sequences_skipped(self):
        short = random_sequence(6, t=4)
        assert len(make_windows([short], 3, 5, 1).windows) == 0

    def test_no_aliasing(self):
        seq = random_sequence(7, t=12)
        ds = make_windows([seq], 3, 5, 1)
        before = ds.windows[1].past.frames.copy()
        ds.windows[0].past.frames[:] = 0.0
        assert np.array_equal(ds.windows[1].past.frames, before)

    def test_future_continues_past(self):
        seq = random_sequence(8, t=12)
        ds = make_windows([seq], 3, 5, 1)
        w = ds.windows[2]
        assert np.array_equal(w.past.frames, seq.frames[2:5])
        assert np.array_equal(w.future.frames, seq.frames[5:10])
        assert window_source(w) == "seq-0"


class TestCenterNormalize:
    def test_root_lands_at_origin(self):
        seq = random_sequence(9, t=12)
        w = make_windows([seq], 3, 5, 1).windows[0]
        centered, offset = center_normalize(w)
        assert np.array_equal(centered.past.frames[-1, 0], np.zeros(3))
        assert np.array_equal(offset, w.past.frames[-1, 0])

    def test_round_trip(self):
        # translation round trips to within one ulp of the coordinates
        seq = random_sequence(10, t=12)
        w = make_windows([seq], 3, 5, 1).windows[1]
        centered, offset = center_normalize(w)
        restored = denormalize(centered, offset)
        assert np.max(np.abs(restored.past.frames - w.past.frames)) < 1e-12
        assert np.max(np.abs(restored.future.frames - w.future.frames)) < 1e-12
        # the anchor joint itself is exact: x - x == 0, 0 + x == x
        assert np.array_equal(restored.past.frames[-1, 0], w.past.frames[-1, 0])

    def test_relative_offsets_unchanged(self):
        seq = random_sequence(11, t=12)
        w = make_windows([seq], 3, 5, 1).windows[0]
        centered, _ = center_normalize(w)
        rel_before = w.past.frames[:, 1:] - w.past.frames[:, :1]
        rel_after = centered.past.frames[:, 1:] - centered.past.frames[:, :1]
        assert np.max(np.abs(rel_before - rel_after)) < 1e-12


class TestMultimodalIndex:
    def make_dataset(self, seed, count=12):
        windows = []
        for i in range(count):
            seq = random_sequence(seed + i, t=9)
            windows += make_windows([seq], 3, 5, 10, ids=[f"s{i}"]).windows
        return WindowDataset(windows)

    def test_tiny_threshold_singletons(self):
        ds = build_multimodal_index(self.make_dataset(20), 1e-12)
        assert all(group == [i] for i, group in ds.multimodal_index.items())

    def test_huge_threshold_full_groups(self):
        ds = build_multimodal_index(self.make_dataset(21), 1e12)
        n = len(ds.windows)
        assert all(group == list(range(n)) for group in ds.multimodal_index.values())

    def test_matches_brute_force(self):
        ds = self.make_dataset(22)
        threshold = 1.2
        indexed = build_multimodal_index(ds, threshold)
        # independent pairwise check straight from the definition
        anchors = []
        for w in ds.windows:
            offset = w.past.frames[-1, 0]
            anchors.append((w.past.frames[-1] - offset).ravel())
        for i in range(len(ds.windows)):
            expected = [
                j for j in range(len(ds.windows))
                if np.sqrt(np.sum((anchors[i] - anchors[j]) ** 2)) <= threshold
            ]
            assert indexed.multimodal_index[i] == expected

    def test_symmetric_and_reflexive(self):
        ds = build_multimodal_index(self.make_dataset(23), 0.9)
        idx = ds.multimodal_index
        for i, group in idx.items():
            assert i in group
            for j in group:
                assert i in idx[j]


class TestZeroVelocityBaseline:
    def test_repeats_last_past_frame(self):
        seq = random_sequence(30, t=12)
        w = make_windows([seq], 3, 5, 1).windows[0]
        baseline = zero_velocity_baseline(w)
        assert len(baseline) == 5
        for t in range(5):
            assert np.array_equal(baseline.frames[t], w.past.frames[-1])

    def test_zero_ade_on_static_future(self):
        skel = chain_skeleton(3)
        pose = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
        past = PoseSequence(skeleton=skel, fps=10, frames=np.tile(pose, (3, 1, 1)))
        future = PoseSequence(skeleton=skel, fps=10, frames=np.tile(pose, (4, 1, 1)))
        w = MotionWindow(past=past, future=future, source_id="static:0")
        baseline = zero_velocity_baseline(w)
        assert ade(baseline.frames[None], w.future) == 0.0

    def test_positive_ade_on_moving_future(self):
        seq = random_sequence(31, t=12)
        w = make_windows([seq], 3, 5, 1).windows[0]
        baseline = zero_velocity_baseline(w)
        assert ade(baseline.frames[None], w.future) > 0.0


class TestManifest:
    def test_dataset_round_trip(self, tmp_path):
        seqs = [random_sequence(40 + i, t=10) for i in range(3)]
        names = []
        for i, seq in enumerate(seqs):
            name = f"m{i}.json"
            save_motion(seq, tmp_path / name)
            names.append(name)
        manifest = tmp_path / "manifest.json"
        save_manifest(manifest, names, 3, 5, 2)
        ds = load_dataset(manifest)
        assert len(ds.windows) == 3 * 2  # (10-8)//2+1 = 2 windows each
        assert window_source(ds.windows[0]) == "m0"

    def test_missing_field(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text('{"motions": []}')
        with pytest.raises(SchemaError, match="t_past"):
            load_dataset(manifest)
