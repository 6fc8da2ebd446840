import numpy as np
import pytest

from sldmotion.motion import save_motion
from sldmotion.numkit import Rng
from sldmotion.synth import canonical_skeleton, forward_kinematics, synth_generate


class TestCanonicalSkeletons:
    @pytest.mark.parametrize("name,joints", [("standard17", 17), ("tiny5", 5)])
    def test_joint_counts(self, name, joints):
        skeleton, offsets, base = canonical_skeleton(name)
        assert skeleton.joint_count == joints
        assert offsets.shape == (joints, 3)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown skeleton"):
            canonical_skeleton("nope")


class TestForwardKinematics:
    def test_identity_rotations_give_rest_pose(self):
        skeleton, offsets, base = canonical_skeleton("tiny5")
        rots = np.tile(np.eye(3), (4, 5, 1, 1))
        root = np.tile(base, (4, 1))
        pos = forward_kinematics(skeleton, offsets, rots, root)
        assert np.allclose(pos[0, 1] - pos[0, 0], offsets[1])
        assert np.array_equal(pos[0], pos[3])


class TestSynthGenerate:
    def test_deterministic_bytes(self, tmp_path):
        a = synth_generate(Rng(7), "tiny5", 3, 25, min_frames=30)
        b = synth_generate(Rng(7), "tiny5", 3, 25, min_frames=30)
        for s1, s2 in zip(a, b):
            assert np.array_equal(s1.frames, s2.frames)
        save_motion(a[0], tmp_path / "a.json")
        save_motion(b[0], tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_prefix_property(self):
        small = synth_generate(Rng(9), "tiny5", 5, 25, min_frames=24)
        big = synth_generate(Rng(9), "tiny5", 10, 25, min_frames=24)
        for s1, s2 in zip(small, big):
            assert np.array_equal(s1.frames, s2.frames)

    def test_bone_lengths_constant(self):
        for name in ("standard17", "tiny5"):
            seqs = synth_generate(Rng(11), name, 4, 25, min_frames=24)
            for seq in seqs:
                lengths = seq.bone_lengths()
                spread = lengths.max(axis=0) - lengths.min(axis=0)
                assert np.max(spread) < 1e-9

    def test_mixture_covers_multiple_primitives(self):
        _, labels = synth_generate(Rng(13), "tiny5", 200, 25, min_frames=24, with_labels=True)
        assert len(set(labels)) >= 2

    def test_min_length_honored(self):
        seqs = synth_generate(Rng(15), "standard17", 6, 25, min_frames=125)
        assert all(len(s) >= 125 for s in seqs)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            synth_generate(Rng(1), "tiny5", 0, 25, min_frames=10)
