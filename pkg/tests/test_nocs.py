import numpy as np
import pytest
from hypothesis import given, strategies as st

from clothtrack import nocs


def coords(*vals):
    return np.array([[v, v, v] for v in vals])


class TestBinning:
    def test_lower_boundary(self):
        assert nocs.nocs_to_bins(coords(0.0), 64)[0, 0] == 0

    def test_upper_boundary_clamps(self):
        assert nocs.nocs_to_bins(coords(1.0), 64)[0, 0] == 63

    def test_interior(self):
        # floor(0.51 * 64) = 32
        assert nocs.nocs_to_bins(coords(0.51), 64)[0, 0] == 32

    def test_rejects_non_finite(self):
        with pytest.raises(nocs.InvalidInputError):
            nocs.nocs_to_bins(coords(np.nan))

    def test_rejects_bad_bins(self):
        with pytest.raises(nocs.InvalidInputError):
            nocs.nocs_to_bins(coords(0.5), bins=1)

    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=2, max_value=256))
    def test_indices_in_range(self, c, bins):
        idx = nocs.nocs_to_bins(coords(c), bins)
        assert 0 <= idx[0, 0] < bins


class TestDecoding:
    def test_one_hot_first_bin(self):
        logits = nocs.one_hot_logits(np.zeros((1, 3), dtype=int), bins=64)
        assert nocs.bins_to_nocs(logits)[0, 0] == pytest.approx(1 / 128)

    def test_one_hot_last_bin(self):
        logits = nocs.one_hot_logits(np.full((1, 3), 63), bins=64)
        assert nocs.bins_to_nocs(logits)[0, 0] == pytest.approx(127 / 128)

    def test_uniform_ties_break_low(self):
        logits = np.zeros((2, 3, 64))
        out = nocs.bins_to_nocs(logits)
        assert np.all(out == 0.5 / 64)

    def test_rejects_non_finite(self):
        with pytest.raises(nocs.InvalidInputError):
            nocs.bins_to_nocs(np.full((1, 3, 64), np.inf))

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=20))
    def test_round_trip_within_half_bin(self, vals):
        c = np.array(vals * 3).reshape(-1, 3)[: len(vals)]
        c = np.array([[v, v, v] for v in vals])
        idx = nocs.nocs_to_bins(c, 64)
        back = nocs.bins_to_nocs(nocs.one_hot_logits(idx, 64))
        assert np.all(np.abs(back - c) <= 1 / 128 + 1e-12)


class TestPerturbation:
    def test_identity_params(self):
        p = nocs.NoiseParams(s_pc=(1, 1), o_pc=(0, 0), delta=0.0, s_mesh=(1, 1))
        c = np.random.default_rng(0).random((50, 3))
        assert np.array_equal(nocs.perturb_nocs(c, p, rng_seed=7), c)

    def test_affine_value(self):
        p = nocs.NoiseParams(s_pc=(1.2, 1.2), o_pc=(0.1, 0.1), delta=0.0, s_mesh=(1, 1))
        out = nocs.perturb_nocs(coords(0.5), p, rng_seed=0)
        assert out[0, 0] == pytest.approx(0.7)

    def test_clamps_high(self):
        p = nocs.NoiseParams(s_pc=(1.2, 1.2), o_pc=(0.1, 0.1), delta=0.0, s_mesh=(1, 1))
        out = nocs.perturb_nocs(coords(0.95), p, rng_seed=0)
        assert out[0, 0] == 1.0

    @pytest.mark.parametrize("level", ["1x", "2x", "3x"])
    def test_levels_clamp_and_determinism(self, level):
        params = nocs.NOISE_LEVELS[level]
        c = np.random.default_rng(3).random((200, 3))
        a = nocs.perturb_nocs(c, params, rng_seed=11)
        b = nocs.perturb_nocs(c, params, rng_seed=11)
        assert np.array_equal(a, b)
        assert a.min() >= 0.0 and a.max() <= 1.0

    def test_appendix_deltas(self):
        assert [nocs.NOISE_LEVELS[k].delta for k in ("1x", "2x", "3x")] == [0.05, 0.10, 0.15]

    def test_invalid_params(self):
        with pytest.raises(nocs.InvalidInputError):
            nocs.NoiseParams(s_pc=(1.2, 0.8), o_pc=(0, 0.1), delta=0.05, s_mesh=(0.8, 1.2))
        with pytest.raises(nocs.InvalidInputError):
            nocs.NoiseParams(s_pc=(0.8, 1.2), o_pc=(0, 0.1), delta=-1, s_mesh=(0.8, 1.2))


class TestMeshPerturbation:
    def test_identity(self):
        v = np.random.default_rng(1).random((30, 3))
        out = nocs.perturb_mesh_vertices(v, (1.0, 1.0), rng_seed=5)
        assert np.allclose(out, v)

    def test_center_fixed_point(self):
        out = nocs.perturb_mesh_vertices(np.array([[0.5, 0.5, 0.5]]), (0.4, 1.6), rng_seed=2)
        assert np.allclose(out, 0.5)

    def test_scaling_about_center(self):
        p = nocs.NoiseParams(s_pc=(1, 1), o_pc=(0, 0), delta=0, s_mesh=(1.2, 1.2))
        out = nocs.perturb_mesh_vertices(np.array([[0.7, 0.5, 0.5]]), p.s_mesh, rng_seed=0)
        assert out[0, 0] == pytest.approx(0.74)
