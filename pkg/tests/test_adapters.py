import numpy as np
import pytest
import torch

from sketchconcept.adapters import (
    FeaturePyramid,
    SketchEncoder,
    encode_dual,
    encode_single,
    mask_pyramid,
    resize_mask,
)
from sketchconcept.sketchrep import DualSketch


@pytest.fixture(scope="module")
def encoder():
    torch.manual_seed(0)
    enc = SketchEncoder()
    enc.eval()
    for p in enc.parameters():
        p.requires_grad_(False)
    return enc


@pytest.fixture(scope="module")
def encoder2():
    torch.manual_seed(1)
    enc = SketchEncoder()
    enc.eval()
    for p in enc.parameters():
        p.requires_grad_(False)
    return enc


class TestEncodeSingle:
    def test_empty_raster_gives_finite_pyramid(self, encoder):
        pyr = encode_single(encoder, np.zeros((64, 64), np.uint8))
        assert len(pyr) == 4
        for lv in pyr.levels:
            assert torch.isfinite(lv).all()

    def test_level_shapes(self, encoder):
        pyr = encode_single(encoder, np.zeros((64, 64), np.uint8))
        assert [lv.shape[-1] for lv in pyr.levels] == [64, 32, 16, 8]
        assert [lv.shape[1] for lv in pyr.levels] == [16, 24, 32, 48]

    def test_deterministic(self, encoder):
        s = (np.random.default_rng(0).random((64, 64)) < 0.1).astype(np.uint8)
        a = encode_single(encoder, s)
        b = encode_single(encoder, s)
        for la, lb in zip(a.levels, b.levels):
            assert torch.equal(la, lb)

    def test_shift_changes_features(self, encoder):
        s = np.zeros((64, 64), np.uint8)
        s[30, 20:40] = 1
        shifted = np.roll(s, 2, axis=0)
        a = encode_single(encoder, s)
        b = encode_single(encoder, shifted)
        assert any(not torch.equal(la, lb) for la, lb in zip(a.levels, b.levels))

    def test_wrong_size_rejected(self, encoder):
        with pytest.raises(ValueError):
            encode_single(encoder, np.zeros((60, 64), np.uint8))


class TestEncodeDual:
    def sketch(self):
        s_c = np.zeros((64, 64), np.uint8)
        s_d = np.zeros((64, 64), np.uint8)
        s_c[10, 10:40] = 1
        s_d[40, 10:40] = 1
        return DualSketch(s_c, s_d)

    def test_empty_detail_keeps_detail_bias(self, encoder, encoder2):
        ds = DualSketch(self.sketch().s_c, np.zeros((64, 64), np.uint8))
        dual = encode_dual(encoder, encoder2, ds)
        only_c = encode_single(encoder, ds.s_c)
        bias_d = encode_single(encoder2, np.zeros((64, 64), np.uint8))
        for lv, lc, lb in zip(dual.levels, only_c.levels, bias_d.levels):
            assert torch.allclose(lv, lc + lb)
            assert not torch.allclose(lv, lc)

    def test_swap_commutativity(self, encoder, encoder2):
        ds = self.sketch()
        swapped = DualSketch(ds.s_d, ds.s_c)
        a = encode_dual(encoder, encoder2, ds)
        b = encode_dual(encoder2, encoder, swapped)
        for la, lb in zip(a.levels, b.levels):
            assert torch.equal(la, lb)

    def test_both_empty_is_sum_of_biases(self, encoder, encoder2):
        ds = DualSketch(np.zeros((64, 64), np.uint8), np.zeros((64, 64), np.uint8))
        dual = encode_dual(encoder, encoder2, ds)
        ba = encode_single(encoder, ds.s_c)
        bb = encode_single(encoder2, ds.s_d)
        for lv, la, lb in zip(dual.levels, ba.levels, bb.levels):
            assert torch.equal(lv, la + lb)

    def test_exact_summation_decomposition(self, encoder, encoder2):
        ds = self.sketch()
        dual = encode_dual(encoder, encoder2, ds)
        pc = encode_single(encoder, ds.s_c)
        pd = encode_single(encoder2, ds.s_d)
        for lv, lc, ld in zip(dual.levels, pc.levels, pd.levels):
            assert torch.equal(lv, lc + ld)


class TestResizeMask:
    def test_all_ones_everywhere(self):
        m = np.ones((64, 64), np.uint8)
        for level in (64, 32, 16, 8):
            out = resize_mask(m, level)
            assert out.shape[-2:] == (level, level)
            assert torch.equal(out, torch.ones_like(out))

    def test_half_ink_block(self):
        m = np.zeros((64, 64), np.float32)
        m[0, 0] = 1.0
        m[0, 1] = 1.0
        out = resize_mask(m, 32)
        assert float(out[0, 0, 0, 0]) == pytest.approx(0.5)

    def test_checkerboard_averages_to_half(self):
        ys, xs = np.mgrid[0:64, 0:64]
        m = ((ys + xs) % 2).astype(np.float32)
        out = resize_mask(m, 32)
        # independent oracle: direct 2x2 block averaging
        blocks = m.reshape(32, 2, 32, 2).mean(axis=(1, 3))
        assert np.allclose(out[0, 0].numpy(), blocks)
        assert torch.allclose(out, torch.full_like(out, 0.5))

    def test_full_resolution_identity(self):
        m = (np.random.default_rng(0).random((64, 64)) > 0.5).astype(np.float32)
        out = resize_mask(m, 64)
        assert np.array_equal(out[0, 0].numpy(), m)

    def test_unsupported_level_rejected(self):
        with pytest.raises(ValueError):
            resize_mask(np.ones((64, 64)), 24)

    def test_values_in_unit_interval(self):
        m = (np.random.default_rng(1).random((64, 64)) > 0.3).astype(np.float32)
        for level in (32, 16, 8):
            out = resize_mask(m, level)
            assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0


class TestMaskPyramid:
    def pyramid(self, encoder):
        s = np.zeros((64, 64), np.uint8)
        s[20:44, 20:44] = 1
        return encode_single(encoder, s)

    def test_all_ones_identity(self, encoder):
        pyr = self.pyramid(encoder)
        out = mask_pyramid(pyr, np.ones((64, 64), np.float32))
        for a, b in zip(out.levels, pyr.levels):
            assert torch.equal(a, b)

    def test_all_zeros_kills_pyramid(self, encoder):
        out = mask_pyramid(self.pyramid(encoder), np.zeros((64, 64), np.float32))
        for lv in out.levels:
            assert torch.equal(lv, torch.zeros_like(lv))

    def test_half_plane_exact_zero_on_zero_side(self, encoder):
        m = np.zeros((64, 64), np.float32)
        m[:, :32] = 1.0
        out = mask_pyramid(self.pyramid(encoder), m)
        full = out.levels[0]
        assert torch.equal(full[..., 32:], torch.zeros_like(full[..., 32:]))
        assert not torch.equal(full[..., :32], torch.zeros_like(full[..., :32]))

    def test_zero_outside_mask_at_every_level(self, encoder):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = (rng.random((64, 64)) > 0.5).astype(np.float32)
            out = mask_pyramid(self.pyramid(encoder), m)
            for lv in out.levels:
                mi = resize_mask(m, lv.shape[-1])
                zero_region = (mi == 0).expand_as(lv)
                assert torch.equal(lv[zero_region], torch.zeros_like(lv[zero_region]))


class TestFeaturePyramid:
    def test_level_order_enforced(self):
        with pytest.raises(ValueError):
            FeaturePyramid((torch.zeros(1, 4, 8, 8), torch.zeros(1, 4, 16, 16)))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            FeaturePyramid((torch.full((1, 4, 8, 8), float("inf")),))

    def test_addition_levelwise(self):
        a = FeaturePyramid((torch.ones(1, 2, 4, 4),))
        b = FeaturePyramid((torch.full((1, 2, 4, 4), 2.0),))
        assert torch.equal((a + b).levels[0], torch.full((1, 2, 4, 4), 3.0))
