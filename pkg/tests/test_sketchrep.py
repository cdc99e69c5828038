import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchconcept.evalharness import angular_error, texture_orientation
from sketchconcept.sketchrep import (
    DualSketch,
    MaskError,
    Stroke,
    SyntheticConceptSpec,
    TrainingPair,
    augment,
    auto_mask,
    build_pretrain_corpus,
    load_concept_dir,
    merge_binary,
    merge_gray,
    rasterize,
    save_concept_dir,
    strokes_from_json,
    strokes_to_json,
    synth_concept,
)
from sketchconcept.sketchrep.augment import AffineParams, sample_params, transform_pair
from sketchconcept.sketchrep.synthetic import PLACE_COLORS


def stroke(points, kind="contour", width=1):
    return Stroke(points=tuple(points), kind=kind, width=width)


class TestRasterize:
    def test_contour_only_leaves_detail_empty(self):
        ds = rasterize([stroke([(0.1, 0.5), (0.9, 0.5)])], 64, 64)
        assert ds.s_d.sum() == 0
        assert ds.s_c.sum() > 0

    def test_horizontal_width1_ink_count_is_row_span(self):
        ds = rasterize([stroke([(0.1, 0.5), (0.9, 0.5)])], 64, 64)
        c0 = round(0.1 * 63)
        c1 = round(0.9 * 63)
        assert ds.s_c.sum() == c1 - c0 + 1
        assert set(np.nonzero(ds.s_c)[0]) == {round(0.5 * 63)}

    def test_single_point_stroke_rejected(self):
        with pytest.raises(ValueError):
            stroke([(0.5, 0.5)])

    def test_empty_stroke_list_is_empty_raster(self):
        ds = rasterize([], 32, 32)
        assert ds.s_c.sum() == 0 and ds.s_d.sum() == 0

    def test_too_small_raster_rejected(self):
        with pytest.raises(ValueError):
            rasterize([], 8, 8)

    def test_kind_routing(self):
        ds = rasterize([stroke([(0.2, 0.2), (0.8, 0.8)], kind="detail")], 64, 64)
        assert ds.s_c.sum() == 0 and ds.s_d.sum() > 0


class TestMerges:
    def disjoint(self):
        s_c = np.zeros((32, 32), np.uint8)
        s_d = np.zeros((32, 32), np.uint8)
        s_c[4, 4:10] = 1
        s_d[20, 4:14] = 1
        return DualSketch(s_c, s_d)

    def test_binary_disjoint_counts(self):
        ds = self.disjoint()
        assert merge_binary(ds).sum() == ds.s_c.sum() + ds.s_d.sum()

    def test_binary_empty_detail_identity(self):
        ds = DualSketch(self.disjoint().s_c, np.zeros((32, 32), np.uint8))
        assert np.array_equal(merge_binary(ds), ds.s_c)

    def test_binary_overlap_counted_once(self):
        s = np.zeros((32, 32), np.uint8)
        s[10, 10] = 1
        ds = DualSketch(s, s.copy())
        assert merge_binary(ds).sum() == 1

    def test_gray_values(self):
        ds = self.disjoint()
        g = merge_gray(ds)
        assert set(np.unique(g)) <= {0, 127, 255}
        assert (g[ds.s_c == 1] == 255).all()
        assert (g[ds.s_d == 1] == 127).all()

    def test_gray_contour_wins_overlap(self):
        s = np.zeros((32, 32), np.uint8)
        s[10, 10] = 1
        assert merge_gray(DualSketch(s, s.copy()))[10, 10] == 255

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_binary_union_property(self, seed):
        rng = np.random.default_rng(seed)
        s_c = (rng.random((16, 16)) < 0.2).astype(np.uint8)
        s_d = (rng.random((16, 16)) < 0.2).astype(np.uint8)
        merged = merge_binary(DualSketch(s_c, s_d))
        assert np.array_equal(merged > 0, (s_c > 0) | (s_d > 0))


class TestAutoMask:
    def test_triangle_matches_brute_force(self):
        tri = [(10, 10), (50, 12), (14, 52)]
        s_c = np.zeros((64, 64), np.uint8)
        for x, y in tri:
            s_c[y, x] = 1
        ds = DualSketch(s_c, np.zeros_like(s_c))
        m = auto_mask(ds)

        def in_tri(p, a, b, c):
            def side(p1, p2, p3):
                return (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])

            d1, d2, d3 = side(p, a, b), side(p, b, c), side(p, c, a)
            has_neg = d1 < 0 or d2 < 0 or d3 < 0
            has_pos = d1 > 0 or d2 > 0 or d3 > 0
            return not (has_neg and has_pos)

        brute = np.zeros((64, 64), np.uint8)
        for y in range(64):
            for x in range(64):
                brute[y, x] = in_tri((x, y), *tri)
        diff = np.abs(m.astype(int) - brute.astype(int)).sum()
        perimeter = 3 * 64  # generous bound: one boundary ring
        assert diff <= perimeter
        assert (m >= brute * 0).all() and (m[brute == 1] == 1).all()

    def test_rectangle_outline_fills_rectangle(self):
        s_c = np.zeros((64, 64), np.uint8)
        s_c[10, 10:51] = 1
        s_c[50, 10:51] = 1
        s_c[10:51, 10] = 1
        s_c[10:51, 50] = 1
        m = auto_mask(DualSketch(s_c, np.zeros_like(s_c)))
        expected = np.zeros((64, 64), np.uint8)
        expected[10:51, 10:51] = 1
        assert np.array_equal(m, expected)

    def test_empty_contour_rejected(self):
        with pytest.raises(MaskError):
            auto_mask(DualSketch(np.zeros((32, 32), np.uint8), np.zeros((32, 32), np.uint8)))

    def test_collinear_rejected(self):
        s_c = np.zeros((32, 32), np.uint8)
        s_c[5, 5:20] = 1
        with pytest.raises(MaskError):
            auto_mask(DualSketch(s_c, np.zeros_like(s_c)))

    def test_superset_of_contour_ink(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s_c = (rng.random((64, 64)) < 0.01).astype(np.uint8)
            if s_c.sum() < 3:
                continue
            ds = DualSketch(s_c, np.zeros_like(s_c))
            try:
                m = auto_mask(ds)
            except MaskError:
                continue
            assert (m >= s_c).all()

    def test_lattice_midpoint_convexity(self):
        # digital convexity is exact at lattice midpoints, so pairs are drawn
        # with even coordinate sums (the midpoint is then itself a pixel)
        rng = np.random.default_rng(1)
        spec = SyntheticConceptSpec(shape="star")
        data = synth_concept(spec, 1, 0, rng, "c")
        m = data.pairs[0].mask
        ys, xs = np.nonzero(m)
        checked = 0
        attempts = 0
        while checked < 1000 and attempts < 100000:
            attempts += 1
            i, j = rng.integers(0, len(xs), 2)
            if (xs[i] + xs[j]) % 2 or (ys[i] + ys[j]) % 2:
                continue
            mx = (xs[i] + xs[j]) // 2
            my = (ys[i] + ys[j]) // 2
            assert m[my, mx] == 1
            checked += 1
        assert checked == 1000


class TestAugment:
    def pair(self):
        spec = SyntheticConceptSpec(shape="hexagon")
        return synth_concept(spec, 1, 0, np.random.default_rng(3), "c").pairs[0]

    def test_noop_branch_returns_pair_unchanged(self):
        pair = self.pair()

        class NoopRng:
            def random(self):
                return 0.99  # above the 0.5 gate

        out = augment(pair, NoopRng())
        assert out is pair

    def test_translation_shifts_centroids_consistently(self):
        pair = self.pair()
        params = AffineParams(flip=False, tx=0.2, ty=0.0, rot_deg=0.0)
        moved = transform_pair(pair, params)

        def centroid(r):
            ys, xs = np.nonzero(r)
            return xs.mean(), ys.mean()

        for channel in ("s_c", "s_d"):
            cx0, cy0 = centroid(getattr(pair.sketch, channel))
            cx1, cy1 = centroid(getattr(moved.sketch, channel))
            assert cx1 - cx0 == pytest.approx(0.2 * 64, abs=1.0)
            assert cy1 - cy0 == pytest.approx(0.0, abs=1.0)
        cx0, cy0 = centroid(pair.mask)
        cx1, cy1 = centroid(moved.mask)
        assert cx1 - cx0 == pytest.approx(0.2 * 64, abs=1.0)

    def test_sampled_rotation_stays_in_range(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            params = sample_params(rng)
            if params is None:
                continue
            assert -45.0 <= params.rot_deg <= 45.0
            assert -0.2 <= params.tx <= 0.2
            assert -0.2 <= params.ty <= 0.2

    def test_mask_channel_matches_independent_transform(self):
        pair = self.pair()
        params = AffineParams(flip=True, tx=-0.1, ty=0.05, rot_deg=17.0)
        moved = transform_pair(pair, params)
        from sketchconcept.sketchrep.augment import apply_binary

        assert np.array_equal(moved.mask, apply_binary(pair.mask, params))
        assert np.array_equal(moved.sketch.s_c, apply_binary(pair.sketch.s_c, params))

    def test_binary_channels_stay_binary(self):
        pair = self.pair()
        params = AffineParams(flip=False, tx=0.13, ty=-0.07, rot_deg=-31.0)
        moved = transform_pair(pair, params)
        assert set(np.unique(moved.sketch.s_c)) <= {0, 1}
        assert set(np.unique(moved.mask)) <= {0, 1}


class TestSynthConcept:
    def test_stripes_at_zero_are_horizontal(self):
        spec = SyntheticConceptSpec(shape="hexagon", texture="striped", orientation_deg=0.0)
        data = synth_concept(spec, 1, 0, np.random.default_rng(2), "c")
        pair = data.pairs[0]
        # every individual detail stroke is horizontal
        details = [s for s in data.pair_strokes[0] if s.kind == "detail"]
        assert details
        for s in details:
            (x0, y0), (x1, y1) = s.points[0], s.points[-1]
            assert abs(y1 - y0) < 0.02
            assert abs(x1 - x0) > 0.05
        theta, coherence = texture_orientation(pair.image, pair.mask)
        assert coherence > 0.5
        assert angular_error(theta, 0.0) < 5.0

    def test_single_pair_concept(self):
        spec = SyntheticConceptSpec(shape="blob")
        data = synth_concept(spec, 1, 2, np.random.default_rng(4), "c")
        assert len(data.pairs) == 1
        assert len(data.edits) == 2

    def test_deterministic_given_rng(self):
        spec = SyntheticConceptSpec(shape="star")
        a = synth_concept(spec, 2, 2, np.random.default_rng(9), "c")
        b = synth_concept(spec, 2, 2, np.random.default_rng(9), "c")
        assert np.array_equal(a.pairs[0].image, b.pairs[0].image)
        assert np.array_equal(a.edits[1].sketch.s_d, b.edits[1].sketch.s_d)

    def test_requires_at_least_one_pair(self):
        with pytest.raises(ValueError):
            synth_concept(SyntheticConceptSpec(), 0, 0, np.random.default_rng(0))

    def test_orientation_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SyntheticConceptSpec(orientation_deg=180.0)

    def test_edit_labels_present(self):
        spec = SyntheticConceptSpec(shape="hexagon", texture="striped", orientation_deg=30.0)
        data = synth_concept(spec, 1, 3, np.random.default_rng(6), "c")
        for edit in data.edits:
            assert edit.orientation_deg is not None
            assert edit.silhouette is not None
            assert edit.mask.sum() > 0

    def test_corpus_captions_and_masks(self):
        corpus = build_pretrain_corpus(12, np.random.default_rng(7))
        assert len(corpus) == 12
        for pair in corpus:
            assert pair.caption
            assert (pair.mask >= pair.sketch.s_c).all()


class TestStrokeJson:
    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, data):
        n_strokes = data.draw(st.integers(1, 5))
        strokes = []
        for _ in range(n_strokes):
            n_pts = data.draw(st.integers(2, 8))
            pts = [
                (
                    data.draw(st.floats(0, 1, allow_nan=False, width=32)),
                    data.draw(st.floats(0, 1, allow_nan=False, width=32)),
                )
                for _ in range(n_pts)
            ]
            kind = data.draw(st.sampled_from(["contour", "detail"]))
            width = data.draw(st.integers(1, 3))
            strokes.append(Stroke(points=tuple(pts), kind=kind, width=width))
        text = strokes_to_json(strokes)
        parsed = strokes_from_json(text)
        assert parsed == strokes
        assert json.loads(text)  # valid JSON

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            Stroke(points=((0, 0), (1, 1)), kind="scribble")

    def test_out_of_square_rejected(self):
        with pytest.raises(ValueError):
            Stroke(points=((0, 0), (1.2, 1)))


class TestDatasetRoundTrip:
    def test_save_and_load_concept_dir(self, tmp_path):
        spec = SyntheticConceptSpec(shape="star", texture="striped", orientation_deg=30.0)
        data = synth_concept(spec, 2, 2, np.random.default_rng(11), "roundtrip")
        save_concept_dir(tmp_path, data)
        loaded = load_concept_dir(tmp_path / "roundtrip")
        assert loaded.class_name == data.class_name
        assert len(loaded.pairs) == 2
        assert len(loaded.edits) == 2
        for a, b in zip(loaded.pairs, data.pairs):
            assert np.allclose(a.image, b.image, atol=1 / 255)
            assert np.array_equal(a.sketch.s_c, b.sketch.s_c)
            assert np.array_equal(a.sketch.s_d, b.sketch.s_d)
            assert np.array_equal(a.mask, b.mask)
        assert loaded.edits[0].orientation_deg == data.edits[0].orientation_deg
