import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from intersection_edge.geometry import (
    CropSpec,
    DegenerateConfiguration,
    DegenerateProjection,
    GeometryError,
    Homography,
    SceneMask,
    SpecOutOfBounds,
    apply_homography,
    apply_mask,
    calibrate,
    centered_crop,
    load_correspondences,
    load_mask,
    read_pgm,
    save_correspondences,
    save_mask,
    square_crop,
    write_pgm,
)


def _direct(m, p):
    v = np.asarray(m, float) @ np.array([p[0], p[1], 1.0])
    return v[0] / v[2], v[1] / v[2]


class TestApply:
    def test_identity(self):
        assert apply_homography(Homography.identity(), (100, 200)) == (100, 200)

    def test_scaling(self):
        assert apply_homography(Homography(np.diag([2.0, 2.0, 1.0])), (10, 20)) == (20, 40)

    def test_projective_term(self):
        m = [[1, 0, 0], [0, 1, 0], [0, 0.001, 1]]
        got = apply_homography(Homography(m), (0, 1000))
        assert got == pytest.approx(_direct(m, (0, 1000))) and got == pytest.approx((0, 500))

    def test_degenerate_projection(self):
        h = Homography([[1, 0, 0], [0, 1, 0], [0, 0.001, 1]])
        with pytest.raises(DegenerateProjection):
            apply_homography(h, (5, -1000))

    def test_singular_matrix_rejected(self):
        with pytest.raises(DegenerateConfiguration):
            Homography(np.ones((3, 3)))

    def test_apply_many_matches_scalar(self, rng):
        h = Homography([[1.1, 0.05, 3], [-0.02, 0.9, -7], [1e-4, 2e-4, 1]])
        pts = rng.uniform(0, 800, (40, 2))
        many = h.apply_many(pts)
        for p, q in zip(pts, many):
            assert tuple(q) == pytest.approx(h.apply(p), abs=1e-12)

    @given(st.lists(st.floats(-0.3, 0.3), min_size=8, max_size=8),
           st.floats(-500, 500), st.floats(-500, 500))
    def test_round_trip(self, coef, x, y):
        m = np.eye(3) + np.array(coef + [0.0]).reshape(3, 3)
        m[2, :2] *= 1e-3
        assume(abs(np.linalg.det(m)) > 1e-3)
        h = Homography(m)
        w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        assume(abs(w) > 1e-2)
        q = h.apply((x, y))
        assume(abs(h.inverse().m[2] @ [q[0], q[1], 1.0]) > 1e-9)
        back = h.inverse().apply(q)
        assert back == pytest.approx((x, y), abs=1e-6 * max(1.0, abs(x), abs(y)))


class TestCalibrate:
    corners = [(0, 0), (100, 0), (100, 100), (0, 100)]

    def test_fixed_points_identity(self):
        h = calibrate([(c, c) for c in self.corners])
        assert np.allclose(h.m, np.eye(3), atol=1e-9)

    def test_translation(self):
        h = calibrate([(c, (c[0] + 5, c[1] - 3)) for c in self.corners])
        assert h.m[0, 2] == pytest.approx(5) and h.m[1, 2] == pytest.approx(-3)
        assert h.apply((37, 61)) == pytest.approx((42, 58))

    def test_unit_square_scaling(self):
        sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
        h = calibrate([(c, (20 * c[0], 20 * c[1])) for c in sq])
        assert np.allclose(h.m, np.diag([20, 20, 1]), atol=1e-9)
        for c in sq:
            assert h.inverse().apply(h.apply(c)) == pytest.approx(c, abs=1e-9)

    def test_overdetermined_recovers_projective(self, rng):
        m = np.array([[0.05, 0.001, -20], [0.0005, -0.048, 19], [1e-5, 2e-5, 1]])
        src = rng.uniform(0, 832, (12, 2))
        pairs = [(tuple(p), _direct(m, p)) for p in src]
        h = calibrate(pairs)
        assert np.allclose(h.m, m / m[2, 2], rtol=1e-6, atol=1e-9)

    def test_too_few(self):
        with pytest.raises(DegenerateConfiguration):
            calibrate([((0, 0), (0, 0))] * 3)

    def test_collinear(self):
        with pytest.raises(DegenerateConfiguration):
            calibrate([((0, 0), (0, 0)), ((1, 1), (1, 1)), ((2, 2), (2, 2)), ((0, 5), (0, 5))])

    def test_rank_deficient_many(self):
        pts = [(float(i), 2.0 * i) for i in range(6)]
        with pytest.raises(DegenerateConfiguration):
            calibrate([(p, p) for p in pts])

    def test_correspondence_file_round_trip(self, tmp_path):
        pairs = [((0.5, 1.25), (-3.0, 4.0)), ((832.0, 0.0), (20.0, 20.0))]
        save_correspondences(tmp_path / "cal.txt", pairs)
        assert load_correspondences(tmp_path / "cal.txt") == pairs

    def test_correspondence_file_comments_and_errors(self, tmp_path):
        p = tmp_path / "cal.txt"
        p.write_text("# px py wx wy\n1 2 3 4  # marker A\n\n5 6 7 8\n")
        assert load_correspondences(p) == [((1, 2), (3, 4)), ((5, 6), (7, 8))]
        p.write_text("1 2 3\n")
        with pytest.raises(GeometryError):
            load_correspondences(p)


class TestCrop:
    spec = CropSpec(544, 124, 832)

    def test_corner_to_origin(self):
        assert square_crop((1920, 1080), self.spec).to_crop((544, 124)) == (0, 0)

    def test_left_of_crop_out_of_view(self):
        assert square_crop((1920, 1080), self.spec).to_crop((543, 124)) is None

    def test_far_corner(self):
        c = square_crop((1920, 1080), self.spec)
        assert c.to_crop((1375, 955)) == (831, 831)
        assert c.to_crop((1376, 955)) is None

    def test_homography_agrees(self):
        c = square_crop((1920, 1080), self.spec)
        assert c.as_homography().apply((700, 300)) == pytest.approx(c.to_crop((700, 300)))
        assert c.to_source(c.to_crop((700, 300))) == (700, 300)

    @pytest.mark.parametrize("spec", [CropSpec(1200, 0, 832), CropSpec(0, 300, 832), CropSpec(-1, 0, 100), CropSpec(0, 0, 0)])
    def test_out_of_bounds(self, spec):
        with pytest.raises(SpecOutOfBounds):
            square_crop((1920, 1080), spec)

    def test_centered(self):
        assert centered_crop((1920, 1080)) == CropSpec(544, 124, 832)


class TestMask:
    def test_all_ones_keeps(self):
        m = SceneMask.full(64, 48)
        assert apply_mask(m, (3.2, 4.0, 20.5, 30.1))

    def test_all_zeros_rejected(self):
        # a mask without any region of interest is not constructible
        with pytest.raises(GeometryError):
            SceneMask(8, 8, np.zeros(64, bool))

    def test_box_outside_roi_dropped(self):
        bm = np.zeros((32, 32), bool)
        bm[0, 0] = True
        assert not apply_mask(SceneMask(32, 32, bm), (10, 10, 20, 20))

    def test_half_covered_kept(self):
        bm = np.zeros((20, 20), bool)
        bm[:, :10] = True
        m = SceneMask(20, 20, bm)
        box = (5, 0, 15, 10)
        assert m.coverage(box) == 0.5
        assert apply_mask(m, box, 0.5)
        assert not apply_mask(m, (6, 0, 16, 10), 0.5)

    def test_coverage_matches_bit_count(self, rng):
        bm = rng.random((40, 50)) < 0.4
        bm[0, 0] = True
        m = SceneMask(50, 40, bm)
        for _ in range(50):
            x0, y0 = rng.integers(0, 45), rng.integers(0, 35)
            x1, y1 = x0 + rng.integers(1, 6), y0 + rng.integers(1, 6)
            assert m.coverage((x0, y0, x1, y1)) == bm[y0:y1, x0:x1].mean()

    def test_bad_length(self):
        with pytest.raises(GeometryError):
            SceneMask(4, 4, np.ones(15, bool))

    def test_pgm_round_trip(self, tmp_path):
        bm = np.zeros((6, 9), bool)
        bm[2:5, 1:7] = True
        save_mask(tmp_path / "m.pgm", SceneMask(9, 6, bm))
        back = load_mask(tmp_path / "m.pgm")
        assert (back.width, back.height) == (9, 6) and np.array_equal(back.bitmap, bm)

    def test_pgm_with_comment(self, tmp_path):
        p = tmp_path / "c.pgm"
        p.write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 128, 255, 1, 2, 3]))
        assert read_pgm(p).tolist() == [[0, 128, 255], [1, 2, 3]]
        write_pgm(p, np.array([[7, 8]], np.uint8))
        assert read_pgm(p).tolist() == [[7, 8]]

    def test_pgm_rejects_ascii(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(GeometryError):
            read_pgm(p)
