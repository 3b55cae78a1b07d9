import math

import numpy as np
import pytest

from depict_lab import _kernels as K
from depict_lab.render import (
    CanvasSpec,
    Circle,
    PlacementError,
    Rect,
    ShapeScene,
    concept_masks,
    place_shapes,
    rasterize,
    read_pbm,
    read_ppm,
    write_pbm,
    write_pgm,
    write_ppm,
)
from depict_lab.rng import stream


def _pixel_sets(scene):
    return [set(zip(*np.nonzero(m))) for m in concept_masks(scene)]


def test_all_zero_places_nothing(space, canvas):
    assert place_shapes(np.zeros(6, dtype=np.uint8), canvas, 0, space).shapes == ()


def test_all_ones_thousand_seeds(space, canvas):
    for seed in range(1000):
        scene = place_shapes(np.ones(6, dtype=np.uint8), canvas, stream(4, seed), space)
        assert len(scene.shapes) == 6
        assert scene.is_valid()
        sets = _pixel_sets(scene)
        for a in range(6):
            assert sets[a]
            for b in range(a + 1, 6):
                assert not sets[a] & sets[b]


def test_tiny_canvas_fails(space):
    with pytest.raises(PlacementError):
        place_shapes(np.ones(6, dtype=np.uint8), CanvasSpec(8, 8), 0, space)


def test_random_pairs_always_valid(space, canvas):
    rng = np.random.default_rng(0)
    for i in range(10_000):
        bits = (rng.random(6) < 0.5).astype(np.uint8)
        scene = place_shapes(bits, canvas, stream(8, i), space)
        assert np.array_equal(scene.concepts, bits)
        assert scene.is_valid()


def _brute_conflict(scene_a, scene_b, gap):
    ma = concept_masks(scene_a)
    mb = concept_masks(scene_b)
    a = np.logical_or.reduce(ma)
    b = np.logical_or.reduce(mb)
    grown = np.zeros_like(b)
    ys, xs = np.nonzero(b)
    for dy in range(-gap, gap + 1):
        for dx in range(-gap, gap + 1):
            yy, xx = ys + dy, xs + dx
            ok = (yy >= 0) & (yy < b.shape[0]) & (xx >= 0) & (xx < b.shape[1])
            grown[yy[ok], xx[ok]] = True
    return bool((a & grown).any())


def test_conflict_matches_pixel_oracle():
    rng = np.random.default_rng(1)
    big = CanvasSpec(96, 96)
    for _ in range(3000):
        ka, kb = rng.integers(0, 2, 2)
        ga = np.array([rng.integers(30, 60), rng.integers(30, 60), rng.integers(2, 9), 0])
        gb = np.array([rng.integers(30, 60), rng.integers(30, 60), rng.integers(2, 9), 0])
        if ka == 1:
            ga = np.array([ga[0], ga[1], ga[0] + rng.integers(0, 12), ga[1] + rng.integers(0, 12)])
        if kb == 1:
            gb = np.array([gb[0], gb[1], gb[0] + rng.integers(0, 12), gb[1] + rng.integers(0, 12)])
        ja = 0 if ka == 0 else 3
        jb = 1 if kb == 0 else 4
        sa = ShapeScene.from_arrays(np.eye(6, dtype=np.uint8)[ja], np.tile(ga, (6, 1)), big, ShapeScene().space)
        sb = ShapeScene.from_arrays(np.eye(6, dtype=np.uint8)[jb], np.tile(gb, (6, 1)), big, ShapeScene().space)
        assert K.conflict(ka, ga, kb, gb, 1) == _brute_conflict(sa, sb, 1)


def test_rasterize_empty_and_deterministic(canvas):
    img = rasterize(ShapeScene())
    assert img.shape == (64, 64, 3)
    assert (img == 255).all()
    scene = place_shapes(np.ones(6, dtype=np.uint8), canvas, 3)
    assert np.array_equal(rasterize(scene), rasterize(scene))


def test_disk_pixel_count():
    scene = ShapeScene(((0, Circle(30, 30, 5)),))
    red = (rasterize(scene) == (255, 0, 0)).all(axis=2).sum()
    lattice = sum(1 for x in range(-5, 6) for y in range(-5, 6) if x * x + y * y <= 25)
    assert red == lattice == 81
    assert abs(red - math.pi * 25) <= 0.1 * math.pi * 25


def test_rect_is_closed_box():
    scene = ShapeScene(((5, Rect(10, 12, 19, 15)),))
    blue = (rasterize(scene) == (0, 0, 255)).all(axis=2)
    assert blue.sum() == 10 * 4
    assert blue[12, 10] and blue[15, 19] and not blue[16, 19]


def test_masks_partition_image(space, canvas):
    rng = np.random.default_rng(5)
    for i in range(200):
        bits = (rng.random(6) < 0.5).astype(np.uint8)
        scene = place_shapes(bits, canvas, i, space)
        img = rasterize(scene)
        masks = concept_masks(scene)
        assert sum(m.sum() for m in masks) == np.logical_or.reduce(masks).sum()
        non_bg = ~(img == canvas.background).all(axis=2)
        assert np.array_equal(np.logical_or.reduce(masks), non_bg)
        for j, m in enumerate(masks):
            if not bits[j]:
                assert not m.any()
            color = canvas.palette[space.color(j)]
            # each colour hosts two concepts; count only this concept's pixels
            assert m.sum() == ((img == color).all(axis=2) & m).sum()
            if bits[j]:
                assert (img[m] == color).all()


def test_invalid_scene_detection(canvas):
    overlapping = ShapeScene(((0, Circle(20, 20, 6)), (3, Rect(22, 22, 30, 30))))
    assert overlapping.invalid_shapes() == [3]
    outside = ShapeScene(((0, Circle(2, 20, 6)),))
    assert outside.invalid_shapes() == [0]


def test_canvas_validation():
    with pytest.raises(ValueError):
        CanvasSpec(palette={"red": (255, 255, 255), "green": (0, 255, 0), "blue": (0, 0, 255)})
    with pytest.raises(ValueError):
        CanvasSpec(radius_range=(6, 5))
    assert CanvasSpec.from_json(CanvasSpec().to_json()) == CanvasSpec()


def test_scene_rejects_wrong_geometry():
    with pytest.raises(ValueError):
        ShapeScene(((0, Rect(0, 0, 5, 5)),))
    with pytest.raises(ValueError):
        ShapeScene(((0, Circle(9, 9, 5)), (0, Circle(30, 30, 5))))


def test_pnm_round_trips(tmp_path, canvas):
    img = rasterize(place_shapes(np.ones(6, dtype=np.uint8), canvas, 9))
    write_ppm(tmp_path / "a.ppm", img)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n64 64\n255\n")
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)
    mask = np.random.default_rng(0).random((13, 21)) < 0.5
    write_pbm(tmp_path / "m.pbm", mask)
    assert np.array_equal(read_pbm(tmp_path / "m.pbm"), mask)
    write_pgm(tmp_path / "h.pgm", np.arange(12.0).reshape(3, 4))
    assert (tmp_path / "h.pgm").read_bytes()[:11] == b"P5\n4 3\n255\n"


def test_truncated_ppm_names_file(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P6\n4 4\n255\n" + bytes(10))
    with pytest.raises(ValueError, match="bad.ppm"):
        read_ppm(path)
