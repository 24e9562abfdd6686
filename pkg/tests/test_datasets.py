import json

import numpy as np

from rectflip.datasets import (
    IMAGE_SIDE,
    OBJECT_SIDE,
    SLOTS,
    make_suite,
    write_suite,
)
from rectflip.images import load_image
from rectflip.oracle import ToyDetector


def test_suite_is_deterministic():
    a = make_suite(5, seed=4)
    b = make_suite(5, seed=4)
    assert [it.name for it in a] == [it.name for it in b]
    for x, y in zip(a, b):
        assert np.array_equal(x.image, y.image)
        assert x.gts == y.gts


def test_scene_geometry_is_slot_aligned():
    for item in make_suite(10, seed=2):
        assert item.image.shape == (IMAGE_SIDE, IMAGE_SIDE, 3)
        seen = set()
        for g in item.gts:
            origin = (int(g.box.y1), int(g.box.x1))
            assert origin in SLOTS
            assert origin not in seen
            seen.add(origin)
            assert g.box.x2 - g.box.x1 == OBJECT_SIDE
            assert 0 <= g.label < 3


def test_clean_detector_nails_every_object(toy):
    for item in make_suite(5, seed=6):
        dets = toy.detect(item.image)
        top_boxes = {(d.box, d.label) for d in dets if d.score == 1.0}
        for g in item.gts:
            assert (g.box, g.label) in top_boxes


def test_write_suite_round_trips(tmp_path):
    items = make_suite(3, seed=0)
    ann_path = write_suite(tmp_path, items)
    raw = json.loads(ann_path.read_text())
    assert raw["num_classes"] == 3
    assert sorted(raw["images"]) == [it.name for it in items]
    for item in items:
        png = tmp_path / "images" / item.name
        assert png.is_file()
        # colors are exact 8-bit values, so the PNG round trip is lossless
        assert np.array_equal(load_image(png), item.image)
        entries = raw["images"][item.name]
        assert len(entries) == len(item.gts)
