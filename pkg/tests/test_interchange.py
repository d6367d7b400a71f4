import json
from datetime import date

import numpy as np
import pytest

from photolink.errors import (
    DanglingReferenceError,
    DuplicateLinkError,
    HomographyInconsistentError,
    InvalidLinkError,
    MalformedDocumentError,
    SelfLinkError,
    UnsupportedVersionError,
)
from photolink.geometry import Quad, estimate_from_pairs
from photolink.interchange import export_project, import_project
from photolink.project import (
    add_auto_link,
    add_image,
    create_manual_link,
    new_project,
)


def random_quad(rng, lo=0.0, hi=100.0):
    while True:
        pts = rng.uniform(lo, hi, size=(4, 2))
        try:
            return Quad(tuple(map(tuple, pts)))
        except Exception:
            continue


def random_project(rng, n_images=None):
    p = new_project(f"p{rng.integers(1, 100)}",
                    name=f"Project {rng.integers(1, 100)} ★")
    n = n_images if n_images is not None else int(rng.integers(0, 8))
    for i in range(n):
        capture = (date(int(rng.integers(1850, 2000)),
                        int(rng.integers(1, 13)),
                        int(rng.integers(1, 29)))
                   if rng.random() < 0.6 else None)
        title = f"título {i}" if rng.random() < 0.4 else None
        add_image(p, path=f"photos/im{i}.png",
                  width=int(rng.integers(1, 4000)),
                  height=int(rng.integers(1, 4000)),
                  capture_date=capture, title=title)
    ids = list(p.images)
    pairs_done = set()
    for _ in range(int(rng.integers(0, max(1, n)))):
        if n < 2:
            break
        a, b = rng.choice(ids, size=2, replace=False)
        key = tuple(sorted((a, b)))
        if key in pairs_done:
            continue
        pairs_done.add(key)
        if rng.random() < 0.5:
            create_manual_link(p, a, b, random_quad(rng), random_quad(rng))
        else:
            src = rng.uniform(0.0, 500.0, size=(int(rng.integers(12, 30)), 2))
            dst = src * rng.uniform(0.8, 1.2) + rng.uniform(-20, 20, size=2)
            rows = np.column_stack([src, dst])
            add_auto_link(p, a, b, rows,
                          estimate_from_pairs(rows[:, 0:2], rows[:, 2:4]))
    return p


def valid_document():
    """One manual and one auto link over three images, as parsed JSON."""
    rng = np.random.default_rng(99)
    p = new_project("p1", name="fixture")
    for i in range(3):
        add_image(p, path=f"im{i}.png", width=100, height=100)
    create_manual_link(p, "img1", "img2", random_quad(rng), random_quad(rng))
    src = rng.uniform(0.0, 100.0, size=(12, 2))
    rows = np.column_stack([src, src + 2.0])
    add_auto_link(p, "img1", "img3", rows,
                  estimate_from_pairs(rows[:, 0:2], rows[:, 2:4]))
    return json.loads(export_project(p))


def as_bytes(doc) -> bytes:
    return json.dumps(doc).encode("utf-8")


class TestExport:
    def test_empty_project(self):
        doc = json.loads(export_project(new_project("p1")))
        assert doc == {"format_version": "1",
                       "project": {"id": "p1", "name": "p1"},
                       "images": [], "links": []}

    def test_double_export_byte_identical(self):
        rng = np.random.default_rng(5)
        p = random_project(rng)
        assert export_project(p) == export_project(p)

    def test_canonical_across_insertion_orders(self):
        def build(order):
            p = new_project("p1")
            for i in order:
                add_image(p, path=f"im{i}.png", width=10, height=10,
                          image_id=f"img{i}")
            return p

        assert export_project(build([1, 2, 3])) == export_project(build([3, 1, 2]))

    def test_unicode_preserved(self):
        p = new_project("p1", name="Convento ★")
        data = export_project(p)
        assert "Convento ★" in data.decode("utf-8")
        assert import_project(data).name == "Convento ★"


class TestRoundTrip:
    def test_randomized_projects(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            p = random_project(rng)
            data = export_project(p)
            q = import_project(data)
            assert q == p
            assert export_project(q) == data

    def test_dates_and_titles_survive(self):
        p = new_project("p9", name="n")
        add_image(p, path="a.png", width=5, height=6,
                  capture_date=date(1870, 1, 1), title="Rua Nova")
        q = import_project(export_project(p))
        assert q.images["img1"].capture_date == date(1870, 1, 1)
        assert q.images["img1"].title == "Rua Nova"


class TestImportValidation:
    def test_not_json(self):
        with pytest.raises(MalformedDocumentError):
            import_project(b"{not json")

    def test_invalid_utf8(self):
        with pytest.raises(MalformedDocumentError):
            import_project(b"\xff\xfe{}")

    def test_non_object_top_level(self):
        with pytest.raises(MalformedDocumentError):
            import_project(b"[1, 2]")

    def test_unsupported_version(self):
        doc = valid_document()
        doc["format_version"] = "9"
        with pytest.raises(UnsupportedVersionError):
            import_project(as_bytes(doc))

    def test_missing_version(self):
        doc = valid_document()
        del doc["format_version"]
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_unknown_top_level_key_rejected(self):
        doc = valid_document()
        doc["groups"] = []  # derived data may not be stored
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_dangling_reference_names_the_image(self):
        doc = valid_document()
        doc["links"][0]["b"] = "x9"
        with pytest.raises(DanglingReferenceError) as info:
            import_project(as_bytes(doc))
        assert "x9" in str(info.value)
        assert info.value.entity == "x9"

    def test_corrupted_homography_detected(self):
        doc = valid_document()
        doc["links"][0]["homography"][2] += 1e-3
        with pytest.raises(HomographyInconsistentError) as info:
            import_project(as_bytes(doc))
        assert doc["links"][0]["id"] in str(info.value)

    def test_quad_with_three_points(self):
        doc = valid_document()
        doc["links"][0]["quad_a"] = doc["links"][0]["quad_a"][:3]
        with pytest.raises(InvalidLinkError):
            import_project(as_bytes(doc))

    def test_collinear_quad(self):
        doc = valid_document()
        doc["links"][0]["quad_a"] = [[0, 0], [1, 1], [2, 2], [3, 3]]
        with pytest.raises(InvalidLinkError):
            import_project(as_bytes(doc))

    def test_auto_link_with_too_few_pairs(self):
        doc = valid_document()
        doc["links"][1]["pairs"] = doc["links"][1]["pairs"][:5]
        with pytest.raises(InvalidLinkError):
            import_project(as_bytes(doc))

    def test_duplicate_pair(self):
        doc = valid_document()
        clone = dict(doc["links"][0])
        clone["id"] = "link9"
        doc["links"].append(clone)
        with pytest.raises(DuplicateLinkError):
            import_project(as_bytes(doc))

    def test_duplicate_image_id(self):
        doc = valid_document()
        doc["images"].append(dict(doc["images"][0]))
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_duplicate_link_id(self):
        doc = valid_document()
        clone = dict(doc["links"][0])
        clone["a"], clone["b"] = "img2", "img3"
        doc["links"].append(clone)
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_self_link(self):
        doc = valid_document()
        doc["links"][0]["b"] = doc["links"][0]["a"]
        with pytest.raises(SelfLinkError):
            import_project(as_bytes(doc))

    def test_bool_dimension_rejected(self):
        doc = valid_document()
        doc["images"][0]["width"] = True
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_negative_dimension_rejected(self):
        doc = valid_document()
        doc["images"][0]["height"] = -3
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_bad_capture_date_names_image(self):
        doc = valid_document()
        doc["images"][0]["capture_date"] = "187O-01-01"
        with pytest.raises(MalformedDocumentError) as info:
            import_project(as_bytes(doc))
        assert doc["images"][0]["id"] in str(info.value)

    def test_singular_homography_rejected(self):
        doc = valid_document()
        doc["links"][0]["homography"] = [1, 0, 0, 0, 1, 0, 0, 0, 0]
        with pytest.raises(InvalidLinkError):
            import_project(as_bytes(doc))

    def test_homography_wrong_length(self):
        doc = valid_document()
        doc["links"][0]["homography"] = [1, 0, 0]
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))

    def test_manual_link_missing_quads(self):
        doc = valid_document()
        del doc["links"][0]["quad_a"]
        with pytest.raises(InvalidLinkError):
            import_project(as_bytes(doc))

    def test_unknown_link_key_rejected(self):
        doc = valid_document()
        doc["links"][0]["note"] = "hello"
        with pytest.raises(MalformedDocumentError):
            import_project(as_bytes(doc))
