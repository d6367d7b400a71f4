"""Versioned project interchange document.

The document is canonical UTF-8 JSON: fixed key order, id-sorted arrays
and shortest round-trip number formatting, so identical projects export
to byte-identical files. Import validates every invariant and names the
offending entity in each error; derived data (groups) is never read from
the file.
"""

from __future__ import annotations

import json

from .errors import (
    DanglingReferenceError,
    DegenerateHomographyError,
    DegenerateQuadError,
    DuplicateLinkError,
    EstimationFailedError,
    HomographyInconsistentError,
    InvalidLinkError,
    MalformedDocumentError,
    UnsupportedVersionError,
)
from .geometry import Homography, Quad
from .matching import MatchConfig
from .project import ImageRecord, Link, Project, parse_iso_date, unordered_pair

FORMAT_VERSION = "1"


def _image_doc(record: ImageRecord) -> dict:
    doc = {"id": record.image_id, "path": record.path,
           "width": record.width, "height": record.height}
    if record.capture_date is not None:
        doc["capture_date"] = record.capture_date.isoformat()
    if record.title is not None:
        doc["title"] = record.title
    return doc


def _link_doc(link: Link) -> dict:
    doc = {"id": link.link_id, "a": link.image_a, "b": link.image_b,
           "origin": link.origin}
    if link.origin == "manual":
        doc["quad_a"] = [[x, y] for x, y in link.quad_a.points]
        doc["quad_b"] = [[x, y] for x, y in link.quad_b.points]
    else:
        doc["pairs"] = [list(row) for row in link.pairs]
    doc["homography"] = link.homography.flat()
    return doc


def export_project(project: Project) -> bytes:
    doc = {
        "format_version": FORMAT_VERSION,
        "project": {"id": project.project_id, "name": project.name},
        "images": [_image_doc(project.images[i]) for i in sorted(project.images)],
        "links": [_link_doc(project.links[i]) for i in sorted(project.links)],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _expect_keys(obj: dict, required: tuple, optional: tuple, where: str):
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise MalformedDocumentError(f"{where}: unknown keys {unknown}")
    missing = [key for key in required if key not in obj]
    if missing:
        raise MalformedDocumentError(f"{where}: missing keys {missing}")


def _string(obj: dict, key: str, where: str, allow_empty: bool = False) -> str:
    value = obj[key]
    if not isinstance(value, str) or (not allow_empty and not value):
        raise MalformedDocumentError(
            f"{where}: {key!r} must be a non-empty string")
    return value


def _positive_int(obj: dict, key: str, where: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise MalformedDocumentError(
            f"{where}: {key!r} must be a positive integer")
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedDocumentError(f"{where}: expected a number")
    return float(value)


def _point_rows(value, where: str, row_len: int) -> list[tuple[float, ...]]:
    if not isinstance(value, list):
        raise MalformedDocumentError(f"{where}: expected an array of points")
    rows = []
    for row in value:
        if not isinstance(row, list) or len(row) != row_len:
            raise MalformedDocumentError(
                f"{where}: each entry must be an array of {row_len} numbers")
        rows.append(tuple(_number(v, where) for v in row))
    return rows


def _parse_image(doc, where: str) -> ImageRecord:
    if not isinstance(doc, dict):
        raise MalformedDocumentError(f"{where}: image entry must be an object")
    _expect_keys(doc, ("id", "path", "width", "height"),
                 ("capture_date", "title"), where)
    image_id = _string(doc, "id", where)
    where = f"image {image_id!r}"
    capture_date = None
    if "capture_date" in doc:
        raw = _string(doc, "capture_date", where)
        try:
            capture_date = parse_iso_date(raw)
        except Exception:
            raise MalformedDocumentError(
                f"{where}: capture_date {raw!r} is not an ISO date") from None
    title = _string(doc, "title", where) if "title" in doc else None
    return ImageRecord(image_id=image_id,
                       path=_string(doc, "path", where, allow_empty=True),
                       width=_positive_int(doc, "width", where),
                       height=_positive_int(doc, "height", where),
                       capture_date=capture_date, title=title)


def _parse_quad(doc, key: str, link_id: str) -> Quad:
    where = f"link {link_id!r} {key}"
    rows = _point_rows(doc[key], where, 2)
    if len(rows) != 4:
        raise InvalidLinkError(f"{where}: a quad needs exactly 4 points",
                               entity=link_id)
    try:
        return Quad(tuple(rows))
    except DegenerateQuadError as exc:
        raise InvalidLinkError(f"{where}: {exc}", entity=link_id) from None


def _parse_link(doc, images: dict, min_pairs: int, where: str) -> Link:
    if not isinstance(doc, dict):
        raise MalformedDocumentError(f"{where}: link entry must be an object")
    _expect_keys(doc, ("id", "a", "b", "origin", "homography"),
                 ("quad_a", "quad_b", "pairs"), where)
    link_id = _string(doc, "id", where)
    where = f"link {link_id!r}"
    image_a = _string(doc, "a", where)
    image_b = _string(doc, "b", where)
    for ref in (image_a, image_b):
        if ref not in images:
            raise DanglingReferenceError(
                f"{where} references unknown image {ref!r}", entity=ref)
    origin = _string(doc, "origin", where)

    quad_a = _parse_quad(doc, "quad_a", link_id) if "quad_a" in doc else None
    quad_b = _parse_quad(doc, "quad_b", link_id) if "quad_b" in doc else None
    pairs = None
    if "pairs" in doc:
        pairs = tuple(_point_rows(doc["pairs"], f"{where} pairs", 4))
        if len(pairs) < min_pairs:
            raise InvalidLinkError(
                f"{where}: auto links need >= {min_pairs} point pairs, "
                f"got {len(pairs)}", entity=link_id)

    matrix = doc["homography"]
    if not isinstance(matrix, list) or len(matrix) != 9:
        raise MalformedDocumentError(
            f"{where}: homography must be an array of 9 numbers")
    try:
        homography = Homography([_number(v, f"{where} homography")
                                 for v in matrix])
    except DegenerateHomographyError as exc:
        raise InvalidLinkError(f"{where}: {exc}", entity=link_id) from None

    return Link(link_id=link_id, image_a=image_a, image_b=image_b,
                origin=origin, homography=homography,
                quad_a=quad_a, quad_b=quad_b, pairs=pairs)


def import_project(data: bytes) -> Project:
    """Parse and fully validate an interchange document.

    Groups are not part of the document; they are always recomputed from
    the links by the grouping module.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocumentError(f"not a JSON document: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocumentError("top level must be an object")
    version = doc.get("format_version")
    if version is None:
        raise MalformedDocumentError("missing format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported format_version {version!r} (expected "
            f"{FORMAT_VERSION!r})")
    _expect_keys(doc, ("format_version", "project", "images", "links"), (),
                 "document")

    header = doc["project"]
    if not isinstance(header, dict):
        raise MalformedDocumentError("'project' must be an object")
    _expect_keys(header, ("id", "name"), (), "project header")
    project = Project(project_id=_string(header, "id", "project header"),
                      name=_string(header, "name", "project header",
                                   allow_empty=True))

    if not isinstance(doc["images"], list):
        raise MalformedDocumentError("'images' must be an array")
    for i, entry in enumerate(doc["images"]):
        record = _parse_image(entry, f"images[{i}]")
        if record.image_id in project.images:
            raise MalformedDocumentError(
                f"duplicate image id {record.image_id!r}")
        project.images[record.image_id] = record

    min_pairs = MatchConfig().min_inliers_auto_link
    if not isinstance(doc["links"], list):
        raise MalformedDocumentError("'links' must be an array")
    seen_pairs: dict[tuple[str, str], str] = {}
    for i, entry in enumerate(doc["links"]):
        link = _parse_link(entry, project.images, min_pairs, f"links[{i}]")
        if link.link_id in project.links:
            raise MalformedDocumentError(f"duplicate link id {link.link_id!r}")
        key = unordered_pair(link.image_a, link.image_b)
        if key in seen_pairs:
            raise DuplicateLinkError(
                f"links {seen_pairs[key]!r} and {link.link_id!r} cover the "
                f"same image pair", entity=link.link_id)
        seen_pairs[key] = link.link_id
        try:
            consistent = link.is_consistent()
        except (EstimationFailedError, DegenerateHomographyError) as exc:
            raise InvalidLinkError(
                f"link {link.link_id!r}: correspondences cannot determine a "
                f"homography ({exc})", entity=link.link_id) from None
        if not consistent:
            raise HomographyInconsistentError(
                f"link {link.link_id!r}: stored homography disagrees with "
                f"its correspondences (re-estimation differs > 1e-6)",
                entity=link.link_id)
        project.links[link.link_id] = link
    return project
