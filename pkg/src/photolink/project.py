"""Project data model: images, links between them, and their invariants.

A project owns image records and at most one link per unordered image
pair. Manual links carry one four-point quad per side and the exact
homography those quads determine; automatic links carry their verified
inlier correspondences and the robustly fitted homography.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import (
    BadDateError,
    DuplicateImageError,
    DuplicateLinkError,
    InvalidLinkError,
    SelfLinkError,
    UnknownImageError,
    UnknownLinkError,
)
from .geometry import Homography, Quad, estimate_exact, estimate_from_pairs

IMAGE_ID_PREFIX = "img"
LINK_ID_PREFIX = "link"
HOMOGRAPHY_TOLERANCE = 1e-6  # elementwise bound for stored-vs-reestimated


@dataclass
class ImageRecord:
    """One photograph: pixels live at ``path``, metadata lives here."""

    image_id: str
    path: str
    width: int
    height: int
    capture_date: date | None = None
    title: str | None = None

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"image {self.image_id!r} has invalid dimensions "
                f"{self.width}x{self.height}")


@dataclass(frozen=True)
class Link:
    """Relation between two images; ``homography`` maps a-pixels to b-pixels."""

    link_id: str
    image_a: str
    image_b: str
    origin: str  # "manual" | "auto"
    homography: Homography
    quad_a: Quad | None = None
    quad_b: Quad | None = None
    pairs: tuple[tuple[float, float, float, float], ...] | None = None

    def __post_init__(self):
        if not self.link_id:
            raise ValueError("link_id must be non-empty")
        if self.image_a == self.image_b:
            raise SelfLinkError(
                f"link {self.link_id!r} joins image {self.image_a!r} to itself",
                entity=self.link_id)
        if self.origin == "manual":
            if self.quad_a is None or self.quad_b is None or self.pairs is not None:
                raise InvalidLinkError(
                    f"manual link {self.link_id!r} must carry quad_a and "
                    f"quad_b and no point pairs", entity=self.link_id)
        elif self.origin == "auto":
            if self.pairs is None or self.quad_a is not None or self.quad_b is not None:
                raise InvalidLinkError(
                    f"auto link {self.link_id!r} must carry point pairs and "
                    f"no quads", entity=self.link_id)
            rows = tuple(tuple(float(v) for v in row) for row in self.pairs)
            if any(len(row) != 4 for row in rows):
                raise InvalidLinkError(
                    f"auto link {self.link_id!r} has a malformed point pair",
                    entity=self.link_id)
            if len(rows) < 4:
                raise InvalidLinkError(
                    f"auto link {self.link_id!r} needs >= 4 point pairs, "
                    f"got {len(rows)}", entity=self.link_id)
            object.__setattr__(self, "pairs", rows)
        else:
            raise InvalidLinkError(
                f"link {self.link_id!r} has unknown origin {self.origin!r}",
                entity=self.link_id)

    @property
    def pair_key(self) -> tuple[str, str]:
        return unordered_pair(self.image_a, self.image_b)

    def reestimate(self) -> Homography:
        """Recompute the homography from the stored correspondences."""
        if self.origin == "manual":
            return estimate_exact(self.quad_a, self.quad_b)
        rows = np.asarray(self.pairs, dtype=np.float64)
        return estimate_from_pairs(rows[:, 0:2], rows[:, 2:4])

    def is_consistent(self, tolerance: float = HOMOGRAPHY_TOLERANCE) -> bool:
        """True when re-estimation reproduces the stored matrix elementwise."""
        return bool(np.all(np.abs(self.reestimate().h - self.homography.h)
                           <= tolerance))


@dataclass
class Project:
    project_id: str
    name: str
    images: dict[str, ImageRecord] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)


def new_project(project_id: str, name: str | None = None) -> Project:
    if not project_id:
        raise ValueError("project_id must be non-empty")
    return Project(project_id=project_id, name=name or project_id)


def unordered_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def next_id(existing, prefix: str) -> str:
    """Smallest unused ``prefix<n>`` following the largest numeric suffix."""
    pattern = re.compile(re.escape(prefix) + r"(\d+)$")
    highest = 0
    for name in existing:
        m = pattern.fullmatch(name)
        if m:
            highest = max(highest, int(m.group(1)))
    return f"{prefix}{highest + 1}"


def parse_iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise BadDateError(f"not an ISO date (YYYY-MM-DD): {text!r}") from None


def get_image(project: Project, image_id: str) -> ImageRecord:
    record = project.images.get(image_id)
    if record is None:
        raise UnknownImageError(f"unknown image id {image_id!r}",
                                entity=image_id)
    return record


def add_image(project: Project, *, path: str, width: int, height: int,
              image_id: str | None = None, capture_date: date | None = None,
              title: str | None = None) -> ImageRecord:
    if image_id is None:
        image_id = next_id(project.images, IMAGE_ID_PREFIX)
    elif image_id in project.images:
        raise DuplicateImageError(f"image id {image_id!r} already exists",
                                  entity=image_id)
    record = ImageRecord(image_id=image_id, path=path, width=width,
                         height=height, capture_date=capture_date, title=title)
    project.images[image_id] = record
    return record


def set_capture_date(project: Project, image_id: str,
                     capture_date: date | None) -> ImageRecord:
    record = get_image(project, image_id)
    record.capture_date = capture_date
    return record


def find_link(project: Project, image_a: str, image_b: str) -> Link | None:
    key = unordered_pair(image_a, image_b)
    for link in project.links.values():
        if link.pair_key == key:
            return link
    return None


def get_link(project: Project, link_id: str) -> Link:
    link = project.links.get(link_id)
    if link is None:
        raise UnknownLinkError(f"unknown link id {link_id!r}", entity=link_id)
    return link


def _check_new_pair(project: Project, image_a: str, image_b: str):
    get_image(project, image_a)
    get_image(project, image_b)
    if image_a == image_b:
        raise SelfLinkError(f"cannot link image {image_a!r} to itself",
                            entity=image_a)
    existing = find_link(project, image_a, image_b)
    if existing is not None:
        raise DuplicateLinkError(
            f"images {image_a!r} and {image_b!r} are already linked by "
            f"{existing.link_id!r} (delete it first)",
            entity=existing.link_id)


def create_manual_link(project: Project, image_a: str, image_b: str,
                       quad_a: Quad, quad_b: Quad) -> Link:
    """Link two images through matching four-point polygons.

    The homography is the exact four-point solution mapping quad_a onto
    quad_b, so the stored matrix is consistent with the stored quads by
    construction.
    """
    _check_new_pair(project, image_a, image_b)
    link = Link(link_id=next_id(project.links, LINK_ID_PREFIX),
                image_a=image_a, image_b=image_b, origin="manual",
                homography=estimate_exact(quad_a, quad_b),
                quad_a=quad_a, quad_b=quad_b)
    project.links[link.link_id] = link
    return link


def add_auto_link(project: Project, image_a: str, image_b: str,
                  pairs, homography: Homography) -> Link:
    """Store a geometrically verified automatic link."""
    _check_new_pair(project, image_a, image_b)
    link = Link(link_id=next_id(project.links, LINK_ID_PREFIX),
                image_a=image_a, image_b=image_b, origin="auto",
                homography=homography,
                pairs=tuple(tuple(float(v) for v in row) for row in pairs))
    project.links[link.link_id] = link
    return link


def delete_link(project: Project, link_id: str) -> Link:
    link = get_link(project, link_id)
    del project.links[link_id]
    return link
