"""Exception hierarchy for the engine.

Every error carries a stable machine-readable ``code`` so the HTTP layer
and the CLI can map failures without string matching. ``entity`` names the
offending object (image id, link id, ...) when one exists.
"""

from __future__ import annotations


class PhotolinkError(Exception):
    """Base class for all engine errors."""

    code = "internal_error"

    def __init__(self, message: str, entity: str | None = None):
        super().__init__(message)
        self.entity = entity


class UnreadableImageError(PhotolinkError):
    code = "unreadable_image"


class UnsupportedFormatError(PhotolinkError):
    code = "unsupported_format"


class ImageTooSmallError(PhotolinkError):
    code = "image_too_small"


class DegenerateQuadError(PhotolinkError):
    code = "degenerate_quad"

    def __init__(self, message: str, points=None, entity: str | None = None):
        super().__init__(message, entity)
        self.points = points


class DegenerateHomographyError(PhotolinkError):
    code = "degenerate_homography"


class PointAtInfinityError(PhotolinkError):
    code = "point_at_infinity"


class EstimationFailedError(PhotolinkError):
    code = "estimation_failed"


class UnknownProjectError(PhotolinkError):
    code = "project_not_found"


class UnknownImageError(PhotolinkError):
    code = "image_not_found"


class UnknownLinkError(PhotolinkError):
    code = "link_not_found"


class UnknownJobError(PhotolinkError):
    code = "job_not_found"


class SelfLinkError(PhotolinkError):
    code = "self_link"


class DuplicateLinkError(PhotolinkError):
    code = "link_exists"


class DuplicateImageError(PhotolinkError):
    code = "image_exists"


class BadDateError(PhotolinkError):
    code = "bad_date"


class MalformedDocumentError(PhotolinkError):
    code = "malformed_document"


class UnsupportedVersionError(PhotolinkError):
    code = "unsupported_version"


class DanglingReferenceError(PhotolinkError):
    code = "dangling_reference"


class InvalidLinkError(PhotolinkError):
    code = "invalid_link"


class HomographyInconsistentError(PhotolinkError):
    code = "homography_inconsistent"


class AutogroupRunningError(PhotolinkError):
    code = "autogroup_running"
