"""Projective transform estimation.

Exact four-point estimation via normalized DLT, robust estimation via
RANSAC with a consistency refit, and point warping. All matrices are
3x3 float64, normalized so the bottom-right entry is 1 whenever it is
numerically nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateHomographyError,
    DegenerateQuadError,
    EstimationFailedError,
    PointAtInfinityError,
)

MIN_TRIANGLE_AREA = 1e-6  # px^2, quad non-collinearity floor
_W_EPS = 1e-12


def _triangle_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


def _cross2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper intersection test for open segments (shared endpoints excluded)."""
    d1 = _cross2(p1, p2, q1)
    d2 = _cross2(p1, p2, q2)
    d3 = _cross2(q1, q2, p1)
    d4 = _cross2(q1, q2, p2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class Quad:
    """Four ordered 2D points forming a simple, non-degenerate polygon."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) != 4:
            raise DegenerateQuadError(f"quad needs 4 points, got {len(pts)}",
                                      points=pts)
        object.__setattr__(self, "points", pts)
        for skip in range(4):
            tri = [pts[i] for i in range(4) if i != skip]
            if _triangle_area(*tri) <= MIN_TRIANGLE_AREA:
                raise DegenerateQuadError(
                    f"collinear points {tri[0]}, {tri[1]}, {tri[2]}",
                    points=tri)
        # opposite edges of a simple quad never cross
        if (_segments_intersect(pts[0], pts[1], pts[2], pts[3])
                or _segments_intersect(pts[1], pts[2], pts[3], pts[0])):
            raise DegenerateQuadError(
                f"self-intersecting polygon {pts}", points=pts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)


def _normalize_matrix(m: np.ndarray) -> np.ndarray:
    frob = float(np.linalg.norm(m))
    if frob < _W_EPS:
        raise DegenerateHomographyError("zero homography matrix")
    if abs(m[2, 2]) > 1e-9 * frob:
        out = m / m[2, 2]
    else:
        out = m / frob
        # pin the sign so equal transforms serialize identically
        lead = out.flat[np.argmax(np.abs(out))]
        if lead < 0:
            out = -out
    return out


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective transform; ``h`` is normalized and read-only."""

    h: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64).reshape(3, 3)
        m = _normalize_matrix(m)
        if abs(float(np.linalg.det(m))) <= 1e-12:
            raise DegenerateHomographyError("homography is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "h", m)

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return np.array_equal(self.h, other.h)

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        return Homography(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))

    def compose(self, other: "Homography") -> "Homography":
        """Composition applying ``other`` first, then ``self``."""
        return Homography(self.h @ other.h)

    def flat(self) -> list[float]:
        return [float(v) for v in self.h.reshape(-1)]


def warp_point(hom: Homography, p: Sequence[float]) -> tuple[float, float]:
    """Apply the homography to one point (homogeneous multiply + divide)."""
    x, y = float(p[0]), float(p[1])
    m = hom.h
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < _W_EPS:
        raise PointAtInfinityError(f"point ({x}, {y}) maps to infinity")
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return (u, v)


def warp_points(hom: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized warp of an (n, 2) point array."""
    pts = np.asarray(pts, dtype=np.float64)
    ph = np.column_stack([pts, np.ones(len(pts))])
    q = ph @ hom.h.T
    w = q[:, 2]
    if np.any(np.abs(w) < _W_EPS):
        raise PointAtInfinityError("a point maps to infinity")
    return q[:, :2] / w[:, np.newaxis]


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate centroid to origin, scale mean radius to sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_radius = float(np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean())
    if mean_radius < _W_EPS:
        raise EstimationFailedError("all points coincide")
    s = np.sqrt(2.0) / mean_radius
    t = np.array([[s, 0.0, -s * centroid[0]],
                  [0.0, s, -s * centroid[1]],
                  [0.0, 0.0, 1.0]])
    normalized = (pts - centroid) * s
    return normalized, t


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT over n >= 4 correspondences; returns a raw 3x3 matrix."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise EstimationFailedError(f"need >= 4 correspondences, got {n}")
    sn, ts = _hartley_normalization(src)
    dn, td = _hartley_normalization(dst)
    a = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    ones = np.ones(n)
    a[0::2] = np.column_stack([x, y, ones, 0 * x, 0 * x, 0 * x, -u * x, -u * y, -u])
    a[1::2] = np.column_stack([0 * x, 0 * x, 0 * x, x, y, ones, -v * x, -v * y, -v])
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    return np.linalg.inv(td) @ hn @ ts


def estimate_exact(src: Quad, dst: Quad) -> Homography:
    """Homography mapping the four src corners exactly onto the dst corners."""
    return Homography(_dlt(src.as_array(), dst.as_array()))


def estimate_from_pairs(src_pts: np.ndarray, dst_pts: np.ndarray) -> Homography:
    """Least-squares homography over n >= 4 correspondences (normalized DLT)."""
    return Homography(_dlt(src_pts, dst_pts))


def reprojection_errors(hom: Homography, src_pts: np.ndarray,
                        dst_pts: np.ndarray) -> np.ndarray:
    """Euclidean distance |H(src) - dst| per correspondence."""
    projected = warp_points(hom, src_pts)
    return np.sqrt(((projected - np.asarray(dst_pts, dtype=np.float64)) ** 2).sum(axis=1))


def _sample_is_degenerate(pts: np.ndarray) -> bool:
    idx = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
    return any(_triangle_area(pts[i], pts[j], pts[k]) <= MIN_TRIANGLE_AREA
               for i, j, k in idx)


def estimate_robust(pairs: np.ndarray, *, reproj_threshold: float = 3.0,
                    confidence: float = 0.995, max_iters: int = 2000,
                    rng: np.random.Generator | None = None,
                    ) -> tuple[Homography, list[int]]:
    """RANSAC homography over (n, 4) rows of (xa, ya, xb, yb).

    Samples minimal 4-point models, keeps the largest consensus set, then
    refits by least squares over the inliers. The refit is iterated,
    dropping any correspondence that exceeds the threshold under the
    refitted model, so the returned homography is exactly the DLT of the
    returned inlier set and every returned inlier respects the threshold.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if len(pairs) < 4:
        raise EstimationFailedError(f"need >= 4 correspondences, got {len(pairs)}")
    if rng is None:
        rng = np.random.default_rng(42)
    # exact duplicate rows count once: keep the first occurrence of each
    _, first = np.unique(pairs, axis=0, return_index=True)
    original_index = np.sort(first)
    unique = pairs[original_index]
    n = len(unique)
    if n < 4:
        raise EstimationFailedError(
            f"need >= 4 distinct correspondences, got {n}")
    src = unique[:, 0:2]
    dst = unique[:, 2:4]

    best_count = 0
    best_mask: np.ndarray | None = None
    needed = max_iters
    iteration = 0
    while iteration < min(needed, max_iters):
        iteration += 1
        sample = rng.choice(n, size=4, replace=False)
        s_src, s_dst = src[sample], dst[sample]
        if _sample_is_degenerate(s_src) or _sample_is_degenerate(s_dst):
            continue
        try:
            model = Homography(_dlt(s_src, s_dst))
        except (DegenerateHomographyError, EstimationFailedError):
            continue
        errors = reprojection_errors(model, src, dst)
        mask = errors <= reproj_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            ratio = count / n
            if 0.0 < ratio < 1.0:
                denom = np.log1p(-min(ratio ** 4, 1.0 - 1e-12))
                needed = int(np.ceil(np.log(1.0 - confidence) / denom))
            elif ratio >= 1.0:
                needed = iteration

    if best_mask is None or best_count < 4:
        raise EstimationFailedError("no model with >= 4 inliers found")

    # refit to a fixed point: H = DLT(inliers) and all inliers within threshold
    inliers = np.flatnonzero(best_mask)
    hom = Homography(_dlt(src[inliers], dst[inliers]))
    errors = reprojection_errors(hom, src, dst)
    inliers = np.flatnonzero(errors <= reproj_threshold)  # one growth step
    for _ in range(n):
        if len(inliers) < 4:
            raise EstimationFailedError("no model with >= 4 inliers found")
        hom = Homography(_dlt(src[inliers], dst[inliers]))
        errs = reprojection_errors(hom, src[inliers], dst[inliers])
        keep = errs <= reproj_threshold
        if keep.all():
            break
        inliers = inliers[keep]  # shrink only, guarantees termination
    return hom, [int(original_index[i]) for i in inliers]
