"""Descriptor matching and geometric verification of image pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationFailedError
from .features import Keypoint
from .geometry import Homography, estimate_robust

SINGLE_CANDIDATE_DISTANCE = 0.4  # absolute gate when the ratio test is undefined
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class Match:
    """Correspondence between keypoint index_a in one image and index_b in another."""

    index_a: int
    index_b: int
    distance: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("distance must be >= 0")


@dataclass(frozen=True)
class MatchConfig:
    ratio_threshold: float = 0.8
    min_inliers_auto_link: int = 12
    ransac_reproj_threshold: float = 3.0
    ransac_confidence: float = 0.995
    ransac_max_iters: int = 2000

    def __post_init__(self):
        if not 0.0 < self.ratio_threshold < 1.0:
            raise ValueError("ratio_threshold must be in (0, 1)")
        if self.min_inliers_auto_link < 4:
            raise ValueError("min_inliers_auto_link must be >= 4")
        if self.ransac_reproj_threshold <= 0:
            raise ValueError("ransac_reproj_threshold must be > 0")
        if not 0.0 < self.ransac_confidence < 1.0:
            raise ValueError("ransac_confidence must be in (0, 1)")
        if self.ransac_max_iters < 1:
            raise ValueError("ransac_max_iters must be >= 1")


@dataclass(frozen=True)
class VerifiedPair:
    """Geometrically confirmed relation: homography maps image_a pixels to image_b."""

    image_a: str
    image_b: str
    inlier_matches: list[Match]
    homography: Homography


def match_descriptors(desc_a: np.ndarray, desc_b: np.ndarray,
                      cfg: MatchConfig | None = None) -> list[Match]:
    """Ratio-tested nearest neighbors of a's descriptors among b's.

    Each b index appears at most once; on a collision the smaller distance
    wins (ties keep the smaller a index). With a single b descriptor the
    ratio test is undefined and an absolute distance gate applies.
    """
    cfg = cfg or MatchConfig()
    a = np.atleast_2d(np.asarray(desc_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(desc_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        return []

    candidates: list[tuple[int, int, float]] = []
    b_sq = (b * b).sum(axis=1)
    for start in range(0, len(a), _CHUNK_ROWS):
        chunk = a[start:start + _CHUNK_ROWS]
        sq = ((chunk * chunk).sum(axis=1)[:, np.newaxis] + b_sq
              - 2.0 * chunk @ b.T)
        dists = np.sqrt(np.maximum(sq, 0.0))
        if b.shape[0] == 1:
            for i, dist in enumerate(dists[:, 0]):
                if dist < SINGLE_CANDIDATE_DISTANCE:
                    candidates.append((start + i, 0, float(dist)))
            continue
        two = np.argpartition(dists, 1, axis=1)[:, :2]
        rows = np.arange(len(chunk))
        pair_d = dists[rows[:, np.newaxis], two]
        swap = pair_d[:, 0] > pair_d[:, 1]
        two[swap] = two[swap][:, ::-1]
        pair_d[swap] = pair_d[swap][:, ::-1]
        for i in range(len(chunk)):
            d1, d2 = float(pair_d[i, 0]), float(pair_d[i, 1])
            if d2 > 0.0 and d1 / d2 < cfg.ratio_threshold:
                candidates.append((start + i, int(two[i, 0]), d1))

    best_for_b: dict[int, tuple[int, int, float]] = {}
    for cand in candidates:  # ascending index_a, so ties keep the earlier a
        held = best_for_b.get(cand[1])
        if held is None or cand[2] < held[2]:
            best_for_b[cand[1]] = cand
    kept = sorted(best_for_b.values())
    return [Match(index_a=ia, index_b=ib, distance=d) for ia, ib, d in kept]


def verify_pair(kps_a: list[Keypoint], kps_b: list[Keypoint],
                matches: list[Match], cfg: MatchConfig | None = None, *,
                image_a: str = "", image_b: str = "",
                rng: np.random.Generator | None = None) -> VerifiedPair | None:
    """Robustly fit a homography through the matches; None means rejection.

    Acceptance requires at least min_inliers_auto_link inliers within the
    reprojection threshold. Rejection is the normal outcome for unrelated
    images, not an error.
    """
    cfg = cfg or MatchConfig()
    if len(matches) < 4:
        return None
    pairs = np.array([(kps_a[m.index_a].x, kps_a[m.index_a].y,
                       kps_b[m.index_b].x, kps_b[m.index_b].y)
                      for m in matches])
    try:
        hom, inliers = estimate_robust(
            pairs,
            reproj_threshold=cfg.ransac_reproj_threshold,
            confidence=cfg.ransac_confidence,
            max_iters=cfg.ransac_max_iters,
            rng=rng)
    except EstimationFailedError:
        return None
    if len(inliers) < cfg.min_inliers_auto_link:
        return None
    return VerifiedPair(image_a=image_a, image_b=image_b,
                        inlier_matches=[matches[i] for i in inliers],
                        homography=hom)
