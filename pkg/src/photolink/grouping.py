"""Partitioning a project's images into visually connected groups.

Groups are the connected components of the link graph (manual and
automatic links alike). ``auto_group`` rebuilds the automatic links by
matching and geometrically verifying every unordered image pair, then
recomputes the partition.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnreadableImageError
from .features import Keypoint, extract_features
from .matching import MatchConfig, VerifiedPair, match_descriptors, verify_pair
from .project import Project, add_auto_link, find_link
from .raster import decode_image

DEFAULT_SEED = 42
GROUP_ID_PREFIX = "g"


@dataclass(frozen=True)
class Group:
    group_id: str
    members: tuple[str, ...]  # image ids, ascending


class _UnionFind:
    def __init__(self, items):
        self.parent = {item: item for item in items}
        self.size = {item: 1 for item in items}

    def find(self, item):
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:  # path compression
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def compute_groups(project: Project) -> list[Group]:
    """Connected components of the link graph; singletons included.

    Deterministic: members ascend within a group and groups are numbered
    in order of their member tuples, so the result is independent of
    image or link insertion order.
    """
    uf = _UnionFind(project.images)
    for link in project.links.values():
        uf.union(link.image_a, link.image_b)
    components: dict[str, list[str]] = {}
    for image_id in project.images:
        components.setdefault(uf.find(image_id), []).append(image_id)
    member_sets = sorted(tuple(sorted(m)) for m in components.values())
    return [Group(group_id=f"{GROUP_ID_PREFIX}{i + 1}", members=members)
            for i, members in enumerate(member_sets)]


def _pair_rng(seed: int, digest_a: bytes, digest_b: bytes) -> np.random.Generator:
    """Pair-specific RNG from the seed and both image content hashes.

    Tying the stream to content instead of ids keeps verification results
    identical however the images were inserted or named.
    """
    entropy = [seed,
               int.from_bytes(digest_a[:16], "big"),
               int.from_bytes(digest_b[:16], "big")]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _load_features(project: Project, feature_cache: dict | None):
    """Extract (keypoints, descriptors, content hash) per image, cached by id."""
    features: dict[str, tuple[list[Keypoint], np.ndarray]] = {}
    digests: dict[str, bytes] = {}
    for image_id in sorted(project.images):
        record = project.images[image_id]
        try:
            data = Path(record.path).read_bytes()
        except OSError as exc:
            raise UnreadableImageError(
                f"cannot read image {image_id!r} from {record.path!r}: {exc}",
                entity=image_id) from exc
        digests[image_id] = hashlib.sha256(data).digest()
        if feature_cache is not None and digests[image_id] in feature_cache:
            features[image_id] = feature_cache[digests[image_id]]
            continue
        extracted = extract_features(decode_image(data))
        features[image_id] = extracted
        if feature_cache is not None:
            feature_cache[digests[image_id]] = extracted
    return features, digests


def auto_group(project: Project, cfg: MatchConfig | None = None, *,
               seed: int = DEFAULT_SEED,
               feature_cache: dict | None = None,
               ) -> tuple[list[VerifiedPair], list[Group]]:
    """Match and verify every unordered image pair, then partition.

    Automatic links are rebuilt from scratch: previous auto links are
    dropped and each verified pair is stored, except where a manual link
    already claims the pair (manual judgment always wins). Manual links
    are never altered. Deterministic for a fixed seed and fixed inputs.
    """
    cfg = cfg or MatchConfig()
    if seed < 0:
        raise ValueError("seed must be >= 0")
    features, digests = _load_features(project, feature_cache)

    ids = sorted(project.images)
    verified: list[VerifiedPair] = []
    for i, image_a in enumerate(ids):
        kps_a, desc_a = features[image_a]
        for image_b in ids[i + 1:]:
            kps_b, desc_b = features[image_b]
            matches = match_descriptors(desc_a, desc_b, cfg)
            pair = verify_pair(kps_a, kps_b, matches, cfg,
                               image_a=image_a, image_b=image_b,
                               rng=_pair_rng(seed, digests[image_a],
                                             digests[image_b]))
            if pair is not None:
                verified.append(pair)

    for link_id in [lid for lid, link in project.links.items()
                    if link.origin == "auto"]:
        del project.links[link_id]
    for pair in verified:
        if find_link(project, pair.image_a, pair.image_b) is not None:
            continue  # manual link already covers the pair
        kps_a = features[pair.image_a][0]
        kps_b = features[pair.image_b][0]
        rows = [(kps_a[m.index_a].x, kps_a[m.index_a].y,
                 kps_b[m.index_b].x, kps_b[m.index_b].y)
                for m in pair.inlier_matches]
        add_auto_link(project, pair.image_a, pair.image_b,
                      pairs=rows, homography=pair.homography)
    return verified, compute_groups(project)
