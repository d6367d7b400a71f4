from collections import deque

import numpy as np
import pytest
from PIL import Image
from scipy import ndimage

from photolink.geometry import Quad
from photolink.grouping import auto_group, compute_groups
from photolink.interchange import export_project
from photolink.project import (
    add_image,
    create_manual_link,
    find_link,
    new_project,
)

UNIT_QUAD = Quad(((0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)))


def bfs_partition(node_ids, edges):
    """Reachability oracle: repeated breadth-first search."""
    adjacency = {n: set() for n in node_ids}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    remaining = set(node_ids)
    partition = set()
    while remaining:
        start = next(iter(remaining))
        seen = {start}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for neighbor in adjacency[node]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    queue.append(neighbor)
        partition.add(frozenset(seen))
        remaining -= seen
    return partition


def linked_project(n_nodes, edges):
    p = new_project("p1")
    for i in range(n_nodes):
        add_image(p, path="x.png", width=32, height=32, image_id=f"n{i}")
    for a, b in edges:
        if a != b and find_link(p, f"n{a}", f"n{b}") is None:
            create_manual_link(p, f"n{a}", f"n{b}", UNIT_QUAD, UNIT_QUAD)
    return p


class TestComputeGroups:
    def test_two_chains_and_a_singleton(self):
        p = linked_project(6, [(0, 1), (1, 2), (3, 4)])
        groups = compute_groups(p)
        assert [g.members for g in groups] == [
            ("n0", "n1", "n2"), ("n3", "n4"), ("n5",)]
        assert [g.group_id for g in groups] == ["g1", "g2", "g3"]

    def test_no_links_all_singletons(self):
        p = linked_project(4, [])
        groups = compute_groups(p)
        assert all(len(g.members) == 1 for g in groups)
        assert len(groups) == 4

    def test_matches_bfs_oracle_on_random_graphs(self):
        rng = np.random.default_rng(123)
        for _ in range(30):
            n = int(rng.integers(1, 120))
            n_edges = int(rng.integers(0, 2 * n))
            edges = [tuple(rng.integers(0, n, size=2)) for _ in range(n_edges)]
            p = linked_project(n, edges)
            got = {frozenset(g.members) for g in compute_groups(p)}
            expected = bfs_partition(
                [f"n{i}" for i in range(n)],
                [(f"n{a}", f"n{b}") for a, b in edges if a != b])
            assert got == expected

    def test_independent_of_insertion_order(self):
        edges = [(0, 3), (3, 7), (2, 5), (8, 9)]
        p1 = linked_project(10, edges)

        rng = np.random.default_rng(7)
        order = rng.permutation(10)
        p2 = new_project("p1")
        for i in order:
            add_image(p2, path="x.png", width=32, height=32, image_id=f"n{i}")
        for a, b in reversed(edges):
            create_manual_link(p2, f"n{a}", f"n{b}", UNIT_QUAD, UNIT_QUAD)
        assert compute_groups(p1) == compute_groups(p2)


def save_gray_png(path, gray: np.ndarray):
    Image.fromarray((np.clip(gray, 0.0, 1.0) * 255).astype(np.uint8),
                    mode="L").save(path)


@pytest.fixture(scope="module")
def photo_set(tmp_path_factory):
    """Two copies of one textured photo plus one unrelated noise image."""
    root = tmp_path_factory.mktemp("photos")
    rng = np.random.default_rng(20)
    texture = ndimage.gaussian_filter(rng.random((128, 128)), 1.5)
    texture = (texture - texture.min()) / (texture.max() - texture.min())
    other = ndimage.gaussian_filter(rng.random((128, 128)), 1.5)
    other = (other - other.min()) / (other.max() - other.min())
    save_gray_png(root / "copy1.png", texture)
    save_gray_png(root / "copy2.png", texture)
    save_gray_png(root / "other.png", other)
    return root


def photo_project(root):
    p = new_project("p1")
    for name in ("copy1", "copy2", "other"):
        add_image(p, path=str(root / f"{name}.png"), width=128, height=128,
                  image_id=name)
    return p


class TestAutoGroup:
    def test_empty_project(self):
        assert auto_group(new_project("p1")) == ([], [])

    def test_identical_copies_grouped(self, photo_set):
        p = photo_project(photo_set)
        verified, groups = auto_group(p)
        assert {frozenset(g.members) for g in groups} == {
            frozenset({"copy1", "copy2"}), frozenset({"other"})}
        link = find_link(p, "copy1", "copy2")
        assert link is not None and link.origin == "auto"
        assert np.allclose(link.homography.h, np.eye(3), atol=1e-3)
        assert len(link.pairs) >= 12
        assert any({v.image_a, v.image_b} == {"copy1", "copy2"}
                   for v in verified)

    def test_manual_links_survive_and_merge(self, photo_set):
        p = photo_project(photo_set)
        manual = create_manual_link(p, "copy1", "other", UNIT_QUAD, UNIT_QUAD)
        _, groups = auto_group(p)
        assert p.links[manual.link_id] == manual
        assert {frozenset(g.members) for g in groups} == {
            frozenset({"copy1", "copy2", "other"})}

    def test_stale_auto_links_are_replaced(self, photo_set):
        from photolink.geometry import estimate_from_pairs
        from photolink.project import add_auto_link

        p = photo_project(photo_set)
        rows = np.column_stack([np.random.default_rng(1).uniform(0, 100, (12, 2)),
                                np.random.default_rng(2).uniform(0, 100, (12, 2))])
        rows[:, 2:4] = rows[:, 0:2] + 5.0
        bogus = add_auto_link(p, "copy1", "other", rows,
                              estimate_from_pairs(rows[:, 0:2], rows[:, 2:4]))
        auto_group(p)
        assert bogus.link_id not in p.links or \
            find_link(p, "copy1", "other") is None

    def test_deterministic_for_fixed_seed(self, photo_set):
        p1 = photo_project(photo_set)
        p2 = photo_project(photo_set)
        auto_group(p1, seed=42)
        auto_group(p2, seed=42)
        assert export_project(p1) == export_project(p2)

    def test_feature_cache_reused(self, photo_set):
        cache = {}
        p1 = photo_project(photo_set)
        auto_group(p1, feature_cache=cache)
        assert len(cache) == 2  # identical copies share one content hash
        p2 = photo_project(photo_set)
        auto_group(p2, feature_cache=cache)
        assert export_project(p1) == export_project(p2)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            auto_group(new_project("p1"), seed=-1)
