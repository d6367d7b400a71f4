"""Focus-view rendering.

Warps every image reachable from a chosen focus image into the focus
frame by composing link homographies along shortest link paths, then
composites back-to-front onto one canvas. The focus image itself is
drawn undistorted and last; neighbors are drawn at reduced opacity and
may be filtered out by capture date.
"""

from __future__ import annotations

from datetime import date

import numpy as np

from .errors import PointAtInfinityError
from .geometry import Homography, warp_points
from .project import Link, Project, get_image
from .raster import RasterImage, load_image

NEIGHBOR_ALPHA = 0.6
CANVAS_HALF_EXTENT_FACTOR = np.sqrt(2.0)  # per axis, bounds area at 8x focus
COORD_QUANTUM = 1.0 / 1024.0  # sampling grid; snaps sub-milli-pixel float noise


def _quantize(values):
    return np.round(np.asarray(values) / COORD_QUANTUM) * COORD_QUANTUM


def shortest_link_paths(project: Project, focus_id: str) -> dict[str, tuple[str, ...]]:
    """Fewest-hop path from the focus to every reachable image.

    Among equal-hop paths the lexicographically smallest id sequence wins,
    which pins the composition chain (and therefore the render) regardless
    of link insertion order.
    """
    adjacency: dict[str, set[str]] = {}
    for link in project.links.values():
        adjacency.setdefault(link.image_a, set()).add(link.image_b)
        adjacency.setdefault(link.image_b, set()).add(link.image_a)
    best: dict[str, tuple[str, ...]] = {focus_id: (focus_id,)}
    frontier = [focus_id]
    while frontier:
        discovered: dict[str, tuple[str, ...]] = {}
        for node in frontier:
            for neighbor in adjacency.get(node, ()):
                if neighbor in best:
                    continue
                candidate = best[node] + (neighbor,)
                held = discovered.get(neighbor)
                if held is None or candidate < held:
                    discovered[neighbor] = candidate
        best.update(discovered)
        frontier = sorted(discovered)
    return best


def _edge_transform(project: Project, u: str, v: str) -> Homography:
    """Homography taking v pixel coordinates into u pixel coordinates."""
    for link in project.links.values():
        if (link.image_a, link.image_b) == (v, u):
            return link.homography
        if (link.image_a, link.image_b) == (u, v):
            return link.homography.inverse()
    raise KeyError(f"no link between {u!r} and {v!r}")


def _path_transform(project: Project, path: tuple[str, ...]) -> Homography:
    """Compose edge homographies so the path's last image maps to its first."""
    transform = Homography.identity()
    for u, v in zip(path, path[1:]):
        transform = transform.compose(_edge_transform(project, u, v))
    return transform


def _to_rgb(img: RasterImage) -> np.ndarray:
    if img.channels == 3:
        return img.pixels.astype(np.float64)
    return np.repeat(img.pixels.astype(np.float64), 3, axis=2)


def _warp_bilinear(rgb: np.ndarray, canvas_to_src: np.ndarray,
                   out_h: int, out_w: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-map the source into the canvas; outside samples are transparent."""
    h, w = rgb.shape[:2]
    ys, xs = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    m = canvas_to_src
    denom = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = _quantize((m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / denom)
        sy = _quantize((m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / denom)
    valid = (np.abs(denom) > 1e-12) & (sx >= 0) & (sx <= w - 1) \
        & (sy >= 0) & (sy <= h - 1)
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)

    x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[:, :, np.newaxis]
    fy = (sy - y0)[:, :, np.newaxis]
    top = rgb[y0, x0] * (1.0 - fx) + rgb[y0, x1] * fx
    bottom = rgb[y1, x0] * (1.0 - fx) + rgb[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    out[~valid] = 0.0
    return out, valid.astype(np.float64)


def render_focus_view(project: Project, focus_image_id: str,
                      date_filter: date | None = None,
                      canvas_scale: float = 1.0, *,
                      loader=load_image) -> np.ndarray:
    """Composite the focus image and its reachable neighbors, RGBA uint8.

    Neighbors are painted back-to-front: farthest hop first, newer capture
    dates before older within a hop (undated counts as oldest), the focus
    itself last and fully opaque. Neighbors dated after ``date_filter``
    are omitted; undated neighbors always show. The canvas is the union
    of all warped corner rectangles, kept symmetric around the focus
    center and clamped to 8x the focus area.
    """
    if canvas_scale <= 0:
        raise ValueError("canvas_scale must be > 0")
    focus = get_image(project, focus_image_id)
    paths = shortest_link_paths(project, focus_image_id)

    members = []  # (sort key, image id, transform to focus frame)
    for image_id, path in paths.items():
        if image_id == focus_image_id:
            continue
        record = project.images.get(image_id)
        if record is None:
            continue  # link graph may mention ids outside this project
        if (date_filter is not None and record.capture_date is not None
                and record.capture_date > date_filter):
            continue
        hop = len(path) - 1
        ordinal = record.capture_date.toordinal() if record.capture_date else 0
        members.append(((-hop, -ordinal, image_id), image_id,
                        _path_transform(project, path)))
    members.sort(key=lambda entry: entry[0])

    rasters = {image_id: loader(project.images[image_id].path)
               for _, image_id, _ in members}
    rasters[focus_image_id] = loader(focus.path)

    # canvas extents: union of warped corners, symmetric about focus center
    fw = float(rasters[focus_image_id].width)
    fh = float(rasters[focus_image_id].height)
    cx, cy = fw / 2.0, fh / 2.0
    half_w, half_h = cx, cy
    for _, image_id, transform in members:
        img = rasters[image_id]
        corners = np.array([[0.0, 0.0], [img.width, 0.0],
                            [img.width, img.height], [0.0, img.height]])
        try:
            warped = warp_points(transform, corners)
        except PointAtInfinityError:
            half_w = CANVAS_HALF_EXTENT_FACTOR * fw
            half_h = CANVAS_HALF_EXTENT_FACTOR * fh
            continue
        half_w = max(half_w, float(np.max(np.abs(warped[:, 0] - cx))))
        half_h = max(half_h, float(np.max(np.abs(warped[:, 1] - cy))))
    half_w = min(half_w, CANVAS_HALF_EXTENT_FACTOR * fw)
    half_h = min(half_h, CANVAS_HALF_EXTENT_FACTOR * fh)

    # integer origin keeps the canvas on the focus pixel grid, so integer
    # translations rasterize exactly
    x_min = float(np.floor(_quantize(cx - half_w)))
    y_min = float(np.floor(_quantize(cy - half_h)))
    x_max = float(np.ceil(_quantize(cx + half_w)))
    y_max = float(np.ceil(_quantize(cy + half_h)))
    out_w = max(int(round((x_max - x_min) * canvas_scale)), 1)
    out_h = max(int(round((y_max - y_min) * canvas_scale)), 1)
    to_canvas = Homography(np.array([[canvas_scale, 0.0, -x_min * canvas_scale],
                                     [0.0, canvas_scale, -y_min * canvas_scale],
                                     [0.0, 0.0, 1.0]]))

    canvas_rgb = np.zeros((out_h, out_w, 3))
    canvas_a = np.zeros((out_h, out_w))
    layers = [(image_id, transform, NEIGHBOR_ALPHA)
              for _, image_id, transform in members]
    layers.append((focus_image_id, Homography.identity(), 1.0))
    for image_id, transform, opacity in layers:
        full = to_canvas.compose(transform)
        rgb, coverage = _warp_bilinear(_to_rgb(rasters[image_id]),
                                       np.linalg.inv(full.h), out_h, out_w)
        alpha = (coverage * opacity)[:, :, np.newaxis]
        canvas_rgb = rgb * alpha + canvas_rgb * (1.0 - alpha)
        canvas_a = alpha[:, :, 0] + canvas_a * (1.0 - alpha[:, :, 0])

    out = np.zeros((out_h, out_w, 4), dtype=np.uint8)
    covered = canvas_a > 0
    straight = np.zeros_like(canvas_rgb)
    straight[covered] = canvas_rgb[covered] / canvas_a[covered, np.newaxis]
    out[:, :, :3] = np.round(np.clip(straight, 0.0, 1.0) * 255.0).astype(np.uint8)
    out[:, :, 3] = np.round(np.clip(canvas_a, 0.0, 1.0) * 255.0).astype(np.uint8)
    return out
