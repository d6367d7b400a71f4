"""Scale-invariant keypoint detection and description.

Difference-of-Gaussians pyramid, 3D extrema with iterative sub-pixel
refinement, contrast and principal-curvature filtering, 36-bin gradient
orientation assignment, and 4x4x8 trilinearly-binned descriptors clamped
at 0.2 and renormalized to unit length.

The whole pipeline is deterministic: identical image and parameters give
bit-identical keypoints and descriptors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmallError
from .raster import RasterImage

ASSUMED_BLUR = 0.5        # blur attributed to the raw input image
MIN_COARSEST_DIM = 16     # smallest allowed octave dimension
BORDER = 5                # px margin left untouched at every level
MAX_REFINE_STEPS = 5
ORI_BINS = 36
ORI_SIGMA_FACTOR = 1.5
ORI_RADIUS_FACTOR = 3.0
ORI_PEAK_RATIO = 0.8
DESC_GRID = 4
DESC_ORI_BINS = 8
DESC_BIN_SCALE = 3.0      # histogram bin width in units of keypoint scale
DESC_CLAMP = 0.2
DESC_LEN = DESC_GRID * DESC_GRID * DESC_ORI_BINS
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ScaleSpaceParams:
    """Detector configuration; ``num_octaves`` is derived from the image when None."""

    base_sigma: float = 1.6
    scales_per_octave: int = 3
    num_octaves: int | None = None
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0

    def __post_init__(self):
        if self.base_sigma <= 0:
            raise ValueError("base_sigma must be > 0")
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.contrast_threshold <= 0:
            raise ValueError("contrast_threshold must be > 0")
        if self.edge_ratio <= 1:
            raise ValueError("edge_ratio must be > 1")
        if self.num_octaves is not None and self.num_octaves < 1:
            raise ValueError("num_octaves must be >= 1")


@dataclass(frozen=True)
class Keypoint:
    """Interest point in original-image coordinates; orientation in [0, 2pi)."""

    x: float
    y: float
    sigma: float
    orientation: float


@dataclass(frozen=True)
class _Located:
    """Pyramid address of a keypoint: octave, gaussian level and octave coords."""

    octave: int
    level: int
    x: float
    y: float
    sigma: float  # in octave pixel units


@dataclass
class _Pyramid:
    params: ScaleSpaceParams
    num_octaves: int
    gaussians: list[np.ndarray]  # per octave: (s+3, h, w) float32
    dogs: list[np.ndarray]       # per octave: (s+2, h, w) float32


def _upsample2x(img: np.ndarray) -> np.ndarray:
    """Corner-aligned bilinear 2x upsample: output coord q samples input q/2."""
    h, w = img.shape
    rows = np.arange(2 * h, dtype=np.float64) / 2.0
    cols = np.arange(2 * w, dtype=np.float64) / 2.0
    grid = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(img.astype(np.float64), grid, order=1,
                                  mode="nearest")
    return out.astype(np.float32)


def build_pyramid(gray: np.ndarray, params: ScaleSpaceParams) -> _Pyramid:
    h, w = gray.shape
    if min(h, w) < MIN_COARSEST_DIM:
        raise ImageTooSmallError(
            f"image {w}x{h} too small for one octave (min dimension "
            f"{MIN_COARSEST_DIM})")
    base = _upsample2x(np.asarray(gray, dtype=np.float32))
    # the doubled image carries blur 2 * ASSUMED_BLUR
    initial = math.sqrt(max(params.base_sigma ** 2 - (2 * ASSUMED_BLUR) ** 2, 0.01))
    base = ndimage.gaussian_filter(base, initial).astype(np.float32)

    max_octaves = int(math.floor(math.log2(min(base.shape) / MIN_COARSEST_DIM))) + 1
    num_octaves = max_octaves if params.num_octaves is None else min(
        params.num_octaves, max_octaves)

    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)
    total = [params.base_sigma * k ** i for i in range(s + 3)]
    increments = [math.sqrt(total[i] ** 2 - total[i - 1] ** 2)
                  for i in range(1, s + 3)]

    gaussians = []
    dogs = []
    current = base
    for _ in range(num_octaves):
        levels = [current]
        for inc in increments:
            levels.append(ndimage.gaussian_filter(levels[-1], inc).astype(np.float32))
        stack = np.stack(levels)
        gaussians.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        current = levels[s][::2, ::2]
    return _Pyramid(params=params, num_octaves=num_octaves,
                    gaussians=gaussians, dogs=dogs)


def _candidate_mask(dog: np.ndarray, prefilter: float) -> np.ndarray:
    """3D local extrema of the DoG stack, interior levels only."""
    s_levels = dog.shape[0] - 2
    maxf = ndimage.maximum_filter(dog, size=(3, 3, 3), mode="nearest")
    minf = ndimage.minimum_filter(dog, size=(3, 3, 3), mode="nearest")
    interior = dog[1:s_levels + 1]
    mask = (((interior == maxf[1:s_levels + 1]) | (interior == minf[1:s_levels + 1]))
            & (np.abs(interior) > prefilter))
    mask[:, :BORDER, :] = False
    mask[:, -BORDER:, :] = False
    mask[:, :, :BORDER] = False
    mask[:, :, -BORDER:] = False
    return mask


def _refine_candidate(dog: np.ndarray, level: int, row: int, col: int,
                      params: ScaleSpaceParams):
    """Iterative quadratic fit; returns (level, row, col, dx, dy, ds) or None."""
    n_levels, h, w = dog.shape
    s_max = n_levels - 2
    for attempt in range(MAX_REFINE_STEPS):
        v = dog[level - 1:level + 2, row - 1:row + 2, col - 1:col + 2]
        v = v.astype(np.float64).ravel().tolist()
        center = v[13]
        gx = 0.5 * (v[14] - v[12])
        gy = 0.5 * (v[16] - v[10])
        gs = 0.5 * (v[22] - v[4])
        dxx = v[14] - 2.0 * center + v[12]
        dyy = v[16] - 2.0 * center + v[10]
        dss = v[22] - 2.0 * center + v[4]
        dxy = 0.25 * (v[17] - v[15] - v[11] + v[9])
        dxs = 0.25 * (v[23] - v[21] - v[5] + v[3])
        dys = 0.25 * (v[25] - v[19] - v[7] + v[1])
        det = (dxx * (dyy * dss - dys * dys)
               - dxy * (dxy * dss - dys * dxs)
               + dxs * (dxy * dys - dyy * dxs))
        if abs(det) < 1e-30:
            return None
        # Cramer solve of  H * offset = -g
        ox = (-gx * (dyy * dss - dys * dys)
              - dxy * (-gy * dss - dys * -gs)
              + dxs * (-gy * dys - dyy * -gs)) / det
        oy = (dxx * (-gy * dss - dys * -gs)
              - -gx * (dxy * dss - dys * dxs)
              + dxs * (dxy * -gs - -gy * dxs)) / det
        os_ = (dxx * (dyy * -gs - -gy * dys)
               - dxy * (dxy * -gs - -gy * dxs)
               + -gx * (dxy * dys - dyy * dxs)) / det
        if abs(ox) < 0.5 and abs(oy) < 0.5 and abs(os_) < 0.5:
            break
        col += int(round(ox))
        row += int(round(oy))
        level += int(round(os_))
        if (level < 1 or level > s_max
                or row < BORDER or row >= h - BORDER
                or col < BORDER or col >= w - BORDER):
            return None
    else:
        return None  # never settled inside one cell

    refined = center + 0.5 * (gx * ox + gy * oy + gs * os_)
    if abs(refined) < params.contrast_threshold:
        return None
    trace = dxx + dyy
    det2 = dxx * dyy - dxy * dxy
    r = params.edge_ratio
    if det2 <= 0 or r * trace * trace >= (r + 1.0) ** 2 * det2:
        return None
    return level, row, col, ox, oy, os_


def _orientation_histogram(level_img: np.ndarray, x: float, y: float,
                           sigma_oct: float) -> np.ndarray | None:
    h, w = level_img.shape
    sig = ORI_SIGMA_FACTOR * sigma_oct
    radius = int(round(ORI_RADIUS_FACTOR * sig))
    cx, cy = int(round(x)), int(round(y))
    x0, x1 = max(cx - radius, 1), min(cx + radius, w - 2)
    y0, y1 = max(cy - radius, 1), min(cy + radius, h - 2)
    if x0 > x1 or y0 > y1:
        return None
    sub = level_img[y0 - 1:y1 + 2, x0 - 1:x1 + 2].astype(np.float64)
    dx = sub[1:-1, 2:] - sub[1:-1, :-2]
    dy = sub[2:, 1:-1] - sub[:-2, 1:-1]
    mag = np.hypot(dx, dy)
    ori = np.arctan2(dy, dx) % _TWO_PI
    xs = np.arange(x0, x1 + 1, dtype=np.float64) - x
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - y
    weight = np.exp(-(xs[np.newaxis, :] ** 2 + ys[:, np.newaxis] ** 2)
                    / (2.0 * sig * sig))
    bins = np.rint(ori * (ORI_BINS / _TWO_PI)).astype(np.int64) % ORI_BINS
    hist = np.zeros(ORI_BINS)
    np.add.at(hist, bins.ravel(), (mag * weight).ravel())
    if hist.max() <= 0.0:
        return None
    # single smoothing pass with the [1, 4, 6, 4, 1]/16 kernel, circular
    return (6.0 * hist
            + 4.0 * (np.roll(hist, 1) + np.roll(hist, -1))
            + np.roll(hist, 2) + np.roll(hist, -2)) / 16.0


def _orientation_peaks(hist: np.ndarray) -> list[float]:
    left = np.roll(hist, 1)
    right = np.roll(hist, -1)
    peak_idx = np.flatnonzero((hist > left) & (hist > right)
                              & (hist >= ORI_PEAK_RATIO * hist.max()))
    orientations = []
    for i in peak_idx:
        denom = left[i] - 2.0 * hist[i] + right[i]
        offset = 0.5 * (left[i] - right[i]) / denom
        theta = ((i + offset) * (_TWO_PI / ORI_BINS)) % _TWO_PI
        orientations.append(float(theta))
    return orientations


def _detect_records(pyr: _Pyramid) -> list[tuple[Keypoint, _Located]]:
    params = pyr.params
    s = params.scales_per_octave
    prefilter = 0.5 * params.contrast_threshold
    records = []
    for octave, dog in enumerate(pyr.dogs):
        scale = 2.0 ** (octave - 1)  # octave 0 is the doubled image
        mask = _candidate_mask(dog, prefilter)
        for li, row, col in np.argwhere(mask):
            refined = _refine_candidate(dog, int(li) + 1, int(row), int(col), params)
            if refined is None:
                continue
            level, r_i, c_i, ox, oy, os_ = refined
            sigma_oct = params.base_sigma * 2.0 ** ((level + os_) / s)
            x_oct, y_oct = c_i + ox, r_i + oy
            gauss_level = pyr.gaussians[octave][level]
            hist = _orientation_histogram(gauss_level, x_oct, y_oct, sigma_oct)
            if hist is None:
                continue
            x, y = x_oct * scale, y_oct * scale
            for theta in _orientation_peaks(hist):
                records.append((
                    Keypoint(x=x, y=y, sigma=sigma_oct * scale, orientation=theta),
                    _Located(octave=octave, level=level, x=x_oct, y=y_oct,
                             sigma=sigma_oct),
                ))
    records.sort(key=lambda rec: (rec[0].x, rec[0].y, rec[0].sigma,
                                  rec[0].orientation))
    deduped = []
    seen = set()
    for kp, loc in records:
        ident = (kp.x, kp.y, kp.sigma, kp.orientation)
        if ident in seen:
            continue
        seen.add(ident)
        deduped.append((kp, loc))
    return deduped


class _GradientCache:
    """Lazy per-(octave, level) gradient maps for the descriptor pass."""

    def __init__(self, pyr: _Pyramid):
        self.pyr = pyr
        self._maps: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def get(self, octave: int, level: int):
        key = (octave, level)
        if key not in self._maps:
            img = self.pyr.gaussians[octave][level].astype(np.float64)
            gx = np.zeros_like(img)
            gy = np.zeros_like(img)
            gx[:, 1:-1] = img[:, 2:] - img[:, :-2]
            gy[1:-1, :] = img[2:, :] - img[:-2, :]
            self._maps[key] = (np.hypot(gx, gy), np.arctan2(gy, gx) % _TWO_PI)
        return self._maps[key]


def _raw_descriptor(grads, shape, x: float, y: float, sigma_oct: float,
                    theta: float) -> np.ndarray | None:
    """Unnormalized 4x4x8 histogram around (x, y) in the keypoint frame."""
    h, w = shape
    mag, ori = grads
    d = DESC_GRID
    hist_width = DESC_BIN_SCALE * sigma_oct
    half = int(round(hist_width * math.sqrt(2) * (d + 1) * 0.5))
    half = min(half, int(math.ceil(math.hypot(h, w))))
    cx, cy = int(round(x)), int(round(y))
    x0, x1 = max(cx - half, 1), min(cx + half, w - 2)
    y0, y1 = max(cy - half, 1), min(cy + half, h - 2)
    if x0 > x1 or y0 > y1:
        return None

    xs = np.arange(x0, x1 + 1, dtype=np.float64) - x
    ys = np.arange(y0, y1 + 1, dtype=np.float64) - y
    dc, dr = np.meshgrid(xs, ys)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # rotate offsets by -theta into the keypoint frame, in bin units
    c_rot = (dc * cos_t + dr * sin_t) / hist_width
    r_rot = (-dc * sin_t + dr * cos_t) / hist_width
    rbin = r_rot + 0.5 * d - 0.5
    cbin = c_rot + 0.5 * d - 0.5
    inside = (rbin > -1.0) & (rbin < d) & (cbin > -1.0) & (cbin < d)
    if not inside.any():
        return None

    window_mag = mag[y0:y1 + 1, x0:x1 + 1][inside]
    window_ori = ori[y0:y1 + 1, x0:x1 + 1][inside]
    rbin = rbin[inside]
    cbin = cbin[inside]
    weight = np.exp(-(r_rot[inside] ** 2 + c_rot[inside] ** 2)
                    / (2.0 * (0.5 * d) ** 2))
    values = window_mag * weight
    obin = ((window_ori - theta) % _TWO_PI) * (DESC_ORI_BINS / _TWO_PI)

    r0 = np.floor(rbin).astype(np.int64)
    c0 = np.floor(cbin).astype(np.int64)
    o0 = np.floor(obin).astype(np.int64)
    rf = rbin - r0
    cf = cbin - c0
    of = obin - o0
    o0 %= DESC_ORI_BINS

    hist = np.zeros((d + 2, d + 2, DESC_ORI_BINS))
    for dr_bit, r_weight in ((0, 1.0 - rf), (1, rf)):
        for dc_bit, c_weight in ((0, 1.0 - cf), (1, cf)):
            for do_bit, o_weight in ((0, 1.0 - of), (1, of)):
                np.add.at(hist,
                          (r0 + 1 + dr_bit, c0 + 1 + dc_bit,
                           (o0 + do_bit) % DESC_ORI_BINS),
                          values * r_weight * c_weight * o_weight)
    return hist[1:-1, 1:-1, :].reshape(DESC_LEN)


def clamp_to_unit(raw: np.ndarray) -> np.ndarray | None:
    """Normalize then clamp entries at the 0.2 ceiling (pre-renormalization stage).

    Returns None for a zero histogram: a gradient-free window carries no
    direction information, so the keypoint is dropped.
    """
    norm = float(np.linalg.norm(raw))
    if norm < 1e-12:
        return None
    return np.minimum(raw / norm, DESC_CLAMP)


def finalize_descriptor(raw: np.ndarray) -> np.ndarray | None:
    clamped = clamp_to_unit(raw)
    if clamped is None:
        return None
    return clamped / np.linalg.norm(clamped)


def _describe(pyr: _Pyramid, records) -> tuple[list[Keypoint], np.ndarray]:
    cache = _GradientCache(pyr)
    kept: list[Keypoint] = []
    descriptors: list[np.ndarray] = []
    for kp, loc in records:
        grads = cache.get(loc.octave, loc.level)
        shape = pyr.gaussians[loc.octave][loc.level].shape
        raw = _raw_descriptor(grads, shape, loc.x, loc.y, loc.sigma,
                              kp.orientation)
        if raw is None:
            continue
        desc = finalize_descriptor(raw)
        if desc is None:
            continue
        kept.append(kp)
        descriptors.append(desc)
    if not descriptors:
        return [], np.zeros((0, DESC_LEN))
    return kept, np.vstack(descriptors)


def _locate(kp: Keypoint, pyr: _Pyramid) -> _Located:
    """Recover the pyramid address of an externally supplied keypoint."""
    params = pyr.params
    s = params.scales_per_octave
    t = math.log2(max(kp.sigma, 1e-6) / params.base_sigma)
    octave = min(max(int(math.floor(t)) + 1, 0), pyr.num_octaves - 1)
    level_f = (t - (octave - 1)) * s
    level = min(max(int(round(level_f)), 0), s + 2)
    scale = 2.0 ** (octave - 1)
    return _Located(octave=octave, level=level, x=kp.x / scale, y=kp.y / scale,
                    sigma=params.base_sigma * 2.0 ** (level_f / s))


def detect_keypoints(img: RasterImage,
                     params: ScaleSpaceParams | None = None) -> list[Keypoint]:
    """Scale-space keypoints of the image's grayscale plane."""
    params = params or ScaleSpaceParams()
    pyr = build_pyramid(img.gray, params)
    return [kp for kp, _ in _detect_records(pyr)]


def compute_descriptors(img: RasterImage, keypoints: list[Keypoint],
                        params: ScaleSpaceParams | None = None,
                        ) -> tuple[list[Keypoint], np.ndarray]:
    """Descriptors for given keypoints; gradient-free keypoints are dropped.

    Returns the surviving keypoints and their (n, 128) unit-norm descriptor
    rows, aligned.
    """
    params = params or ScaleSpaceParams()
    pyr = build_pyramid(img.gray, params)
    records = [(kp, _locate(kp, pyr)) for kp in keypoints]
    return _describe(pyr, records)


def extract_features(img: RasterImage,
                     params: ScaleSpaceParams | None = None,
                     ) -> tuple[list[Keypoint], np.ndarray]:
    """One-pass detection and description over a single shared pyramid."""
    params = params or ScaleSpaceParams()
    pyr = build_pyramid(img.gray, params)
    return _describe(pyr, _detect_records(pyr))
