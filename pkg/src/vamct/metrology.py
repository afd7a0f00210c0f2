"""Segmentation, extent measurement, profiles and image comparison.

Distances are between voxel (pixel) centres in grid units; reports add the
physical length using the grid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .core import DimensionMismatchError, ProjectionSet, Slice, VamctError, Volume
from .io import write_csv

__all__ = [
    "MeasurementError",
    "segment_threshold",
    "boundary",
    "max_extent_points",
    "max_extent_volume",
    "max_extent_projections",
    "ExtentResult",
    "MeasurementReport",
    "compare_extents",
    "density_profile",
    "write_profile",
    "Similarity",
    "sinogram_similarity",
    "registration_offset",
    "EIGHT_BIT_THRESHOLD",
]

# boundary level quoted for 8-bit-scaled reconstructions; pass your own
# threshold for any other density scale
EIGHT_BIT_THRESHOLD = 80.0


class MeasurementError(VamctError):
    pass


def _data(obj):
    if isinstance(obj, (Slice, Volume)):
        return obj.data
    return np.asarray(obj, dtype=np.float64)


def _box(ndim, radius):
    return np.ones((2 * radius + 1,) * ndim, dtype=bool)


def _erode(mask, radius):
    # outside the grid counts as foreground, so a full mask stays full
    return ndimage.binary_erosion(mask, _box(mask.ndim, radius), border_value=1)


def _dilate(mask, radius):
    return ndimage.binary_dilation(mask, _box(mask.ndim, radius), border_value=0)


def segment_threshold(data, tau, open_radius=0, close_radius=0):
    """Binary mask ``data >= tau`` followed by box opening then closing.

    A radius of 0 skips that morphological step.  Erosions treat the region
    outside the grid as foreground and dilations treat it as background.
    """
    arr = _data(data)
    if not np.isfinite(tau):
        raise MeasurementError("threshold must be finite")
    mask = arr >= tau
    if open_radius > 0:
        mask = _dilate(_erode(mask, open_radius), open_radius)
    if close_radius > 0:
        mask = _erode(_dilate(mask, close_radius), close_radius)
    return mask


def boundary(mask):
    """Mask elements with at least one face neighbour outside the mask (or grid)."""
    mask = np.asarray(mask, dtype=bool)
    inner = ndimage.binary_erosion(mask, ndimage.generate_binary_structure(mask.ndim, 1), border_value=0)
    return mask & ~inner


def _pairwise_max(points):
    """Exact diameter of a small integer point set, lexicographic tie-break."""
    pts = np.asarray(points, dtype=np.int64)
    # lexicographic order so the first maximal pair found is the smallest one
    pts = pts[np.lexsort(pts.T[::-1])]
    best = -1
    pair = (0, 0)
    n = len(pts)
    chunk = max(1, 4_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        block = pts[start:start + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
        # only pairs (i, j) with j > i
        idx_i = np.arange(start, start + len(block))[:, None]
        d2 = np.where(np.arange(n)[None, :] > idx_i, d2, -1)
        m = int(d2.max())
        if m > best:
            best = m
            flat = int(np.argmax(d2))
            i, j = divmod(flat, n)
            pair = (start + i, j)
    if n == 1:
        return 0, pts[0], pts[0]
    return best, pts[pair[0]], pts[pair[1]]


def max_extent_points(points):
    """Largest distance between any two points, with the achieving pair.

    The maximum is attained by extreme points of the convex hull, so the
    exact search runs over hull vertices only; degenerate (flat) sets fall
    back to the full pairwise search.  Returns ``(length, p1, p2)`` with
    ``p1 <= p2`` lexicographically.
    """
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim != 2 or len(pts) == 0:
        raise MeasurementError("no points to measure")
    cand = pts
    if len(pts) > pts.shape[1] + 1:
        try:
            hull = ConvexHull(pts.astype(np.float64))
            cand = pts[np.unique(hull.vertices)]
        except QhullError:
            cand = np.unique(pts, axis=0)
    d2, p1, p2 = _pairwise_max(cand)
    return float(np.sqrt(d2)), tuple(int(v) for v in p1), tuple(int(v) for v in p2)


@dataclass(frozen=True)
class ExtentResult:
    """A maximal distance and its endpoints.

    Volume endpoints are ``(x, y, z)`` voxel indices; projection endpoints
    are ``(u, v)`` detector pixels, with ``angle`` the achieving projection.
    """

    length: float
    p1: tuple
    p2: tuple
    angle: float | None = None
    spacing: float = 1.0

    @property
    def length_um(self):
        return self.length * self.spacing


def max_extent_volume(mask, spacing=1.0):
    """Maximum distance between boundary voxels of a 3D mask (``z, y, x`` array)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MeasurementError("empty mask")
    idx = np.argwhere(boundary(mask))[:, ::-1]  # (x, y, z)
    length, p1, p2 = max_extent_points(idx)
    return ExtentResult(length, p1, p2, None, spacing)


def max_extent_projections(pset, tau):
    """Frame whose thresholded silhouette has the largest boundary diameter.

    Ties keep the smallest angle.
    """
    best = None
    for i in range(pset.n_angles):
        mask = pset.images[i] >= tau
        if not mask.any():
            continue
        idx = np.argwhere(boundary(mask))[:, ::-1]  # (u, v)
        length, p1, p2 = max_extent_points(idx)
        if best is None or length > best.length:
            best = ExtentResult(length, p1, p2, float(pset.angles[i]), pset.spacing)
    if best is None:
        raise MeasurementError(f"no projection pixel reaches the threshold {tau}")
    return best


@dataclass(frozen=True)
class MeasurementReport:
    volume: ExtentResult
    projection: ExtentResult
    difference: float
    tolerance: float

    @property
    def passed(self):
        return self.difference <= self.tolerance

    def lines(self):
        v, p = self.volume, self.projection
        return [
            f"volume_length_px {v.length!r}",
            f"volume_length_um {v.length_um!r}",
            f"volume_p1_xyz {' '.join(map(str, v.p1))}",
            f"volume_p2_xyz {' '.join(map(str, v.p2))}",
            f"projection_length_px {p.length!r}",
            f"projection_length_um {p.length_um!r}",
            f"projection_angle_deg {p.angle!r}",
            f"projection_p1_uv {' '.join(map(str, p.p1))}",
            f"projection_p2_uv {' '.join(map(str, p.p2))}",
            f"difference_px {self.difference!r}",
            f"tolerance_px {self.tolerance!r}",
            f"result {'pass' if self.passed else 'fail'}",
        ]

    def text(self):
        return "\n".join(self.lines()) + "\n"


def compare_extents(vol_result, proj_result, tolerance=1.0):
    if vol_result is None or proj_result is None:
        raise MeasurementError("both measurements are required")
    diff = abs(float(vol_result.length) - float(proj_result.length))
    return MeasurementReport(vol_result, proj_result, diff, float(tolerance))


def density_profile(image, u):
    """Column ``u`` of a 2D image, top to bottom, as ``(rows, values)``."""
    img = _data(image)
    if img.ndim != 2:
        raise DimensionMismatchError("density profile needs a 2D image")
    if not 0 <= int(u) < img.shape[1] or int(u) != u:
        raise MeasurementError(f"column {u} outside 0..{img.shape[1] - 1}")
    return np.arange(img.shape[0]), img[:, int(u)].copy()


def write_profile(path, rows, values):
    write_csv(path, ["row", "value"], [[int(r), repr(float(v))] for r, v in zip(rows, values)])


@dataclass(frozen=True)
class Similarity:
    nrmse: float
    pearson: float | None  # None when either input has zero variance


def sinogram_similarity(a, b):
    """NRMSE (normalised by ``b``'s dynamic range) and Pearson correlation."""
    x = _data(a.data if hasattr(a, "angles") else a)
    y = _data(b.data if hasattr(b, "angles") else b)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shape mismatch {x.shape} vs {y.shape}")
    rng = float(np.ptp(y))
    rmse = float(np.sqrt(np.mean((x - y) ** 2)))
    nrmse = rmse / rng if rng > 0 else (0.0 if rmse == 0 else float("inf"))
    xc, yc = x - x.mean(), y - y.mean()
    den = np.sqrt((xc ** 2).sum() * (yc ** 2).sum())
    r = float((xc * yc).sum() / den) if den > 0 else None
    return Similarity(nrmse, r)


def _parabolic(cm, c0, cp):
    den = cm - 2.0 * c0 + cp
    return 0.0 if den == 0 else 0.5 * (cm - cp) / den


def registration_offset(a, b):
    """Translation taking ``a`` onto ``b``: ``b(x) ~ a(x - d)``.

    Integer peak of the circular cross-correlation, refined per axis with a
    three-point parabola.  Returns ``(dx, dy)`` for 2D input (``dx`` along
    columns); for other dimensionalities the offsets come back in reversed
    axis order as well (fastest axis first).
    """
    x = _data(a)
    y = _data(b)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shape mismatch {x.shape} vs {y.shape}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise MeasurementError("cannot register a flat image")
    xc = x - x.mean()
    yc = y - y.mean()
    axes = tuple(range(x.ndim))
    corr = np.fft.irfftn(np.conj(np.fft.rfftn(xc)) * np.fft.rfftn(yc), s=x.shape, axes=axes)
    peak = np.unravel_index(int(np.argmax(corr)), corr.shape)
    offsets = []
    for ax, p in enumerate(peak):
        n = corr.shape[ax]
        idx = list(peak)
        idx[ax] = (p - 1) % n
        cm = corr[tuple(idx)]
        idx[ax] = (p + 1) % n
        cp = corr[tuple(idx)]
        frac = _parabolic(cm, corr[peak], cp)
        d = p + frac
        if d > n / 2:
            d -= n
        offsets.append(float(d))
    return tuple(offsets[::-1])
