"""Shared geometric types, grid conventions and resampling primitives.

Array layout
------------
All image-like data are stored as C-ordered numpy arrays with the x (detector
column) axis fastest:

* ``Slice.data``            shape ``(ny, nx)``
* ``Volume.data``           shape ``(nz, ny, nx)``, ``z`` is the axial level
* ``Sinogram.data``         shape ``(n_angles, nu)``
* ``ProjectionSet.images``  shape ``(n_angles, nv, nu)``, row ``v`` is the
  axial level seen by the detector

Geometry
--------
The rotation axis projects onto detector column ``c0 = (nu - 1) / 2``.  A point
at slice coordinates ``(x, y)`` (pixels, measured from the axis, ``x`` along
columns and ``y`` along rows) projects at angle ``theta`` onto

    s = x cos(theta) + y sin(theta),    u = c0 + s

Angles are kept in degrees everywhere outside the numerical kernels.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VamctError",
    "DimensionMismatchError",
    "GeometryError",
    "Volume",
    "Slice",
    "Sinogram",
    "ProjectionSet",
    "RawFrameSet",
    "GridGeometry",
    "detector_center",
    "validate_angles",
    "make_angles",
    "rebin",
    "shift_subpixel",
    "set_threads",
]


class VamctError(ValueError):
    """Base class for all errors raised by the toolkit."""


class DimensionMismatchError(VamctError):
    pass


class GeometryError(VamctError):
    pass


def detector_center(n):
    """Column (or row) index of the rotation axis on an ``n``-wide grid."""
    return (n - 1) / 2.0


def validate_angles(angles, min_count=1):
    """Return ``angles`` as float64 after checking the acquisition convention.

    Angles must lie in ``[0, 180)`` degrees and be strictly increasing.
    """
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if angles.size < min_count:
        raise GeometryError(f"need at least {min_count} angle(s), got {angles.size}")
    if not np.all(np.isfinite(angles)):
        raise GeometryError("angles must be finite")
    if angles.size and (angles.min() < 0.0 or angles.max() >= 180.0):
        raise GeometryError("angles must lie in [0, 180) degrees")
    if np.any(np.diff(angles) <= 0):
        raise GeometryError("angles must be strictly increasing")
    return angles


def make_angles(count=360, step=0.5, start=0.0):
    """Evenly spaced acquisition angles in degrees (default: 0.5 deg over 180 deg)."""
    return validate_angles(start + step * np.arange(count, dtype=np.float64))


def _finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise VamctError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class GridGeometry:
    """Parallel-beam acquisition geometry for an ``nu``-column detector."""

    nu: int
    angles: np.ndarray

    def __post_init__(self):
        if self.nu < 1:
            raise GeometryError("nu must be positive")
        object.__setattr__(self, "angles", validate_angles(self.angles))

    @property
    def c0(self):
        return detector_center(self.nu)

    def column(self, x, y):
        """Detector column of slice point ``(x, y)`` for every angle."""
        t = np.deg2rad(self.angles)
        return self.c0 + x * np.cos(t) + y * np.sin(t)


@dataclass(frozen=True)
class Slice:
    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or 0 in data.shape:
            raise DimensionMismatchError(f"slice data must be a non-empty 2D array, got shape {data.shape}")
        _finite("slice", data)
        if not self.spacing > 0:
            raise VamctError("spacing must be positive")
        object.__setattr__(self, "data", data)

    @property
    def nx(self):
        return self.data.shape[1]

    @property
    def ny(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class Volume:
    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or 0 in data.shape:
            raise DimensionMismatchError(f"volume data must be a non-empty 3D array, got shape {data.shape}")
        _finite("volume", data)
        if not self.spacing > 0:
            raise VamctError("spacing must be positive")
        object.__setattr__(self, "data", data)

    @property
    def nx(self):
        return self.data.shape[2]

    @property
    def ny(self):
        return self.data.shape[1]

    @property
    def nz(self):
        return self.data.shape[0]

    def axial_slice(self, z):
        return Slice(self.data[z], self.spacing)


@dataclass(frozen=True)
class Sinogram:
    """Line integrals ``p(theta_i, s)`` of one axial level, angle-major."""

    angles: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        angles = validate_angles(self.angles, min_count=2)
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != angles.size or data.shape[1] < 1:
            raise DimensionMismatchError(
                f"sinogram data shape {data.shape} does not match {angles.size} angles"
            )
        _finite("sinogram", data)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "data", data)

    @property
    def nu(self):
        return self.data.shape[1]

    @property
    def n_angles(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class ProjectionSet:
    angles: np.ndarray
    images: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        angles = validate_angles(self.angles)
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim != 3 or images.shape[0] != angles.size or 0 in images.shape:
            raise DimensionMismatchError(
                f"projection stack shape {images.shape} does not match {angles.size} angles"
            )
        _finite("projection set", images)
        if not self.spacing > 0:
            raise VamctError("spacing must be positive")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "images", images)

    @property
    def n_angles(self):
        return self.images.shape[0]

    @property
    def nv(self):
        return self.images.shape[1]

    @property
    def nu(self):
        return self.images.shape[2]

    def sinogram(self, row):
        """The sinogram of detector row ``row`` (one axial level)."""
        return Sinogram(self.angles, self.images[:, row, :])

    def with_images(self, images):
        return ProjectionSet(self.angles, images, self.spacing)


@dataclass(frozen=True)
class RawFrameSet:
    """Detector counts before normalisation: sample frames plus flats and darks."""

    projections: ProjectionSet
    flats: np.ndarray
    darks: np.ndarray
    # number of pixels clamped while producing or correcting these frames
    clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        flats = np.asarray(self.flats, dtype=np.float64)
        darks = np.asarray(self.darks, dtype=np.float64)
        if flats.ndim == 2:
            flats = flats[None]
        if darks.ndim == 2:
            darks = darks[None]
        shape = self.projections.images.shape[1:]
        if flats.ndim != 3 or darks.ndim != 3 or flats.shape[1:] != shape or darks.shape[1:] != shape:
            raise DimensionMismatchError("flats and darks must match the projection frame shape")
        if flats.shape[0] < 1 or darks.shape[0] < 1:
            raise VamctError("at least one flat and one dark frame are required")
        for name, arr in (("flats", flats), ("darks", darks), ("projections", self.projections.images)):
            if np.any(arr < 0):
                raise VamctError(f"{name} contain negative counts")
        object.__setattr__(self, "flats", flats)
        object.__setattr__(self, "darks", darks)


def rebin(image, factor):
    """Block-average by an integer ``factor`` along the last two axes.

    Accepts a bare array (2D image or a stack of images), a :class:`Slice` or
    a :class:`ProjectionSet`; typed inputs come back with ``spacing`` scaled
    by ``factor``.
    """
    if isinstance(image, Slice):
        return Slice(rebin(image.data, factor), image.spacing * factor)
    if isinstance(image, ProjectionSet):
        return ProjectionSet(image.angles, rebin(image.images, factor), image.spacing * factor)

    factor = int(factor)
    if factor < 1:
        raise VamctError("rebin factor must be a positive integer")
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim < 2:
        raise DimensionMismatchError("rebin needs at least a 2D array")
    rows, cols = arr.shape[-2:]
    if rows % factor or cols % factor:
        raise DimensionMismatchError(
            f"rebin factor {factor} does not divide image shape ({rows}, {cols})"
        )
    lead = arr.shape[:-2]
    blocks = arr.reshape(*lead, rows // factor, factor, cols // factor, factor)
    return blocks.mean(axis=(-3, -1))


def _shift_axis(arr, d, axis):
    """Linear-interpolation shift along one axis with zero fill.

    out[i] = (1 - f) * arr[i - k] + f * arr[i - k - 1], with d = k + f.
    """
    k = math.floor(d)
    f = d - k
    n = arr.shape[axis]
    out = np.zeros_like(arr)

    def _add(src_offset, weight):
        # out[i] += weight * arr[i - src_offset]
        if weight == 0.0 or abs(src_offset) >= n:
            return
        dst = [slice(None)] * arr.ndim
        src = [slice(None)] * arr.ndim
        if src_offset >= 0:
            dst[axis] = slice(src_offset, n)
            src[axis] = slice(0, n - src_offset)
        else:
            dst[axis] = slice(0, n + src_offset)
            src[axis] = slice(-src_offset, n)
        out[tuple(dst)] += weight * arr[tuple(src)]

    _add(k, 1.0 - f)
    _add(k + 1, f)
    return out


def shift_subpixel(image, du, dv):
    """Translate an image by ``(du, dv)`` pixels with bilinear interpolation.

    ``out(u, v) = in(u - du, v - dv)``; samples falling outside the input are
    zero.  Works on the last two axes, so a stack of images is shifted as a
    whole.
    """
    if not (math.isfinite(du) and math.isfinite(dv)):
        raise VamctError("shift must be finite")
    arr = np.asarray(image, dtype=np.float64)
    if du == 0 and dv == 0:
        return arr.copy()
    out = arr
    if du != 0:
        out = _shift_axis(out, float(du), arr.ndim - 1)
    if dv != 0:
        out = _shift_axis(out, float(dv), arr.ndim - 2)
    return out


def set_threads(n=None):
    """Set the number of worker threads used by the compiled kernels.

    ``n=0`` or ``None`` falls back to ``$VAMCT_THREADS`` and then to all
    available cores.  Results do not depend on the thread count.
    """
    import numba

    if not n:
        n = int(os.environ.get("VAMCT_THREADS", "0") or 0)
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n <= 0 else min(int(n), limit)
    numba.set_num_threads(n)
    return n
