"""Ray-driven parallel-beam forward projection and transmission-frame handling.

Every detector sample is the sum of bilinear reads of the slice at unit steps
along its ray.  The kernels work on a stack of slices at once (the axial
index is innermost), so a full volume costs one pass over the ray geometry.
Each output element is written by exactly one loop iteration with a fixed
summation order, so results are bitwise independent of the thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
from numba import njit, prange  # noqa: E402

from .core import (  # noqa: E402
    DimensionMismatchError,
    ProjectionSet,
    RawFrameSet,
    Sinogram,
    Slice,
    VamctError,
    Volume,
    detector_center,
    validate_angles,
)

__all__ = [
    "forward_project_slice",
    "forward_project_volume",
    "simulate_raw",
    "flat_field_correct",
    "to_attenuation",
    "CorrectionResult",
]


@njit(parallel=True, cache=True)
def _project_stack(stack, cos_t, sin_t, nu, out):
    # stack: (ny, nx, nk) with the axial index innermost; out: (n_angles, nu, nk)
    ny, nx, nk = stack.shape
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    cu = (nu - 1) / 2.0
    half = math.sqrt(cx * cx + cy * cy) + 2.0
    kmax = int(math.ceil(half))
    n_angles = cos_t.shape[0]
    for job in prange(n_angles * nu):
        ia = job // nu
        iu = job - ia * nu
        c = cos_t[ia]
        sn = sin_t[ia]
        s = iu - cu
        acc = out[ia, iu]
        for kt in range(-kmax, kmax + 1):
            t = float(kt)
            x = s * c - t * sn + cx
            y = s * sn + t * c + cy
            if x <= -1.0 or y <= -1.0 or x >= nx or y >= ny:
                continue
            x0 = int(math.floor(x))
            y0 = int(math.floor(y))
            fx = x - x0
            fy = y - y0
            if y0 >= 0:
                if x0 >= 0:
                    w = (1.0 - fx) * (1.0 - fy)
                    if w != 0.0:
                        for k in range(nk):
                            acc[k] += w * stack[y0, x0, k]
                if x0 + 1 < nx:
                    w = fx * (1.0 - fy)
                    if w != 0.0:
                        for k in range(nk):
                            acc[k] += w * stack[y0, x0 + 1, k]
            if y0 + 1 < ny:
                if x0 >= 0:
                    w = (1.0 - fx) * fy
                    if w != 0.0:
                        for k in range(nk):
                            acc[k] += w * stack[y0 + 1, x0, k]
                if x0 + 1 < nx:
                    w = fx * fy
                    if w != 0.0:
                        for k in range(nk):
                            acc[k] += w * stack[y0 + 1, x0 + 1, k]


def _project(stack_zyx, angles):
    """Project a ``(nk, n, n)`` stack; returns ``(n_angles, nk, nu)``."""
    nk, ny, nx = stack_zyx.shape
    if nx != ny:
        raise DimensionMismatchError(f"projector needs square slices, got {ny}x{nx}")
    angles = validate_angles(angles)
    t = np.deg2rad(angles)
    stack = np.ascontiguousarray(np.transpose(stack_zyx, (1, 2, 0)), dtype=np.float64)
    out = np.zeros((angles.size, nx, nk))
    _project_stack(stack, np.cos(t), np.sin(t), nx, out)
    return np.ascontiguousarray(np.transpose(out, (0, 2, 1)))


def forward_project_slice(slc, angles):
    """Sinogram of one slice, ``nu = nx`` detector columns.

    Parameters
    ----------
    slc : Slice or ndarray
        Square slice.
    angles : array_like
        Degrees in ``[0, 180)``, strictly increasing, at least two.
    """
    data = slc.data if isinstance(slc, Slice) else np.asarray(slc, dtype=np.float64)
    angles = validate_angles(angles, min_count=2)
    return Sinogram(angles, _project(data[None], angles)[:, 0, :])


def forward_project_volume(volume, angles):
    """Projection set of a volume: detector row ``v`` images axial level ``z = v``."""
    data = volume.data if isinstance(volume, Volume) else np.asarray(volume, dtype=np.float64)
    spacing = volume.spacing if isinstance(volume, Volume) else 1.0
    angles = validate_angles(angles)
    if data.ndim != 3:
        raise DimensionMismatchError("volume data must be 3D")
    return ProjectionSet(angles, _project(data, angles), spacing)


def simulate_raw(proj, flat_profile, dark_level, noise_seed=None, attenuation=True, n_flats=5, n_darks=5):
    """Turn projections into detector counts with matching flat and dark frames.

    ``frame = dark + (flat - dark) * exp(-p)`` in attenuation mode, or
    ``dark + (flat - dark) * n`` for already-normalised transmission ``n``.
    With a seed, every frame (flats and darks included) gets Poisson noise.
    """
    flat = np.broadcast_to(np.asarray(flat_profile, dtype=np.float64), proj.images.shape[1:])
    dark = np.broadcast_to(np.asarray(dark_level, dtype=np.float64), proj.images.shape[1:])
    if np.any(flat - dark <= 0):
        raise VamctError("flat profile must exceed the dark level everywhere (non-positive gain)")
    if np.any(dark < 0):
        raise VamctError("dark level must be non-negative")
    trans = np.exp(-proj.images) if attenuation else proj.images
    frames = dark + (flat - dark) * trans
    flats = np.repeat(flat[None], n_flats, axis=0)
    darks = np.repeat(dark[None], n_darks, axis=0)
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        frames = rng.poisson(np.clip(frames, 0, None)).astype(np.float64)
        flats = rng.poisson(flats).astype(np.float64)
        darks = rng.poisson(darks).astype(np.float64)
    return RawFrameSet(ProjectionSet(proj.angles, frames, proj.spacing), flats, darks)


@dataclass(frozen=True)
class CorrectionResult:
    projections: ProjectionSet
    clamped: int


def flat_field_correct(raw, eps_rel=1e-6):
    """Normalise raw frames: ``(frame - mean(darks)) / (mean(flats) - mean(darks))``.

    Denominator pixels below ``eps_rel * median(mean flat)`` are clamped to
    that floor; the number of clamped pixels is returned alongside.
    """
    flat = raw.flats.mean(axis=0)
    dark = raw.darks.mean(axis=0)
    denom = flat - dark
    if not np.any(denom > 0):
        raise VamctError("flats and darks are identical: zero gain everywhere")
    eps = eps_rel * float(np.median(flat))
    if eps <= 0:
        eps = eps_rel
    low = denom < eps
    denom = np.where(low, eps, denom)
    n = (raw.projections.images - dark) / denom
    pset = raw.projections.with_images(n)
    return CorrectionResult(pset, int(low.sum()))


def to_attenuation(normalized, eps=1e-6):
    """``-ln`` of normalised transmission, clamping values below ``eps``."""
    images = normalized.images
    low = images < eps
    out = -np.log(np.where(low, eps, images))
    return CorrectionResult(normalized.with_images(out), int(low.sum()))
