"""Fixed-point detection and tracking across a projection set.

Three detectors are available:

``apex``
    the highest point of the sample: the first row (smallest index) holding a
    pixel above the background threshold; ``u`` is the intensity-weighted
    centroid of that row's supra-threshold pixels.
``centroid``
    the intensity-weighted centroid of the whole frame (centre of
    attenuation).  For a rigid object this is the projection of its centre of
    mass, so the ``u`` track is an exact sinusoid and ``v`` is constant.
``marker``
    a dense bead: global maximum after 3x3 mean smoothing, refined by the
    centroid of a ``window x window`` neighbourhood after subtracting a plane
    fitted to the neighbourhood's border pixels (local background, which is
    sloped wherever the bead sits on top of the sample).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import VamctError
from .io import read_csv, write_csv

__all__ = [
    "TrackRejectedError",
    "FixedPointTrack",
    "detect_fixed_point",
    "track_fixed_points",
    "write_track",
    "read_track",
    "METHODS",
]

METHODS = ("apex", "centroid", "marker")


class TrackRejectedError(VamctError):
    pass


@dataclass(frozen=True)
class FixedPointTrack:
    angles: np.ndarray
    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray
    method: str = "centroid"

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        u = np.asarray(self.u, dtype=np.float64).reshape(-1)
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        valid = np.asarray(self.valid, dtype=bool).reshape(-1)
        if not (angles.size == u.size == v.size == valid.size):
            raise VamctError("track fields must have one entry per angle")
        if not np.all(np.isfinite(u[valid]) & np.isfinite(v[valid])):
            raise VamctError("valid track entries must be finite")
        for name, arr in (("angles", angles), ("u", u), ("v", v), ("valid", valid)):
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.angles.size

    @property
    def n_valid(self):
        return int(self.valid.sum())


def _centroid(weights, axis_values):
    total = weights.sum()
    return float((weights * axis_values).sum() / total)


def detect_fixed_point(image, method="centroid", tau_bg=None, window=9):
    """Locate the fixed point in one projection image.

    Parameters
    ----------
    image : ndarray, shape (nv, nu)
    method : {'apex', 'centroid', 'marker'}
    tau_bg : float, optional
        Background threshold; defaults to 5% of the frame maximum.
    window : int
        Side of the marker refinement window.

    Returns
    -------
    (u, v) : tuple of float
        ``(nan, nan)`` when nothing rises above the background.
    """
    if method not in METHODS:
        raise VamctError(f"unknown tracking method {method!r}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise VamctError("detect_fixed_point needs a non-empty 2D image")
    if tau_bg is None:
        tau_bg = 0.05 * img.max()
    above = img > tau_bg
    if not above.any():
        return float("nan"), float("nan")

    if method == "apex":
        row = int(np.argmax(above.any(axis=1)))
        cols = np.nonzero(above[row])[0]
        return _centroid(img[row, cols], cols.astype(np.float64)), float(row)

    if method == "centroid":
        total = img.sum()
        if total <= 0:
            return float("nan"), float("nan")
        v_idx, u_idx = np.indices(img.shape)
        return float((img * u_idx).sum() / total), float((img * v_idx).sum() / total)

    smooth = ndimage.uniform_filter(img, size=3, mode="constant")
    r, c = np.unravel_index(int(np.argmax(smooth)), img.shape)
    h = int(window) // 2
    r0, r1 = max(0, r - h), min(img.shape[0], r + h + 1)
    c0, c1 = max(0, c - h), min(img.shape[1], c + h + 1)
    patch = img[r0:r1, c0:c1]
    vv, uu = np.indices(patch.shape)
    if min(patch.shape) >= 3:
        border = np.ones(patch.shape, dtype=bool)
        border[1:-1, 1:-1] = False
        design = np.column_stack([np.ones(border.sum()), uu[border], vv[border]])
        coef = np.linalg.lstsq(design, patch[border], rcond=None)[0]
        w = np.clip(patch - (coef[0] + coef[1] * uu + coef[2] * vv), 0.0, None)
    else:
        w = patch - patch.min()
    if w.sum() <= 0:
        return float(c), float(r)
    return c0 + _centroid(w, uu), r0 + _centroid(w, vv)


def track_fixed_points(pset, method="centroid", tau_bg=None, window=9, min_valid=0.5):
    """Run :func:`detect_fixed_point` on every frame.

    Frames where detection fails are flagged invalid.  If fewer than
    ``min_valid`` of the frames are valid the whole track is rejected.
    """
    n = pset.n_angles
    u = np.full(n, np.nan)
    v = np.full(n, np.nan)
    for i in range(n):
        u[i], v[i] = detect_fixed_point(pset.images[i], method, tau_bg, window)
    valid = np.isfinite(u) & np.isfinite(v)
    if valid.sum() < min_valid * n:
        raise TrackRejectedError(
            f"only {int(valid.sum())} of {n} frames have a detectable fixed point "
            f"({n - int(valid.sum())} invalid)"
        )
    return FixedPointTrack(pset.angles, u, v, valid, method)


def write_track(path, track):
    rows = [
        [i, repr(float(a)), repr(float(u)), repr(float(v)), int(ok)]
        for i, (a, u, v, ok) in enumerate(zip(track.angles, track.u, track.v, track.valid))
    ]
    write_csv(path, ["index", "angle_deg", "u", "v", "valid"], rows, comment=f"method={track.method}")


def read_track(path):
    comments, header, rows = read_csv(path)
    method = "centroid"
    for c in comments:
        if c.startswith("method="):
            method = c.split("=", 1)[1].strip()
    col = {name: header.index(name) for name in ("angle_deg", "u", "v", "valid")}
    get = lambda name, conv: np.array([conv(r[col[name]]) for r in rows])  # noqa: E731
    return FixedPointTrack(
        get("angle_deg", float), get("u", float), get("v", float),
        get("valid", lambda s: bool(int(s))), method,
    )
