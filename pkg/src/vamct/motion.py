"""Per-projection rigid translation errors (simulated sample movement).

A world translation ``(tx, ty, tz)`` (pixels; ``tx`` left-right, ``ty``
front-back along the beam at 0 deg, ``tz`` up-down) shows up on the detector
at angle ``theta`` as

    du = tx cos(theta) + ty sin(theta),    dv = tz

so the part of the motion along the current beam direction is invisible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError, ProjectionSet, VamctError, shift_subpixel
from .io import read_csv, write_csv

__all__ = [
    "MotionSchedule",
    "induced_detector_shift",
    "sample_schedule",
    "apply_motion",
    "write_schedule",
    "read_schedule",
]

MODES = ("world", "detector")


@dataclass(frozen=True)
class MotionSchedule:
    """Per-angle translations.

    ``offsets`` has shape ``(n, 3)`` holding ``(tx, ty, tz)`` in world mode
    or shape ``(n, 2)`` holding ``(du, dv)`` in detector mode.
    """

    angles: np.ndarray
    offsets: np.ndarray
    mode: str = "world"

    def __post_init__(self):
        if self.mode not in MODES:
            raise VamctError(f"unknown motion mode {self.mode!r}")
        angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        offsets = np.asarray(self.offsets, dtype=np.float64)
        width = 3 if self.mode == "world" else 2
        if offsets.shape != (angles.size, width):
            raise DimensionMismatchError(
                f"{self.mode} schedule needs shape ({angles.size}, {width}), got {offsets.shape}"
            )
        if not np.all(np.isfinite(offsets)):
            raise VamctError("schedule contains non-finite offsets")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "offsets", offsets)

    def __len__(self):
        return self.angles.size

    def detector_shifts(self):
        """``(n, 2)`` array of ``(du, dv)`` per projection."""
        if self.mode == "detector":
            return self.offsets.copy()
        return np.array([induced_detector_shift(t, a) for t, a in zip(self.offsets, self.angles)])

    def negated(self):
        return MotionSchedule(self.angles, -self.offsets, self.mode)


def induced_detector_shift(t, theta):
    """Detector displacement ``(du, dv)`` caused by world translation ``t`` at ``theta`` degrees."""
    tx, ty, tz = (float(v) for v in t)
    rad = np.deg2rad(theta)
    return tx * np.cos(rad) + ty * np.sin(rad), tz


def sample_schedule(seed, angles, ranges, mode="world"):
    """Draw i.i.d. uniform offsets per angle and axis.

    Parameters
    ----------
    seed : int
    angles : array_like or int
        Projection angles (degrees); one entry is drawn per angle.  An
        integer ``n`` means ``n`` evenly spaced angles over 180 degrees.
    ranges : sequence of (lo, hi)
        Three pairs for world mode, two for detector mode, in pixels.
    """
    if np.ndim(angles) == 0:
        angles = np.arange(int(angles)) * (180.0 / int(angles))
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    width = 3 if mode == "world" else 2
    ranges = np.asarray(ranges, dtype=np.float64)
    if ranges.shape != (width, 2):
        raise VamctError(f"{mode} mode needs {width} (lo, hi) ranges")
    if np.any(ranges[:, 0] > ranges[:, 1]):
        raise VamctError("each range needs lo <= hi")
    rng = np.random.default_rng(seed)
    u = rng.random((angles.size, width))
    offsets = ranges[:, 0] + u * (ranges[:, 1] - ranges[:, 0])
    return MotionSchedule(angles, offsets, mode)


def apply_motion(pset, schedule):
    """Shift every projection by its scheduled detector displacement."""
    if len(schedule) != pset.n_angles:
        raise DimensionMismatchError(
            f"schedule has {len(schedule)} entries for {pset.n_angles} projections"
        )
    shifts = schedule.detector_shifts()
    images = np.empty_like(pset.images)
    for i, (du, dv) in enumerate(shifts):
        images[i] = shift_subpixel(pset.images[i], du, dv)
    return ProjectionSet(pset.angles, images, pset.spacing)


def write_schedule(path, schedule):
    cols = ["tx", "ty", "tz"] if schedule.mode == "world" else ["du", "dv"]
    rows = [
        [i, repr(float(a)), *(repr(float(v)) for v in off)]
        for i, (a, off) in enumerate(zip(schedule.angles, schedule.offsets))
    ]
    write_csv(path, ["index", "angle_deg", *cols], rows, comment=f"mode={schedule.mode}")


def read_schedule(path):
    comments, header, rows = read_csv(path)
    mode = None
    for c in comments:
        if c.startswith("mode="):
            mode = c.split("=", 1)[1].strip()
    if mode is None:
        mode = "world" if "tx" in header else "detector"
    cols = ["tx", "ty", "tz"] if mode == "world" else ["du", "dv"]
    idx = [header.index(c) for c in cols]
    ai = header.index("angle_deg")
    angles = [float(r[ai]) for r in rows]
    offsets = [[float(r[j]) for j in idx] for r in rows]
    return MotionSchedule(np.array(angles), np.array(offsets).reshape(len(rows), len(cols)), mode)
