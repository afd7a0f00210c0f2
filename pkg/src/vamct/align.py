"""Fixed-point virtual alignment of a projection set.

The procedure has three stages:

1. vertical alignment -- every frame is shifted so the fixed point sits on a
   common detector row, which turns each detector row into one axial level
   (the common layer set);
2. trajectory fit -- the fixed point's column track is fitted with
   ``u(theta) = c + A cos(theta + phi)``;
3. horizontal alignment -- frames are shifted so the fixed point lands on
   the fitted sinusoid (``ideal`` mode) or on the detector centre column
   (``virtual_cor`` mode, amplitude zero: the fixed point becomes the
   rotation axis).

Any per-angle horizontal error of the form ``a cos + b sin + c`` is
indistinguishable from a rigid displacement of the sample and is absorbed by
the fit; alignment quality is therefore judged on reconstructions after a
global translation, never on recovering the injected shifts themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProjectionSet, VamctError, detector_center, shift_subpixel
from .io import write_csv
from .tracker import FixedPointTrack, track_fixed_points

__all__ = [
    "AlignmentError",
    "TrajectoryModel",
    "AlignmentReport",
    "vertical_align",
    "fit_trajectory",
    "horizontal_align",
    "vam_align",
    "write_report",
]

MODES = ("ideal", "virtual_cor")


class AlignmentError(VamctError):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _normalize_phase(deg):
    p = (deg + 180.0) % 360.0 - 180.0
    return 180.0 if p == -180.0 else p


@dataclass(frozen=True)
class TrajectoryModel:
    """``u(theta) = center + amplitude * cos(theta + phase)``, degrees."""

    amplitude: float
    phase: float
    center: float
    rms: float = 0.0
    max_abs: float = 0.0

    @classmethod
    def from_coefficients(cls, a, b, c, rms=0.0, max_abs=0.0):
        """Build from ``u = c + a cos(theta) + b sin(theta)``."""
        amp = float(np.hypot(a, b))
        phase = _normalize_phase(float(np.degrees(np.arctan2(-b, a)))) if amp > 0 else 0.0
        return cls(amp, phase, float(c), float(rms), float(max_abs))

    @property
    def coefficients(self):
        """``(a, b, c)`` with ``a = A cos(phi)``, ``b = -A sin(phi)``."""
        p = np.radians(self.phase)
        return float(self.amplitude * np.cos(p)), float(-self.amplitude * np.sin(p)), self.center

    def __call__(self, theta):
        return self.center + self.amplitude * np.cos(np.radians(np.asarray(theta, dtype=np.float64) + self.phase))

    def label(self):
        return f"T_{{{self.amplitude:.4g},{self.phase:.4g}deg}}"


@dataclass(frozen=True)
class AlignmentReport:
    angles: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    valid: np.ndarray
    target_row: float
    model: TrajectoryModel
    mode: str
    method: str
    axis_column: float = 0.0

    @property
    def shift_rms(self):
        return float(np.sqrt(np.mean(self.du ** 2 + self.dv ** 2)))

    def summary(self):
        a, b, c = self.model.coefficients
        lines = [
            f"mode {self.mode}",
            f"method {self.method}",
            f"target_row {self.target_row!r}",
            f"trajectory {self.model.label()}",
            f"amplitude_px {self.model.amplitude!r}",
            f"phase_deg {self.model.phase!r}",
            f"fitted_center_px {self.model.center!r}",
            f"axis_column_px {self.axis_column!r}",
            f"fixed_point_xy {a!r} {b!r}",
            f"fit_rms_px {self.model.rms!r}",
            f"fit_max_abs_px {self.model.max_abs!r}",
            f"valid_frames {int(self.valid.sum())} of {self.valid.size}",
            f"shift_rms_px {self.shift_rms!r}",
            f"du_max_abs_px {float(np.abs(self.du).max())!r}",
            f"dv_max_abs_px {float(np.abs(self.dv).max())!r}",
        ]
        return "\n".join(lines) + "\n"


def _fill_invalid(values, angles, valid):
    """Linear interpolation in angle from valid neighbours (held flat at the ends)."""
    out = np.asarray(values, dtype=np.float64).copy()
    if valid.all():
        return out
    out[~valid] = np.interp(angles[~valid], angles[valid], out[valid])
    return out


def _shift_frames(pset, du, dv):
    images = np.empty_like(pset.images)
    for i in range(pset.n_angles):
        images[i] = shift_subpixel(pset.images[i], du[i], dv[i])
    return ProjectionSet(pset.angles, images, pset.spacing)


def vertical_align(pset, track, target_row=None):
    """Move every frame vertically so the fixed point sits on ``target_row``.

    Returns
    -------
    aligned : ProjectionSet
    track : FixedPointTrack
        The input track with ``v`` replaced by ``target_row`` on valid frames.
    dv : ndarray
        Applied vertical shift per frame (invalid frames interpolated).
    """
    valid = track.valid
    if valid.sum() == 0:
        raise AlignmentError("vertical", "track has no valid frames")
    if target_row is None:
        target_row = float(np.median(track.v[valid]))
    dv = np.where(valid, target_row - np.where(valid, track.v, 0.0), 0.0)
    dv = _fill_invalid(dv, track.angles, valid)
    aligned = _shift_frames(pset, np.zeros_like(dv), dv)
    v_new = np.where(valid, float(target_row), np.nan)
    new_track = FixedPointTrack(track.angles, track.u, v_new, valid, track.method)
    return aligned, new_track, dv


def fit_trajectory(track, angles=None):
    """Least-squares sinusoid through the valid ``u`` entries of a track."""
    angles = track.angles if angles is None else np.asarray(angles, dtype=np.float64)
    valid = track.valid
    th = np.radians(angles[valid])
    u = track.u[valid]
    if u.size < 3:
        raise AlignmentError("fit", f"need at least 3 valid entries, got {u.size}")
    span = float(np.ptp(angles[valid]))
    if span < 90.0:
        raise AlignmentError("fit", f"valid entries span only {span:.2f} deg (need >= 90)")
    design = np.column_stack([np.ones_like(th), np.cos(th), np.sin(th)])
    coef, _, rank, _ = np.linalg.lstsq(design, u, rcond=None)
    if rank < 3:
        raise AlignmentError("fit", "rank-deficient trajectory system")
    c, a, b = coef
    resid = u - design @ coef
    return TrajectoryModel.from_coefficients(
        a, b, c, float(np.sqrt(np.mean(resid ** 2))), float(np.abs(resid).max())
    )


def horizontal_align(pset, track, model, mode="ideal", center=None):
    """Shift frames horizontally onto the fitted trajectory or the virtual COR.

    ``ideal``: the fixed point is moved onto ``center + A cos(theta + phi)``;
    ``virtual_cor``: onto ``center`` itself.  ``center`` defaults to the
    detector centre ``c0 = (nu - 1) / 2``, which is where the reconstruction
    puts the rotation axis.  Passing ``center=model.center`` keeps the fitted
    offset instead; with a half-turn scan that offset also absorbs the mean
    of the motion and acts as a rotation-centre error.

    Returns the shifted set and the per-frame ``du``.
    """
    if mode not in MODES:
        raise AlignmentError("horizontal", f"unknown mode {mode!r}")
    valid = track.valid
    c0 = detector_center(pset.nu) if center is None else float(center)
    if mode == "ideal":
        target = c0 + model.amplitude * np.cos(np.radians(track.angles + model.phase))
    else:
        target = np.full(track.angles.size, c0)
    du = np.where(valid, target - np.where(valid, track.u, 0.0), 0.0)
    du = _fill_invalid(du, track.angles, valid)
    return _shift_frames(pset, du, np.zeros_like(du)), du


def vam_align(pset, method="centroid", mode="virtual_cor", tau_bg=None, window=9, target_row=None):
    """Full alignment: track, vertical align, re-track, fit, horizontal align.

    Returns the aligned set and an :class:`AlignmentReport`.  Stage failures
    are raised as :class:`AlignmentError` tagged with the stage name.
    """
    if mode not in MODES:
        raise AlignmentError("align", f"unknown mode {mode!r}")
    try:
        track = track_fixed_points(pset, method, tau_bg, window)
    except VamctError as exc:
        raise AlignmentError("track", str(exc)) from exc
    common, _, dv = vertical_align(pset, track, target_row)
    target = float(np.median(track.v[track.valid])) if target_row is None else float(target_row)
    try:
        track2 = track_fixed_points(common, method, tau_bg, window)
    except VamctError as exc:
        raise AlignmentError("retrack", str(exc)) from exc
    model = fit_trajectory(track2)
    aligned, du = horizontal_align(common, track2, model, mode)
    report = AlignmentReport(pset.angles, du, dv, track.valid & track2.valid, target, model, mode, method,
                             detector_center(pset.nu))
    return aligned, report


def write_report(csv_path, summary_path, report):
    rows = [
        [i, repr(float(a)), repr(float(du)), repr(float(dv)), int(ok)]
        for i, (a, du, dv, ok) in enumerate(zip(report.angles, report.du, report.dv, report.valid))
    ]
    write_csv(csv_path, ["index", "angle_deg", "du", "dv", "valid"], rows,
              comment=f"mode={report.mode} method={report.method}")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(report.summary())
