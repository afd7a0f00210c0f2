"""Parallel-beam tomography toolkit with fixed-point virtual alignment.

Typical use::

    from vamct import phantom, projector, motion, align, recon

    vol = phantom.generate_phantom(phantom.tooth_phantom(256, 128), 256, 256, 128)
    pset = projector.forward_project_volume(vol, make_angles(360, 0.5))
    moved = motion.apply_motion(pset, motion.sample_schedule(1, pset.angles, [(-15, 15)] * 3))
    aligned, report = align.vam_align(moved, "centroid", "virtual_cor")
    recon_vol = recon.fbp_volume(aligned)
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DimensionMismatchError,
    GeometryError,
    ProjectionSet,
    RawFrameSet,
    Sinogram,
    Slice,
    VamctError,
    Volume,
    make_angles,
    rebin,
    set_threads,
    shift_subpixel,
)

__all__ = [
    "__version__",
    "DimensionMismatchError",
    "GeometryError",
    "ProjectionSet",
    "RawFrameSet",
    "Sinogram",
    "Slice",
    "VamctError",
    "Volume",
    "make_angles",
    "rebin",
    "set_threads",
    "shift_subpixel",
]
