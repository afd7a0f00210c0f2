"""On-disk formats.

Binary containers, all little-endian::

    VAMV  b"VAMV" u32 nx u32 ny u32 nz f32 spacing_um  f32[nz*ny*nx]        (x fastest)
    VAMS  b"VAMS" u32 n_angles u32 nu  f32[n_angles] angles_deg  f32[n_angles*nu]
    VAMP  b"VAMP" u32 n_angles u32 nu u32 nv  f32[n_angles] angles_deg
          f32[n_angles*nv*nu]                                             (u fastest)

VAMP carries no spacing field; readers return spacing 1.0 unless told otherwise.

Human-inspection images are written as 16-bit binary PGM (P5) with a sidecar
``<name>.pgm.txt`` recording the linear scaling back to data units.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .core import DimensionMismatchError, ProjectionSet, Sinogram, VamctError, Volume

__all__ = [
    "FormatError",
    "write_volume",
    "read_volume",
    "write_sinogram",
    "read_sinogram",
    "write_projections",
    "read_projections",
    "read_frame_stack",
    "write_pgm",
    "read_pgm",
    "write_csv",
    "read_csv",
]

_F32 = np.dtype("<f4")


class FormatError(VamctError):
    pass


def _read_exact(buf, offset, nbytes, what):
    if offset + nbytes > len(buf):
        raise FormatError(f"truncated file while reading {what}")
    return buf[offset:offset + nbytes]


def _check_magic(buf, magic):
    if buf[:4] != magic:
        raise FormatError(f"bad magic: expected {magic!r}, found {bytes(buf[:4])!r}")


def _f32(arr):
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError("refusing to write non-finite values")
    return arr.astype(_F32).tobytes()


def write_volume(path, volume):
    header = b"VAMV" + struct.pack("<IIIf", volume.nx, volume.ny, volume.nz, volume.spacing)
    Path(path).write_bytes(header + _f32(volume.data))


def read_volume(path):
    buf = Path(path).read_bytes()
    _check_magic(buf, b"VAMV")
    nx, ny, nz, spacing = struct.unpack("<IIIf", _read_exact(buf, 4, 16, "header"))
    n = nx * ny * nz
    data = np.frombuffer(_read_exact(buf, 20, 4 * n, "voxels"), dtype=_F32)
    if len(buf) != 20 + 4 * n:
        raise FormatError("trailing bytes after volume data")
    return Volume(data.reshape(nz, ny, nx).astype(np.float64), float(spacing))


def write_sinogram(path, sino):
    header = b"VAMS" + struct.pack("<II", sino.n_angles, sino.nu)
    Path(path).write_bytes(header + _f32(sino.angles) + _f32(sino.data))


def read_sinogram(path):
    buf = Path(path).read_bytes()
    _check_magic(buf, b"VAMS")
    na, nu = struct.unpack("<II", _read_exact(buf, 4, 8, "header"))
    angles = np.frombuffer(_read_exact(buf, 12, 4 * na, "angles"), dtype=_F32)
    off = 12 + 4 * na
    data = np.frombuffer(_read_exact(buf, off, 4 * na * nu, "data"), dtype=_F32)
    if len(buf) != off + 4 * na * nu:
        raise FormatError("trailing bytes after sinogram data")
    return Sinogram(angles.astype(np.float64), data.reshape(na, nu).astype(np.float64))


def _vamp_payload(angles, images):
    na, nv, nu = images.shape
    return b"VAMP" + struct.pack("<III", na, nu, nv) + _f32(angles) + _f32(images)


def _read_vamp(path):
    buf = Path(path).read_bytes()
    _check_magic(buf, b"VAMP")
    na, nu, nv = struct.unpack("<III", _read_exact(buf, 4, 12, "header"))
    angles = np.frombuffer(_read_exact(buf, 16, 4 * na, "angles"), dtype=_F32)
    off = 16 + 4 * na
    n = na * nv * nu
    data = np.frombuffer(_read_exact(buf, off, 4 * n, "images"), dtype=_F32)
    if len(buf) != off + 4 * n:
        raise FormatError("trailing bytes after projection data")
    return angles.astype(np.float64), data.reshape(na, nv, nu).astype(np.float64)


def write_projections(path, pset):
    Path(path).write_bytes(_vamp_payload(pset.angles, pset.images))


def read_projections(path, spacing=1.0):
    angles, images = _read_vamp(path)
    return ProjectionSet(angles, images, spacing)


def write_frame_stack(path, frames):
    """Write flats/darks as a VAMP stack; the angle field holds frame indices."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    Path(path).write_bytes(_vamp_payload(np.arange(frames.shape[0]), frames))


def read_frame_stack(path):
    """Read a VAMP file as a bare ``(n, nv, nu)`` array, ignoring its angles."""
    return _read_vamp(path)[1]


def write_pgm(path, image):
    """Write a 2D array as a 16-bit PGM plus a scaling sidecar.

    Values are mapped linearly from ``[min, max]`` onto ``[0, 65535]``.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatchError("PGM export needs a 2D image")
    lo, hi = float(img.min()), float(img.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 0.0
    if scale > 0:
        q = np.rint((img - lo) / scale)
    else:
        q = np.zeros_like(img)
    q = np.clip(q, 0, 65535).astype(">u2")
    rows, cols = img.shape
    path = Path(path)
    path.write_bytes(f"P5\n{cols} {rows}\n65535\n".encode("ascii") + q.tobytes())
    path.with_name(path.name + ".txt").write_text(
        f"min {lo!r}\nmax {hi!r}\nscale {scale!r}\n"
        "value = min + pixel * scale\n",
        encoding="utf-8",
    )


def read_pgm(path):
    """Read a 16-bit P5 file written by :func:`write_pgm` (raw pixel values)."""
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    cols, rows = map(int, parts[1].split())
    if int(parts[2]) != 65535:
        raise FormatError("only 16-bit PGM is supported")
    return np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols).astype(np.int64)


def write_csv(path, header, rows, comment=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path):
    """Return ``(comments, header, rows)`` with rows as lists of strings."""
    comments = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    rows = [[c.strip() for c in r] for r in reader]
    return comments, header, rows
