"""Filtered back-projection for parallel-beam data.

The ramp filter is the band-limited (Ram-Lak) spatial kernel

    h(0) = 1/4,  h(n) = -1 / (pi n)^2 for odd n,  h(n) = 0 for even n != 0,

transformed to the frequency domain on a zero-padded grid of length
``2 * next_pow2(nu)``, optionally apodised (Shepp-Logan, Hann) and cut off
above ``cutoff * Nyquist``.  Backprojection is pixel driven with linear
interpolation along the detector and the ``pi / n_angles`` quadrature weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .core import ProjectionSet, Sinogram, Slice, VamctError, Volume, detector_center
from .projector import forward_project_slice

__all__ = [
    "FilterSpec",
    "ramp_kernel",
    "ramp_filter",
    "backproject",
    "fbp_slice",
    "fbp_volume",
    "reproject",
    "reconstruction_mask",
]

FILTERS = ("ram-lak", "shepp-logan", "hann")


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "ram-lak"
    cutoff: float = 1.0

    def __post_init__(self):
        if self.kind not in FILTERS:
            raise VamctError(f"unknown filter {self.kind!r}; choose from {', '.join(FILTERS)}")
        if not 0.0 < self.cutoff <= 1.0:
            raise VamctError("filter cutoff must lie in (0, 1]")


def ramp_kernel(n):
    """Spatial Ram-Lak kernel evaluated at integer offsets ``n``."""
    n = np.asarray(n)
    h = np.zeros(n.shape)
    h[n == 0] = 0.25
    odd = (n % 2) == 1
    h[odd] = -1.0 / (np.pi * n[odd]) ** 2
    return h


def _padded_length(nu):
    return 2 * (1 << max(0, int(nu - 1).bit_length()))


def _frequency_response(nu, spec):
    size = _padded_length(nu)
    offsets = np.concatenate([np.arange(0, size // 2), np.arange(-size // 2, 0)])
    response = np.fft.rfft(ramp_kernel(offsets)).real
    freq = np.fft.rfftfreq(size)  # cycles/sample, Nyquist at 0.5
    rel = freq / 0.5
    if spec.kind == "shepp-logan":
        response = response * np.sinc(rel / (2.0 * spec.cutoff))
    elif spec.kind == "hann":
        response = response * 0.5 * (1.0 + np.cos(np.pi * rel / spec.cutoff))
    response[rel > spec.cutoff] = 0.0
    return response


def _filter_rows(rows, spec, crop=True):
    rows = np.asarray(rows, dtype=np.float64)
    nu = rows.shape[-1]
    if nu < 4:
        raise VamctError("ramp filter needs at least 4 detector columns")
    size = _padded_length(nu)
    response = _frequency_response(nu, spec)
    out = np.fft.irfft(np.fft.rfft(rows, n=size, axis=-1) * response, n=size, axis=-1)
    return out[..., :nu] if crop else out


def ramp_filter(sino, spec=None):
    """Ramp-filter every projection row of a sinogram."""
    spec = spec or FilterSpec()
    return Sinogram(sino.angles, _filter_rows(sino.data, spec))


@njit(parallel=True, cache=True)
def _backproject_stack(q, cos_t, sin_t, n, out):
    # q: (n_angles, nu, nk) filtered data, axial index innermost; out: (n, n, nk)
    n_angles, nu, nk = q.shape
    cu = (nu - 1) / 2.0
    cx = (n - 1) / 2.0
    r2 = cu * cu
    for job in prange(n * n):
        iy = job // n
        ix = job - iy * n
        x = ix - cx
        y = iy - cx
        if x * x + y * y > r2:
            continue
        acc = out[iy, ix]
        for ia in range(n_angles):
            s = x * cos_t[ia] + y * sin_t[ia] + cu
            j = int(math.floor(s))
            f = s - j
            if j >= 0 and j < nu:
                w = 1.0 - f
                for k in range(nk):
                    acc[k] += w * q[ia, j, k]
            if j + 1 >= 0 and j + 1 < nu and f != 0.0:
                for k in range(nk):
                    acc[k] += f * q[ia, j + 1, k]
        scale = math.pi / n_angles
        for k in range(nk):
            acc[k] *= scale


def _backproject(q_rows, angles):
    """``q_rows``: (n_angles, nk, nu) -> reconstructed (nk, nu, nu)."""
    n_angles, nk, nu = q_rows.shape
    t = np.deg2rad(angles)
    q = np.ascontiguousarray(np.transpose(q_rows, (0, 2, 1)), dtype=np.float64)
    out = np.zeros((nu, nu, nk))
    _backproject_stack(q, np.cos(t), np.sin(t), nu, out)
    return np.ascontiguousarray(np.transpose(out, (2, 0, 1)))


def reconstruction_mask(n):
    """Pixels of an ``n x n`` grid inside the inscribed (fully sampled) circle."""
    c = detector_center(n)
    y, x = np.ogrid[:n, :n]
    return (x - c) ** 2 + (y - c) ** 2 <= c * c


def backproject(sino):
    """Unfiltered backprojection onto an ``nu x nu`` grid, zero outside the inscribed circle."""
    return Slice(_backproject(sino.data[:, None, :], sino.angles)[0])


def fbp_slice(sino, spec=None):
    spec = spec or FilterSpec()
    q = _filter_rows(sino.data, spec)
    return Slice(_backproject(q[:, None, :], sino.angles)[0])


def fbp_volume(pset, spec=None):
    """Reconstruct every detector row of a projection set; ``z = v``."""
    spec = spec or FilterSpec()
    q = _filter_rows(pset.images, spec)
    return Volume(_backproject(q, pset.angles), pset.spacing)


def reproject(slc, angles):
    """Forward-project a reconstructed slice (consistency checks)."""
    return forward_project_slice(slc, angles)
