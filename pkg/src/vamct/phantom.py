"""Synthetic samples built from ellipsoids and cuboids, plus closed-form projections.

Coordinates are in voxels relative to the volume centre
``((nx-1)/2, (ny-1)/2, (nz-1)/2)``.  Every component may carry an in-plane
rotation ``angle`` (degrees, about the vertical axis); its first semi-axis
then points along ``(cos angle, sin angle)``.

Spec-file grammar (one item per line, ``#`` starts a comment, blank lines
ignored)::

    ellipsoid  x y z  a b c  density  [angle]
    cuboid     x y z  a b c  density  [angle]
    marker     x y z  radius density

At most one ``marker`` line is allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Sinogram, VamctError, Volume, detector_center, validate_angles

__all__ = [
    "PhantomError",
    "Component",
    "Marker",
    "PhantomSpec",
    "generate_phantom",
    "analytic_sinogram",
    "ellipse_chord",
    "parse_phantom_spec",
    "load_phantom_spec",
    "format_phantom_spec",
    "disk_phantom",
    "shepp_logan_phantom",
    "tooth_phantom",
    "builtin_phantom",
]


class PhantomError(VamctError):
    pass


@dataclass(frozen=True)
class Component:
    kind: str
    center: tuple
    semi_axes: tuple
    density: float
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ellipsoid", "cuboid"):
            raise PhantomError(f"unknown component kind {self.kind!r}")
        center = tuple(float(c) for c in self.center)
        axes = tuple(float(a) for a in self.semi_axes)
        if len(center) != 3 or len(axes) != 3:
            raise PhantomError("center and semi_axes need three values")
        if min(axes) <= 0:
            raise PhantomError("semi-axes must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "density", float(self.density))
        object.__setattr__(self, "angle", float(self.angle))


@dataclass(frozen=True)
class Marker:
    """Dense spherical bead used as a trackable fixed point."""

    center: tuple
    radius: float
    density: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise PhantomError("marker radius must be positive")

    def as_component(self):
        r = float(self.radius)
        return Component("ellipsoid", self.center, (r, r, r), self.density)


@dataclass(frozen=True)
class PhantomSpec:
    components: tuple = field(default_factory=tuple)
    marker: Marker | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def all_components(self):
        comps = list(self.components)
        if self.marker is not None:
            comps.append(self.marker.as_component())
        return comps


def _radial_extent(comp):
    """Largest distance from the rotation axis reached by ``comp``'s footprint."""
    a, b, _ = comp.semi_axes
    x0, y0, _ = comp.center
    t = np.deg2rad(comp.angle)
    if comp.kind == "cuboid":
        px = np.array([a, a, -a, -a])
        py = np.array([b, -b, b, -b])
    else:
        phi = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        px, py = a * np.cos(phi), b * np.sin(phi)
    x = x0 + px * np.cos(t) - py * np.sin(t)
    y = y0 + px * np.sin(t) + py * np.cos(t)
    # the dense sampling may miss the true extreme by a hair; pad by 1e-3 px
    return float(np.hypot(x, y).max()) + (1e-3 if comp.kind == "ellipsoid" else 0.0)


def safe_radius(nx, ny):
    """Radius of the cylinder every component must fit inside."""
    return min(nx, ny) / 2.0 - 2.0


def check_spec(spec, nx, ny):
    limit = safe_radius(nx, ny)
    for i, comp in enumerate(spec.all_components()):
        r = _radial_extent(comp)
        if r > limit:
            raise PhantomError(
                f"component {i} ({comp.kind}) reaches radius {r:.2f} px, "
                f"outside the safe cylinder of radius {limit:.2f} px"
            )


def _membership(comp, X, Y, Z):
    x0, y0, z0 = comp.center
    a, b, c = comp.semi_axes
    t = np.deg2rad(comp.angle)
    ct, st = np.cos(t), np.sin(t)
    dx, dy, dz = X - x0, Y - y0, Z - z0
    # body-frame coordinates
    p = dx * ct + dy * st
    q = -dx * st + dy * ct
    if comp.kind == "ellipsoid":
        return (p / a) ** 2 + (q / b) ** 2 + (dz / c) ** 2 <= 1.0
    return (np.abs(p) <= a) & (np.abs(q) <= b) & (np.abs(dz) <= c)


def generate_phantom(spec, nx, ny, nz, spacing=1.0):
    """Rasterise ``spec`` onto an ``nz x ny x nx`` grid.

    Each voxel holds the summed density of every component containing the
    voxel centre (no antialiasing).
    """
    check_spec(spec, nx, ny)
    zs = np.arange(nz) - detector_center(nz)
    Y, X = np.meshgrid(np.arange(ny) - detector_center(ny), np.arange(nx) - detector_center(nx), indexing="ij")
    data = np.zeros((nz, ny, nx))
    for k, z in enumerate(zs):
        for comp in spec.components:
            if abs(z - comp.center[2]) <= comp.semi_axes[2]:
                data[k][_membership(comp, X, Y, z)] += comp.density
    if spec.marker is not None:
        background = data.max()
        if not spec.marker.density > background:
            raise PhantomError(
                f"marker density {spec.marker.density} does not exceed the "
                f"background maximum {background}"
            )
        bead = spec.marker.as_component()
        for k, z in enumerate(zs):
            if abs(z - bead.center[2]) <= bead.semi_axes[2]:
                data[k][_membership(bead, X, Y, z)] += bead.density
    return Volume(data, spacing)


def ellipse_chord(s, theta_deg, a, b, density=1.0, angle=0.0):
    """Line integral through an origin-centred ellipse at detector offset ``s``.

    The ellipse has semi-axes ``(a, b)`` with the first axis rotated by
    ``angle`` degrees.  ``s`` and ``theta_deg`` broadcast against each other.
    """
    t = np.deg2rad(np.asarray(theta_deg, dtype=np.float64) - angle)
    s = np.asarray(s, dtype=np.float64)
    L2 = (a * np.cos(t)) ** 2 + (b * np.sin(t)) ** 2
    inside = s * s < L2
    root = np.sqrt(np.where(inside, L2 - s * s, 0.0))
    return np.where(inside, 2.0 * density * a * b / L2 * root, 0.0)


def analytic_sinogram(spec, slice_z, angles, nu):
    """Exact parallel-beam sinogram of the phantom's cross-section at height ``slice_z``.

    Parameters
    ----------
    spec : PhantomSpec
        Only ellipsoids (and the spherical marker) are supported.
    slice_z : float
        Height of the cutting plane, voxels relative to the volume centre.
        For a grid with ``nz`` levels, axial index ``k`` sits at
        ``k - (nz - 1) / 2``.
    angles : array_like
        Projection angles in degrees.
    nu : int
        Number of detector columns; column ``u`` samples ``s = u - (nu-1)/2``.

    Returns
    -------
    Sinogram
    """
    angles = validate_angles(angles, min_count=2)
    comps = spec.all_components()
    for comp in comps:
        if comp.kind != "ellipsoid":
            raise PhantomError("analytic projection is only available for ellipsoids")
    s = np.arange(nu) - detector_center(nu)
    th = np.deg2rad(angles)[:, None]
    out = np.zeros((angles.size, nu))
    for comp in comps:
        x0, y0, z0 = comp.center
        a, b, c = comp.semi_axes
        dz = slice_z - z0
        if abs(dz) >= c:
            continue
        k = np.sqrt(1.0 - (dz / c) ** 2)
        shifted = s[None, :] - (x0 * np.cos(th) + y0 * np.sin(th))
        out += ellipse_chord(shifted, angles[:, None], a * k, b * k, comp.density, comp.angle)
    return Sinogram(angles, out)


def parse_phantom_spec(text):
    components = []
    marker = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *rest = line.split()
        try:
            vals = [float(v) for v in rest]
        except ValueError as exc:
            raise PhantomError(f"line {lineno}: {exc}") from None
        if kind in ("ellipsoid", "cuboid"):
            if len(vals) not in (7, 8):
                raise PhantomError(f"line {lineno}: {kind} needs 7 or 8 numbers, got {len(vals)}")
            components.append(Component(kind, vals[0:3], vals[3:6], vals[6], vals[7] if len(vals) == 8 else 0.0))
        elif kind == "marker":
            if len(vals) != 5:
                raise PhantomError(f"line {lineno}: marker needs 5 numbers, got {len(vals)}")
            if marker is not None:
                raise PhantomError(f"line {lineno}: only one marker is allowed")
            marker = Marker(vals[0:3], vals[3], vals[4])
        else:
            raise PhantomError(f"line {lineno}: unknown item {kind!r}")
    return PhantomSpec(tuple(components), marker)


def load_phantom_spec(path):
    return parse_phantom_spec(Path(path).read_text(encoding="utf-8"))


def format_phantom_spec(spec):
    lines = ["# kind x y z a b c density angle"]
    for c in spec.components:
        nums = [*c.center, *c.semi_axes, c.density, c.angle]
        lines.append(c.kind + " " + " ".join(repr(v) for v in nums))
    if spec.marker is not None:
        m = spec.marker
        lines.append("marker " + " ".join(repr(float(v)) for v in (*m.center, m.radius, m.density)))
    return "\n".join(lines) + "\n"


def disk_phantom(radius, density=1.0, center=(0.0, 0.0), height=1e6):
    """A single upright elliptic cylinder; every axial slice is the same disk."""
    return PhantomSpec((Component("ellipsoid", (center[0], center[1], 0.0), (radius, radius, height), density),))


# modified Shepp-Logan: density, a, b, x0, y0, angle (unit box [-1, 1])
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan_phantom(n, height=1e6):
    """Modified Shepp-Logan ellipses scaled to fit an ``n x n`` slice."""
    scale = 0.95 * safe_radius(n, n) / 0.92
    comps = []
    for rho, a, b, x0, y0, ang in _SHEPP_LOGAN:
        # image rows grow downwards; flip y so the picture is upright
        comps.append(Component("ellipsoid", (x0 * scale, -y0 * scale, 0.0),
                               (a * scale, b * scale, height), rho, -ang))
    return PhantomSpec(tuple(comps))


def tooth_phantom(n, nz=None, angle=167.5, marker=False):
    """Crown-like sample: enamel shell, dentin body and a low-density pulp.

    The shell is a positive outer ellipsoid with a negative inner one; the
    pulp is a further negative ellipsoid.  The long in-plane axis is rotated
    by ``angle`` degrees so its widest projection occurs near that angle.
    Sizes scale with the grid (``n`` columns, ``nz`` levels, default ``n``).
    """
    nz = n if nz is None else nz
    r = safe_radius(n, n)
    h = (nz - 1) / 2.0
    a, b, c = 0.72 * r, 0.52 * r, 0.62 * h
    comps = [
        Component("ellipsoid", (0.0, 0.0, 0.0), (a, b, c), 2.0, angle),
        Component("ellipsoid", (0.0, 0.0, 0.08 * h), (0.8 * a, 0.75 * b, 0.82 * c), -0.8, angle),
        Component("ellipsoid", (0.05 * r, 0.0, 0.15 * h), (0.3 * a, 0.3 * b, 0.45 * c), -0.9, angle),
        Component("ellipsoid", (-0.35 * a, 0.2 * b, -0.1 * h), (0.12 * a, 0.12 * a, 0.2 * c), 0.6, 0.0),
    ]
    mk = None
    if marker:
        # dense enough that the bead also dominates every projection, where
        # the tooth's long chords add up; beating the voxel maximum is not enough
        rad = max(2.0, 0.03 * r)
        mk = Marker((0.45 * a, -0.3 * b, 0.3 * h), rad, 100.0)
    return PhantomSpec(tuple(comps), mk)


def builtin_phantom(name, n, nz=None):
    name = name.lower()
    if name == "tooth":
        return tooth_phantom(n, nz)
    if name == "tooth-marker":
        return tooth_phantom(n, nz, marker=True)
    if name in ("shepp-logan", "shepp_logan"):
        return shepp_logan_phantom(n)
    if name == "disk":
        return disk_phantom(0.6 * safe_radius(n, n), center=(0.1 * n, -0.05 * n))
    if name == "empty":
        return PhantomSpec()
    raise PhantomError(f"unknown builtin phantom {name!r}")
