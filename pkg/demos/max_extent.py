"""Compare a length measured in the reconstruction with one read off a projection.

The longest chord of the segmented volume should agree with the widest
silhouette among the projections, because some view lies almost parallel to
that chord.
"""
from vamct.core import make_angles
from vamct.metrology import compare_extents, max_extent_projections, max_extent_volume, segment_threshold
from vamct.phantom import generate_phantom, tooth_phantom
from vamct.projector import forward_project_volume
from vamct.recon import fbp_volume

n = 128
vol = generate_phantom(tooth_phantom(n, n), n, n, n, spacing=12.2)
pset = forward_project_volume(vol, make_angles(360, 0.5))
recon = fbp_volume(pset)

mask = segment_threshold(recon.data, 1.0, open_radius=1, close_radius=1)
report = compare_extents(max_extent_volume(mask, recon.spacing), max_extent_projections(pset, 1.0))
print(report.text(), end="")
