import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vamct.core import ProjectionSet, Sinogram, VamctError, make_angles, shift_subpixel
from vamct.metrology import registration_offset, sinogram_similarity
from vamct.phantom import (
    analytic_sinogram,
    disk_phantom,
    generate_phantom,
    shepp_logan_phantom,
    tooth_phantom,
)
from vamct.projector import forward_project_slice, forward_project_volume
from vamct.recon import (
    FILTERS,
    FilterSpec,
    _filter_rows,
    _padded_length,
    backproject,
    fbp_slice,
    fbp_volume,
    ramp_filter,
    ramp_kernel,
    reconstruction_mask,
    reproject,
)


def direct_ramp_convolution(row):
    """Spatial-domain convolution with the Ram-Lak kernel, cropped to the row."""
    nu = row.size
    out = np.zeros(nu)
    for i in range(nu):
        for j in range(nu):
            k = i - j
            if k == 0:
                h = 0.25
            elif k % 2:
                h = -1.0 / (np.pi * k) ** 2
            else:
                h = 0.0
            out[i] += h * row[j]
    return out


def test_kernel_values():
    assert np.allclose(ramp_kernel(np.array([0, 1, 2, 3, -1])),
                       [0.25, -1 / np.pi ** 2, 0.0, -1 / (9 * np.pi ** 2), -1 / np.pi ** 2])


def test_padded_length():
    assert _padded_length(256) == 512
    assert _padded_length(257) == 1024
    assert _padded_length(5) == 16


def test_zero_row_stays_zero():
    sino = Sinogram(make_angles(3, 60.0), np.zeros((3, 16)))
    assert not ramp_filter(sino).data.any()


@pytest.mark.parametrize("nu", [4, 17, 64, 100])
def test_impulse_matches_spatial_kernel(nu):
    row = np.zeros(nu)
    row[nu // 3] = 1.0
    out = _filter_rows(row[None], FilterSpec())[0]
    assert np.abs(out - direct_ramp_convolution(row)).max() <= 1e-6


def test_random_rows_match_spatial_kernel(rng):
    rows = rng.standard_normal((4, 40))
    out = _filter_rows(rows, FilterSpec())
    for r, o in zip(rows, out):
        assert np.abs(o - direct_ramp_convolution(r)).max() <= 1e-6


def test_dc_row_is_suppressed():
    nu = 256
    full = _filter_rows(np.ones((1, nu)), FilterSpec(), crop=False)[0]
    # the zero-frequency response is zero up to the kernel's truncation
    assert abs(full.mean()) <= 1e-6 * nu


def test_apodised_filters_are_smaller_at_high_frequency(rng):
    rows = rng.standard_normal((2, 64))
    energy = {k: np.sum(_filter_rows(rows, FilterSpec(k)) ** 2) for k in FILTERS}
    assert energy["hann"] < energy["shepp-logan"] < energy["ram-lak"]
    cut = _filter_rows(rows, FilterSpec("ram-lak", 0.5))
    assert np.sum(cut ** 2) < energy["ram-lak"]


@pytest.mark.parametrize("kind, cutoff", [("gauss", 1.0), ("ram-lak", 0.0), ("hann", 1.5)])
def test_filter_spec_validation(kind, cutoff):
    with pytest.raises(VamctError):
        FilterSpec(kind, cutoff)


def test_too_few_columns():
    with pytest.raises(VamctError):
        ramp_filter(Sinogram(make_angles(2, 90.0), np.ones((2, 3))))


def test_zero_sinogram_backprojects_to_zero():
    assert not backproject(Sinogram(make_angles(10, 18.0), np.zeros((10, 32)))).data.any()


def test_centre_impulse_backprojects_to_centre_spike():
    n = 33
    data = np.zeros((90, n))
    data[:, 16] = 1.0
    img = fbp_slice(Sinogram(make_angles(90, 2.0), data)).data
    assert np.unravel_index(np.argmax(img), img.shape) == (16, 16)
    # rotational symmetry: 90 degree rotation leaves the spike unchanged
    assert np.allclose(img, np.rot90(img), atol=1e-9)


def test_mask_is_inscribed_circle():
    m = reconstruction_mask(9)
    assert m[4, 0] and m[0, 4] and not m[0, 0]
    img = backproject(Sinogram(make_angles(4, 45.0), np.ones((4, 9)))).data
    assert not img[~m].any()


def test_analytic_disk_interior_density(angles360):
    n = 256
    spec = disk_phantom(80.0, density=1.0)
    sino = analytic_sinogram(spec, 0.0, angles360, n)
    img = fbp_slice(sino).data
    yy, xx = np.mgrid[:n, :n] - (n - 1) / 2
    interior = np.hypot(xx, yy) <= 80.0 - 6.0
    assert img[interior].mean() == pytest.approx(1.0, rel=0.02)


@pytest.mark.parametrize("kind", FILTERS)
def test_shepp_logan_reconstruction(kind, angles360):
    n = 256
    truth = generate_phantom(shepp_logan_phantom(n), n, n, 1).data[0]
    img = fbp_slice(forward_project_slice(truth, angles360), FilterSpec(kind)).data
    yy, xx = np.mgrid[:n, :n] - (n - 1) / 2
    inner = np.hypot(xx, yy) <= 0.9 * (n - 1) / 2
    rmse = np.sqrt(np.mean((img[inner] - truth[inner]) ** 2))
    limit = 0.05 if kind != "hann" else 0.07  # Hann trades edge sharpness for noise
    assert rmse / np.ptp(truth) <= limit


def test_fbp_volume_rows_bitwise_equal_fbp_slice():
    n = 48
    vol = generate_phantom(tooth_phantom(n, 24), n, n, 24)
    pset = forward_project_volume(vol, make_angles(60, 3.0))
    rec = fbp_volume(pset)
    for z in range(24):
        assert np.array_equal(rec.data[z], fbp_slice(pset.sinogram(z)).data)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 1000))
def test_fbp_linearity(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    ang = make_angles(20, 9.0)
    p = Sinogram(ang, rng.random((20, 24)))
    q = Sinogram(ang, rng.random((20, 24)))
    lhs = fbp_slice(Sinogram(ang, alpha * p.data + beta * q.data)).data
    rhs = alpha * fbp_slice(p).data + beta * fbp_slice(q).data
    assert np.allclose(lhs, rhs, atol=1e-11)


def test_shift_theorem(angles360):
    n = 128
    truth = generate_phantom(tooth_phantom(n, 4), n, n, 4).data[2]
    sino = forward_project_slice(truth, angles360)
    x0, y0 = 6.0, -4.0
    th = np.radians(angles360)
    shifted = np.array([shift_subpixel(r[None], d, 0)[0] for r, d in
                        zip(sino.data, x0 * np.cos(th) + y0 * np.sin(th))])
    base = fbp_slice(sino).data
    moved = fbp_slice(Sinogram(angles360, shifted)).data
    dx, dy = registration_offset(base, moved)
    assert abs(dx - x0) < 0.5 and abs(dy - y0) < 0.5
    expected = shift_subpixel(base, x0, y0)
    inner = reconstruction_mask(n)
    inner &= np.roll(np.roll(inner, 8, 0), 8, 1) & np.roll(np.roll(inner, -8, 0), -8, 1)
    rmse = np.sqrt(np.mean((moved[inner] - expected[inner]) ** 2))
    assert rmse / np.ptp(base) <= 0.02


@pytest.mark.parametrize("name", ["disk", "tooth"])
def test_reprojection_consistency(name, angles360):
    n = 256
    spec = disk_phantom(70.0, center=(15.0, -10.0)) if name == "disk" else tooth_phantom(n, 8)
    truth = generate_phantom(spec, n, n, 8).data[4]
    p = forward_project_slice(truth, angles360)
    sim = sinogram_similarity(reproject(fbp_slice(p), angles360), p)
    assert sim.pearson >= 0.99
    assert sim.nrmse <= 0.05


def test_fbp_volume_keeps_spacing():
    pset = ProjectionSet(make_angles(8, 22.5), np.zeros((8, 2, 16)), spacing=12.2)
    assert fbp_volume(pset).spacing == 12.2
