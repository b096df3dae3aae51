import numpy as np
import pytest
from scipy import ndimage

from exrange import (
    BoundaryPolicy,
    DomainMask,
    ExcursionMask,
    ThresholdField,
    area_density,
    cdf_slope,
    euler_characteristic,
    euler_density,
    level_curve_length,
    perimeter_density,
)

STREL_8 = np.ones((3, 3), dtype=int)


def euler_oracle(mask):
    """Flood-fill components (8-connected) minus holes (4-connected
    complement components not touching the outside)."""
    mask = np.asarray(mask, dtype=bool)
    n_comp = ndimage.label(mask, structure=STREL_8)[1]
    pad = np.pad(~mask, 1, constant_values=True)
    lab, n_bg = ndimage.label(pad)  # 4-connectivity default
    outside = lab[0, 0]
    n_holes = n_bg - 1 if n_bg else 0
    # any background label other than the outside one is a hole
    labels = set(np.unique(lab)) - {0, outside}
    n_holes = len(labels)
    return n_comp - n_holes


def _mask(m, p=0.9, t=0):
    return ExcursionMask(exceed=np.asarray(m, dtype=bool), policy=BoundaryPolicy.ERODE,
                         p=p, t_index=t)


def full_domain(ny, nx):
    return DomainMask(np.ones((ny, nx), dtype=bool))


def test_solid_block_chi_one():
    m = np.zeros((12, 12), dtype=bool)
    m[1:11, 1:11] = True
    assert euler_characteristic(m) == 1


def test_annulus_chi_zero():
    m = np.zeros((7, 7), dtype=bool)
    m[1:6, 1:6] = True
    m[3, 3] = False
    assert euler_characteristic(m) == 0


def test_diagonal_pixels_are_connected():
    m = np.zeros((4, 4), dtype=bool)
    m[0, 0] = m[1, 1] = True
    assert euler_characteristic(m) == 1  # 8-connected foreground


def test_chi_matches_flood_fill_oracle():
    rng = np.random.default_rng(21)
    for _ in range(100):
        ny, nx = rng.integers(3, 24, size=2)
        m = rng.random((ny, nx)) < rng.uniform(0.25, 0.75)
        assert euler_characteristic(m) == euler_oracle(m)


def test_chi_additive_over_far_components():
    a = np.zeros((20, 20), dtype=bool)
    a[2:6, 2:6] = True
    b = np.zeros((20, 20), dtype=bool)
    b[12:17, 12:17] = True
    b[14, 14] = False
    assert euler_characteristic(a | b) == euler_characteristic(a) + euler_characteristic(b)


def test_euler_density_normalization():
    m = np.zeros((10, 10), dtype=bool)
    m[2:5, 2:5] = True
    dom = full_domain(10, 10)
    assert euler_density(_mask(m), dom, dx=2.0) == pytest.approx(1 / (100 * 4.0))


def test_area_density_counting():
    dom = full_domain(10, 10)
    full = _mask(np.ones((10, 10), dtype=bool))
    assert area_density([full], dom) == 1.0
    quarter = np.zeros((10, 10), dtype=bool)
    quarter[:5, :5] = True
    assert area_density([_mask(quarter)], dom) == 0.25
    assert area_density([full, _mask(quarter)], dom) == pytest.approx(0.625)


def test_perimeter_disk_within_one_percent():
    n = 512
    yy, xx = np.mgrid[0:n, 0:n]
    radius = 150.0
    f = radius - np.hypot(yy - (n - 1) / 2, xx - (n - 1) / 2)
    length, _ = level_curve_length(f, 0.0, domain=full_domain(n, n), dx=1.0)
    assert abs(length - 2 * np.pi * radius) / (2 * np.pi * radius) < 0.01


def test_perimeter_refinement_study():
    # halving the spacing changes the estimated length by well under 0.5%
    radius = 0.3

    def disk_length(n):
        coords = (np.arange(n) + 0.5) / n
        f = radius - np.hypot(*np.meshgrid(coords - 0.5, coords - 0.5, indexing="ij"))
        length, _ = level_curve_length(f, 0.0, domain=full_domain(n, n), dx=1.0 / n)
        return length

    l1 = disk_length(256)
    l2 = disk_length(512)
    assert abs(l2 - l1) / l1 < 0.005


def test_perimeter_no_crossings_is_zero():
    f = np.full((8, 8), 3.0)
    dom = full_domain(8, 8)
    assert level_curve_length(f, 0.0, domain=dom)[0] == 0.0
    assert level_curve_length(f, 10.0, domain=dom)[0] == 0.0


def test_perimeter_excludes_domain_boundary():
    # a plateau filling the domain exactly: the set boundary coincides with
    # the domain boundary and must not be counted
    f = np.ones((6, 6))
    inside = np.zeros((6, 6), dtype=bool)
    inside[1:5, 1:5] = True
    dom = DomainMask(inside)
    length, n_cells = level_curve_length(f, 0.0, domain=dom)
    assert length == 0.0
    assert n_cells == 9  # 3x3 interior cells


def test_perimeter_affine_invariance():
    rng = np.random.default_rng(22)
    f = ndimage.gaussian_filter(rng.standard_normal((40, 40)), 3)
    dom = full_domain(40, 40)
    u = 0.1
    base, _ = level_curve_length(f, u, domain=dom)
    scaled, _ = level_curve_length(3.5 * f + 2.0, 3.5 * u + 2.0, domain=dom)
    assert scaled == pytest.approx(base, rel=1e-12)


def test_perimeter_density_pairs_with_threshold_field():
    rng = np.random.default_rng(23)
    f = ndimage.gaussian_filter(rng.standard_normal((30, 30)), 2).astype(np.float32)
    dom = full_domain(30, 30)
    thr = ThresholdField(p=0.5, u=np.zeros((30, 30), dtype=np.float32))
    c1 = perimeter_density(f, thr, dom, dx=1.0)
    assert c1 > 0
    c1_same = perimeter_density(f, 0.0, dom, dx=1.0)
    assert c1 == c1_same


def test_saddle_rule_is_deterministic():
    # alternating corners force the saddle branch; the center average decides
    f = np.array([[1.0, -1.0], [-1.0, 3.0]])
    dom = full_domain(2, 2)
    length_pos, _ = level_curve_length(f, 0.0, domain=dom)
    f_neg = np.array([[1.0, -3.0], [-3.0, 1.0]])
    length_neg, _ = level_curve_length(f_neg, 0.0, domain=dom)
    assert length_pos > 0 and length_neg > 0
    # both connect two opposite corner arcs: lengths of the two segment pairs
    assert length_pos != pytest.approx(length_neg)


def test_cdf_slope():
    assert cdf_slope(0.05, 0.10) == pytest.approx(1.0)
    assert cdf_slope(0.05, 0.05) == pytest.approx(2.0)
    # halving c2 at fixed c1 doubles the slope
    assert cdf_slope(0.03, 0.05) == pytest.approx(2 * cdf_slope(0.03, 0.10))
    with pytest.raises(ValueError):
        cdf_slope(0.1, 0.0)
