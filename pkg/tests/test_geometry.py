import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughspec.geometry import (
    EmptyPixelationError,
    PixelDomain,
    attouch_wets,
    boundary_points,
    collar_mask,
    components,
    estimate_Q,
    exposed_edges,
    hausdorff,
    inside_pixels,
    koch_polygon,
    mosco_diagnostic,
    oracle_annulus,
    oracle_disc,
    oracle_julia,
    oracle_koch,
    oracle_square,
    oracle_strips,
    pixelate,
    read_pbm,
    read_points_csv,
    write_pbm,
    write_points_csv,
)

GOLDEN = (math.sqrt(5) - 1) / 2


# ------------------------------------------------------------------ oracles


def test_julia_orbit_escapes_for_positive_golden_parameter():
    # 0 -> c -> c^2 + c = 1 -> 1 + c -> (1 + c)^2 + c > 2
    c = GOLDEN
    orbit = [0.0]
    for _ in range(4):
        orbit.append(orbit[-1] ** 2 + c)
    assert orbit[2] == pytest.approx(1.0, abs=1e-15)
    assert orbit[3] <= 2 < orbit[4]
    assert not oracle_julia(c)((0.0, 0.0))


def test_julia_fixed_point_and_escape_radius():
    K = oracle_julia(0)
    assert K((0.0, 0.0))
    assert not K((3.0, 0.0))
    assert K.bounding_radius == 2.0


def test_julia_membership_respects_max_iter():
    # a slow escaper needs enough iterations to be rejected
    z = (0.26, 0.0)  # c = 0.26 just right of the main cardioid cusp
    K_short = oracle_julia(0.26, max_iter=5)
    K_long = oracle_julia(0.26, max_iter=1000)
    assert K_short((0.0, 0.0)) and not K_long((0.0, 0.0))
    assert K_long(z) == K_long((z[0], -z[1]))


def test_julia_conjugation_symmetry_for_real_c():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-1.6, 1.6, (2, 4000))
    K = oracle_julia(-GOLDEN)
    assert np.array_equal(K.membership(x, y), K.membership(x, -y))


def test_square_oracle():
    sq = oracle_square(0, 1)
    assert sq((0.5, 0.5))
    assert not sq((0.0, 0.5))
    assert oracle_square(0, math.pi)((3.0, 3.0))


def test_annulus_oracle():
    A = oracle_annulus(0.1)
    assert A((0.5, 0.0))
    assert not A((0.05, 0.0))
    assert not A((1.0, 0.0))
    with pytest.raises(ValueError):
        oracle_annulus(1.5)


def _ray_cast(px, py, poly):
    """Plain scalar even-odd test used as an independent check."""
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xc:
                inside = not inside
    return inside


def test_koch_polygon_geometry():
    p0 = koch_polygon(0)
    assert len(p0) == 3
    side = np.linalg.norm(np.roll(p0, -1, axis=0) - p0, axis=1)
    assert np.allclose(side, 1.0)
    assert np.allclose(p0.mean(axis=0), 0.0, atol=1e-15)
    assert len(koch_polygon(3)) == 3 * 4**3
    # area of the level-k prefractal: (sqrt3/4) (1 + (1/3) sum_{i<k} (4/9)^i)
    for k in range(5):
        p = koch_polygon(k)
        area = 0.5 * abs(np.dot(p[:, 0], np.roll(p[:, 1], -1)) - np.dot(p[:, 1], np.roll(p[:, 0], -1)))
        expected = math.sqrt(3) / 4 * (1 + sum((4 / 9) ** i for i in range(k)) / 3)
        assert area == pytest.approx(expected, rel=1e-12)


def test_koch_oracle_examples():
    K0 = oracle_koch(0)
    assert K0((0.0, 0.0))
    assert not K0((10.0, 0.0))
    p1 = koch_polygon(1)
    p3 = koch_polygon(3)
    K3 = oracle_koch(3)
    # level-1 vertices that are strictly inside the level-3 region
    hits = 0
    for x, y in p1:
        if _ray_cast(x, y, p3):
            hits += 1
            assert K3((x, y))
    assert hits > 0
    rng = np.random.default_rng(2)
    pts = rng.uniform(-0.7, 0.7, (500, 2))
    got = K3.membership(pts[:, 0], pts[:, 1])
    ref = np.array([_ray_cast(x, y, p3) for x, y in pts])
    assert np.array_equal(got, ref)
    with pytest.raises(ValueError):
        oracle_koch(11)


def test_oracle_is_deterministic_and_bounded():
    K = oracle_julia(-GOLDEN)
    rng = np.random.default_rng(3)
    x, y = rng.uniform(-3, 3, (2, 2000))
    a = K.membership(x, y)
    b = K.membership(x, y)
    assert np.array_equal(a, b)
    assert not np.any(a & (np.hypot(x, y) > K.bounding_radius))


def test_strips_oracle_examples():
    base = oracle_square(0, 1)
    S = oracle_strips(base, [(0.5, 0.5)], 0.2)
    assert S((0.5, 0.5))
    assert S((0.5, 0.9))
    # far from the boundary and from the anchor abscissa
    assert not S((0.3, 0.5))
    # inside the collar
    assert S((0.1, 0.5))
    with pytest.raises(ValueError):
        oracle_strips(base, [(1.5, 0.5)], 0.2)
    with pytest.raises(ValueError):
        oracle_strips(base, [(0.5, 0.5)], 0.0)


def test_strip_widths_halve_with_anchor_index():
    base = oracle_square(0, 1)
    S = oracle_strips(base, [(0.5, 0.5), (0.7, 0.5)], 0.2)
    # anchor 1: half-width 0.05; anchor 2: half-width 0.025
    assert S((0.54, 0.5)) and not S((0.56, 0.5))
    assert S((0.72, 0.5)) and not S((0.73, 0.5))


# ---------------------------------------------------------------- pixelation


def test_pixelate_unit_square():
    pd = pixelate(oracle_square(0, 1), 4)
    expected = {(k, l) for k in (1, 2, 3) for l in (1, 2, 3)}
    assert {tuple(s) for s in pd.sites} == expected
    assert pd.area == pytest.approx(9 / 16)
    assert pixelate(oracle_square(0, 1), 1).empty


def test_pixelate_small_disc_single_site():
    pd = pixelate(oracle_disc(0.4), 1)
    assert pd.sites.tolist() == [[0, 0]]


def test_pixelate_matches_membership_exactly():
    K = oracle_julia(-GOLDEN)
    n = 10
    pd = pixelate(K, n)
    k = 2 * n
    g = np.arange(-k, k + 1)
    jx, jy = np.meshgrid(g, g, indexing="ij")
    mask = K.membership(jx / n, jy / n)
    want = np.column_stack([jx[mask], jy[mask]])
    assert PixelDomain(n, want) == pd
    assert pixelate(K, n) == pd


def test_pixelate_truncation_limits_queries():
    big = oracle_square(-5, 5)
    pd = pixelate(big, 2, truncate=True)
    assert np.all(np.hypot(*(pd.sites / 2).T) <= 2 + 1e-12)
    assert len(pixelate(big, 2)) > len(pd)


def test_components_examples():
    assert len(components(PixelDomain(1, [(0, 0), (1, 0)]))) == 1
    assert len(components(PixelDomain(1, [(0, 0), (1, 1)]))) == 2
    assert components(PixelDomain(1, np.zeros((0, 2)))) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=40))
def test_components_partition_sites(sites):
    pd = PixelDomain(3, sites)
    parts = components(pd)
    assert sum(len(p) for p in parts) == len(pd)
    allsites = np.concatenate([p.sites for p in parts])
    assert PixelDomain(3, allsites) == pd
    label = {}
    for i, p in enumerate(parts):
        for s in map(tuple, p.sites):
            label[s] = i
    for (x, y), i in label.items():
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in label:
                assert label[nb] == i  # edge neighbours always merge


def test_boundary_points_counts():
    one = PixelDomain(1, [(0, 0)])
    pts = boundary_points(one, 1)
    assert len(pts) == 8
    assert np.allclose(np.abs(pts).max(), 0.5)
    two = PixelDomain(1, [(0, 0), (1, 0)])
    assert len(exposed_edges(two)) == 6
    assert len(boundary_points(two, 1)) == 12
    with pytest.raises(ValueError):
        boundary_points(one, 0)
    with pytest.raises(EmptyPixelationError):
        boundary_points(PixelDomain(1, np.zeros((0, 2))), 1)


def test_inside_pixels_closed_union():
    pd = PixelDomain(2, [(0, 0)])
    pts = np.array([[0.0, 0.0], [0.25, 0.25], [0.26, 0.0], [-0.25, 0.1]])
    assert inside_pixels(pd, pts).tolist() == [True, True, False, True]


# -------------------------------------------------------------------- metrics


def test_hausdorff_examples():
    assert hausdorff([(0, 0)], [(0, 0)]) == 0
    assert hausdorff([(0, 0)], [(3, 4)]) == pytest.approx(5)
    assert hausdorff([(0, 0), (1, 0)], [(0, 0)]) == pytest.approx(1)
    assert hausdorff(np.zeros((0, 2)), [(0, 0)]) == math.inf


# coordinates on a 1/64 grid keep squared distances clear of underflow
coord = st.integers(-192, 192).map(lambda k: k / 64)
clouds = st.lists(st.tuples(coord, coord), min_size=1, max_size=12)


@settings(max_examples=120, deadline=None)
@given(clouds, clouds, clouds)
def test_hausdorff_metric_axioms(a, b, c):
    dab = hausdorff(a, b)
    assert dab == hausdorff(b, a)
    assert hausdorff(a, a) == 0
    if set(a) != set(b):
        assert dab > 0
    assert hausdorff(a, c) <= dab + hausdorff(b, c) + 1e-12


def test_attouch_wets_examples():
    a = [(2.0, 0.0)]
    assert attouch_wets(a, a) == pytest.approx(2.0**-10)
    val = attouch_wets([(0.0, 0.0), (2.0, 0.0)], [(2.0, 0.0)])
    assert val == pytest.approx(1.0, abs=2.0**-10 + 1e-12)
    val = attouch_wets([(2.0, 0.0)], [(2.25, 0.0)])
    assert 0 < val <= 0.25 + 2.0**-10


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=1, max_size=8),
       st.lists(st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=1, max_size=8))
def test_attouch_wets_below_hausdorff_plus_tail(a, b):
    k = 6
    aw = attouch_wets(a, b, k_max=k, grid=60)
    assert aw <= hausdorff(a, b) + 2.0**-k + 1e-12
    assert aw == pytest.approx(attouch_wets(b, a, k_max=k, grid=60), abs=1e-12)


# ---------------------------------------------------------- collars and Q


def test_collar_area_single_pixel():
    pd = PixelDomain(1, [(0, 0)])
    assert collar_mask(pd, 0.5, 200)[3] == pytest.approx(1.0)
    assert collar_mask(pd, 0.1, 200)[3] == pytest.approx(0.36, abs=0.01)
    areas = [collar_mask(pd, r, 100)[3] for r in (0.001, 0.01, 0.05, 0.2, 0.4)]
    assert areas == sorted(areas)
    assert areas[0] < 0.01
    with pytest.raises(ValueError):
        collar_mask(PixelDomain(4, [(0, 0)]), 0.1, 2)


def test_estimate_Q():
    for n in (1, 3, 8):
        assert estimate_Q(PixelDomain(n, [(0, 0)])) == math.sqrt(2) / n
    assert estimate_Q(PixelDomain(4, [(0, 0), (20, 3)])) == pytest.approx(math.sqrt(2) / 4)
    Q = estimate_Q(pixelate(oracle_annulus(0.1), 40))
    assert Q == pytest.approx(0.2, abs=2 * math.sqrt(2) / 40)


def test_mosco_square_offsets():
    spacing = 1 / 256
    rep = mosco_diagnostic(oracle_square(0, 1), [4], spacing=spacing)[0]
    # the pixel square (1/8, 7/8)^2 sits 1/8 inside; the corners are sqrt2/8
    # apart and the nearest samples to a corner are within sqrt2 spacings
    assert rep.dH_boundary == pytest.approx(math.sqrt(2) / 8, abs=2 * spacing)
    assert rep.dH_domain == pytest.approx(math.sqrt(2) / 8, abs=2 * spacing)
    assert rep.l_n >= 0


def test_mosco_disc_decreasing():
    reps = mosco_diagnostic(oracle_disc(0.9), [4, 8, 16])
    ls = [r.l_n for r in reps]
    assert ls[0] > ls[1] > ls[2]
    for r in reps:
        pts = boundary_points(pixelate(oracle_disc(0.9), r.n), 1)
        diam = np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))
        assert r.Q_estimate <= diam + 1e-12


def test_mosco_errors():
    with pytest.raises(ValueError):
        mosco_diagnostic(oracle_square(0, 1), [])
    with pytest.raises(EmptyPixelationError):
        mosco_diagnostic(oracle_square(0, 1), [1])


# ------------------------------------------------------------------------ I/O


def test_pbm_round_trip(tmp_path):
    pd = pixelate(oracle_julia(-GOLDEN), 12)
    pbm, meta = write_pbm(pd, tmp_path / "k")
    assert pbm.read_text().startswith("P1\n")
    assert read_pbm(tmp_path / "k") == pd


def test_points_csv_round_trip(tmp_path):
    pts = np.random.default_rng(4).normal(size=(30, 2))
    path = write_points_csv(pts, tmp_path / "p.csv")
    assert path.read_text().splitlines()[0] == "x,y"
    assert np.array_equal(read_points_csv(path), pts)
