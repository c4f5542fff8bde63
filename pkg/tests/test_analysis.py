import math

import numpy as np
import pytest
from scipy import integrate

from roughspec.analysis import (
    ANNULUS_HEADER,
    ConvergenceRow,
    ConvergenceTable,
    annulus_closed_form,
    annulus_quadrature,
    annulus_table,
    collar_matrices,
    convergence_study,
    eigenfunctions,
    fit_rate,
    fool_demo,
    mosco_table,
    poincare_check,
    read_table,
    write_mosco,
    write_table,
)
from roughspec.fem import assemble, read_eigenfunction_csv, triangulate
from roughspec.geometry import PixelDomain, edge_segments, oracle_annulus, oracle_disc, oracle_square, pixelate
from roughspec.geometry.pixels import segment_distance


def test_annulus_gradient_value():
    _, g2 = annulus_closed_form(0.1)
    assert g2 == pytest.approx(2 * math.pi / math.log(10))
    assert g2 == pytest.approx(2.7288, abs=1e-4)


@pytest.mark.parametrize("eps", [0.3, 0.1, 0.03])
def test_annulus_quadrature_matches_closed_form(eps):
    f2c, g2c = annulus_closed_form(eps)
    f2q, g2q = annulus_quadrature(eps)
    assert f2q == pytest.approx(f2c, rel=1e-6)
    assert g2q == pytest.approx(g2c, rel=1e-6)
    # a second, one-dimensional radial oracle
    L = math.log(eps)
    f2r = 2 * math.pi * integrate.quad(lambda r: ((L - math.log(r)) / L) ** 2 * r, eps, 1, epsrel=1e-13)[0]
    assert f2r == pytest.approx(f2c, rel=1e-9)


def test_annulus_ratio_grows(tmp_path):
    rows = annulus_table([0.3, 0.1, 0.03])
    ratios = [r[5] for r in rows]
    assert ratios[0] < ratios[1] < ratios[2]
    path = write_table(tmp_path / "ann.csv", ANNULUS_HEADER, rows)
    header, back = read_table(path)
    assert header == ANNULUS_HEADER and back == rows
    with pytest.raises(ValueError):
        annulus_table([1.5])


def test_fit_rate():
    assert fit_rate([1.0, 0.25, 0.0625]) == pytest.approx(2.0)
    assert math.isnan(fit_rate([1.0]))
    assert math.isnan(fit_rate([1.0, -1.0]))


def test_square_convergence_is_second_order(tmp_path):
    tab = convergence_study(oracle_square(0, 1), [4], 3, grad_tol=1e-9, precondition=True)
    diffs = tab.differences(4)
    assert len(diffs) == 3 and all(d > 0 for d in diffs)
    assert tab.fitted_rate[4] == pytest.approx(2.0, abs=0.15)
    assert all(abs(r.h - 1 / (4 * 2**r.m)) == 0 for r in tab.rows)
    back = ConvergenceTable.read(tab.write(tmp_path / "conv.csv"))
    assert back.rows == tab.rows and back.fitted_rate == tab.fitted_rate
    with pytest.raises(ValueError):
        convergence_study(oracle_square(0, 1), [4], 0)


def test_convergence_records_missing_dof():
    tab = convergence_study(oracle_square(0, 1), [2], 1)
    assert tab.rows[0].status == "no interior dof"
    assert tab.rows[1].status == "ok" and tab.rows[1].diff is None


def test_mosco_table_round_trip(tmp_path):
    reports = mosco_table(oracle_disc(0.9), [4, 8])
    assert reports[1].l_n < reports[0].l_n
    header, rows = read_table(write_mosco(reports, tmp_path / "mosco.csv"))
    assert header[:5] == ["n", "l_n", "dH_domain", "dH_boundary", "Q_estimate"]
    assert [r[1] for r in rows] == [rep.l_n for rep in reports]


def test_collars_ignore_interior_functions():
    pd = pixelate(oracle_square(0, 1), 16)
    mesh = triangulate(pd, 1)
    r = 0.05
    Mr, KR = collar_matrices(mesh, r, 2 * math.sqrt(2) * r)
    d = segment_distance(mesh.vertices[mesh.interior_vertices], edge_segments(pd))
    u = np.zeros(mesh.dof)
    u[np.argmax(d)] = 1.0  # hat function far from the boundary
    assert u @ (Mr @ u) == 0 and u @ (KR @ u) == 0
    # a collar mass matrix is dominated by the full one
    full = assemble(mesh).B
    v = np.random.default_rng(0).standard_normal(mesh.dof)
    assert 0 < v @ (Mr @ v) <= v @ (full @ v)


def test_poincare_on_square():
    rep = poincare_check(pixelate(oracle_square(0, 1), 16), 0.02, trials=20)
    assert rep.hypothesis_ok and rep.passed and rep.evaluated + rep.skipped == 20
    assert rep.max_ratio <= 5.5 and not rep.warnings


def test_poincare_warning_path(caplog):
    with caplog.at_level("WARNING", logger="roughspec.analysis"):
        rep = poincare_check(pixelate(oracle_annulus(0.1), 16), 0.05, trials=5)
    assert not rep.hypothesis_ok
    assert any("fails" in w for w in rep.warnings)
    assert "fails" in caplog.text
    with pytest.raises(ValueError):
        poincare_check(pixelate(oracle_square(0, 1), 4), 0.0)


def test_fool_small_case():
    rep = fool_demo(oracle_square(0, math.pi), 2, [0.4, 0.2], n_hi=32)
    assert rep.agreement and rep.same_pixelation
    assert rep.anchors > 0 and rep.queries == 49
    assert rep.lambda1[1] > rep.lambda1[0] > rep.base_lambda1
    with pytest.raises(ValueError):
        fool_demo(oracle_square(0, math.pi), 2, [])


def test_eigenfunctions(tmp_path):
    one = PixelDomain(1, [(0, 0)])
    res, mesh, files = eigenfunctions(one, 1, [1], tmp_path / "one")
    B = assemble(mesh).B[0, 0]
    meta, data = read_eigenfunction_csv(files[0])
    assert data[:, 2].max() == pytest.approx(1 / math.sqrt(B))
    sq = pixelate(oracle_square(0, 1), 4)
    res, mesh, files = eigenfunctions(sq, 1, [1, 2], tmp_path / "sq")
    assert len(files) == 4
    meta, data = read_eigenfunction_csv(files[0])
    inner = data[:, 2][data[:, 2] != 0]
    assert len(inner) == mesh.dof and np.all(inner > 0)
    with pytest.raises(ValueError):
        eigenfunctions(one, 1, [2], tmp_path / "bad")
    with pytest.raises(ValueError):
        eigenfunctions(one, 1, [0], tmp_path / "bad")


def test_convergence_row_defaults():
    row = ConvergenceRow(4, 0, 0.25, 1.0)
    assert row.diff is None and row.status == "ok"
