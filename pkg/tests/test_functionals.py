import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import X0, sweep, synthetic
from stagflat.errors import DegenerateDenominatorError, InsufficientDataError, WindowError
from stagflat.field import Point2
from stagflat.functionals import (COLUMNS, AnalysisWindow, BallSample, core_functionals,
                                  evaluate_radius, extrapolate_zero_limit, frequency_D, tildeV,
                                  weiss_energy)

CORNER_J0 = 2 * math.pi / 27
CORNER_V0 = 9 * (2 - math.sqrt(3)) / (2 * math.pi)


def nearest(profile, r):
    i = int(np.argmin(np.abs(profile.radii - r)))
    return profile.records[i]


def test_analysis_window_radii():
    f = synthetic("degenerate-N", 2)
    w = AnalysisWindow.build(f, 1.0)
    assert len(w.radii) == 40
    assert all(b == pytest.approx(0.8 * a) for a, b in zip(w.radii, w.radii[1:]))
    assert w.radii[0] < w.delta
    with pytest.raises(WindowError):
        AnalysisWindow.build(f, 1.0, r_max=10.0)


def test_zero_field_is_all_zero_and_flags_denominator():
    rec = evaluate_radius(synthetic("zero"), None, X0, 0.05)
    for k in ("I", "J", "K", "I1", "I2", "J1", "Phi"):
        assert rec.get(k) == 0.0
    assert any(d.startswith("degenerate-denominator") for d in rec.diagnostics)
    with pytest.raises(DegenerateDenominatorError):
        frequency_D(synthetic("zero"), None, X0, 0.05)


def test_ball_outside_window():
    with pytest.raises(WindowError):
        BallSample(synthetic("degenerate-N", 2), None, X0, 5.0)


@pytest.mark.parametrize("name,N,r,rel", [("degenerate-N", 2, 0.05, 1e-9),
                                          ("degenerate-N", 3, 0.1, 1e-9),
                                          # psi^2 has a curvature jump on the wedge edges
                                          ("stokes-corner", 2, 0.02, 1e-6)])
def test_J_matches_brute_force(name, N, r, rel):
    f = synthetic(name, N)

    def integrand(th):
        x, y = 1 + r * math.cos(th), r * math.sin(th)
        return float(f.values(np.array([x]), np.array([y]))[0]) ** 2 / x * r

    pts = [math.pi / 6, 5 * math.pi / 6] if name == "stokes-corner" else None
    exact = quad(integrand, 0, 2 * math.pi, points=pts, epsabs=0, epsrel=1e-12, limit=200)[0] / r**4
    assert core_functionals(f, None, X0, r).J == pytest.approx(exact, rel=rel)


def test_degenerate_J_order():
    # J = r^(2N-3) (1 + O(r))
    for N in (2, 3):
        p = sweep("degenerate-N", N)
        r, J = p.radii, p.column("J")
        slope = np.polyfit(np.log(r[-10:]), np.log(J[-10:]), 1)[0]
        assert slope == pytest.approx(2 * N - 3, abs=0.01)


def test_corner_J_limit():
    J = sweep("stokes-corner").column("J")
    assert J[-1] == pytest.approx(CORNER_J0, rel=1e-6)
    assert CORNER_J0 == pytest.approx(0.23271, abs=1e-5)


def test_weiss_energy_definition():
    c = core_functionals(synthetic("degenerate-N", 2), None, X0, 0.03)
    assert weiss_energy(c) == c.I - 1.5 * c.J


def test_degenerate_D_near_two():
    rec = nearest(sweep("degenerate-N", 2), 1e-2)
    assert abs(rec.get("D") - 2) <= 0.02
    assert rec.get("D_boundary") == pytest.approx(2.0, abs=1e-10)


def test_boundary_D_equals_degree():
    for N in (2, 3, 4):
        f = synthetic("degenerate-N", N)
        assert frequency_D(f, None, X0, 0.02).boundary == pytest.approx(N, abs=1e-9)


def test_corner_D():
    rec = nearest(sweep("stokes-corner"), 1e-3)
    assert rec.get("D_boundary") == pytest.approx(1.5, abs=1e-10)
    # the volume form carries the first-order jump error of |grad psi|^2 at the wedge edge
    assert rec.get("D") == pytest.approx(1.5, abs=0.02)


def test_vtilde():
    assert np.all(sweep("degenerate-N", 2).column("Vtilde") == 0.0)
    assert np.all(sweep("stokes-corner").column("Vtilde") > 0)
    assert tildeV(synthetic("degenerate-N", 3), X0, 0.1) == 0.0


def test_corner_V_limit():
    # closed form of the missing-density term; numerically within the jump error
    V = sweep("stokes-corner").column("V")
    assert CORNER_V0 == pytest.approx(0.383809, abs=1e-6)
    assert V[-1] == pytest.approx(CORNER_V0, rel=0.03)


def test_Z_is_order_r():
    for name in ("degenerate-N", "stokes-corner"):
        p = sweep(name)
        r, Z = p.radii, np.abs(p.column("Z"))
        sel = (r <= 1e-2) & (r >= 1e-3)
        slope = np.polyfit(np.log(r[sel]), np.log(Z[sel]), 1)[0]
        assert slope >= 0.9


def test_Y_exponent():
    for N in (2, 3):
        p = sweep("degenerate-N", N)
        r, Y = p.radii, p.column("Y")
        slope = np.polyfit(np.log(r[-10:]), np.log(Y[-10:]), 1)[0]
        assert slope == pytest.approx(2 * N - 1, abs=0.02)


def test_degenerate_limits():
    p = sweep("degenerate-N", 2)
    assert extrapolate_zero_limit(p.samples("Phi")).value == pytest.approx(2 / 3, abs=1e-2)
    assert extrapolate_zero_limit(p.samples("H")).value == pytest.approx(2.0, abs=0.02)


def test_scaling_covariance():
    f = synthetic("degenerate-N", 3)
    g = f.scaled(7.0)
    a = evaluate_radius(f, None, X0, 0.05, with_Y=False)
    b = evaluate_radius(g, None, X0, 0.05, with_Y=False)
    assert b.get("J") == pytest.approx(49 * a.get("J"), rel=1e-10)
    for k in ("D", "Z", "V", "H"):
        assert b.get(k) == pytest.approx(a.get(k), rel=1e-10, abs=1e-14)


def test_csv_and_json_layout():
    p = sweep("degenerate-N", 2)
    lines = p.to_csv().splitlines()
    assert lines[0].split(",") == list(COLUMNS)
    assert len(lines) == 41
    doc = json.loads(p.to_json())
    assert list(doc["records"][0]) == list(COLUMNS)
    assert doc["center"] == [1.0, 0.0]


def test_extrapolation_recovers_line():
    r = np.geomspace(1e-4, 1e-1, 30)
    lim = extrapolate_zero_limit(list(zip(r, 0.5 + 3.0 * r)))
    assert lim.value == pytest.approx(0.5, abs=1e-12)
    assert lim.slope == pytest.approx(3.0, rel=1e-9)
    with pytest.raises(InsufficientDataError):
        extrapolate_zero_limit([(0.1, 1.0), (0.2, 1.0)])
