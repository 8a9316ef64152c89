import math

import numpy as np
import pytest

from stagflat.errors import DomainError, InvalidSpecError
from stagflat.field import Point2, SyntheticProfileSpec, Window, make_synthetic
from stagflat.quadrature import (DEFAULT_SPEC, QuadratureSpec, circle_integral, disk_integral,
                                 improper_radial_integral, mirror_permutation, disk_nodes)

C = Point2(1.0, 0.0)


def test_spec_validation():
    for bad in (dict(n_theta=15), dict(n_theta=17), dict(c_min=0.0), dict(c_min=0.2),
                dict(n_disk_theta=10), dict(n_rho=1)):
        with pytest.raises(InvalidSpecError):
            QuadratureSpec(**bad)


def test_circumference_and_area():
    assert circle_integral(lambda n: np.ones_like(n.x), C, 0.5) == pytest.approx(math.pi, abs=1e-12)
    assert disk_integral(lambda n: np.ones_like(n.x), C, 1.0) == pytest.approx(math.pi, abs=1e-12)


def test_circle_integral_of_weighted_x2():
    # psi = x^2, g = psi^2/x = x^3; closed form 2 pi r (x0^3 + 3/2 x0 r^2)
    r = 0.25
    exact = 2 * math.pi * r * (1 + 1.5 * r * r)
    got = circle_integral(lambda n: n.x**3, C, r)
    assert exact == pytest.approx(1.71806, abs=1e-5)
    assert got == pytest.approx(exact, rel=1e-13)


def test_density_integrals():
    half = disk_integral(lambda n: np.maximum(n.y, 0.0), C, 1.0, discontinuous=True)
    # y+ has a kink on y = 0, so the midpoint lattice is second-order there, not exact
    assert half == pytest.approx(2 / 3, abs=1e-5)
    errs = [disk_integral(lambda n: np.maximum(n.y, 0.0), C, 1.0, QuadratureSpec(n_theta=m, n_disk_theta=m),
                          discontinuous=True) - 2 / 3 for m in (128, 256, 512)]
    assert all(3.5 < a / b < 4.5 for a, b in zip(errs, errs[1:]))

    def wedge(n):
        th = np.arctan2(n.y, n.x - 1.0)
        return np.maximum(n.y, 0.0) * ((th > math.pi / 6) & (th < 5 * math.pi / 6))

    got = disk_integral(wedge, C, 1.0, discontinuous=True)
    # first-order at the jump; the default doubled lattice lands within 2e-3
    assert got == pytest.approx(math.sqrt(3) / 3, abs=2e-3)


def test_indicator_circle_integral_converges_first_order():
    f = make_synthetic(SyntheticProfileSpec("stokes-corner"))
    # fraction of the circle inside the wedge is exactly 1/3
    exact = 2 * math.pi * 0.1 / 3
    errs = []
    for n in (64, 128, 256, 512):
        spec = QuadratureSpec(n_theta=n)
        got = circle_integral(lambda nd: (f.values(nd.x, nd.y) > 0).astype(float), C, 0.1, spec)
        errs.append(abs(got - exact))
    ratios = [a / b for a, b in zip(errs, errs[1:]) if b > 0]
    assert max(errs) > 0
    assert all(1.5 <= q <= 2.5 for q in ratios), (errs, ratios)


def test_domain_errors():
    f = make_synthetic(SyntheticProfileSpec("degenerate-N"))
    with pytest.raises(DomainError):
        circle_integral(lambda n: n.x, C, 0.95, window=f.window)
    with pytest.raises(DomainError):
        disk_integral(lambda n: n.x, C, -0.1)


def test_divergence_theorem_on_polynomial_field():
    # v = (x^3 y, x y^2): div v = 3 x^2 y + 2 x y
    r = 0.4
    vol = disk_integral(lambda n: 3 * n.x**2 * n.y + 2 * n.x * n.y + n.x**2, C, r)
    # add v2 = (x^3/3, 0) so the check is not trivially zero: div = x^2
    flux = circle_integral(lambda n: (n.x**3 * n.y + n.x**3 / 3) * n.ux + n.x * n.y**2 * n.uy, C, r)
    assert vol == pytest.approx(flux, rel=1e-8)


def test_linearity_and_sector_additivity():
    g1 = lambda n: n.x**2 * np.cos(n.y)
    g2 = lambda n: np.exp(n.y) / n.x
    a = disk_integral(lambda n: 2 * g1(n) - 3 * g2(n), C, 0.3)
    b = 2 * disk_integral(g1, C, 0.3) - 3 * disk_integral(g2, C, 0.3)
    assert a == pytest.approx(b, rel=1e-13)
    upper = disk_integral(lambda n: g1(n) * (n.y > 0), C, 0.3)
    lower = disk_integral(lambda n: g1(n) * (n.y <= 0), C, 0.3)
    assert upper + lower == pytest.approx(disk_integral(g1, C, 0.3), rel=1e-13)


def test_refinement_is_stable_on_smooth_integrands():
    g = lambda n: np.sin(3 * n.x) * np.exp(n.y) / n.x
    a = disk_integral(g, C, 0.4)
    b = disk_integral(g, C, 0.4, DEFAULT_SPEC.refined(2))
    assert abs(a - b) <= 1e-10 * abs(b)
    a = circle_integral(g, C, 0.4)
    b = circle_integral(g, C, 0.4, DEFAULT_SPEC.refined(2))
    assert abs(a - b) <= 1e-10 * abs(b)


def test_mirror_permutation_reflects_nodes():
    d = disk_nodes(C, 0.5, 8, 32)
    m = mirror_permutation(8, 32)
    assert np.allclose(d.x[m] - 1.0, -(d.x - 1.0), atol=1e-15)
    assert np.allclose(d.y[m], d.y, atol=1e-15)


# -- improper radial integrals -------------------------------------------------------

def test_power_law():
    res = improper_radial_integral(lambda t: t**5, 0.3, 4)
    assert res.value == pytest.approx(0.3**2 / 2, rel=1e-10)
    assert res.tail_fraction < 1e-5
    assert res.warning is None


def test_polynomial_perturbation():
    r = 0.3
    res = improper_radial_integral(lambda t: t**5 * (1 + t), r, 4)
    assert res.value == pytest.approx(r**2 / 2 + r**3 / 3, rel=1e-8)


def test_vector_valued_and_scaled():
    res = improper_radial_integral(lambda t: np.array([t**5, 2 * t**6]), 0.5, 5,
                                   scale=np.array([0.5**5, 2 * 0.5**6]))
    assert np.allclose(res.value, [0.5, 2 * 0.5**2 / 2], rtol=1e-9)


def test_non_integrable_tail_warns():
    res = improper_radial_integral(lambda t: t**2, 0.1, 4)
    assert res.warning is not None and "non-integrable" in res.warning
    assert math.isinf(res.tail_fraction)


def test_bad_exponent():
    with pytest.raises(InvalidSpecError):
        improper_radial_integral(lambda t: t, 0.1, 2)


def test_J1_of_degenerate_profile_has_small_tail():
    from stagflat.functionals import BallSample
    f = make_synthetic(SyntheticProfileSpec("degenerate-N", N=2))
    res = improper_radial_integral(lambda t: BallSample(f, None, C, t).J1, 0.1, 5)
    assert math.isfinite(res.value)
    assert res.tail_fraction < 0.01
