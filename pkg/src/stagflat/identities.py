"""Residual checks for the integral identities and inequalities.

Each check evaluates both sides independently (finite differences in r
against closed right-hand sides, or volume against boundary integrals) and
returns a :class:`Residual` or a decay report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDenominatorError, PreconditionError
from .field import Point2
from .functionals import (BallSample, axis_integrals, tildeV, Y_of_r, weiss_energy, V_of_r,
                          frequency_D, Z_of_r)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, circle_nodes


@dataclass(frozen=True)
class Residual:
    name: str
    radius: float
    lhs: float
    rhs: float
    tol: float
    excluded: bool = False
    note: str = ""

    @property
    def abs_residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_residual(self) -> float:
        return self.abs_residual / (1.0 + max(abs(self.lhs), abs(self.rhs)))

    @property
    def passed(self) -> bool:
        return self.rel_residual <= self.tol

    def as_dict(self) -> dict:
        return {
            "name": self.name, "radius": self.radius, "lhs": self.lhs, "rhs": self.rhs,
            "abs_residual": self.abs_residual, "rel_residual": self.rel_residual,
            "tol": self.tol, "pass": self.passed, "excluded": self.excluded, "note": self.note,
        }


# -- volume/boundary identities --------------------------------------------------

def check_energy_identity(field, vort, center: Point2, r: float, spec=DEFAULT_SPEC,
                          tol: float = 1e-6) -> Residual:
    b = BallSample(field, vort, center, r, spec)
    return Residual("energy", r, b.volume_energy, b.b_psi_nu, tol)


def rellich_sides(b: BallSample):
    d, psi, grad2, s = b._disk
    g = _source_on(b, d, psi)
    r = b.r
    integrand = (2 * psi * psi / d.x - s / d.x**2 * psi * psi
                 + (grad2 / d.x - d.x * psi * g) * (r * r - d.rho**2))
    return r * b.den, float(np.dot(integrand, d.weights))


def _source_on(b, nodes, psi):
    vort = b._vort
    if vort is None:
        return np.zeros_like(psi)
    return vort.source(nodes.x, nodes.y, psi)


def check_rellich_identity(field, vort, center: Point2, r: float, spec=DEFAULT_SPEC,
                           tol: float = 1e-8) -> Residual:
    b = BallSample(field, vort, center, r, spec)
    lhs, rhs = rellich_sides(b)
    return Residual("rellich", r, lhs, rhs, tol)


# -- derivative identities ----------------------------------------------------------

def _fd(fun, r, h, richardson=True):
    coarse = (fun(r + h) - fun(r - h)) / (2 * h)
    if not richardson:
        return coarse
    fine = (fun(r + 0.5 * h) - fun(r - 0.5 * h)) / h
    return (4 * fine - coarse) / 3


def _crosses_jump(field, center, r, h, spec) -> bool:
    counts = set()
    for rr in (r - h, r, r + h):
        c = circle_nodes(center, rr, 2 * spec.n_theta)
        chi = field.values(c.x, c.y) > 0
        counts.add(int(np.count_nonzero(chi != np.roll(chi, 1))))
    return len(counts) > 1


def _step(r, h, delta=None):
    h = 1e-3 * r if h is None else float(h)
    if not (0 < h < r):
        raise PreconditionError(f"FD step {h:g} must lie in (0, r={r:g})")
    if delta is not None and r + h >= delta:
        raise PreconditionError("r + h leaves the admissible range")
    return h


def weiss_rhs(b: BallSample) -> float:
    c, psi, psi_nu = b._circle
    r = b.r
    sq = float(np.dot((psi_nu - 1.5 * psi / r) ** 2 / c.x, c.weights))
    return 2 * sq / r**3 + (b.I1 + b.I2) / r**4 + 1.5 * b.J1 / r**5 + b.K / r**4


def check_weiss_derivative(field, vort, center: Point2, r: float, h: Optional[float] = None,
                           spec=DEFAULT_SPEC, tol: float = 1e-4, richardson: bool = True,
                           delta: Optional[float] = None) -> Residual:
    h = _step(r, h, delta)

    def phi(rr):
        return weiss_energy(BallSample(field, vort, center, rr, spec).core())

    lhs = _fd(phi, r, h, richardson)
    rhs = weiss_rhs(BallSample(field, vort, center, r, spec))
    excluded = _crosses_jump(field, center, r, h, spec)
    return Residual("weiss-derivative", r, lhs, rhs, tol, excluded,
                    "indicator topology changes across stencil" if excluded else "")


@dataclass(frozen=True)
class FrequencyState:
    r: float
    den: float
    D: float
    D_boundary: float
    V: float
    H: float
    Z: float
    K: float
    sample: BallSample


def frequency_state(field, vort, center, r, spec=DEFAULT_SPEC) -> FrequencyState:
    b = BallSample(field, vort, center, r, spec)
    b.require_denominator()
    d = frequency_D(field, vort, center, r, spec, sample=b)
    V = V_of_r(field, center, r, spec, sample=b, axis=axis_integrals(field, center, r, spec))
    return FrequencyState(r, b.den, d.volume, d.boundary, V, d.volume - V, b.J1 / b.den, b.K, b)


def frequency_rhs(state: FrequencyState) -> dict:
    """Right-hand sides of H'(r) in the D-form and the H-form.

    D enters through its boundary form r * int(psi psi_nu / x) / den, which is what the
    square completion between the two forms relies on; with it the forms agree to
    roundoff for any field, whatever vorticity is supplied.
    """
    c, psi, psi_nu = state.sample._circle
    r, den = state.r, state.den
    D = state.D_boundary
    H = D - state.V

    def square(freq):
        return float(np.dot((r * psi_nu - freq * psi) ** 2 / c.x, c.weights)) / den

    common = (2 / r) * state.V * (H - 1.5) + (1 / r) * state.Z * (H - 1.5) + state.K / den
    d_form = (2 / r) * square(D) + (2 / r) * state.V**2 + common
    h_form = (2 / r) * square(H) + common
    return {"D-form": d_form, "H-form": h_form}


def check_frequency_derivative(field, vort, center: Point2, r: float, h: Optional[float] = None,
                               form: str = "D-form", spec=DEFAULT_SPEC, tol: float = 1e-4,
                               richardson: bool = True, delta: Optional[float] = None) -> Residual:
    if form not in ("D-form", "H-form"):
        raise ValueError("form must be 'D-form' or 'H-form'")
    h = _step(r, h, delta)

    def H(rr):
        return frequency_state(field, vort, center, rr, spec).H

    lhs = _fd(H, r, h, richardson)
    rhs = frequency_rhs(frequency_state(field, vort, center, r, spec))[form]
    excluded = _crosses_jump(field, center, r, h, spec)
    return Residual(f"frequency-derivative[{form}]", r, lhs, rhs, tol, excluded,
                    "indicator topology changes across stencil" if excluded else "")


def check_frequency_forms(field, vort, center, r, spec=DEFAULT_SPEC, tol=1e-8) -> Residual:
    rhs = frequency_rhs(frequency_state(field, vort, center, r, spec))
    return Residual("frequency-forms", r, rhs["D-form"], rhs["H-form"], tol)


# -- inequalities and decay studies ------------------------------------------------

@dataclass
class KBoundReport:
    radii: list
    C0: float
    lower_bound_ok: bool
    failures: list = dc_field(default_factory=list)
    ratios: list = dc_field(default_factory=list)


def check_K_bound(field, vort, center: Point2, radii: Sequence[float], spec=DEFAULT_SPEC
                  ) -> KBoundReport:
    if hasattr(vort, "check_growth") and not vort.check_growth():
        raise PreconditionError("vorticity violates |f(z)| <= C z on (0, z0)")
    ratios, failures = [], []
    for r in radii:
        b = BallSample(field, vort, center, r, spec)
        lhs, rhs = r * b.den, b.vol_psi2
        if lhs < rhs * (1 - 1e-10) - 1e-300:
            failures.append((r, lhs, rhs))
        scale = r * b.den
        ratios.append(abs(b.K) / scale if scale > 0 else (0.0 if b.K == 0 else math.inf))
    return KBoundReport(list(radii), max(ratios) if ratios else 0.0, not failures, failures,
                        ratios)


@dataclass
class DecayReport:
    name: str
    radii: list
    residuals: list
    scales: list
    order: float
    max_small_decade: float
    vanishing: bool

    def decays(self, min_order: float = 1.0) -> bool:
        return self.vanishing or self.order >= min_order


def decay_order(radii, residuals, scales=None, floor: float = 1e-10) -> tuple:
    r = np.asarray(radii, dtype=float)
    res = np.abs(np.asarray(residuals, dtype=float))
    sc = np.ones_like(res) if scales is None else np.abs(np.asarray(scales, dtype=float))
    order = np.argsort(r)
    r, res, sc = r[order], res[order], sc[order]
    small = r <= 10 * r[0] * (1 + 1e-12)
    if small.sum() < 2:
        small[:2] = True
    max_small = float(np.max(res[small]))
    if np.all(res <= floor * np.maximum(sc, 1e-300)):
        return math.inf, max_small, True
    keep = small & (res > 0)
    if keep.sum() < 2:
        return math.inf, max_small, True
    slope = np.polyfit(np.log(r[keep]), np.log(res[keep]), 1)[0]
    return float(slope), max_small, False


def _decay(name, radii, residuals, scales):
    order, mx, van = decay_order(radii, residuals, scales)
    return DecayReport(name, list(radii), list(residuals), list(scales), order, mx, van)


def check_V_decomposition(field, center: Point2, radii: Sequence[float], spec=DEFAULT_SPEC
                          ) -> DecayReport:
    res, scales = [], []
    for r in radii:
        b = BallSample(field, None, center, r, spec)
        b.require_denominator()
        V = V_of_r(field, center, r, spec, sample=b)
        Vt = tildeV(field, center, r, spec, sample=b)
        Z = Z_of_r(field, center, r, spec, sample=b)
        res.append(V - Vt - 0.5 * Z)
        scales.append(abs(V) + abs(Vt) + abs(Z))
    return _decay("V-decomposition", radii, res, scales)


def check_small_r_identities(field, center: Point2, radii: Sequence[float], spec=DEFAULT_SPEC
                             ) -> list:
    A, B, C = [], [], []
    sa, sb, sc = [], [], []
    for r in radii:
        b = BallSample(field, None, center, r, spec)
        ax = axis_integrals(field, center, r, spec)
        A.append(b.I1 / r**4 + b.J1 / r**5)
        sa.append(abs(b.I1) / r**4 + abs(b.J1) / r**5)
        B.append(ax.I2 / r - b.s_ypos_chi / r**4)
        sb.append(b.abs_s_ypos / r**4)
        C.append(ax.J1 / r - b.J1 / r**5)
        sc.append(abs(ax.J1) / r + abs(b.J1) / r**5)
    return [_decay("r1", radii, A, sa), _decay("r2", radii, B, sb), _decay("r3", radii, C, sc)]


@dataclass
class YConvexityReport:
    radii: list
    Y: list
    Yprime: list
    convex_ok: bool
    inequality_ok: bool
    worst_convexity: float
    worst_inequality: float


def y_convexity_from_samples(radii, Y, Yprime, tol: float = 1e-6) -> YConvexityReport:
    r = np.asarray(radii, dtype=float)
    order = np.argsort(r)
    r, y, yp = r[order], np.asarray(Y, float)[order], np.asarray(Yprime, float)[order]
    f = y / np.sqrt(r)
    worst_c = 0.0
    for i in range(1, len(r) - 1):
        d1 = (f[i] - f[i - 1]) / (r[i] - r[i - 1])
        d2 = (f[i + 1] - f[i]) / (r[i + 1] - r[i])
        second = 2 * (d2 - d1) / (r[i + 1] - r[i - 1])
        scale = max(abs(f[i - 1]), abs(f[i]), abs(f[i + 1])) / r[i] ** 2
        worst_c = min(worst_c, second / scale if scale > 0 else 0.0)
    gap = yp - 1.5 * y / r
    scale = np.maximum(np.abs(yp), 1e-300)
    worst_i = float(np.min(gap / scale)) if len(r) else 0.0
    return YConvexityReport(list(r), list(y), list(yp), worst_c >= -tol, worst_i >= -tol,
                            worst_c, worst_i)


def check_Y_convexity(field, center: Point2, radii: Sequence[float], spec=DEFAULT_SPEC,
                      tol: float = 1e-6) -> YConvexityReport:
    Ys, Yp = [], []
    for r in radii:
        h = 1e-3 * r
        Ys.append(Y_of_r(field, center, r, spec))
        Yp.append((Y_of_r(field, center, r + h, spec) - Y_of_r(field, center, r - h, spec)) / (2 * h))
    return y_convexity_from_samples(radii, Ys, Yp, tol)


# -- monotonicity properties ---------------------------------------------------------

def smallest_beta(radii, J, beta_max: float = 1e3, tol: float = 1e-12) -> Optional[float]:
    """Smallest beta >= 0 with exp(beta r^2) J(r) nondecreasing in r; None if > beta_max."""
    r = np.asarray(radii, dtype=float)
    order = np.argsort(r)
    r, J = r[order], np.asarray(J, dtype=float)[order]

    def ok(beta):
        g = np.log(np.maximum(J, 1e-300)) + beta * r * r
        return bool(np.all(np.diff(g) >= -tol))

    if ok(0.0):
        return 0.0
    if not ok(beta_max):
        return None
    lo, hi = 0.0, beta_max
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def riemann_sum_V2_over_r(radii, V) -> float:
    """sum (1/r) V^2 dr on a geometric grid (dr from neighbour spacing)."""
    r = np.asarray(radii, dtype=float)
    order = np.argsort(r)
    r, v = r[order], np.asarray(V, dtype=float)[order]
    dr = np.gradient(r)
    return float(np.sum(v * v / r * dr))


def fitted_C1(radii, H) -> float:
    """Smallest C1 with H - 3/2 >= -C1 r^2 on the grid."""
    r = np.asarray(radii, dtype=float)
    return float(max(0.0, np.max(-(np.asarray(H) - 1.5) / r**2)))
