"""Monotonicity and frequency functionals about a stagnation candidate.

Everything is assembled from circle/disk quadrature in :mod:`quadrature`.
Notation: X0 = (x0, 0), s = x - x0, chi = indicator of {psi > 0},
``den(r)`` = boundary integral of psi^2 / x over the circle of radius r.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field as dc_field, asdict
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateDenominatorError, InsufficientDataError, InvalidSpecError,
                     StagflatError, WindowError)
from .field import Point2, ScalarField2D, VorticityModel, EffectiveVorticity
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, circle_nodes, disk_nodes, mirror_permutation,
                         improper_radial_integral)

DENOMINATOR_FLOOR = 1e-30

COLUMNS = ("r", "I", "J", "K", "I1", "I2", "J1", "Phi", "M", "D", "V", "Vtilde", "Z", "H", "Y",
           "diagnostics")


@dataclass(frozen=True)
class AnalysisWindow:
    center: Point2
    delta: float
    radii: tuple

    def __post_init__(self):
        if self.center.y != 0.0 or not self.center.x > 0:
            raise InvalidSpecError("stagnation candidate must be (x0, 0) with x0 > 0")
        if not self.delta > 0:
            raise WindowError("admissible radius is not positive")
        rs = np.asarray(self.radii, dtype=float)
        if rs.size == 0 or np.any(rs <= 0) or np.any(rs >= self.delta):
            raise WindowError("every grid radius must lie in (0, delta)")
        if np.any(np.diff(rs) >= 0):
            raise InvalidSpecError("radius grid must be strictly decreasing")

    @classmethod
    def build(cls, field: ScalarField2D, x0: float, q: float = 0.8, count: int = 40,
              r_max: Optional[float] = None) -> "AnalysisWindow":
        center = Point2(float(x0), 0.0)
        if not field.window.contains(center.x, center.y):
            raise WindowError("stagnation candidate lies outside the field window")
        delta = admissible_radius(field, center)
        if r_max is None:
            r_max = 0.5 * delta
        if not (0 < q < 1):
            raise InvalidSpecError("grid ratio q must lie in (0, 1)")
        if not (0 < r_max < delta):
            raise WindowError(f"r_max={r_max:g} must lie in (0, delta={delta:g})")
        if count < 1:
            raise InvalidSpecError("radius count must be positive")
        radii = tuple(float(r_max * q**j) for j in range(count))
        return cls(center, delta, radii)


def admissible_radius(field: ScalarField2D, center: Point2) -> float:
    """delta = min{x0, distance to the window boundary} / 2."""
    return 0.5 * min(center.x, field.window.distance_to_boundary(center))


@dataclass(frozen=True)
class CoreFunctionals:
    r: float
    I: float
    J: float
    K: float
    I1: float
    I2: float
    J1: float

    def __post_init__(self):
        if self.J < 0:
            raise StagflatError("J must be non-negative")


# -- sampling ------------------------------------------------------------------

class BallSample:
    """Quadrature data of one ball; computed once and shared by all functionals."""

    def __init__(self, field: ScalarField2D, vort, center: Point2, r: float,
                 spec: QuadratureSpec = DEFAULT_SPEC, threshold: float = 0.0):
        if not field.window.contains_disk(center, r):
            raise WindowError(f"ball of radius {r:g} leaves the window")
        self.r = r
        self.center = center
        self.x0 = center.x
        self.spec = spec
        vort = vort if vort is not None else _ZERO
        self._vort = vort
        # boundary
        c = circle_nodes(center, r, spec.n_theta)
        psi = field.values(c.x, c.y)
        gx, gy = field.gradients(c.x, c.y)
        s = c.rho * c.ux
        psi_nu = gx * c.ux + gy * c.uy
        g = vort.source(c.x, c.y, psi)
        w = c.weights
        self.den = float(np.dot(psi * psi / c.x, w))
        self.b_psi_nu = float(np.dot(psi * psi_nu / c.x, w))
        self.b_nu_nu = float(np.dot(psi_nu * psi_nu / c.x, w))
        self.J1 = float(np.dot(s / c.x**2 * psi * psi, w))
        self.b_x_psi_g = float(np.dot(c.x * psi * g, w))
        self._circle = (c, psi, psi_nu)
        if vort.has_primitive:
            self.b_F = float(np.dot(c.x * vort.primitive(psi), w))
        # interior, smooth integrands
        d = disk_nodes(center, r, spec.n_rho, spec.n_disk_theta)
        psi_d = field.values(d.x, d.y)
        dgx, dgy = field.gradients(d.x, d.y)
        grad2 = dgx * dgx + dgy * dgy
        sd = d.rho * d.ux
        gd = vort.source(d.x, d.y, psi_d)
        wd = d.weights
        self.grad_energy = float(np.dot(grad2 / d.x, wd))
        self.source_energy = float(np.dot(d.x * psi_d * gd, wd))
        self.I1 = float(-np.dot(sd / d.x**2 * grad2, wd))
        self.vol_psi2 = float(np.dot(psi_d * psi_d / d.x, wd))
        self._disk = (d, psi_d, grad2, sd)
        if vort.has_primitive:
            Fd = vort.primitive(psi_d)
            self.K = (r * (2 * self.b_F - self.b_x_psi_g)
                      + float(np.dot((2 * self.x0 - 6 * d.x) * Fd, wd)))
        else:
            radial = d.rho * (dgx * d.ux + dgy * d.uy)  # (X - X0) . grad psi
            self.K = float(2 * np.dot(d.x * gd * radial, wd)) - r * self.b_x_psi_g
        # interior, indicator integrands on the doubled angular lattice
        e = disk_nodes(center, r, spec.n_rho, 2 * spec.n_disk_theta)
        chi = (field.values(e.x, e.y) > threshold).astype(float)
        ypos = np.maximum(e.y - center.y, 0.0)
        se = e.rho * e.ux
        we = e.weights
        self.x_y_chi = float(np.dot(e.x * e.y * chi, we))
        # antisymmetrised over mirror pairs so a symmetric chi gives exactly 0
        mirror = mirror_permutation(spec.n_rho, 2 * spec.n_disk_theta)
        self.I2 = 0.5 * float(np.dot(se * e.y * (chi - chi[mirror]), we))
        self.empty_upper = float(np.dot(self.x0 * ypos * (1.0 - chi), we))
        # odd in s, so the same mirror pairing applies; for deep profiles den ~ r^(2N+1)
        # and an unpaired sum leaves roundoff that V would amplify
        self.s_ypos_chi = 0.5 * float(np.dot(se * ypos * (chi - chi[mirror]), we))
        # y+ (x0 - x chi) = x0 y+ (1 - chi) - s y+ chi
        self.density_gap = self.empty_upper - self.s_ypos_chi
        self.abs_s_ypos = float(np.dot(np.abs(se) * ypos, we))
        self.chi_count_boundary = _indicator_changes(field, center, r, spec, threshold)

    @property
    def volume_energy(self) -> float:
        return self.grad_energy - self.source_energy

    def core(self) -> CoreFunctionals:
        r = self.r
        return CoreFunctionals(
            r=r,
            I=(self.volume_energy + self.x_y_chi) / r**3,
            J=self.den / r**4,
            K=self.K,
            I1=self.I1,
            I2=self.I2,
            J1=self.J1,
        )

    def require_denominator(self):
        if self.den / self.r**4 < DENOMINATOR_FLOOR:
            raise DegenerateDenominatorError(
                f"J({self.r:g}) = {self.den / self.r**4:.3e} below {DENOMINATOR_FLOOR:g}")


def _indicator_changes(field, center, r, spec, threshold) -> int:
    c = circle_nodes(center, r, 2 * spec.n_theta)
    chi = field.values(c.x, c.y) > threshold
    return int(np.count_nonzero(chi != np.roll(chi, 1)))


class _Zero:
    has_primitive = True

    def source(self, x, y, psi):
        return np.zeros_like(psi)

    def primitive(self, psi):
        return np.zeros_like(psi)


_ZERO = _Zero()


def radial_tolerance(field: ScalarField2D) -> float:
    """Target accuracy of improper radial integrals.

    Interpolated grid data is only piecewise smooth in t, so asking the
    adaptive rule for more than the interpolation accuracy just burns
    subdivisions.
    """
    return 1e-6 if field.kind == "grid" else 1e-10


def axis_terms(field: ScalarField2D, center: Point2, t: float,
               spec: QuadratureSpec = DEFAULT_SPEC, threshold: float = 0.0,
               magnitudes: bool = False) -> np.ndarray:
    """(I1(t), I2(t), J1(t)) with only the quadrature those three need.

    With ``magnitudes`` the integrals of the absolute integrands are
    returned instead; they set the roundoff scale of each component.
    """
    op = np.abs if magnitudes else (lambda a: a)
    c = circle_nodes(center, t, spec.n_theta)
    psi = field.values(c.x, c.y)
    J1 = float(np.dot(op(c.rho * c.ux) / c.x**2 * psi * psi, c.weights))
    d = disk_nodes(center, t, spec.n_rho, spec.n_disk_theta)
    gx, gy = field.gradients(d.x, d.y)
    I1 = float(np.dot(op(-d.rho * d.ux) / d.x**2 * (gx * gx + gy * gy), d.weights))
    e = disk_nodes(center, t, spec.n_rho, 2 * spec.n_disk_theta)
    chi = (field.values(e.x, e.y) > threshold).astype(float)
    if magnitudes:
        I2 = float(np.dot(np.abs(e.rho * e.ux * e.y) * chi, e.weights))
    else:
        mirror = mirror_permutation(spec.n_rho, 2 * spec.n_disk_theta)
        I2 = 0.5 * float(np.dot(e.rho * e.ux * e.y * (chi - chi[mirror]), e.weights))
    return np.array([I1, I2, J1])


@dataclass(frozen=True)
class AxisIntegrals:
    """int_0^r t^-4 I1, int_0^r t^-4 I2, int_0^r t^-5 J1 with tail diagnostics."""

    I1: float
    I2: float
    J1: float
    tail_fraction: float
    warning: Optional[str]


def axis_integrals(field, center, r, spec=DEFAULT_SPEC, threshold=0.0) -> AxisIntegrals:
    # t^-5 J1 = t^-4 (J1 / t): one vector-valued pass with k = 4
    def Q(t):
        a = axis_terms(field, center, t, spec, threshold)
        a[2] /= t
        return a

    mags = axis_terms(field, center, r, spec, threshold, magnitudes=True)
    mags[2] /= r
    res = improper_radial_integral(Q, r, 4, spec, tol=radial_tolerance(field), scale=mags)
    v = np.asarray(res.value)
    return AxisIntegrals(float(v[0]), float(v[1]), float(v[2]), res.tail_fraction, res.warning)


# -- named functionals -----------------------------------------------------------

def core_functionals(field, vort, center: Point2, r: float, spec=DEFAULT_SPEC,
                     delta: Optional[float] = None) -> CoreFunctionals:
    if delta is not None and not (0 < r < delta):
        raise WindowError(f"r = {r:g} outside (0, delta = {delta:g})")
    return BallSample(field, vort, center, r, spec).core()


def weiss_energy(core: CoreFunctionals) -> float:
    return core.I - 1.5 * core.J


@dataclass(frozen=True)
class FrequencyD:
    volume: float
    boundary: float
    residual: float


def frequency_D(field, vort, center, r, spec=DEFAULT_SPEC, sample: Optional[BallSample] = None
                ) -> FrequencyD:
    b = sample or BallSample(field, vort, center, r, spec)
    b.require_denominator()
    vol = b.r * b.volume_energy / b.den
    bd = b.r * b.b_psi_nu / b.den
    return FrequencyD(vol, bd, abs(vol - bd) / (1 + max(abs(vol), abs(bd))))


def V_of_r(field, center, r, spec=DEFAULT_SPEC, sample=None, axis=None) -> float:
    b = sample or BallSample(field, None, center, r, spec)
    b.require_denominator()
    ax = axis or axis_integrals(field, center, r, spec)
    num = r * b.density_gap + r**4 * (ax.I1 + ax.I2) + 1.5 * r**4 * ax.J1
    return num / b.den


def tildeV(field, center, r, spec=DEFAULT_SPEC, sample=None) -> float:
    b = sample or BallSample(field, None, center, r, spec)
    b.require_denominator()
    return r * b.empty_upper / b.den


def Z_of_r(field, center, r, spec=DEFAULT_SPEC, sample=None) -> float:
    b = sample or BallSample(field, None, center, r, spec)
    b.require_denominator()
    return b.J1 / b.den


def H_of_r(D: float, V: float) -> float:
    return D - V


def M_of_r(I: float, axis: AxisIntegrals) -> float:
    return I - (axis.I1 + axis.I2) - 1.5 * axis.J1


def Y_of_r(field, center, r, spec=DEFAULT_SPEC) -> float:
    """int_0^r t^-3 den(t) dt."""
    def Q(t):
        c = circle_nodes(center, t, spec.n_theta)
        psi = field.values(c.x, c.y)
        return float(np.dot(psi * psi / c.x, c.weights))

    return float(improper_radial_integral(Q, r, 3, spec, tol=radial_tolerance(field)).value)


# -- sweeps ------------------------------------------------------------------------

@dataclass
class RadialRecord:
    r: float
    values: dict
    diagnostics: list = dc_field(default_factory=list)

    def get(self, key, default=float("nan")):
        return self.values.get(key, default)


def evaluate_radius(field, vort, center: Point2, r: float, spec=DEFAULT_SPEC,
                    with_Y: bool = True) -> RadialRecord:
    """Every functional at one radius; errors become diagnostics."""
    rec = RadialRecord(r, {"r": r})
    try:
        b = BallSample(field, vort, center, r, spec)
    except StagflatError as exc:
        rec.diagnostics.append(f"error: {exc}")
        return rec
    core = b.core()
    rec.values.update(I=core.I, J=core.J, K=core.K, I1=core.I1, I2=core.I2, J1=core.J1,
                      Phi=weiss_energy(core))
    try:
        ax = axis_integrals(field, center, r, spec)
        rec.values["M"] = M_of_r(core.I, ax)
        rec.values["axis_tail_fraction"] = ax.tail_fraction
        if ax.warning:
            rec.diagnostics.append(f"integrability: {ax.warning}")
    except StagflatError as exc:
        ax = None
        rec.diagnostics.append(f"error: {exc}")
    try:
        d = frequency_D(field, vort, center, r, spec, sample=b)
        rec.values["D"] = d.volume
        rec.values["D_boundary"] = d.boundary
        rec.values["energy_residual"] = d.residual
        rec.values["Vtilde"] = tildeV(field, center, r, spec, sample=b)
        rec.values["Z"] = Z_of_r(field, center, r, spec, sample=b)
        if ax is not None:
            rec.values["V"] = V_of_r(field, center, r, spec, sample=b, axis=ax)
            rec.values["H"] = H_of_r(d.volume, rec.values["V"])
    except DegenerateDenominatorError as exc:
        rec.diagnostics.append(f"degenerate-denominator: {exc}")
    if with_Y:
        try:
            rec.values["Y"] = Y_of_r(field, center, r, spec)
        except StagflatError as exc:
            rec.diagnostics.append(f"error: {exc}")
    return rec


@dataclass
class RadialProfile:
    center: Point2
    records: list

    def column(self, key: str) -> np.ndarray:
        return np.array([rec.get(key) for rec in self.records], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([rec.r for rec in self.records])

    def samples(self, key: str) -> list:
        return [(rec.r, rec.get(key)) for rec in self.records if math.isfinite(rec.get(key))]

    def to_rows(self) -> list:
        rows = []
        for rec in self.records:
            row = {k: rec.get(k) for k in COLUMNS[:-1]}
            row["diagnostics"] = "; ".join(rec.diagnostics)
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.to_rows():
            w.writerow([fmt_float(row[k]) for k in COLUMNS[:-1]] + [row["diagnostics"]])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for row in self.to_rows():
            rows.append({k: (json_float(row[k]) if k != "diagnostics" else
                             [d for d in row[k].split("; ") if d]) for k in COLUMNS})
        doc = {"center": [self.center.x, self.center.y], "records": rows}
        return json.dumps(doc, indent=2) + "\n"


def fmt_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.12e}"


def json_float(v):
    v = float(v)
    return None if not math.isfinite(v) else float(f"{v:.12e}")


def profile_sweep(field, vort, window: AnalysisWindow, spec=DEFAULT_SPEC,
                  with_Y: bool = True) -> RadialProfile:
    records = [evaluate_radius(field, vort, window.center, r, spec, with_Y) for r in window.radii]
    return RadialProfile(window.center, records)


# -- limits ------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroLimit:
    value: float
    uncertainty: float
    slope: float
    residual: float
    used: int


def extrapolate_zero_limit(samples: Sequence) -> ZeroLimit:
    """Fit value = a + b r on the smallest sampled decade; return a."""
    pts = sorted((float(r), float(v)) for r, v in samples if math.isfinite(v))
    if len(pts) < 4:
        raise InsufficientDataError("need at least 4 finite samples")
    r = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    sel = r <= 10.0 * r[0] * (1 + 1e-12)
    if sel.sum() < 4:
        sel = np.zeros_like(sel)
        sel[:4] = True
    rs, vs = r[sel], v[sel]
    A = np.vstack([np.ones_like(rs), rs]).T
    (a, b), *_ = np.linalg.lstsq(A, vs, rcond=None)
    resid = float(np.max(np.abs(A @ np.array([a, b]) - vs)))
    return ZeroLimit(float(a), max(resid, abs(float(b)) * float(rs[0])), float(b), resid,
                     int(sel.sum()))
