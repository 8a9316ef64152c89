"""Circle, disk and improper radial integrals.

Angular rules are trapezoid rules on the midpoint lattice
theta_i = (i + 1/2) * 2 pi / n. With n even this lattice never touches the
rays theta = k pi / N of the degenerate profiles and is symmetric under
theta -> pi - theta, which keeps odd integrands (x - x0) exactly cancelling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad_vec

from .errors import DomainError, InvalidSpecError
from .field import Point2, Window


@dataclass(frozen=True)
class QuadratureSpec:
    n_theta: int = 512
    n_rho: int = 64
    n_disk_theta: int = 256
    c_min: float = 1e-3
    monitor: bool = True

    def __post_init__(self):
        if self.n_theta < 16 or self.n_theta % 2:
            raise InvalidSpecError("n_theta must be even and >= 16")
        if self.n_disk_theta < 16 or self.n_disk_theta % 2:
            raise InvalidSpecError("disk angular count must be even and >= 16")
        if self.n_rho < 2:
            raise InvalidSpecError("n_rho must be >= 2")
        if not (0 < self.c_min <= 0.1):
            raise InvalidSpecError("c_min must lie in (0, 0.1]")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.n_theta * factor, self.n_rho * factor,
                              self.n_disk_theta * factor, self.c_min, self.monitor)


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class Nodes:
    """Quadrature nodes; ux, uy is the outward radial unit vector."""

    x: np.ndarray
    y: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    rho: np.ndarray
    weights: np.ndarray
    center: Point2


def _angles(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (2 * math.pi / n)


def circle_nodes(center: Point2, r: float, n: int) -> Nodes:
    th = _angles(n)
    c, s = np.cos(th), np.sin(th)
    return Nodes(center.x + r * c, center.y + r * s, c, s, np.full(n, float(r)),
                 np.full(n, r * 2 * math.pi / n), center)


_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


_TEMPLATES: dict = {}


def _unit_disk(n_rho: int, n_theta: int):
    key = (n_rho, n_theta)
    if key not in _TEMPLATES:
        s, w = _gauss_legendre(n_rho)
        frac = 0.5 * (s + 1.0)
        th = _angles(n_theta)
        c = np.tile(np.cos(th), n_rho)
        sn = np.tile(np.sin(th), n_rho)
        fr = np.repeat(frac, n_theta)
        wt = np.repeat(0.5 * w, n_theta) * (2 * math.pi / n_theta)
        _TEMPLATES[key] = (fr, c, sn, wt)
    return _TEMPLATES[key]


def disk_nodes(center: Point2, r: float, n_rho: int, n_theta: int,
               inner: float = 0.0) -> Nodes:
    """Gauss-Legendre in rho on [inner, r] times trapezoid in theta, weight rho."""
    fr, c, sn, wt = _unit_disk(n_rho, n_theta)
    rho = inner + (r - inner) * fr
    return Nodes(center.x + rho * c, center.y + rho * sn, c, sn, rho,
                 (r - inner) * wt * rho, center)


_MIRRORS: dict = {}


def mirror_permutation(n_rho: int, n_theta: int) -> np.ndarray:
    """Index map of disk nodes under x - x0 -> -(x - x0).

    The midpoint lattice is closed under theta -> pi - theta for even
    n_theta, so the reflected node is another node of the same ring.
    """
    key = (n_rho, n_theta)
    if key not in _MIRRORS:
        i = np.arange(n_theta)
        ring = (n_theta // 2 - 1 - i) % n_theta
        _MIRRORS[key] = (np.arange(n_rho)[:, None] * n_theta + ring[None, :]).reshape(-1)
    return _MIRRORS[key]


def _require_inside(window: Optional[Window], center: Point2, r: float):
    if not r > 0:
        raise DomainError("radius must be positive")
    if window is not None and not window.contains_disk(center, r):
        raise DomainError(f"ball of radius {r:g} about {center.as_tuple()} leaves the window")


def _apply(g, nodes: Nodes):
    vals = np.asarray(g(nodes), dtype=float)
    return vals @ nodes.weights if vals.ndim > 1 else float(np.dot(vals, nodes.weights))


def circle_integral(g: Callable[[Nodes], np.ndarray], center: Point2, r: float,
                    spec: QuadratureSpec = DEFAULT_SPEC, window: Optional[Window] = None,
                    discontinuous: bool = False):
    """r * sum_i g(center + r e_i) * dtheta.

    ``discontinuous`` doubles the node count (integrands carrying an
    indicator converge only at first order).
    """
    _require_inside(window, center, r)
    n = spec.n_theta * (2 if discontinuous else 1)
    return _apply(g, circle_nodes(center, r, n))


def disk_integral(g: Callable[[Nodes], np.ndarray], center: Point2, r: float,
                  spec: QuadratureSpec = DEFAULT_SPEC, window: Optional[Window] = None,
                  discontinuous: bool = False, inner: float = 0.0):
    _require_inside(window, center, r)
    n = spec.n_disk_theta * (2 if discontinuous else 1)
    return _apply(g, disk_nodes(center, r, spec.n_rho, n, inner))


# -- improper radial integrals -----------------------------------------------

@dataclass(frozen=True)
class RadialIntegral:
    value: np.ndarray | float
    body: np.ndarray | float
    tail: np.ndarray | float
    tail_fraction: float
    exponent: np.ndarray | float
    evaluations: int
    warning: Optional[str] = None


def improper_radial_integral(Q: Callable[[float], np.ndarray | float], r: float, k: int,
                             spec: QuadratureSpec = DEFAULT_SPEC, tol: float = 1e-10,
                             scale=None) -> RadialIntegral:
    """int_0^r t^(-k) Q(t) dt.

    Adaptive Gauss-Kronrod (scipy quad_vec) in log t on [c_min r, r]; the
    piece (0, c_min r) is a power law A t^p fitted to
    t^(-k) Q(t) over the two smallest decades. Q may be vector valued.

    ``scale`` (same shape as Q) is a per-component magnitude, typically
    the integral of the absolute integrand at t = r. Components are
    integrated in units of it, so an integrand that is pure roundoff
    (odd about the center, say) cannot stall the adaptive driver.
    """
    if k not in (3, 4, 5):
        raise InvalidSpecError("exponent k must be 3, 4 or 5")
    if not r > 0:
        raise DomainError("radius must be positive")
    seen = {}
    if scale is None:
        unit = 1.0
    else:
        unit = np.asarray(scale, dtype=float) * r ** (1 - k)
        unit = np.where(unit > 0, unit, 1.0)

    def integrand_log(u):
        # substitution t = e^u turns power laws into smooth exponentials
        t = math.exp(u)
        val = np.asarray(Q(t), dtype=float) * t ** (1 - k)
        seen[u] = val
        return val / unit

    lo = r * spec.c_min
    a, b = math.log(lo), math.log(r)
    eps_abs = 0.0 if scale is None else tol
    body, _err = quad_vec(integrand_log, a, b, epsabs=eps_abs, epsrel=tol, norm="max",
                          limit=200)
    body = np.asarray(body, dtype=float) * unit

    # power-law tail A t^p fitted to t^-k Q(t) over the two lowest decades
    fit_hi = a + 2 * math.log(10.0)
    us = np.array(sorted(u for u in seen if u <= fit_hi + 1e-12))
    if len(us) < 2:
        extra = np.linspace(a, min(fit_hi, b), 5)
        for u in extra:
            integrand_log(float(u))
        us = np.array(sorted(u for u in seen if u <= fit_hi + 1e-12))
    vs = np.array([seen[u] for u in us]) / np.exp(us).reshape((-1,) + (1,) * body.ndim)
    vs2 = vs.reshape(len(us), -1)
    body_flat = np.abs(body.reshape(-1))
    if scale is None:
        ref = np.full(body_flat.shape, float(np.max(body_flat)) if body_flat.size else 0.0)
    else:
        ref = np.abs(np.asarray(unit, dtype=float) * np.ones_like(body)).reshape(-1) * (b - a)
    tails, exps = [], []
    warning = None
    for j in range(vs2.shape[1]):
        col = vs2[:, j]
        nz = np.abs(col) > 0
        negligible = body_flat[j] <= 1e-10 * ref[j]
        if nz.sum() < 2:
            tails.append(0.0)
            exps.append(float("inf"))
            continue
        p, logA = np.polyfit(us[nz], np.log(np.abs(col[nz])), 1)
        exps.append(float(p))
        if negligible:
            # roundoff-level component (e.g. an integrand odd about x0)
            tails.append(0.0)
            continue
        if np.any(np.sign(col[nz]) != np.sign(col[nz][0])):
            warning = warning or "integrand changes sign in tail-fit range"
        if p <= -1.0:
            warning = f"non-integrable tail: fitted exponent {p:.3f} <= -1"
            tails.append(float("nan"))
            continue
        sign = float(np.sign(col[nz][0]))
        tails.append(sign * math.exp(logA) * lo ** (p + 1.0) / (p + 1.0))
    shape = body.shape
    tail = np.array(tails).reshape(shape)
    exponent = np.array(exps).reshape(shape)
    finite_tail = np.where(np.isfinite(tail), tail, 0.0)
    value = body + finite_tail
    mag = np.abs(value)
    frac = np.where(mag > 1e-10 * max(float(np.max(mag)) if mag.size else 0.0, 1e-300),
                    np.abs(finite_tail) / np.where(mag > 0, mag, 1.0), 0.0)
    tail_fraction = float(np.max(frac)) if np.all(np.isfinite(tail)) else float("inf")
    if not shape:
        return RadialIntegral(float(value), float(body), float(tail), tail_fraction,
                              float(exponent), len(seen), warning)
    return RadialIntegral(value, body, tail, tail_fraction, exponent, len(seen), warning)
