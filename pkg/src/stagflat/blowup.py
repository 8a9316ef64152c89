"""Blow-up rescalings, homogeneity fits and limit-profile distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDenominatorError, DomainError, InsufficientDataError
from .field import Point2, ScalarField2D
from .functionals import BallSample, extrapolate_zero_limit, frequency_D
from .quadrature import DEFAULT_SPEC, circle_nodes, disk_nodes


@dataclass(frozen=True)
class BlowupFrame:
    """phi_r(X) = psi(X0 + r X) / normalization on the unit ball.

    ``normalization`` is sqrt(r^-1 * boundary integral of psi^2/x) for the
    boundary-normalised family and r^(3/2) for the fixed-power rescaling.
    """

    field: ScalarField2D
    center: Point2
    r: float
    normalization: float
    kind: str = "phi"

    def __post_init__(self):
        if not self.normalization > 0:
            raise DegenerateDenominatorError("blow-up normalization must be positive")

    def _map(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if np.any(X * X + Y * Y > 1.0 + 1e-12):
            raise DomainError("rescaled field lives on the unit ball")
        return self.center.x + self.r * X, self.center.y + self.r * Y

    def value(self, X, Y):
        x, y = self._map(X, Y)
        return self.field.values(x, y) / self.normalization

    def gradient(self, X, Y):
        x, y = self._map(X, Y)
        gx, gy = self.field.gradients(x, y)
        k = self.r / self.normalization
        return k * gx, k * gy

    def weighted_boundary_norm(self, n: int = 512) -> float:
        """Boundary integral over the unit circle of phi^2 / (x0 + r X)."""
        c = circle_nodes(Point2(0.0, 0.0), 1.0, n)
        phi = self.value(c.x, c.y)
        return float(np.dot(phi * phi / (self.center.x + self.r * c.x), c.weights))


def rescale_phi(field: ScalarField2D, center: Point2, r: float, spec=DEFAULT_SPEC) -> BlowupFrame:
    b = BallSample(field, None, center, r, spec)
    b.require_denominator()
    return BlowupFrame(field, center, r, math.sqrt(b.den / r), "phi")


def rescale_psi32(field: ScalarField2D, center: Point2, r: float) -> BlowupFrame:
    if not field.window.contains_disk(center, r):
        raise DomainError("ball leaves the window")
    return BlowupFrame(field, center, r, r**1.5, "psi32")


# -- candidate limit profiles -----------------------------------------------------

def corner_profile(x0: float, X, Y):
    rho = np.hypot(X, Y)
    th = np.clip(np.arctan2(Y, X), math.pi / 6, 5 * math.pi / 6)
    return math.sqrt(2.0) * x0 / 3.0 * rho**1.5 * np.cos(1.5 * (th - 0.5 * math.pi))


def frequency_profile(x0: float, N: int, X, Y):
    """sqrt(x0) rho^N |sin(N theta)| / sqrt(pi/2), zero below the axis."""
    rho = np.hypot(X, Y)
    th = np.clip(np.arctan2(Y, X), 0.0, math.pi)
    val = math.sqrt(x0) * rho**N * np.abs(np.sin(N * th)) / math.sqrt(0.5 * math.pi)
    return np.where(Y > 0, val, 0.0)


def _unit_boundary_norm(fun, x0, n=512):
    c = circle_nodes(Point2(0.0, 0.0), 1.0, n)
    v = fun(c.x, c.y)
    return math.sqrt(float(np.dot(v * v / x0, c.weights)))


def limit_profile_distance(frame: BlowupFrame, profile: str, N: Optional[int] = None,
                           n_rho: int = 32, n_theta: int = 512) -> float:
    """Relative L2 distance on the annulus 1/4 <= |X| <= 3/4.

    ``profile`` is "corner" or "frequency"; for boundary-normalised frames
    the candidate is scaled to unit weighted boundary norm (weight 1/x0).
    """
    x0 = frame.center.x
    if profile == "corner":
        cand = lambda X, Y: corner_profile(x0, X, Y)
    elif profile == "frequency":
        if N is None or N < 1:
            raise ValueError("frequency profile needs N >= 1")
        cand = lambda X, Y: frequency_profile(x0, N, X, Y)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    scale = 1.0
    if frame.kind == "phi":
        scale = 1.0 / _unit_boundary_norm(cand, x0)
    d = disk_nodes(Point2(0.0, 0.0), 0.75, n_rho, n_theta, inner=0.25)
    phi = frame.value(d.x, d.y)
    ref = scale * cand(d.x, d.y)
    num = float(np.dot((phi - ref) ** 2, d.weights))
    den = float(np.dot(ref * ref, d.weights))
    return math.sqrt(num / den) if den > 0 else math.inf


def directional_residual(frame: BlowupFrame, N: float, inner: float = 0.25, outer: float = 0.75,
                         n_rho: int = 32, n_theta: int = 512) -> float:
    """Annulus integral of (1/x0) |X|^-5 (grad phi . X - N phi)^2."""
    d = disk_nodes(Point2(0.0, 0.0), outer, n_rho, n_theta, inner=inner)
    phi = frame.value(d.x, d.y)
    gx, gy = frame.gradient(d.x, d.y)
    radial = gx * d.x + gy * d.y
    return float(np.dot((radial - N * phi) ** 2 / d.rho**5, d.weights)) / frame.center.x


# -- homogeneity -----------------------------------------------------------------------

@dataclass(frozen=True)
class HomogeneityEstimate:
    degree: float
    residual: float
    method: str
    radius_range: tuple
    slope_degree: float
    plateau_degree: float
    plateau_sigma: float
    flags: tuple = ()

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be non-negative")

    def as_dict(self) -> dict:
        return {
            "degree": self.degree, "residual": self.residual, "method": self.method,
            "radius_range": list(self.radius_range), "slope_degree": self.slope_degree,
            "plateau_degree": self.plateau_degree, "plateau_sigma": self.plateau_sigma,
            "flags": list(self.flags),
        }


def homogeneity_from_samples(radii, den, D, disagreement_tol: float = 0.05,
                             center_value: float = 0.0) -> HomogeneityEstimate:
    """Combine the boundary-norm slope and the frequency plateau.

    radii, den (= boundary integral of psi^2/x) and D are parallel sequences.
    """
    r = np.asarray(radii, dtype=float)
    den = np.asarray(den, dtype=float)
    D = np.asarray(D, dtype=float)
    ok = (den > 0) & np.isfinite(D)
    if ok.sum() < 6:
        raise InsufficientDataError("homogeneity fit needs >= 6 radii with J > 0")
    r, den, D = r[ok], den[ok], D[ok]
    logs = np.log(r)
    coef, res, *_ = np.polyfit(logs, 0.5 * np.log(den), 1, full=True)
    slope_degree = float(coef[0]) - 0.5
    fitted = np.polyval(coef, logs)
    slope_resid = float(np.max(np.abs(fitted - 0.5 * np.log(den))))
    plateau = extrapolate_zero_limit(list(zip(r, D)))
    flags = []
    gap = abs(slope_degree - plateau.value)
    if gap > disagreement_tol:
        flags.append("methods-disagree")
    if center_value > 0:
        flags.append("center-not-in-zero-set")
    if plateau.value < 1.5 - disagreement_tol:
        flags.append("degree-below-3/2")
    residual = max(gap, plateau.uncertainty, slope_resid)
    return HomogeneityEstimate(plateau.value, residual, "frequency-plateau",
                               (float(r.min()), float(r.max())), slope_degree, plateau.value,
                               plateau.uncertainty, tuple(flags))


def fit_homogeneity(field: ScalarField2D, center: Point2, radii: Sequence[float], vort=None,
                    spec=DEFAULT_SPEC) -> HomogeneityEstimate:
    """Frequency plateau (primary) and boundary-norm slope about ``center``.

    ``center`` may be any interior point; that is how the non-homogeneous
    probes are run.
    """
    dens, Ds, used = [], [], []
    for r in radii:
        b = BallSample(field, vort, center, r, spec)
        if b.den / r**4 < 1e-30:
            continue
        dens.append(b.den)
        Ds.append(frequency_D(field, vort, center, r, spec, sample=b).volume)
        used.append(r)
    center_value = float(field.values(np.array(center.x), np.array(center.y)))
    return homogeneity_from_samples(used, dens, Ds, center_value=center_value)


# -- exclusion witness --------------------------------------------------------------------

def _one_sided_slopes(fun, theta: float, h: float = 1e-5):
    # second-order one-sided differences on each side of theta
    right = (-3 * fun(theta) + 4 * fun(theta + h) - fun(theta + 2 * h)) / (2 * h)
    left = (3 * fun(theta) - 4 * fun(theta - h) + fun(theta - 2 * h)) / (2 * h)
    return left, right


def nodal_ray_laplacian(N: int, signed: bool = False) -> float:
    """Jump of the angular derivative of rho^N |sin N theta| across theta = pi/N at rho = 1.

    This is the line density (per rho^(N-1)) of the singular part of the
    Laplacian on the nodal ray; it equals 2N. ``signed=True`` runs the
    smooth control rho^N sin(N theta), whose jump is 0.
    """
    if int(N) != N or N < 2:
        raise DomainError("nodal_ray_laplacian needs an integer N >= 2")
    N = int(N)
    if signed:
        fun = lambda t: math.sin(N * t)
    else:
        fun = lambda t: abs(math.sin(N * t))
    left, right = _one_sided_slopes(fun, math.pi / N)
    return right - left
