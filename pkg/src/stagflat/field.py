"""Stream-function fields on a window of the right half-plane.

A field is either an analytic closure (value and, optionally, gradient and
Laplacian in closed form) or a sampled grid with bicubic interpolation.
All evaluation routines accept numpy arrays and are pure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainError, InvalidSpecError, InvariantViolationError, ParseError

ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
GradFn = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidSpecError(f"non-finite point ({self.x}, {self.y})")

    def as_tuple(self) -> tuple:
        return (float(self.x), float(self.y))


@dataclass(frozen=True)
class Window:
    """Axis-aligned box; must sit strictly inside {x > 0}."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not self.xmin > 0:
            raise InvalidSpecError("window must lie strictly inside x > 0")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidSpecError("window bounds are not ordered")

    def contains(self, x, y, margin: float = 0.0) -> bool:
        x = np.asarray(x)
        y = np.asarray(y)
        # tiny slack so nodes placed exactly on the rim by roundoff still count
        slack = 1e-12 * max(1.0, abs(self.xmax), abs(self.ymax), abs(self.ymin))
        return bool(
            np.all(x >= self.xmin + margin - slack)
            and np.all(x <= self.xmax - margin + slack)
            and np.all(y >= self.ymin + margin - slack)
            and np.all(y <= self.ymax - margin + slack)
        )

    def contains_disk(self, center: Point2, r: float) -> bool:
        return (
            center.x - r >= self.xmin
            and center.x + r <= self.xmax
            and center.y - r >= self.ymin
            and center.y + r <= self.ymax
        )

    def distance_to_boundary(self, p: Point2) -> float:
        return min(p.x - self.xmin, self.xmax - p.x, p.y - self.ymin, self.ymax - p.y)


class ScalarField2D:
    """A stream function psi with value/gradient access.

    kind is "analytic" or "grid". gradient_mode is "analytic" (closed form
    supplied) or "central-difference" with step ``fd_step``.
    """

    def __init__(
        self,
        kind: str,
        window: Window,
        value_fn: ArrayFn,
        grad_fn: Optional[GradFn] = None,
        laplacian_fn: Optional[ArrayFn] = None,
        gradient_mode: Optional[str] = None,
        fd_step: float = 1e-5,
        spacing: Optional[float] = None,
        nonnegative: bool = True,
        name: str = "custom",
        center: Optional[Point2] = None,
    ):
        if kind not in ("analytic", "grid"):
            raise InvalidSpecError(f"unknown field kind {kind!r}")
        if gradient_mode is None:
            gradient_mode = "analytic" if grad_fn is not None else "central-difference"
        if gradient_mode == "analytic" and grad_fn is None:
            raise InvalidSpecError("analytic gradient mode needs a closed-form gradient")
        if gradient_mode not in ("analytic", "central-difference"):
            raise InvalidSpecError(f"unknown gradient mode {gradient_mode!r}")
        self.kind = kind
        self.window = window
        self._value = value_fn
        self._grad = grad_fn
        self._laplacian = laplacian_fn
        self.gradient_mode = gradient_mode
        self.fd_step = float(fd_step)
        self.spacing = spacing
        # polynomial test fields such as x^2 y change sign; they opt out
        self.nonnegative = nonnegative
        self.name = name
        self.center = center

    # -- vectorised access -------------------------------------------------
    def _check(self, x, y, margin=0.0):
        if not self.window.contains(x, y, margin):
            raise DomainError(
                f"evaluation outside window {self.window} (margin {margin:g})"
            )

    def values(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check(x, y)
        return np.asarray(self._value(x, y), dtype=float) * np.ones_like(x)

    def gradients(self, x, y, h: Optional[float] = None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.gradient_mode == "analytic" and h is None:
            self._check(x, y)
            gx, gy = self._grad(x, y)
            ones = np.ones_like(x)
            return np.asarray(gx, dtype=float) * ones, np.asarray(gy, dtype=float) * ones
        step = self.fd_step if h is None else float(h)
        self._check(x, y, margin=step)
        gx = (self._value(x + step, y) - self._value(x - step, y)) / (2 * step)
        gy = (self._value(x, y + step) - self._value(x, y - step)) / (2 * step)
        return gx, gy

    def has_laplacian(self) -> bool:
        return self._laplacian is not None

    def laplacian(self, x, y) -> np.ndarray:
        if self._laplacian is None:
            raise InvalidSpecError("field has no closed-form Laplacian")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check(x, y)
        return np.asarray(self._laplacian(x, y), dtype=float) * np.ones_like(x)

    def scaled(self, c: float) -> "ScalarField2D":
        """Return c * psi (c > 0)."""
        if not c > 0:
            raise InvalidSpecError("scale factor must be positive")
        v, g, lap = self._value, self._grad, self._laplacian
        return ScalarField2D(
            self.kind,
            self.window,
            lambda x, y: c * v(x, y),
            None if g is None else (lambda x, y: tuple(c * np.asarray(t) for t in g(x, y))),
            None if lap is None else (lambda x, y: c * lap(x, y)),
            gradient_mode=self.gradient_mode,
            fd_step=self.fd_step,
            spacing=self.spacing,
            nonnegative=self.nonnegative,
            name=f"{c:g}*{self.name}",
            center=self.center,
        )

    def __repr__(self):
        return f"ScalarField2D({self.name!r}, kind={self.kind}, window={self.window})"


# -- point operations --------------------------------------------------------

def evaluate(field: ScalarField2D, p: Point2) -> float:
    return float(field.values(np.array(p.x), np.array(p.y)))


def grad(field: ScalarField2D, p: Point2, h: Optional[float] = None) -> np.ndarray:
    gx, gy = field.gradients(np.array(p.x), np.array(p.y), h=h)
    return np.array([float(gx), float(gy)])


def positivity_indicator(field: ScalarField2D, p, threshold: float = 0.0):
    """1 where psi > threshold, else 0. Accepts a Point2 or an (x, y) pair of arrays."""
    if isinstance(p, Point2):
        return int(evaluate(field, p) > threshold)
    x, y = p
    return (field.values(x, y) > threshold).astype(float)


def default_vorticity_step(field: ScalarField2D) -> float:
    # analytic fields have no grid; treat them as if sampled at spacing 0.1
    spacing = field.spacing if field.spacing is not None else 0.1
    return max(1e-5, 1e-3 * spacing)


def effective_vorticity(field: ScalarField2D, x, y, h: Optional[float] = None) -> np.ndarray:
    """g = -div((1/x) grad psi) / x by second-order central differences.

    The flux form keeps the stencil conservative:
    d/dx(psi_x / x) ~ [(psi(x+h)-psi(x))/(x+h/2) - (psi(x)-psi(x-h))/(x-h/2)] / h^2.
    """
    step = default_vorticity_step(field) if h is None else float(h)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    field._check(x, y, margin=step)
    v = field._value
    c = v(x, y)
    flux_x = ((v(x + step, y) - c) / (x + 0.5 * step) - (c - v(x - step, y)) / (x - 0.5 * step)) / step**2
    flux_y = (v(x, y + step) - 2.0 * c + v(x, y - step)) / (step**2 * x)
    return -(flux_x + flux_y) / x


# -- vorticity ----------------------------------------------------------------

@dataclass(frozen=True)
class VorticityModel:
    """Nonlinearity f(z) with primitive F(z) = int_0^z f."""

    f: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    C: float = 0.0
    z0: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if self.C < 0 or not self.z0 > 0:
            raise InvalidSpecError("growth constant must be >= 0 and z0 > 0")
        if abs(float(self.F(np.array(0.0)))) > 0:
            raise InvalidSpecError("primitive F must vanish at 0")

    def check_growth(self, samples: int = 257) -> bool:
        z = np.linspace(0.0, self.z0, samples)[1:]
        fz = np.asarray(self.f(z), dtype=float) * np.ones_like(z)
        return bool(np.all(np.abs(fz) <= self.C * z * (1 + 1e-12) + 1e-300))

    def source(self, x, y, psi):
        return np.asarray(self.f(psi), dtype=float) * np.ones_like(psi)

    def primitive(self, psi):
        return np.asarray(self.F(psi), dtype=float) * np.ones_like(psi)

    @property
    def has_primitive(self) -> bool:
        return True


def zero_vorticity() -> VorticityModel:
    return VorticityModel(lambda z: np.zeros_like(z), lambda z: np.zeros_like(z), 0.0, 1.0, "zero")


def linear_vorticity(C: float) -> VorticityModel:
    C = float(C)
    return VorticityModel(lambda z: C * z, lambda z: 0.5 * C * z * z, abs(C), 1.0, f"linear({C:g})")


class EffectiveVorticity:
    """Position-dependent source g(X) that the given field satisfies exactly.

    Uses the closed-form Laplacian when the field has one
    (g = -lap psi / x^2 + psi_x / x^3), otherwise the finite-difference
    operator :func:`effective_vorticity`. There is no primitive F, so
    callers fall back to the volume form of K.
    """

    has_primitive = False
    name = "effective"

    def __init__(self, field: ScalarField2D, prefer_analytic: bool = True, h: Optional[float] = None):
        self.field = field
        self.analytic = prefer_analytic and field.has_laplacian() and field.gradient_mode == "analytic"
        self.h = h

    def source(self, x, y, psi=None):
        if self.analytic:
            lap = self.field.laplacian(x, y)
            gx, _ = self.field.gradients(x, y)
            return -lap / x**2 + gx / x**3
        return effective_vorticity(self.field, x, y, self.h)


# -- synthetic profiles --------------------------------------------------------

PROFILE_NAMES = (
    "stokes-corner",
    "degenerate-N",
    "weighted-harmonic-x2",
    "weighted-harmonic-x2y",
    "zero",
    "custom-homogeneous",
)


@dataclass(frozen=True)
class SyntheticProfileSpec:
    name: str
    x0: float = 1.0
    N: int = 2
    degree: Optional[float] = None
    angular: Optional[Callable[[np.ndarray], np.ndarray]] = dc_field(default=None, compare=False)
    window: Optional[Window] = None

    def validate(self):
        if self.name not in PROFILE_NAMES:
            raise InvalidSpecError(f"unknown profile {self.name!r}")
        if not (math.isfinite(self.x0) and self.x0 > 0):
            raise InvalidSpecError("x0 must be positive")
        if self.name == "degenerate-N" and (int(self.N) != self.N or self.N < 2):
            raise InvalidSpecError("degenerate-N needs an integer N >= 2")
        if self.name == "custom-homogeneous" and (self.degree is None or self.angular is None):
            raise InvalidSpecError("custom-homogeneous needs degree and angular function")


def default_window(x0: float) -> Window:
    w = 0.9 * x0
    return Window(x0 - w, x0 + w, -w, w)


POLY_WINDOW = Window(0.01, 10.0, -10.0, 10.0)


def _polar(x, y, x0):
    dx = x - x0
    return dx, y, np.hypot(dx, y), np.arctan2(y, dx)


def _stokes_corner(x0: float, window: Window) -> ScalarField2D:
    amp = math.sqrt(2.0) * x0 / 3.0
    lo, hi = math.pi / 6, 5 * math.pi / 6

    def value(x, y):
        _, _, rho, th = _polar(x, y, x0)
        inside = (th > lo) & (th < hi)
        # exact zero off the open wedge; cos(-pi/2) alone leaves +-1e-17 residue
        return np.where(inside, amp * rho**1.5 * np.cos(1.5 * (th - 0.5 * math.pi)), 0.0)

    def gradient(x, y):
        dx, dy, rho, th = _polar(x, y, x0)
        inside = (th >= lo) & (th <= hi) & (rho > 0)
        phase = 1.5 * (th - 0.5 * math.pi)
        safe = np.where(rho > 0, rho, 1.0)
        d_rho = 1.5 * amp * np.sqrt(safe) * np.cos(phase)
        d_th = -1.5 * amp * np.sqrt(safe) * np.sin(phase)  # (1/rho) d/dtheta
        c, s = dx / safe, dy / safe
        gx = np.where(inside, d_rho * c - d_th * s, 0.0)
        gy = np.where(inside, d_rho * s + d_th * c, 0.0)
        return gx, gy

    return ScalarField2D(
        "analytic", window, value, gradient, lambda x, y: np.zeros_like(x),
        name="stokes-corner", center=Point2(x0, 0.0),
    )


def _degenerate(x0: float, N: int, window: Window) -> ScalarField2D:
    # int_0^pi sin^2(N t) dt = pi/2 for every integer N >= 1
    amp = math.sqrt(x0) / math.sqrt(0.5 * math.pi)

    def value(x, y):
        _, _, rho, th = _polar(x, y, x0)
        thc = np.clip(th, 0.0, math.pi)
        return np.where(y > 0, amp * rho**N * np.abs(np.sin(N * thc)), 0.0)

    def gradient(x, y):
        dx, dy, rho, th = _polar(x, y, x0)
        thc = np.clip(th, 0.0, math.pi)
        sign = np.sign(np.sin(N * thc))
        # on a nodal ray take the limit from larger angles: sign (-1)^k
        k = np.rint(N * thc / math.pi)
        sign = np.where(sign == 0, np.where(k % 2 == 0, 1.0, -1.0), sign)
        safe = np.where(rho > 0, rho, 1.0)
        base = amp * N * safe ** (N - 1)
        # grad(rho^N sin N t) = N rho^(N-1) (sin((N-1)t), cos((N-1)t))
        gx = sign * base * np.sin((N - 1) * thc)
        gy = sign * base * np.cos((N - 1) * thc)
        keep = (y >= 0) & (rho > 0)
        return np.where(keep, gx, 0.0), np.where(keep, gy, 0.0)

    return ScalarField2D(
        "analytic", window, value, gradient, lambda x, y: np.zeros_like(x),
        name=f"degenerate-{N}", center=Point2(x0, 0.0),
    )


def _custom_homogeneous(x0, degree, angular, window):
    lam = float(degree)
    dt = 1e-6

    def value(x, y):
        _, _, rho, th = _polar(x, y, x0)
        return rho**lam * angular(th)

    def gradient(x, y):
        dx, dy, rho, th = _polar(x, y, x0)
        safe = np.where(rho > 0, rho, 1.0)
        a = angular(th)
        da = (angular(th + dt) - angular(th - dt)) / (2 * dt)
        d_rho = lam * safe ** (lam - 1) * a
        d_th = safe ** (lam - 1) * da
        c, s = dx / safe, dy / safe
        return (np.where(rho > 0, d_rho * c - d_th * s, 0.0),
                np.where(rho > 0, d_rho * s + d_th * c, 0.0))

    return ScalarField2D("analytic", window, value, gradient, name=f"homogeneous({lam:g})",
                         center=Point2(x0, 0.0))


def make_synthetic(spec: SyntheticProfileSpec) -> ScalarField2D:
    spec.validate()
    x0 = float(spec.x0)
    name = spec.name
    if name == "stokes-corner":
        return _stokes_corner(x0, spec.window or default_window(x0))
    if name == "degenerate-N":
        return _degenerate(x0, int(spec.N), spec.window or default_window(x0))
    if name == "custom-homogeneous":
        return _custom_homogeneous(x0, spec.degree, spec.angular, spec.window or default_window(x0))
    if name == "zero":
        z = lambda x, y: np.zeros_like(x)
        return ScalarField2D("analytic", spec.window or default_window(x0), z,
                             lambda x, y: (np.zeros_like(x), np.zeros_like(x)), z,
                             name="zero", center=Point2(x0, 0.0))
    window = spec.window or POLY_WINDOW
    if name == "weighted-harmonic-x2":
        return ScalarField2D(
            "analytic", window, lambda x, y: x * x,
            lambda x, y: (2 * x, np.zeros_like(x)), lambda x, y: 2.0 + 0 * x,
            name="x2",
        )
    # x^2 y solves div((1/x) grad psi) = 0 but is negative below the axis
    return ScalarField2D(
        "analytic", window, lambda x, y: x * x * y,
        lambda x, y: (2 * x * y, x * x), lambda x, y: 2 * y,
        nonnegative=False, name="x2y",
    )


# -- grid files ------------------------------------------------------------------

def _parse_numbers(line: str, lineno: int) -> list:
    parts = line.replace(",", " ").split()
    try:
        return [float(t) for t in parts]
    except ValueError as exc:
        raise ParseError(f"line {lineno}: {exc}") from None


def load_grid(path, format: Optional[str] = None, check_bottom: bool = True) -> ScalarField2D:
    """Read a sampled stream function.

    Text layout: header ``nx ny xmin xmax ymin ymax`` then ny rows of nx
    values (row j is y_j, increasing). CSV is the same with comma
    separators and the header written as a ``#`` comment.
    """
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "text")
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(path.read_text().splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise ParseError(f"{path}: empty grid file")
    lineno, head = lines[0]
    if fmt == "csv":
        if not head.startswith("#"):
            raise ParseError(f"{path}: CSV grid needs a '#' header line")
        head = head.lstrip("#")
    header = _parse_numbers(head, lineno)
    if len(header) != 6:
        raise ParseError(f"{path}: header needs 6 numbers, got {len(header)}")
    nx, ny = int(header[0]), int(header[1])
    if nx != header[0] or ny != header[1] or nx < 4 or ny < 4:
        raise ParseError(f"{path}: nx, ny must be integers >= 4")
    xmin, xmax, ymin, ymax = header[2:]
    rows = [_parse_numbers(ln, i) for i, ln in lines[1:] if not ln.startswith("#")]
    if len(rows) != ny or any(len(r) != nx for r in rows):
        raise ParseError(f"{path}: expected {ny} rows of {nx} values")
    data = np.array(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite sample")
    if np.any(data < 0):
        raise InvariantViolationError(f"{path}: negative stream-function sample")
    try:
        window = Window(xmin, xmax, ymin, ymax)
    except InvalidSpecError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if check_bottom and np.max(data[0]) > 0:
        warnings.warn("grid is not zero on its bottom edge; psi = 0 far below the axis is unverified")
    return grid_field(window, data, name=path.name)


def grid_field(window: Window, data: np.ndarray, name: str = "grid") -> ScalarField2D:
    ny, nx = data.shape
    xs = np.linspace(window.xmin, window.xmax, nx)
    ys = np.linspace(window.ymin, window.ymax, ny)
    spline = RectBivariateSpline(xs, ys, data.T, kx=3, ky=3, s=0)
    spacing = min(xs[1] - xs[0], ys[1] - ys[0])

    def value(x, y):
        return spline.ev(x, y)

    return ScalarField2D(
        "grid", window, value, gradient_mode="central-difference",
        fd_step=1e-2 * spacing, spacing=spacing, name=name,
    )


def sample_grid(field: ScalarField2D, window: Window, nx: int, ny: int) -> np.ndarray:
    xs = np.linspace(window.xmin, window.xmax, nx)
    ys = np.linspace(window.ymin, window.ymax, ny)
    X, Y = np.meshgrid(xs, ys)
    return field.values(X, Y)


def write_grid(path, field: ScalarField2D, window: Window, nx: int, ny: int,
               format: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "text")
    data = sample_grid(field, window, nx, ny)
    if field.nonnegative:
        data = np.maximum(data, 0.0)  # roundoff only; profiles are >= 0
    sep = "," if fmt == "csv" else " "
    head = sep.join([str(nx), str(ny)] + [repr(float(v)) for v in
                                           (window.xmin, window.xmax, window.ymin, window.ymax)])
    out = ["# " + head if fmt == "csv" else head]
    out += [sep.join(repr(float(v)) for v in row) for row in data]
    path.write_text("\n".join(out) + "\n")
    return path
