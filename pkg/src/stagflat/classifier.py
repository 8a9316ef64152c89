"""Stagnation-point detection and singularity classification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .blowup import (homogeneity_from_samples, limit_profile_distance, nodal_ray_laplacian,
                     rescale_phi, rescale_psi32)
from .errors import InvalidSpecError, StagflatError, WindowError
from .field import Point2, ScalarField2D
from .functionals import (AnalysisWindow, BallSample, admissible_radius, extrapolate_zero_limit,
                          json_float, profile_sweep, weiss_energy)
from .quadrature import DEFAULT_SPEC, QuadratureSpec

LABELS = ("StokesCorner", "CuspOrZeroDensity", "HorizontalFlat-Excluded", "Nondegenerate",
          "Unresolved")


@dataclass(frozen=True)
class DensityCatalog:
    x0: float

    def __post_init__(self):
        if not (math.isfinite(self.x0) and self.x0 > 0):
            raise InvalidSpecError("x0 must be positive")

    @property
    def d0(self) -> float:
        return 0.0

    @property
    def d_corner(self) -> float:
        return self.x0 * math.sqrt(3.0) / 3.0

    @property
    def d_flat(self) -> float:
        return self.x0 * 2.0 / 3.0

    def candidates(self) -> dict:
        return {"zero": self.d0, "corner": self.d_corner, "flat": self.d_flat}

    def nearest(self, value: float):
        """(class name, margin).

        margin = (runner-up distance - nearest distance) / spacing of the two
        candidates, so 1 means exactly on a candidate and 0 means halfway.
        """
        ranked = sorted(self.candidates().items(), key=lambda kv: (abs(value - kv[1]), kv[1]))
        (n1, c1), (n2, c2) = ranked[0], ranked[1]
        margin = (abs(value - c2) - abs(value - c1)) / abs(c2 - c1)
        return n1, float(margin)


@dataclass
class ClassifierConfig:
    q: float = 0.8
    count: int = 40
    r_max: Optional[float] = None
    margin: float = 0.25
    gradient_screen: float = 1e-6
    integer_tol: float = 0.1
    frame_radius: float = 1e-2
    min_delta: float = 1e-4
    threshold: float = 0.0
    spec: QuadratureSpec = DEFAULT_SPEC
    quadrature_check: bool = True

    def __post_init__(self):
        if not (0 < self.margin < 1):
            raise InvalidSpecError("density margin must lie in (0, 1)")
        if self.gradient_screen <= 0 or self.integer_tol <= 0 or self.frame_radius <= 0:
            raise InvalidSpecError("classifier tolerances must be positive")


@dataclass
class StagnationPointReport:
    point: Point2
    label: str
    phi0: float = math.nan
    phi0_sigma: float = math.nan
    density_class: Optional[str] = None
    margin: float = math.nan
    H0: float = math.nan
    H0_sigma: float = math.nan
    N: Optional[int] = None
    profile_distance: float = math.nan
    nodal_jump: float = math.nan
    homogeneity: Optional[dict] = None
    diagnostics: list = dc_field(default_factory=list)

    def __post_init__(self):
        if self.label not in LABELS:
            raise InvalidSpecError(f"unknown label {self.label!r}")

    def to_dict(self) -> dict:
        return {
            "point": [self.point.x, self.point.y],
            "phi0": {"value": json_float(self.phi0), "sigma": json_float(self.phi0_sigma)},
            "density_class": self.density_class,
            "margin": json_float(self.margin),
            "H0": {"value": json_float(self.H0), "sigma": json_float(self.H0_sigma)},
            "N": self.N,
            "profile_distance": json_float(self.profile_distance),
            "nodal_jump": json_float(self.nodal_jump),
            "label": self.label,
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self) -> str:
        parts = [f"({self.point.x:.6g}, {self.point.y:.6g})", self.label]
        if math.isfinite(self.phi0):
            parts.append(f"Phi(0+)={self.phi0:.6f}+-{self.phi0_sigma:.1e}")
        if math.isfinite(self.H0):
            parts.append(f"H(0+)={self.H0:.4f}")
        if self.N is not None:
            parts.append(f"N={self.N}")
        return "  ".join(parts)


# -- detection -------------------------------------------------------------------------

def _speed2(field, x):
    gx, gy = field.gradients(x, np.zeros_like(x))
    return (gx * gx + gy * gy) / (x * x)


def detect_stagnation_points(field: ScalarField2D, n_scan: int = 401, threshold: float = 0.0,
                             edge_fraction: float = 0.02) -> list:
    """Scan y = 0 for points of the free boundary where the speed is locally minimal.

    A scan point is on the boundary when psi <= threshold there and a circle
    of one scan cell around it sees both psi > threshold and psi <= threshold.
    Within each contiguous boundary run the interior local minima of
    |grad psi|^2 / x^2 are returned; a run with none contributes its argmin.
    """
    w = field.window
    if not (w.ymin <= 0.0 <= w.ymax):
        raise WindowError("field window does not meet the axis y = 0")
    pad = edge_fraction * (w.xmax - w.xmin)
    xs = np.linspace(w.xmin + pad, w.xmax - pad, n_scan)
    h = xs[1] - xs[0]
    reach = h
    th = (np.arange(16) + 0.5) * (2 * math.pi / 16)
    cx = xs[:, None] + reach * np.cos(th)[None, :]
    cy = reach * np.sin(th)[None, :] + 0 * cx
    inside = (cx >= w.xmin) & (cx <= w.xmax) & (cy >= w.ymin) & (cy <= w.ymax)
    ring = np.full(cx.shape, np.nan)
    ring[inside] = field.values(cx[inside], cy[inside])
    center = field.values(xs, np.zeros_like(xs))
    pos = np.nansum(ring > threshold, axis=1) > 0
    nonpos = np.nansum(ring <= threshold, axis=1) > 0
    on_bdry = (center <= threshold) & pos & nonpos
    points = []
    idx = np.flatnonzero(on_bdry)
    if idx.size == 0:
        return points
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        sp = _speed2(field, xs[run])
        picks = [i for i in range(1, len(run) - 1) if sp[i] < sp[i - 1] and sp[i] <= sp[i + 1]]
        if not picks:
            # ties (e.g. zero speed on a whole stretch) resolve to the middle of the block
            low = np.flatnonzero(sp <= sp.min() * (1 + 1e-12) + 1e-300)
            blocks = np.split(low, np.flatnonzero(np.diff(low) > 1) + 1)
            picks = [int(b[len(b) // 2]) for b in blocks[:1]]
        points.extend(Point2(float(xs[run[i]]), 0.0) for i in picks)
    return points


# -- classification -----------------------------------------------------------------------

def _phi_quadrature_sigma(field, vort, center, r, spec) -> float:
    coarse = weiss_energy(BallSample(field, vort, center, r, spec).core())
    fine = weiss_energy(BallSample(field, vort, center, r, spec.refined(2)).core())
    return abs(fine - coarse)


def classify_stagnation_point(field: ScalarField2D, vort, center: Point2,
                              config: Optional[ClassifierConfig] = None,
                              profile=None) -> StagnationPointReport:
    """Label one candidate; ``profile`` may pass a precomputed radial sweep."""
    cfg = config or ClassifierConfig()
    if center.y != 0.0 or not center.x > 0:
        raise InvalidSpecError("stagnation candidate must be (x0, 0) with x0 > 0")
    x0 = center.x
    delta = admissible_radius(field, center)
    if delta < cfg.min_delta:
        raise WindowError(f"admissible radius {delta:g} below the minimum {cfg.min_delta:g}")
    psi0 = float(field.values(np.array(x0), np.array(0.0)))
    if psi0 > cfg.threshold:
        return StagnationPointReport(center, "Unresolved",
                                     diagnostics=[f"center not in zero set: psi={psi0:.3e}"])

    gx, gy = field.gradients(np.array(x0), np.array(0.0))
    speed2 = float(gx * gx + gy * gy) / (x0 * x0)
    if speed2 >= cfg.gradient_screen * delta:
        return StagnationPointReport(
            center, "Nondegenerate",
            diagnostics=[f"gradient screen: |grad psi|^2/x0^2={speed2:.6e} >= "
                         f"{cfg.gradient_screen:g}*delta"])

    if profile is None:
        window = AnalysisWindow.build(field, x0, cfg.q, cfg.count, cfg.r_max)
        profile = profile_sweep(field, vort, window, cfg.spec, with_Y=False)
    report = StagnationPointReport(center, "Unresolved")
    diag = report.diagnostics
    for rec in profile.records:
        for d in rec.diagnostics:
            if d.startswith("error") or d.startswith("degenerate"):
                diag.append(f"r={rec.r:.4e}: {d}")
    phi = extrapolate_zero_limit(profile.samples("Phi"))
    sigma = phi.uncertainty
    if cfg.quadrature_check:
        quad = _phi_quadrature_sigma(field, vort, center, float(profile.radii.min()), cfg.spec)
        diag.append(f"quadrature: Phi changes by {quad:.3e} under node doubling")
        sigma = max(sigma, quad)
    report.phi0, report.phi0_sigma = phi.value, sigma
    res = profile.column("energy_residual")
    if np.any(np.isfinite(res)):
        diag.append(f"energy identity: max residual {float(np.nanmax(np.abs(res))):.3e}")

    hs = profile.samples("H")
    if len(hs) >= 4:
        h = extrapolate_zero_limit(hs)
        report.H0, report.H0_sigma = h.value, h.uncertainty

    catalog = DensityCatalog(x0)
    cls, margin = catalog.nearest(phi.value)
    report.density_class, report.margin = cls, margin
    if margin < cfg.margin:
        diag.append(f"density margin {margin:.3f} below {cfg.margin:g}")
        return report

    r_frame = min(cfg.frame_radius, 0.5 * delta)
    if cls == "corner":
        report.profile_distance = limit_profile_distance(rescale_psi32(field, center, r_frame),
                                                         "corner")
        report.label = "StokesCorner"
    elif cls == "zero":
        report.label = "CuspOrZeroDensity"
    else:
        _frequency_analysis(field, center, profile, report, cfg, r_frame)
    return report


def _frequency_analysis(field, center, profile, report, cfg, r_frame):
    diag = report.diagnostics
    if not math.isfinite(report.H0):
        diag.append("frequency analysis: H(0+) unavailable")
        return
    N = int(round(report.H0))
    gap = abs(report.H0 - N)
    diag.append(f"frequency analysis: |H(0+) - N| = {gap:.3e}")
    rs = profile.radii
    J = profile.column("J")
    try:
        est = homogeneity_from_samples(rs, J * rs**4, profile.column("D"))
        report.homogeneity = est.as_dict()
        diag.extend(f"homogeneity flag: {f}" for f in est.flags)
    except StagflatError as exc:
        diag.append(f"homogeneity fit failed: {exc}")
    if N < 2 or gap > cfg.integer_tol:
        diag.append(f"frequency not near an integer >= 2 (tolerance {cfg.integer_tol:g})")
        return
    report.N = N
    report.profile_distance = limit_profile_distance(rescale_phi(field, center, r_frame, cfg.spec),
                                                     "frequency", N)
    report.nodal_jump = nodal_ray_laplacian(N)
    if report.nodal_jump != 0.0:
        report.label = "HorizontalFlat-Excluded"


def classify_field(field: ScalarField2D, vort, config: Optional[ClassifierConfig] = None,
                   n_scan: int = 401) -> list:
    cfg = config or ClassifierConfig()
    pts = detect_stagnation_points(field, n_scan, cfg.threshold)
    return [classify_stagnation_point(field, vort, p, cfg) for p in sorted(pts, key=lambda p: p.x)]


# -- flat-set finiteness ----------------------------------------------------------------------

@dataclass(frozen=True)
class FlatSetSummary:
    count: int
    scanned_length: float
    per_unit_length: float
    min_separation: float
    resolution: float
    separated: bool
    notes: tuple = ()

    def as_dict(self) -> dict:
        return {"count": self.count, "scanned_length": self.scanned_length,
                "per_unit_length": self.per_unit_length,
                "min_separation": json_float(self.min_separation),
                "resolution": self.resolution, "separated": self.separated,
                "notes": list(self.notes)}


def flat_set_finiteness_probe(reports: Sequence[StagnationPointReport], scanned_length: float,
                              resolution: float = 1e-2) -> FlatSetSummary:
    """Count flat-labelled points and check they are pairwise separated by ``resolution``."""
    if scanned_length <= 0 or resolution <= 0:
        raise InvalidSpecError("scanned length and resolution must be positive")
    xs = sorted(r.point.x for r in reports if r.label == "HorizontalFlat-Excluded")
    gaps = np.diff(xs) if len(xs) > 1 else np.array([])
    min_sep = float(gaps.min()) if gaps.size else math.inf
    notes = []
    for a, b in zip(xs, xs[1:]):
        if b - a < resolution:
            notes.append(f"flat candidates at x={a:.6g} and x={b:.6g} are closer than the "
                         f"resolution {resolution:g}; a blow-up at scale 2|X_m - X_0| = "
                         f"{2 * (b - a):.3g} would see both")
    if not xs:
        notes.append("no flat candidates")
    return FlatSetSummary(len(xs), float(scanned_length), len(xs) / scanned_length, min_sep,
                          float(resolution), not any("closer" in n for n in notes), tuple(notes))
