"""Command-line entry point: ``stagflat {synth,analyze,verify,blowup,classify}``."""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .blowup import (directional_residual, fit_homogeneity, limit_profile_distance,
                     rescale_phi, rescale_psi32)
from .classifier import (ClassifierConfig, classify_stagnation_point, detect_stagnation_points,
                         flat_set_finiteness_probe)
from .errors import (ConfigError, DegenerateDenominatorError, InvalidSpecError, ParseError,
                     StagflatError, WindowError)
from .field import (EffectiveVorticity, PROFILE_NAMES, Point2, SyntheticProfileSpec,
                    VorticityModel, linear_vorticity, load_grid, make_synthetic, write_grid,
                    zero_vorticity)
from .functionals import AnalysisWindow, admissible_radius, extrapolate_zero_limit, profile_sweep
from .identities import (check_energy_identity, check_frequency_derivative, check_frequency_forms,
                         check_rellich_identity, check_weiss_derivative)
from .quadrature import QuadratureSpec
from .svg import line_plot

log = logging.getLogger("stagflat")

OUT_ENV = "STAGFLAT_OUT"
FORMATS = ("csv", "json", "svg")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_TOLERANCES = {
    "energy": 1e-8,
    "rellich": 1e-8,
    "weiss-derivative": 1e-4,
    "frequency-forms": 1e-8,
    "frequency-derivative": 1e-4,
}


@dataclass
class RunConfig:
    command: str
    profile: Optional[str] = "degenerate-N"
    N: int = 2
    x0: float = 1.0
    grid: Optional[Path] = None
    vorticity: str = "zero"
    C: float = 0.0
    table: Optional[Path] = None
    rmax: Optional[float] = None
    q: float = 0.8
    count: int = 40
    quadrature: QuadratureSpec = dc_field(default_factory=QuadratureSpec)
    tol: Optional[float] = None
    margin: float = 0.25
    integer_tol: float = 0.1
    out: Path = Path("stagflat-out")
    formats: tuple = FORMATS
    nx: int = 201
    ny: int = 201
    grid_format: str = "text"
    frame_radius: float = 1e-2

    def validate(self):
        if self.grid is None:
            if self.profile not in PROFILE_NAMES or self.profile == "custom-homogeneous":
                raise ConfigError(f"unknown profile {self.profile!r}")
        elif not self.grid.is_file():
            raise ConfigError(f"grid file {self.grid} does not exist")
        if not (math.isfinite(self.x0) and self.x0 > 0):
            raise ConfigError("x0 must be positive")
        if self.vorticity not in ("zero", "linear", "table", "effective"):
            raise ConfigError(f"unknown vorticity model {self.vorticity!r}")
        if self.vorticity == "table" and (self.table is None or not self.table.is_file()):
            raise ConfigError("vorticity table file missing")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tolerance must be positive")
        if self.rmax is not None and not self.rmax > 0:
            raise ConfigError("rmax must be positive")
        if self.count < 1 or not (0 < self.q < 1):
            raise ConfigError("radius grid needs count >= 1 and 0 < q < 1")
        if any(f not in FORMATS for f in self.formats):
            raise ConfigError(f"formats must be drawn from {','.join(FORMATS)}")
        if self.nx < 4 or self.ny < 4:
            raise ConfigError("grid sizes must be >= 4")
        if self.grid_format not in ("text", "csv"):
            raise ConfigError("grid format must be text or csv")
        return self


# -- configuration ----------------------------------------------------------------------

def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _formats(raw: str) -> tuple:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def load_config(path: Optional[str], command: str) -> RunConfig:
    cfg = RunConfig(command)
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except configparser.Error as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    base = Path(path).resolve().parent

    def rel(p):
        return (base / p) if not Path(p).is_absolute() else Path(p)

    grid = _get(cp, "field", "grid", str, None)
    table = _get(cp, "vorticity", "table", str, None)
    q = cfg.quadrature
    quad = QuadratureSpec(
        _get(cp, "quadrature", "n_theta", int, q.n_theta),
        _get(cp, "quadrature", "n_rho", int, q.n_rho),
        _get(cp, "quadrature", "n_disk_theta", int, q.n_disk_theta),
        _get(cp, "quadrature", "c_min", float, q.c_min),
    )
    return replace(
        cfg,
        profile=_get(cp, "field", "profile", str, cfg.profile),
        N=_get(cp, "field", "N", int, cfg.N),
        x0=_get(cp, "field", "x0", float, cfg.x0),
        grid=rel(grid) if grid else None,
        grid_format=_get(cp, "field", "grid_format", str, cfg.grid_format),
        vorticity=_get(cp, "vorticity", "model", str, cfg.vorticity),
        C=_get(cp, "vorticity", "C", float, cfg.C),
        table=rel(table) if table else None,
        rmax=_get(cp, "window", "rmax", float, cfg.rmax),
        q=_get(cp, "window", "q", float, cfg.q),
        count=_get(cp, "window", "count", int, cfg.count),
        quadrature=quad,
        tol=_get(cp, "tolerances", "tol", float, cfg.tol),
        margin=_get(cp, "tolerances", "margin", float, cfg.margin),
        integer_tol=_get(cp, "tolerances", "integer_tol", float, cfg.integer_tol),
        frame_radius=_get(cp, "tolerances", "frame_radius", float, cfg.frame_radius),
        out=Path(_get(cp, "output", "dir", str, str(cfg.out))),
        formats=_get(cp, "output", "formats", _formats, cfg.formats),
        nx=_get(cp, "synth", "nx", int, cfg.nx),
        ny=_get(cp, "synth", "ny", int, cfg.ny),
    )


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config, args.command)
    if args.config is None or not _config_sets_out(args.config):
        env = os.environ.get(OUT_ENV)
        if env:
            cfg = replace(cfg, out=Path(env))
    overrides = {}
    for key in ("profile", "N", "x0", "vorticity", "C", "rmax", "tol", "q"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.grid is not None:
        overrides["grid"] = Path(args.grid)
    if args.radii is not None:
        overrides["count"] = args.radii
    if args.out is not None:
        overrides["out"] = Path(args.out)
    if args.format is not None:
        overrides["formats"] = _formats(args.format)
    return replace(cfg, **overrides).validate()


def _config_sets_out(path) -> bool:
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error:
        return False
    return cp.has_option("output", "dir")


# -- shared plumbing ------------------------------------------------------------------------

def build_field(cfg: RunConfig):
    if cfg.grid is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            f = load_grid(cfg.grid, cfg.grid_format if cfg.grid.suffix != ".csv" else "csv")
        for w in caught:
            log.warning("%s", w.message)
        return f
    try:
        return make_synthetic(SyntheticProfileSpec(cfg.profile, x0=cfg.x0, N=cfg.N))
    except InvalidSpecError as exc:
        raise ConfigError(str(exc)) from None


def _table_vorticity(path: Path) -> VorticityModel:
    try:
        data = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ParseError(f"{path}: vorticity table needs two columns (z, f) and >= 2 rows")
    z, fz = data[:, 0], data[:, 1]
    if np.any(np.diff(z) <= 0) or z[0] != 0.0:
        raise ParseError(f"{path}: z must start at 0 and increase")
    Fz = cumulative_trapezoid(fz, z, initial=0.0)
    return VorticityModel(lambda s: np.interp(s, z, fz, right=0.0),
                          lambda s: np.interp(s, z, Fz, right=Fz[-1]),
                          C=float(np.max(np.abs(fz[1:] / z[1:]))), z0=float(z[-1]),
                          name=path.name)


def build_vorticity(cfg: RunConfig, field):
    if cfg.vorticity == "zero":
        return zero_vorticity()
    if cfg.vorticity == "linear":
        return linear_vorticity(cfg.C)
    if cfg.vorticity == "effective":
        return EffectiveVorticity(field)
    return _table_vorticity(cfg.table)


def center_of(cfg: RunConfig) -> Point2:
    return Point2(cfg.x0, 0.0)


def analysis_window(cfg: RunConfig, field) -> AnalysisWindow:
    return AnalysisWindow.build(field, cfg.x0, cfg.q, cfg.count, cfg.rmax)


def _write(cfg: RunConfig, name: str, text: str) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    path.write_text(text)
    print(f"wrote {path}")
    return path


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


# -- commands ------------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    if cfg.grid is not None:
        raise ConfigError("synth builds a synthetic profile; do not pass a grid")
    f = build_field(cfg)
    suffix = "csv" if cfg.grid_format == "csv" else "grid"
    tag = f"{cfg.profile}-{cfg.N}" if cfg.profile == "degenerate-N" else cfg.profile
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = write_grid(cfg.out / f"{tag}.{suffix}", f, f.window, cfg.nx, cfg.ny, cfg.grid_format)
    print(f"wrote {path}")
    return EXIT_OK


PLOTTED = (("Phi", "Phi(r)"), ("D", "D(r)"), ("V", "V(r)"), ("H", "H(r)"))


def cmd_analyze(cfg: RunConfig) -> int:
    f = build_field(cfg)
    vort = build_vorticity(cfg, f)
    prof = profile_sweep(f, vort, analysis_window(cfg, f), cfg.quadrature)
    if "csv" in cfg.formats:
        _write(cfg, "profile.csv", prof.to_csv())
    if "json" in cfg.formats:
        _write(cfg, "profile.json", prof.to_json())
    if "svg" in cfg.formats:
        for key, title in PLOTTED:
            _write(cfg, f"{key}.svg", line_plot(prof.radii, prof.column(key), title, key))
    flagged = sum(1 for rec in prof.records if rec.diagnostics)
    if flagged:
        log.warning("%d of %d radii carry diagnostics (see the diagnostics column)", flagged,
                    len(prof.records))
    for key in ("Phi", "H"):
        s = prof.samples(key)
        if len(s) >= 4:
            lim = extrapolate_zero_limit(s)
            print(f"{key}(0+) = {lim.value:.6f} +- {lim.uncertainty:.2e}")
    return EXIT_OK


def verification_radii(cfg: RunConfig) -> list:
    rmax = cfg.rmax if cfg.rmax is not None else 0.1
    return [rmax, 0.5 * rmax, 0.2 * rmax]


def run_verification(cfg: RunConfig, field, vort) -> list:
    c = center_of(cfg)
    spec = cfg.quadrature
    delta = admissible_radius(field, c)
    tol = (lambda name: cfg.tol) if cfg.tol is not None else DEFAULT_TOLERANCES.get
    psi0 = float(field.values(np.array(c.x), np.array(0.0)))
    entries = []
    for r in verification_radii(cfg):
        checks = [
            ("energy", lambda: check_energy_identity(field, vort, c, r, spec, tol("energy"))),
            ("rellich", lambda: check_rellich_identity(field, vort, c, r, spec, tol("rellich"))),
            ("weiss-derivative", lambda: check_weiss_derivative(
                field, vort, c, r, spec=spec, tol=tol("weiss-derivative"), delta=delta)),
            ("frequency-forms", lambda: check_frequency_forms(
                field, vort, c, r, spec, tol("frequency-forms"))),
            ("frequency-derivative", lambda: check_frequency_derivative(
                field, vort, c, r, spec=spec, tol=tol("frequency-derivative"), delta=delta)),
        ]
        for name, run in checks:
            if name == "frequency-derivative" and psi0 > 0:
                # the H' identity presumes a stagnation point, psi(X0) = 0
                entries.append({"name": name, "radius": r, "skipped": True,
                                "note": f"center not in zero set (psi={psi0:.3g})"})
                continue
            try:
                entries.append(run().as_dict())
            except DegenerateDenominatorError as exc:
                entries.append({"name": name, "radius": r, "skipped": True, "note": str(exc)})
    return entries


def cmd_verify(cfg: RunConfig) -> int:
    f = build_field(cfg)
    vort = build_vorticity(cfg, f)
    entries = run_verification(cfg, f, vort)
    failed = [e for e in entries if not e.get("skipped") and not e["excluded"] and not e["pass"]]
    for e in entries:
        if e.get("skipped"):
            status = "SKIP"
        elif e["excluded"]:
            status = "EXCL"
        else:
            status = "PASS" if e["pass"] else "FAIL"
        rel = e.get("rel_residual")
        extra = f"rel={rel:.3e} tol={e['tol']:.1e}" if rel is not None else e["note"]
        print(f"{status} {e['name']:<28} r={e['radius']:.4g}  {extra}")
    doc = {"center": [cfg.x0, 0.0], "vorticity": cfg.vorticity, "checks": entries,
           "failures": len(failed)}
    if "json" in cfg.formats:
        _write(cfg, "verify.json", _dump(doc))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_blowup(cfg: RunConfig) -> int:
    f = build_field(cfg)
    vort = build_vorticity(cfg, f)
    c = center_of(cfg)
    window = analysis_window(cfg, f)
    est = fit_homogeneity(f, c, window.radii, vort, cfg.quadrature)
    r_frame = min(cfg.frame_radius, 0.5 * window.delta)
    doc = {"center": [c.x, c.y], "homogeneity": est.as_dict(), "frame_radius": r_frame}
    N = int(round(est.degree))
    distances = {}
    if N >= 1:
        frame = rescale_phi(f, c, r_frame, cfg.quadrature)
        distances[f"frequency-{N}"] = limit_profile_distance(frame, "frequency", N)
        doc["directional_residual"] = directional_residual(frame, N)
    distances["corner"] = limit_profile_distance(rescale_psi32(f, c, r_frame), "corner")
    doc["profile_distances"] = distances
    print(f"degree = {est.degree:.6f} (slope {est.slope_degree:.6f}), residual {est.residual:.2e}"
          + (f", flags: {', '.join(est.flags)}" if est.flags else ""))
    if "json" in cfg.formats:
        _write(cfg, "blowup.json", _dump(doc))
    return EXIT_FAIL if est.flags else EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    f = build_field(cfg)
    vort = build_vorticity(cfg, f)
    ccfg = ClassifierConfig(q=cfg.q, count=cfg.count, r_max=cfg.rmax, margin=cfg.margin,
                            integer_tol=cfg.integer_tol, frame_radius=cfg.frame_radius,
                            spec=cfg.quadrature)
    points = sorted(detect_stagnation_points(f), key=lambda p: p.x)
    reports = [classify_stagnation_point(f, vort, p, ccfg) for p in points]
    w = f.window
    summary = flat_set_finiteness_probe(reports, w.xmax - w.xmin)
    for rep in reports:
        print(rep.summary())
    if not reports:
        print("no stagnation points detected")
    doc = {"reports": [r.to_dict() for r in reports], "flat_set": summary.as_dict()}
    if "json" in cfg.formats:
        _write(cfg, "classify.json", _dump(doc))
    return EXIT_FAIL if any(r.label == "Unresolved" for r in reports) else EXIT_OK


COMMANDS = {"synth": cmd_synth, "analyze": cmd_analyze, "verify": cmd_verify,
            "blowup": cmd_blowup, "classify": cmd_classify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stagflat", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key-value config file with sections")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./stagflat-out)")
    p.add_argument("--format", help="comma list drawn from csv,json,svg")
    p.add_argument("--radii", type=int, help="number of radii in the geometric grid")
    p.add_argument("--rmax", type=float, help="largest radius")
    p.add_argument("--tol", type=float, help="tolerance applied to every identity check")
    p.add_argument("--profile", help="synthetic profile name")
    p.add_argument("--N", type=int, help="integer degree of the degenerate profile")
    p.add_argument("--x0", type=float, help="base point (x0, 0)")
    p.add_argument("--grid", help="sampled field file instead of a synthetic profile")
    p.add_argument("--vorticity", help="zero | linear | table | effective")
    p.add_argument("--C", type=float, help="slope of the linear vorticity")
    p.add_argument("--q", type=float, help="ratio of the geometric radius grid")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, InvalidSpecError, ParseError, WindowError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except StagflatError as exc:
        log.error("%s", exc)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
