"""Report-producing pipelines behind the service endpoints.

Each pipeline takes a plain system document (the JSON dict format of
``model``), runs one analysis, and returns a RunResult: a JSON-ready
report, optional CSV artifacts, an exit code (0 certified/valid, 1 not
certified), and a one-line summary. Wall-clock numbers live only under
the report's ``timings`` key so that everything else is reproducible
byte for byte for a fixed seed.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import certify as _certify
from . import sim as _sim
from .errors import CertificationFailure, DimensionError, SystemFormatError
from .model import SectorInterval, system_from_dict
from .nnbound import gamma_search, propagate_sector
from .numcore import is_metzler

# Externally reported baseline for the bundled demonstration plant
# (an IQC-based certification method; numbers are quoted, not computed here).
EXTERNAL_BASELINE = {
    "method": "iqc_reference",
    "source": "external",
    "runtime_s": 1.03,
    "roa": {
        "type": "ellipsoid",
        "p": [[0.1675, -0.0224], [-0.0224, 0.0668]],
        "rho": 1.0,
    },
    "note": "externally reported IQC baseline for the bundled demo plant",
}

_DEMO_A = [[-7.0, 5.0], [6.0, 1.0]]
_DEMO_B = [[1.0], [2.0]]
_DEMO_C = [[1.0, 1.0]]


@dataclass
class RunResult:
    report: dict
    exit_code: int
    summary: str
    csvs: dict = field(default_factory=dict)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    return x


def _is_demo_plant(plant):
    return (plant.a.shape == (2, 2)
            and np.allclose(plant.a, _DEMO_A)
            and np.allclose(plant.b, _DEMO_B)
            and np.allclose(plant.c, _DEMO_C))


def _load(doc):
    return system_from_dict(doc)


def _sigma2_for_quadratic(system, y_probe_max, tol):
    """Upper sector slope for the quadratic route, with its provenance."""
    if system.sector is not None:
        return np.asarray(system.sector.sigma2, dtype=float), "document sector block"
    cert = _certify.nn_aizerman_certify(system, y_probe_max=y_probe_max, tol=tol)
    return np.asarray(cert.sector.gamma2, dtype=float), "certified network sector"


# --- check --------------------------------------------------------------------

def run_check(doc, metzler_tol=0.0, hurwitz_margin=1e-9):
    """Validate a system document and report its admissible scalar sector."""
    issues = []
    report = {"command": "check", "inputs": {"metzler_tol": metzler_tol,
                                             "hurwitz_margin": hurwitz_margin}}
    t0 = time.perf_counter()
    try:
        a = np.asarray(doc["A"], dtype=float)
        b = np.asarray(doc["B"], dtype=float)
        c = np.asarray(doc["C"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise SystemFormatError(f"malformed system document: {e}") from e
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        issues.append(f"A must be square, got shape {a.shape}")
    else:
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        bad = np.argwhere(off < -metzler_tol)
        for i, j in bad:
            issues.append(f"A is not Metzler at ({i}, {j}): {a[i, j]}")
        report["metzler_ok"] = len(bad) == 0
    for name, mat, ndim in (("B", b, 2), ("C", c, 2)):
        if mat.ndim != ndim:
            issues.append(f"{name} must be 2-dimensional, got shape {mat.shape}")
        elif mat.size and mat.min() < 0.0:
            i, j = np.unravel_index(np.argmin(mat), mat.shape)
            issues.append(f"{name} is not nonnegative at ({i}, {j}): {mat[i, j]}")
    report["nonnegative_ok"] = not any("nonnegative" in s for s in issues)
    system = None
    if not issues:
        try:
            # clip tolerated negatives so the strict model accepts the document
            a2 = a.copy()
            off_mask = ~np.eye(a.shape[0], dtype=bool)
            clipped = bool(np.any((a2 < 0.0) & off_mask & (a2 >= -metzler_tol)))
            if clipped:
                a2[off_mask & (a2 < 0.0)] = 0.0
                report["metzler_clipped_for_analysis"] = True
            system = _load({**doc, "A": a2.tolist()})
        except SystemFormatError as e:
            issues.append(str(e))
    if issues:
        report["valid"] = False
        report["issues"] = issues
        report["timings"] = {"total_s": time.perf_counter() - t0}
        return RunResult(report=_jsonable(report), exit_code=2,
                         summary=f"invalid system document ({len(issues)} issue(s))")
    report["valid"] = True
    report["dimensions"] = {"n": system.plant.n, "m": system.plant.m, "p": system.plant.p}
    exit_code = 0
    if system.plant.m == 1 and system.plant.p == 1:
        try:
            s1, s2 = _certify.sector_limits(system.plant, hurwitz_margin=hurwitz_margin)
            report["sector_limits"] = {"sigma1_min": s1, "sigma2_max": s2}
            summary = f"valid positive system; stable scalar sector [{s1:.6g}, {s2:.6g}]"
        except CertificationFailure as e:
            report["sector_limits"] = None
            report["sector_failure"] = {"message": str(e), **_jsonable(e.diagnostics)}
            exit_code = 1
            summary = "valid positive system but no stabilizing scalar sector"
    else:
        report["sector_limits"] = None
        report["note"] = "scalar sector limits need a single-input single-output loop"
        summary = "valid positive system (sector limits skipped: not scalar)"
    report["timings"] = {"total_s": time.perf_counter() - t0}
    return RunResult(report=_jsonable(report), exit_code=exit_code, summary=summary)


# --- sector -------------------------------------------------------------------

def run_sector(doc, y_values=None, y_max=8.0, count=9, grid=1000):
    """Tabulate certified sectors over box heights, with a direct-scan check."""
    t0 = time.perf_counter()
    system = _load(doc)
    if system.plant.p != 1:
        raise DimensionError("sector analysis needs a single plant output")
    if y_values is None:
        y_values = list(np.linspace(y_max / count, y_max, count))
    y_values = [float(y) for y in y_values]
    if any(y <= 0 for y in y_values):
        raise ValueError("box heights must be positive")
    scalar = system.plant.m == 1
    rows = []
    last_trace = []
    for y in y_values:
        sec, last_trace = propagate_sector(system.net, [y], with_trace=True)
        chords = _chord_envelope(system.net, y, grid)
        rows.append({
            "y_bar": y,
            "gamma1": sec.gamma1,
            "gamma2": sec.gamma2,
            "chord_min": chords[0],
            "chord_max": chords[1],
            "crossing_rows_per_layer": [int(st.crossing.sum()) for st in last_trace],
        })
    if system.sector is not None:
        target = system.sector
        target_source = "document sector block"
    else:
        s1, s2 = _certify.sector_limits(system.plant)
        target = SectorInterval([[s1]], [[s2]], [y_max])
        target_source = "plant sector limits"
    searched = gamma_search(system.net, target, y_probe_max=y_max)
    scanned = _sim.gamma_scan(system.net, target, y_max=y_max, grid=grid)
    report = {
        "command": "sector",
        "inputs": {"y_values": y_values, "grid": grid, "y_max": y_max},
        "target_sector": {"sigma1": target.sigma1, "sigma2": target.sigma2,
                          "source": target_source},
        "table": rows,
        "certified_y_bar": searched,
        "scanned_y_bar": scanned,
        "layers_at_largest_box": [
            {"layer": st.layer, "d_low": st.d_low, "d_up": st.d_up,
             "crossing": st.crossing, "slope_low": st.slope_low,
             "slope_high": st.slope_high}
            for st in last_trace
        ],
        "timings": {"total_s": time.perf_counter() - t0},
    }
    csvs = {}
    if scalar:
        lines = ["y_bar,gamma1,gamma2,chord_min,chord_max"]
        for r in rows:
            vals = [r["y_bar"], float(np.asarray(r["gamma1"]).ravel()[0]),
                    float(np.asarray(r["gamma2"]).ravel()[0]),
                    r["chord_min"], r["chord_max"]]
            lines.append(",".join(f"{v:.12g}" for v in vals))
        csvs["sector_table.csv"] = "\n".join(lines) + "\n"
    summary = (f"certified sector box height {searched:.6g} "
               f"(direct scan {scanned:.6g}) against {target_source}")
    return RunResult(report=_jsonable(report), exit_code=0, summary=summary, csvs=csvs)


def _chord_envelope(net, y_bar, grid):
    from .model import nn_eval
    ys = np.linspace(y_bar / grid, y_bar, grid)
    chords = nn_eval(net, ys[:, None]) / ys[:, None]
    return float(chords.min()), float(chords.max())


# --- certify ------------------------------------------------------------------

def run_certify(doc, y_probe_max=20.0, tol=1e-3, hurwitz_margin=1e-9):
    """Sector-route certification with the analytic region of attraction."""
    system = _load(doc)
    t0 = time.perf_counter()
    try:
        cert = _certify.nn_aizerman_certify(
            system, y_probe_max=y_probe_max, tol=tol, hurwitz_margin=hurwitz_margin)
    except CertificationFailure as e:
        elapsed = time.perf_counter() - t0
        report = {
            "command": "certify",
            "inputs": {"y_probe_max": y_probe_max, "tol": tol,
                       "hurwitz_margin": hurwitz_margin},
            "certified": False,
            "failure": {"message": str(e), "diagnostics": _jsonable(e.diagnostics)},
            "timings": {"certify_s": elapsed},
        }
        return RunResult(report=_jsonable(report), exit_code=1,
                         summary="not certified: " + str(e))
    sector = SectorInterval(cert.sector.gamma1, cert.sector.gamma2, [cert.y_bar])
    roa = _certify.aizerman_roa(system.plant, sector)
    elapsed = time.perf_counter() - t0
    report = {
        "command": "certify",
        "inputs": {"y_probe_max": y_probe_max, "tol": tol,
                   "hurwitz_margin": hurwitz_margin},
        "certified": True,
        "y_bar": cert.y_bar,
        "network_sector": {"gamma1": cert.sector.gamma1, "gamma2": cert.sector.gamma2},
        "matrix_tests": {
            "metzler_ok": cert.verdict.metzler_ok,
            "hurwitz_ok": cert.verdict.hurwitz_ok,
            "lower_abscissa": cert.verdict.lower_abscissa,
            "upper_abscissa": cert.verdict.upper_abscissa,
        },
        "roa": {
            "type": "halfspace",
            "witness_v": roa.v.entries,
            "ratio": roa.ratio,
            "bound": roa.bound,
            "description": "{x >= 0 : C x <= bound}",
        },
        "timings": {"certify_s": elapsed},
    }
    summary = (f"certified on [0, {cert.y_bar:.6g}]; "
               f"region C x <= {float(np.min(roa.bound)):.6g}")
    return RunResult(report=_jsonable(report), exit_code=0, summary=summary)


# --- lyap ---------------------------------------------------------------------

def run_lyap(doc, seed=0, samples_per_level=512, rho_start=None, rho_factor=1.3,
             rho_cap=1e9, grid=50, y_probe_max=20.0, tol=1e-3):
    """Quadratic-certificate route with the sampled sublevel-set search."""
    system = _load(doc)
    t0 = time.perf_counter()
    try:
        sigma2, source = _sigma2_for_quadratic(system, y_probe_max, tol)
        cert = _certify.quad_certificate(system.plant, sigma2)
    except CertificationFailure as e:
        report = {
            "command": "lyap",
            "inputs": {"seed": seed, "samples_per_level": samples_per_level},
            "certified": False,
            "failure": {"message": str(e), "diagnostics": _jsonable(e.diagnostics)},
            "timings": {"lyap_s": time.perf_counter() - t0},
        }
        return RunResult(report=_jsonable(report), exit_code=1,
                         summary="not certified: " + str(e))
    schedule = _certify.RhoSchedule(start=rho_start, factor=rho_factor, cap=rho_cap)
    sub = _certify.sublevel_roa(system, cert.p, schedule=schedule,
                                samples_per_level=samples_per_level, seed=seed)
    elapsed = time.perf_counter() - t0
    report = {
        "command": "lyap",
        "inputs": {"seed": seed, "samples_per_level": samples_per_level,
                   "rho_factor": rho_factor, "rho_cap": rho_cap,
                   "sigma2_source": source},
        "certified": sub.rho_max > 0.0,
        "sigma2": sigma2,
        "p": cert.p,
        "eps": cert.eps,
        "residual_abscissa": cert.residual_abscissa,
        "rho_max": sub.rho_max,
        "capped": sub.capped,
        "levels_tested": sub.levels_tested,
        "violation": sub.violation,
        "violation_vdot": sub.violation_vdot,
        "inside_gamma": sub.inside_gamma,
        "timings": {"lyap_s": elapsed},
    }
    csvs = {}
    if system.plant.n == 2 and sub.rho_max > 0.0:
        csvs["vdot_grid.csv"] = _vdot_grid_csv(system, cert.p, sub.rho_max, grid)
    code = 0 if sub.rho_max > 0.0 else 1
    summary = (f"quadratic certificate found; rho_max = {sub.rho_max:.6g}"
               + (" (capped)" if sub.capped else ""))
    if code == 1:
        summary = "quadratic certificate found but no positive sublevel set verified"
    return RunResult(report=_jsonable(report), exit_code=code, summary=summary, csvs=csvs)


def _vdot_grid_csv(system, p, rho, grid):
    ext = 1.2 * np.sqrt(rho * np.diag(np.linalg.inv(p)))
    xs = np.linspace(0.0, ext[0], grid)
    ys = np.linspace(0.0, ext[1], grid)
    lines = ["x1,x2,vdot"]
    for x1 in xs:
        for x2 in ys:
            val = _certify.vdot(system, p, np.array([x1, x2]))
            lines.append(f"{x1:.12g},{x2:.12g},{val:.12g}")
    return "\n".join(lines) + "\n"


# --- simulate -----------------------------------------------------------------

def run_simulate(doc, region="aizerman", region_scale=1.0, samples=100, seed=0,
                 horizon=50.0, step=1e-3, y_probe_max=20.0, tol=1e-3,
                 samples_per_level=512):
    """Monte Carlo fate classification over a certified (possibly scaled) region."""
    system = _load(doc)
    t0 = time.perf_counter()
    if region == "aizerman":
        cert = _certify.nn_aizerman_certify(system, y_probe_max=y_probe_max, tol=tol)
        sector = SectorInterval(cert.sector.gamma1, cert.sector.gamma2, [cert.y_bar])
        roa = _certify.aizerman_roa(system.plant, sector)
        bound = float(roa.bound[0]) * region_scale
        reg = _sim.HalfSpaceRegion(normal=system.plant.c[0], bound=bound)
        region_desc = {"type": "halfspace", "bound": bound,
                       "scale": region_scale, "base_bound": float(roa.bound[0])}
    elif region == "ellipsoid":
        sigma2, source = _sigma2_for_quadratic(system, y_probe_max, tol)
        qcert = _certify.quad_certificate(system.plant, sigma2)
        sub = _certify.sublevel_roa(system, qcert.p,
                                    samples_per_level=samples_per_level, seed=seed)
        if sub.rho_max <= 0.0:
            raise CertificationFailure("no positive sublevel set to sample")
        rho = sub.rho_max * region_scale ** 2
        reg = _sim.EllipsoidRegion(p=qcert.p, rho=rho)
        region_desc = {"type": "ellipsoid", "rho": rho, "scale": region_scale,
                       "base_rho": sub.rho_max, "sigma2_source": source}
    else:
        raise ValueError(f"unknown region kind {region!r}")
    result = _sim.classify_roa(system, reg, n_samples=samples, seed=seed,
                               horizon=horizon, step=step)
    elapsed = time.perf_counter() - t0
    counts = result.counts()
    report = {
        "command": "simulate",
        "inputs": {"region": region, "region_scale": region_scale, "samples": samples,
                   "seed": seed, "horizon": horizon, "step": step},
        "region": region_desc,
        "counts": counts,
        "converged_fraction": result.converged_fraction,
        "timings": {"total_s": elapsed},
    }
    csvs = {"roa_samples.csv": _sim.roa_samples_csv(result)}
    code = 0 if counts["converged"] == samples else 1
    summary = (f"{counts['converged']}/{samples} trajectories converged "
               f"from the {region_desc['type']} region")
    return RunResult(report=_jsonable(report), exit_code=code, summary=summary, csvs=csvs)


# --- compare ------------------------------------------------------------------

def run_compare(doc, seed=0, samples_per_level=512, y_probe_max=20.0, tol=1e-3):
    """Run both certification routes, timing them on the same system."""
    system = _load(doc)

    def sector_route():
        cert = _certify.nn_aizerman_certify(system, y_probe_max=y_probe_max, tol=tol)
        sector = SectorInterval(cert.sector.gamma1, cert.sector.gamma2, [cert.y_bar])
        return cert, _certify.aizerman_roa(system.plant, sector)

    def quad_route():
        sigma2, _ = _sigma2_for_quadratic(system, y_probe_max, tol)
        qcert = _certify.quad_certificate(system.plant, sigma2)
        sub = _certify.sublevel_roa(system, qcert.p,
                                    samples_per_level=samples_per_level, seed=seed)
        return qcert, sub

    rows = []
    try:
        # best of three for the fast route, to get above timer noise
        t_sector = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            cert, roa = sector_route()
            t_sector = min(t_sector, time.perf_counter() - t0)
        rows.append({
            "method": "sector", "source": "computed", "certified": True,
            "runtime_s": t_sector,
            "roa": {"type": "halfspace", "bound": float(roa.bound[0]),
                    "y_bar": cert.y_bar, "ratio": roa.ratio},
        })
        sector_ok = True
    except CertificationFailure as e:
        rows.append({"method": "sector", "source": "computed", "certified": False,
                     "runtime_s": None, "failure": str(e)})
        sector_ok = False
    try:
        t0 = time.perf_counter()
        qcert, sub = quad_route()
        t_quad = time.perf_counter() - t0
        rows.append({
            "method": "quadratic", "source": "computed",
            "certified": sub.rho_max > 0.0, "runtime_s": t_quad,
            "roa": {"type": "ellipsoid", "rho_max": sub.rho_max,
                    "levels_tested": sub.levels_tested, "capped": sub.capped},
        })
        quad_ok = sub.rho_max > 0.0
    except CertificationFailure as e:
        rows.append({"method": "quadratic", "source": "computed", "certified": False,
                     "runtime_s": None, "failure": str(e)})
        quad_ok = False
    if _is_demo_plant(system.plant):
        rows.append(dict(EXTERNAL_BASELINE))
    ratio = None
    if sector_ok and quad_ok and rows[0]["runtime_s"]:
        ratio = rows[1]["runtime_s"] / rows[0]["runtime_s"]
    report = {
        "command": "compare",
        "inputs": {"seed": seed, "samples_per_level": samples_per_level,
                   "y_probe_max": y_probe_max, "tol": tol},
        "rows": [{k: v for k, v in r.items() if k != "runtime_s"} for r in rows],
        "timings": {
            "sector_s": rows[0].get("runtime_s"),
            "quadratic_s": rows[1].get("runtime_s") if len(rows) > 1 else None,
            "speedup_sector_over_quadratic": ratio,
        },
    }
    lines = ["method,runtime_s,certified,descriptor"]
    for r in rows:
        desc = r.get("roa", r.get("failure", ""))
        rt = "" if r.get("runtime_s") is None else f"{r['runtime_s']:.6g}"
        lines.append(f"{r['method']},{rt},{r.get('certified', '')},\"{desc}\"")
    csvs = {"compare.csv": "\n".join(lines) + "\n"}
    code = 0 if (sector_ok and quad_ok) else 1
    if ratio is not None:
        summary = f"both routes certified; sector route {ratio:.0f}x faster"
    else:
        summary = "comparison ran with at least one route failing"
    return RunResult(report=_jsonable(report), exit_code=code, summary=summary, csvs=csvs)
