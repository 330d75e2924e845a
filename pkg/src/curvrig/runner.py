"""Scenario execution: build the discrete objects, run, collect quantities."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .discretize import build_radial_domain, parse_geometry, read_mesh
from .errors import ConfigError, CurvrigError, InputError
from .quotient import estimate_quotient, sphere_yamabe_constant
from .report import ReportRow
from .rigidity import (
    check_eigen_criterion,
    check_einstein_volume,
    check_sobolev_criterion,
    lapse_residual,
)
from .scenario import Scenario, curvature_value
from .solver import BvpProblem, multiplicity_scan, solve_bvp, write_profiles_csv

__all__ = ["RunOutcome", "run_scenario"]

DEFAULT_NODES = 256


@dataclass
class RunOutcome:
    row: ReportRow
    certificate: object = None
    figure_payload: dict = None
    artifacts: tuple = ()


def _build_domain(s: Scenario):
    raw = s.require("domain")
    line = s.key_line("domain")
    if raw.startswith("mesh:"):
        path = raw[len("mesh:") :]
        try:
            return read_mesh(path)
        except (OSError, CurvrigError) as err:
            raise ConfigError(line, f"cannot load mesh {path!r}: {err}")
    try:
        geometry = parse_geometry(raw)
    except InputError as err:
        raise ConfigError(line, str(err))
    n = s.get_int("n", 1 if geometry.kind == "interval" else 3)
    m = s.get_int("nodes", DEFAULT_NODES)
    try:
        return build_radial_domain(geometry, n, m)
    except CurvrigError as err:
        raise ConfigError(line, str(err))


def _curvature(s: Scenario, key, default=None):
    raw = s.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(s.line, f"scenario '{s.ident}' is missing key '{key}'")
        return default
    return curvature_value(raw, s.key_line(key))


def run_scenario(s: Scenario, out_dir, figures: bool) -> RunOutcome:
    handler = _HANDLERS.get(s.kind)
    if handler is None:
        raise ConfigError(s.line, f"no handler for kind {s.kind!r}")
    return handler(s, out_dir, figures)


def _run_certificate(s: Scenario, out_dir, figures) -> RunOutcome:
    criterion = s.require("criterion")
    if criterion == "einstein-volume":
        n = s.get_int("n", 3)
        vol_omega = s.get_float("vol_omega")
        vol_m = s.get_float("vol_m")
        if vol_omega is None or vol_m is None:
            raise ConfigError(s.line, "einstein-volume needs vol_omega and vol_m")
        cert = check_einstein_volume(n, vol_omega, vol_m)
    else:
        domain = _build_domain(s)
        R = _curvature(s, "curvature")
        if criterion == "sobolev":
            q_raw = s.get("q", "sphere")
            if q_raw == "sphere":
                Q = sphere_yamabe_constant(domain.n)
                q_source = "sphere"
            else:
                try:
                    Q = float(q_raw)
                except ValueError:
                    raise ConfigError(s.key_line("q"), f"bad quotient value {q_raw!r}")
                q_source = "user"
            safety = s.get_float("safety", 0.9)
            cert = check_sobolev_criterion(domain, R, Q, safety=safety, q_source=q_source)
        elif criterion == "eigenvalue":
            h_condition = s.get("h_condition", "equal")
            cert = check_eigen_criterion(domain, R, h_condition=h_condition)
        else:
            raise ConfigError(
                s.key_line("criterion"),
                f"unknown criterion {criterion!r} "
                "(use sobolev, eigenvalue, einstein-volume)",
            )
    row = ReportRow(
        scenario=s.ident,
        verdict=cert.verdict,
        quantities={"lhs": cert.lhs, "rhs": cert.rhs, "margin": cert.margin},
    )
    return RunOutcome(row=row, certificate=cert, figure_payload={"certificate": cert})


def _run_bvp(s: Scenario, out_dir, figures) -> RunOutcome:
    domain = _build_domain(s)
    R_bar = _curvature(s, "curvature")
    R_target = _curvature(s, "target")
    tol = s.get_float("tol", 1e-10)
    problem = BvpProblem(domain, R_bar, R_target)
    solset = solve_bvp(problem, tol=tol)
    best = solset.closest_to_one()
    quantities = {
        "count": float(solset.count),
        "sup_deviation": best.sup_deviation,
        "max_residual": max(sol.residual_norm for sol in solset.solutions),
    }
    verdict = "unique" if solset.count == 1 else "multiple"
    path = os.path.join(out_dir, f"{s.ident}_solution.csv")
    _write_solution_csv(path, domain, solset.solutions)
    row = ReportRow(scenario=s.ident, verdict=verdict, quantities=quantities)
    payload = {"domain": domain, "solutions": solset.solutions}
    return RunOutcome(row=row, figure_payload=payload, artifacts=(path,))


def _write_solution_csv(path, domain, solutions):
    coord = domain.nodes if domain.is_radial else np.arange(domain.node_count)
    with open(path, "w", newline="\n") as fh:
        labels = [f"u_{sol.start_label}" for sol in solutions]
        fh.write(",".join(["x"] + labels) + "\n")
        for i in range(len(coord)):
            cells = [format(float(coord[i]), ".17g")] + [
                format(float(sol.values[i]), ".17g") for sol in solutions
            ]
            fh.write(",".join(cells) + "\n")


def _run_scan(s: Scenario, out_dir, figures) -> RunOutcome:
    n = s.get_int("n", 3)
    a = s.get_float("inner")
    b = s.get_float("outer")
    if a is None or b is None:
        raise ConfigError(s.line, "annulus-scan needs inner and outer radii")
    R_bar = _curvature(s, "curvature", default=0.0)
    R_target = _curvature(s, "target")
    scan = multiplicity_scan(
        n,
        R_bar,
        R_target,
        a,
        b,
        slope_max=s.get_float("slope_max", 20.0),
        num=s.get_int("points", 200),
        grid=s.get_int("grid", 513),
    )
    quantities = {"count": float(scan.count)}
    for i, sol in enumerate(scan.solutions[:4], start=1):
        quantities[f"slope_{i}"] = sol.slope
        quantities[f"h_inner_{i}"] = sol.H_inner
        quantities[f"h_outer_{i}"] = sol.H_outer
    verdict = {0: "none", 1: "unique"}.get(scan.count, "multiple")
    path = os.path.join(out_dir, f"{s.ident}_profiles.csv")
    write_profiles_csv(scan, path)
    row = ReportRow(scenario=s.ident, verdict=verdict, quantities=quantities)
    return RunOutcome(row=row, figure_payload={"scan": scan}, artifacts=(path,))


def _run_quotient(s: Scenario, out_dir, figures) -> RunOutcome:
    domain = _build_domain(s)
    R = _curvature(s, "curvature")
    schedule_raw = s.get("schedule")
    kwargs = {}
    if schedule_raw is not None:
        try:
            kwargs["schedule"] = tuple(float(x) for x in schedule_raw.split(","))
        except ValueError:
            raise ConfigError(s.key_line("schedule"), f"bad schedule {schedule_raw!r}")
    max_iter = s.get_int("max_iter")
    if max_iter is not None:
        kwargs["max_iter"] = max_iter
    est = estimate_quotient(domain, R, **kwargs)
    sphere_q = sphere_yamabe_constant(domain.n)
    quantities = {
        "estimate": est.extrapolated,
        "upper_bound": est.upper_bound,
        "sphere_constant": sphere_q,
    }
    verdict = "bounded" if est.extrapolated <= 1.02 * sphere_q else "suspect"
    row = ReportRow(scenario=s.ident, verdict=verdict, quantities=quantities)
    return RunOutcome(row=row, figure_payload={"estimate": est})


def _lapse_field(s: Scenario, domain):
    raw = s.get("field", "cos-polar")
    line = s.key_line("field")
    if not domain.is_radial:
        raise ConfigError(line, "lapse-check needs a radial domain")
    x = domain.nodes
    if raw == "cos-polar":
        if domain.geometry.kind not in ("cap", "sphere"):
            raise ConfigError(line, "cos-polar needs a cap or sphere domain")
        return np.cos(x)
    if raw == "radial":
        return x.copy()
    head, _, arg = raw.partition(":")
    if head == "constant" and arg:
        try:
            return np.full(domain.node_count, float(arg))
        except ValueError:
            raise ConfigError(line, f"bad constant field {arg!r}")
    raise ConfigError(line, f"unknown field {raw!r} (use cos-polar, radial, constant:<c>)")


def _run_lapse(s: Scenario, out_dir, figures) -> RunOutcome:
    domain = _build_domain(s)
    R = _curvature(s, "curvature")
    vals = _lapse_field(s, domain)
    zero_tol = s.get_float("zero_tol", 1e-8)
    report = lapse_residual(vals, R, domain, zero_tol=zero_tol)
    gmin = report.boundary_gradient_min
    quantities = {
        "residual": report.residual,
        "boundary_gradient_min": gmin if np.isfinite(gmin) else -1.0,
    }
    verdict = "degenerate" if report.degenerate else "nondegenerate"
    row = ReportRow(scenario=s.ident, verdict=verdict, quantities=quantities)
    payload = {"domain": domain, "values": vals, "report": report}
    return RunOutcome(row=row, figure_payload=payload)


_HANDLERS = {
    "certificate": _run_certificate,
    "bvp": _run_bvp,
    "annulus-scan": _run_scan,
    "quotient": _run_quotient,
    "lapse-check": _run_lapse,
}
