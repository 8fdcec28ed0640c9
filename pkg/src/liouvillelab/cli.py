"""Command-line harness: configuration, run manifests, and file emission.

One top-level seed drives all randomness through the documented splitting
scheme (child = seed * 1000003 + index), so reruns with the same RunSpec
produce byte-identical CSV and JSON outputs.  The run manifest (wall time)
and SVG figures are excluded from that byte contract.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy

from .energy import EIGHT_PI, perturbed_functional
from .errors import (
    ConvergenceError,
    DataError,
    MeshQualityError,
    NumericError,
    ParameterError,
    ResolutionError,
)
from .flow import run_flow
from .green import (
    bubble_checks,
    bubble_dirichlet_closed_form,
    bubble_mass_closed_form,
    bubble_profile,
    solve_green,
)
from .inequalities import (
    brezis_merle_check,
    check_global_mt,
    check_local_mt,
    onofri_suite,
    poincare_constant,
    disk_floor_gap,
)
from .mesh import (
    assemble_operators,
    build_icosphere,
    integrate,
    random_band_field,
    read_off_mesh,
    set_conformal_background,
    write_field_csv,
    write_off_mesh,
)
from .solver import SolverConfig, disk_min_dirichlet, minimize_perturbed, solve_mean_field
from .svg import write_line_plot

_COMMANDS = (
    "minimize",
    "sweep-eps",
    "mean-field",
    "green",
    "bubble",
    "flow",
    "inequalities",
    "disk",
    "mesh-info",
)

_SEED_SCHEME = "child_seed = seed * 1000003 + index"


@dataclass(frozen=True)
class RunSpec:
    """Fully resolved inputs of one harness run.

    tolerance, max_iterations, amplitude and grid_n default to None, meaning
    "use the command's own default"; everything else carries its value
    directly.  Validation of numeric ranges is left to the library calls so
    the failure surface is identical for CLI and programmatic use.
    """

    command: str
    mesh_level: int = 4
    metric_seed: int = 0
    metric_amplitude: float = 0.0
    epsilons: tuple = (0.5,)
    seed: int = 0
    tolerance: float | None = None
    max_iterations: int | None = None
    output_dir: str | None = None
    mesh_file: str | None = None
    bands: int = 8
    amplitude: float | None = None
    pole: int = 0
    bubble_radius: float = 1.0
    t_end: float = 10.0
    dt0: float = 0.01
    a: float = float(np.pi)
    b: float = 0.0
    r: float = 1.0
    grid_n: int | None = None
    samples: int = 200
    trials: int = 5
    p: float = 2.0
    delta: float = float(2.0 * np.pi)
    plots: bool = True

    def __post_init__(self):
        if self.command not in _COMMANDS:
            raise ParameterError(f"unknown command '{self.command}'")
        if not self.epsilons:
            raise ParameterError("at least one epsilon value is required")
        for eps in self.epsilons:
            if not np.isfinite(eps) or not 0.0 < eps < EIGHT_PI:
                raise ParameterError("every epsilon must lie in (0, 8*pi)")


# Config keys mirror the flag spellings (no leading dashes).
_INT_KEYS = {
    "level",
    "metric-seed",
    "seed",
    "max-iter",
    "bands",
    "pole",
    "grid-n",
    "samples",
    "trials",
}
_FLOAT_KEYS = {
    "metric-amp",
    "tol",
    "amp",
    "R",
    "t-end",
    "dt0",
    "a",
    "b",
    "r",
    "p",
    "delta",
}
_STR_KEYS = {"out", "mesh-file"}
_LIST_KEYS = {"eps"}
_BOOL_KEYS = {"plots"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS | _BOOL_KEYS


def _parse_eps(text: str) -> tuple:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ParameterError(f"bad epsilon list '{text}': {exc}") from exc
    if not values:
        raise ParameterError("epsilon list is empty")
    return values


def _convert(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_KEYS:
            return _parse_eps(raw)
        if key in _BOOL_KEYS:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: '{raw}'")
        return raw
    except ValueError as exc:
        raise ParameterError(f"bad value for config key '{key}': {exc}") from exc


def _read_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _ALL_KEYS:
            raise ParameterError(f"unknown config key '{key}' (line {lineno})")
        if key in values:
            raise ParameterError(f"duplicate config key '{key}' (line {lineno})")
        values[key] = _convert(key, val)
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liouville-lab",
        description="Numerical laboratory for a conformal curvature "
        "functional on triangulated spheres.",
    )
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", default=None, help="key = value config file")
    parser.add_argument("--level", type=int, default=None, help="icosphere level")
    parser.add_argument("--eps", type=str, default=None, help="comma-separated list")
    parser.add_argument("--metric-seed", type=int, default=None, dest="metric_seed")
    parser.add_argument("--metric-amp", type=float, default=None, dest="metric_amp")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--mesh-file", type=str, default=None, dest="mesh_file")
    parser.add_argument("--bands", type=int, default=None)
    parser.add_argument("--amp", type=float, default=None, help="initial field size")
    parser.add_argument("--pole", type=int, default=None)
    parser.add_argument("--R", type=float, default=None, help="bubble radius")
    parser.add_argument("--t-end", type=float, default=None, dest="t_end")
    parser.add_argument("--dt0", type=float, default=None)
    parser.add_argument("--a", type=float, default=None, help="disk volume constraint")
    parser.add_argument("--b", type=float, default=None, help="disk boundary value")
    parser.add_argument("--r", type=float, default=None, help="disk radius")
    parser.add_argument("--grid-n", type=int, default=None, dest="grid_n")
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--p", type=float, default=None, help="norm exponent")
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--no-plots", action="store_true", dest="no_plots")
    return parser


def _resolve(ns: argparse.Namespace, config_file) -> RunSpec:
    cfg = {}
    path = ns.config if ns.config is not None else config_file
    if path is not None:
        cfg = _read_config(path)

    def pick(key, flag_value, default):
        if flag_value is not None:
            return flag_value
        if key in cfg:
            return cfg[key]
        return default

    eps = ns.eps
    if eps is not None:
        eps = _parse_eps(eps)
    plots = False if ns.no_plots else None
    out = pick("out", ns.out, None)
    command = ns.command
    if out is None:
        out = str(Path("runs") / command)
    return RunSpec(
        command=command,
        mesh_level=pick("level", ns.level, 4),
        metric_seed=pick("metric-seed", ns.metric_seed, 0),
        metric_amplitude=pick("metric-amp", ns.metric_amp, 0.0),
        epsilons=pick("eps", eps, (0.5,)),
        seed=pick("seed", ns.seed, 0),
        tolerance=pick("tol", ns.tol, None),
        max_iterations=pick("max-iter", ns.max_iter, None),
        output_dir=out,
        mesh_file=pick("mesh-file", ns.mesh_file, None),
        bands=pick("bands", ns.bands, 8),
        amplitude=pick("amp", ns.amp, None),
        pole=pick("pole", ns.pole, 0),
        bubble_radius=pick("R", ns.R, 1.0),
        t_end=pick("t-end", ns.t_end, 10.0),
        dt0=pick("dt0", ns.dt0, 0.01),
        a=pick("a", ns.a, float(np.pi)),
        b=pick("b", ns.b, 0.0),
        r=pick("r", ns.r, 1.0),
        grid_n=pick("grid-n", ns.grid_n, None),
        samples=pick("samples", ns.samples, 200),
        trials=pick("trials", ns.trials, 5),
        p=pick("p", ns.p, 2.0),
        delta=pick("delta", ns.delta, float(2.0 * np.pi)),
        plots=pick("plots", plots, True),
    )


def _build_mesh(spec: RunSpec):
    if spec.mesh_file is not None:
        mesh = read_off_mesh(spec.mesh_file)
    else:
        mesh = build_icosphere(spec.mesh_level)
    if spec.metric_amplitude != 0.0:
        phi = random_band_field(
            mesh, spec.metric_seed, spec.bands, spec.metric_amplitude
        )
        mesh = set_conformal_background(mesh, phi, normalize=True)
    return mesh


def _operators(spec: RunSpec):
    return assemble_operators(_build_mesh(spec))


def _initial_field(spec: RunSpec, ops, default_amplitude: float):
    amp = spec.amplitude if spec.amplitude is not None else default_amplitude
    if amp == 0.0:
        return np.zeros(ops.mass.shape)
    return random_band_field(ops.mesh, spec.seed, spec.bands, amp)


def _g17(x) -> str:
    return f"{float(x):.17g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(str(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_trace_csv(path: Path, rows, polish_steps: int) -> None:
    # Polish rows duplicate their residual into el_residual; descent rows
    # leave it empty (the residual is not evaluated during descent).
    out = []
    first_polish = len(rows) - polish_steps
    for i, (step, energy, grad_norm) in enumerate(rows):
        tail = _g17(grad_norm) if i >= first_polish else ""
        out.append((int(step), _g17(energy), _g17(grad_norm), tail))
    _write_csv(path, "step,energy,grad_norm,el_residual", out)


def _result_json(ops, result) -> dict:
    breakdown = perturbed_functional(ops, result.u_min, result.epsilon)
    return {
        "epsilon": result.epsilon,
        "energy": result.energy,
        "energy_parts": breakdown.as_dict(),
        "el_residual": result.el_residual,
        "peak_value": result.peak_value,
        "peak_vertex": result.peak_vertex,
        "iterations": len(result.iterations),
        "polish_steps": result.polish_steps,
        "constraint_pairing": integrate(ops, ops.curvature * result.u_min),
        "exp_volume": float(np.exp(result.v_field) @ ops.mass),
    }


def _cmd_minimize(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    config = SolverConfig(
        epsilon=spec.epsilons[0],
        max_iterations=spec.max_iterations or 2000,
        gradient_tolerance=spec.tolerance or 1e-8,
    )
    initial = _initial_field(spec, ops, default_amplitude=0.0)
    result = minimize_perturbed(ops, config, initial)
    artifacts = ["u_min.csv", "v_field.csv", "trace.csv", "result.json"]
    write_field_csv(outdir / "u_min.csv", result.u_min)
    write_field_csv(outdir / "v_field.csv", result.v_field)
    _write_trace_csv(outdir / "trace.csv", result.iterations, result.polish_steps)
    _write_json(outdir / "result.json", _result_json(ops, result))
    if spec.plots:
        steps = [row[0] for row in result.iterations]
        energies = [row[1] for row in result.iterations]
        write_line_plot(
            outdir / "energy_trace.svg",
            {"energy": (steps, energies)},
            title="energy vs iteration",
            xlabel="iteration",
            ylabel="energy",
        )
        artifacts.append("energy_trace.svg")
    line = (
        f"minimize: eps={spec.epsilons[0]:g} energy={result.energy:.9f} "
        f"el_residual={result.el_residual:.3e} "
        f"iterations={len(result.iterations)} polish={result.polish_steps}"
    )
    return [line], artifacts


def _cmd_sweep(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    rows, lines = [], []
    warm = _initial_field(spec, ops, default_amplitude=0.0)
    last = None
    for eps in spec.epsilons:
        config = SolverConfig(
            epsilon=eps,
            max_iterations=spec.max_iterations or 2000,
            gradient_tolerance=spec.tolerance or 1e-8,
        )
        result = minimize_perturbed(ops, config, warm)
        warm = result.u_min  # continuation between epsilon stages
        last = result
        rows.append(
            (
                _g17(eps),
                _g17(result.energy),
                _g17(result.el_residual),
                len(result.iterations),
            )
        )
        lines.append(
            f"sweep-eps: eps={eps:g} energy={result.energy:.9f} "
            f"el_residual={result.el_residual:.3e}"
        )
    artifacts = ["sweep.csv", "u_min.csv", "result.json"]
    _write_csv(outdir / "sweep.csv", "epsilon,energy,el_residual,steps", rows)
    write_field_csv(outdir / "u_min.csv", last.u_min)
    _write_json(
        outdir / "result.json",
        {
            "epsilons": list(spec.epsilons),
            "energies": [float(row[1]) for row in rows],
            "final": _result_json(ops, last),
        },
    )
    if spec.plots:
        write_line_plot(
            outdir / "sweep.svg",
            {"energy": (list(spec.epsilons), [float(r[1]) for r in rows])},
            title="minimum energy vs epsilon",
            xlabel="epsilon",
            ylabel="energy",
        )
        artifacts.append("sweep.svg")
    return lines, artifacts


def _cmd_mean_field(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    initial = None
    if spec.amplitude is not None and spec.amplitude != 0.0:
        initial = _initial_field(spec, ops, default_amplitude=0.0)
    result = solve_mean_field(
        ops,
        spec.epsilons[0],
        initial=initial,
        tolerance=spec.tolerance or 1e-10,
        max_iterations=spec.max_iterations or 100,
    )
    artifacts = ["v_field.csv", "trace.csv", "result.json"]
    write_field_csv(outdir / "v_field.csv", result.v_field)
    _write_trace_csv(outdir / "trace.csv", result.iterations, result.polish_steps)
    _write_json(outdir / "result.json", _result_json(ops, result))
    if spec.plots:
        steps = [row[0] for row in result.iterations]
        residuals = [row[2] for row in result.iterations]
        write_line_plot(
            outdir / "residual_trace.svg",
            {"residual": (steps, residuals)},
            title="mean-field residual",
            xlabel="iteration",
            ylabel="log10 residual",
            log_y=True,
        )
        artifacts.append("residual_trace.svg")
    line = (
        f"mean-field: eps={spec.epsilons[0]:g} "
        f"el_residual={result.el_residual:.3e} "
        f"iterations={len(result.iterations) - 1}"
    )
    return [line], artifacts


def _cmd_green(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    result = solve_green(ops, spec.pole)
    artifacts = ["green_field.csv", "green.json"]
    write_field_csv(outdir / "green_field.csv", result.field)
    _write_json(
        outdir / "green.json",
        {
            "pole": result.pole,
            "A_value": result.A_value,
            "fit_window": list(result.fit_window),
            "fit_residual": result.fit_residual,
            "distance_exact": result.distance_exact,
            "integral": integrate(ops, result.field),
        },
    )
    if spec.plots:
        order = np.argsort(result.distances)
        keep = result.distances[order] > 0.5 * ops.mean_edge_length
        dist = result.distances[order][keep]
        series = {"computed": (dist, result.field[order][keep])}
        if np.abs(ops.mesh.background_factor).max() <= 1e-12:
            series["closed_form"] = (dist, -4.0 * np.log(np.sin(dist / 2.0)) - 2.0)
        write_line_plot(
            outdir / "green_vs_distance.svg",
            series,
            title="Green function vs distance",
            xlabel="geodesic distance",
            ylabel="G",
        )
        artifacts.append("green_vs_distance.svg")
    line = (
        f"green: pole={result.pole} A={result.A_value:.6f} "
        f"fit_residual={result.fit_residual:.3e}"
    )
    return [line], artifacts


def _cmd_bubble(spec: RunSpec, outdir: Path):
    radius = spec.bubble_radius
    report = bubble_checks(radius, quadrature_n=spec.grid_n or 2001)
    payload = report.as_dict()
    payload["dirichlet_closed_form"] = bubble_dirichlet_closed_form(radius)
    payload["mass_closed_form"] = bubble_mass_closed_form(radius)
    artifacts = ["bubble.json", "profile.csv"]
    _write_json(outdir / "bubble.json", payload)
    rr = np.linspace(0.0, radius, 513)
    phi = bubble_profile(np.column_stack([rr, np.zeros_like(rr)]))
    _write_csv(
        outdir / "profile.csv",
        "r,phi",
        [(_g17(x), _g17(y)) for x, y in zip(rr, phi)],
    )
    if spec.plots:
        write_line_plot(
            outdir / "profile.svg",
            {"phi0": (rr, phi)},
            title="standard bubble profile",
            xlabel="r",
            ylabel="phi0",
        )
        artifacts.append("profile.svg")
    line = (
        f"bubble: R={radius:g} dirichlet_integral={report.dirichlet_integral:.6f} "
        f"mass_integral={report.mass_integral:.9f} "
        f"pde_residual_max={report.pde_residual_max:.3e}"
    )
    return [line], artifacts


def _cmd_flow(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    u0 = _initial_field(spec, ops, default_amplitude=0.3)
    trace = run_flow(ops, u0, t_end=spec.t_end, dt0=spec.dt0)
    artifacts = ["flow.csv", "final_field.csv", "flow.json"]
    _write_csv(
        outdir / "flow.csv",
        "t,energy,volume,max_curv_dev,dt",
        [
            (_g17(t), _g17(e), _g17(v), _g17(d), _g17(s))
            for t, e, v, d, s in zip(
                trace.times,
                trace.energies,
                trace.volumes,
                trace.curvature_deviation,
                trace.step_sizes,
            )
        ],
    )
    write_field_csv(outdir / "final_field.csv", trace.final_field)
    _write_json(
        outdir / "flow.json",
        {
            "steps": len(trace.times) - 1,
            "final_time": trace.times[-1],
            "final_energy": trace.energies[-1],
            "final_max_curv_dev": trace.curvature_deviation[-1],
            "volume_drift": max(abs(v - trace.volumes[0]) for v in trace.volumes),
        },
    )
    if spec.plots:
        write_line_plot(
            outdir / "flow_energy.svg",
            {"energy": (trace.times, trace.energies)},
            title="flow energy",
            xlabel="t",
            ylabel="energy",
        )
        write_line_plot(
            outdir / "flow_deviation.svg",
            {"max_curv_dev": (trace.times, trace.curvature_deviation)},
            title="curvature deviation",
            xlabel="t",
            ylabel="log10 max deviation",
            log_y=True,
        )
        artifacts.extend(["flow_energy.svg", "flow_deviation.svg"])
    line = (
        f"flow: steps={len(trace.times) - 1} t_end={trace.times[-1]:g} "
        f"final_energy={trace.energies[-1]:.6e} "
        f"final_max_curv_dev={trace.curvature_deviation[-1]:.3e}"
    )
    return [line], artifacts


def _margin_rows(report):
    return [(s, _g17(m)) for s, m in report.sample_margins]


def _cmd_inequalities(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    reports = []
    lines = []
    artifacts = ["inequalities.json"]

    local = check_local_mt(
        spec.r, spec.samples, spec.seed, grid_n=spec.grid_n or 2048
    )
    reports.append(local)

    gaps = []
    for t in (0.5, 1.0, 2.0, 4.0):
        a = t * np.pi * spec.r * spec.r * np.exp(2.0 * spec.b)
        gaps.append(disk_floor_gap(a, spec.b, spec.r, grid_n=spec.grid_n or 4096))
    reports.extend(gaps)

    global_mt = check_global_mt(ops, spec.epsilons[0], spec.trials, spec.seed)
    reports.append(global_mt)

    if np.abs(ops.mesh.background_factor).max() <= 1e-12:
        onofri_ops = ops
    else:
        # The sharp-deficit suite is defined on the round background only.
        onofri_ops = assemble_operators(build_icosphere(spec.mesh_level))
    onofri = onofri_suite(onofri_ops, spec.samples, spec.seed)
    reports.append(onofri)

    poincare = poincare_constant(ops, spec.p, seed=spec.seed)
    reports.append(poincare)

    bm = brezis_merle_check(
        spec.r, spec.delta, spec.samples, spec.seed, grid_n=spec.grid_n or 4096
    )
    reports.append(bm)

    _write_json(outdir / "inequalities.json", [rep.as_dict() for rep in reports])
    for rep in reports:
        if rep.sample_margins:
            name = f"margins_{rep.name}.csv"
            # Gap reports share a name; disambiguate by parameter.
            if rep.name == "disk_dirichlet_gap":
                name = f"margins_{rep.name}_t{rep.parameters['t']:g}.csv"
            _write_csv(outdir / name, "seed,margin", _margin_rows(rep))
            artifacts.append(name)
        lines.append(
            f"{rep.name}: samples={rep.samples} "
            f"worst_margin={rep.worst_margin:.6e} worst_seed={rep.worst_seed}"
        )
    return lines, artifacts


def _cmd_disk(spec: RunSpec, outdir: Path):
    grid_n = spec.grid_n or 4096
    minimum = disk_min_dirichlet(spec.a, spec.b, spec.r, grid_n=grid_n)
    gap = disk_floor_gap(spec.a, spec.b, spec.r, grid_n=grid_n)
    artifacts = ["disk.json", "profile.csv"]
    _write_json(
        outdir / "disk.json",
        {
            "a": spec.a,
            "b": spec.b,
            "r": spec.r,
            "grid_n": grid_n,
            "value": minimum.value,
            "multiplier": minimum.multiplier,
            "residual": minimum.residual,
            "bound": gap.parameters["bound"],
            "margin": gap.worst_margin,
            "t": gap.parameters["t"],
        },
    )
    _write_csv(
        outdir / "profile.csv",
        "r,w",
        [(_g17(x), _g17(y)) for x, y in zip(minimum.radii, minimum.profile)],
    )
    if spec.plots:
        write_line_plot(
            outdir / "profile.svg",
            {"w": (minimum.radii, minimum.profile)},
            title="constrained disk minimizer",
            xlabel="rho",
            ylabel="w",
        )
        artifacts.append("profile.svg")
    line = (
        f"disk: value={minimum.value:.9f} bound={gap.parameters['bound']:.9f} "
        f"margin={gap.worst_margin:.3e}"
    )
    return [line], artifacts


def _cmd_mesh_info(spec: RunSpec, outdir: Path):
    ops = _operators(spec)
    mesh = ops.mesh
    euler = mesh.num_vertices - mesh.num_edges + mesh.num_faces
    artifacts = ["mesh.off", "mesh_info.json"]
    write_off_mesh(outdir / "mesh.off", mesh)
    _write_json(
        outdir / "mesh_info.json",
        {
            "vertices": mesh.num_vertices,
            "edges": mesh.num_edges,
            "faces": mesh.num_faces,
            "euler_characteristic": euler,
            "total_area": ops.total_area,
            "flat_area": ops.flat_area,
            "mass_correction": ops.mass_correction,
            "mean_edge_length": ops.mean_edge_length,
            "curvature_min": float(ops.curvature.min()),
            "curvature_max": float(ops.curvature.max()),
        },
    )
    lines = [
        f"V={mesh.num_vertices} E={mesh.num_edges} F={mesh.num_faces} "
        f"euler={euler}",
        f"total_area={ops.total_area:.12f} mean_edge={ops.mean_edge_length:.6f} "
        f"mass_correction={ops.mass_correction:.9f}",
        f"curvature range [{ops.curvature.min():.6f}, {ops.curvature.max():.6f}]",
    ]
    return lines, artifacts


_HANDLERS = {
    "minimize": _cmd_minimize,
    "sweep-eps": _cmd_sweep,
    "mean-field": _cmd_mean_field,
    "green": _cmd_green,
    "bubble": _cmd_bubble,
    "flow": _cmd_flow,
    "inequalities": _cmd_inequalities,
    "disk": _cmd_disk,
    "mesh-info": _cmd_mesh_info,
}


def _locate(exc: BaseException) -> str:
    """Innermost package frame of the failure, preferring public names."""
    best = "cli.parse_and_run"
    best_public = None
    tb = exc.__traceback__
    while tb is not None:
        frame = tb.tb_frame
        module = frame.f_globals.get("__name__", "")
        if module.startswith("liouvillelab"):
            name = f"{module.rsplit('.', 1)[-1]}.{frame.f_code.co_name}"
            best = name
            if not frame.f_code.co_name.startswith("_"):
                best_public = name
        tb = tb.tb_next
    return best_public or best


def _execute(spec: RunSpec) -> int:
    start = time.perf_counter()
    outdir = Path(spec.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines, artifacts = _HANDLERS[spec.command](spec, outdir)
    from . import __version__

    manifest = {
        "command": spec.command,
        "parameters": asdict(spec),
        "artifacts": sorted(artifacts),
        "package_version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "seed_scheme": _SEED_SCHEME,
        "wall_time_seconds": round(time.perf_counter() - start, 3),
    }
    _write_json(outdir / "run_manifest.json", manifest)
    for line in lines:
        print(line)
    return 0


def parse_and_run(argv, config_file=None) -> int:
    """Run one harness command; returns the process exit status.

    Exit codes: 0 success, 2 parameter or input-data errors, 3 convergence
    or resolution failures, 4 numerical breakdown.  Error messages name the
    package module and operation that failed.
    """
    parser = _build_parser()
    try:
        ns = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code
        if code in (0, None):
            return 0
        return 2
    try:
        spec = _resolve(ns, config_file)
        return _execute(spec)
    except (ParameterError, DataError, MeshQualityError) as exc:
        print(f"{type(exc).__name__} in {_locate(exc)}: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ResolutionError) as exc:
        print(f"{type(exc).__name__} in {_locate(exc)}: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"{type(exc).__name__} in {_locate(exc)}: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(parse_and_run(sys.argv[1:]))


if __name__ == "__main__":
    main()
