"""Command line front end: TOML run configurations in, run directories out.

Every command writes CSV series (header row, 17 significant digits) and a
summary.json (configuration hash, library versions, energy extremes, every
verdict) into a timestamped run directory under [output].directory, or into
--outdir verbatim.  Outputs are bitwise deterministic for a fixed
configuration and --outdir.

Exit codes: 0 every verdict passed, 1 a verdict failed, 2 configuration
problem (also click usage errors), 3 runtime failure (blow-up aborts,
non-convergent schedules, refused preconditions).
"""

import csv
import functools
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .config import _data_radius, parse_config
from .diagnostics import (
    MorawetzConfig,
    causality_residual,
    decay_scan,
    morawetz_check,
)
from .errors import ConfigError
from .evolve import integrate
from .norms import state_h1l2_norm
from .propagator import free_dispersive_bench
from .scattering import (
    DEFAULT_T_SCHEDULE,
    AsymptoticState,
    scattering_roundtrip,
    wave_operator,
)
from .snapshots import ROLE_ASYMPTOTIC, write_snapshot


@click.group()
def main():
    """Klein-Gordon simulator with a Hartree nonlinearity."""


def _guarded(fn):
    """Map exception kinds and verdict failures to the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            verdicts = fn(*args, **kwargs)
        except ConfigError as exc:
            for violation in exc.violations:
                click.echo(f"config error: {violation}", err=True)
            sys.exit(2)
        except (RuntimeError, ValueError, OSError) as exc:
            click.echo(f"runtime error: {exc}", err=True)
            sys.exit(3)
        if verdicts and not all(verdicts.values()):
            sys.exit(1)

    return wrapper


def _load(config_path):
    return parse_config(Path(config_path).read_text())


def _make_run_dir(cfg, command, outdir):
    if outdir is not None:
        path = Path(outdir)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path(cfg.output.get("directory", "runs")) / f"{stamp}-{command}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _prepare(cfg):
    """Build grid, potential, initial state, integrator; collect warnings."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        grid = cfg.build_grid()
        spec = cfg.build_potential(grid)
        state = cfg.build_initial_state(grid)
        integ = cfg.build_integrator()
    return grid, spec, state, integ, [str(w.message) for w in caught]


def _integrate_logged(state, spec, integ):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = integrate(state, spec, integ)
    return traj, [str(w.message) for w in caught]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _versions():
    return {
        "kgh": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _energy_block(traj):
    e = traj.step_energy
    return {
        "first": float(e[0]),
        "last": float(e[-1]),
        "min": float(e.min()),
        "max": float(e.max()),
        "max_drift": traj.max_energy_drift,
    }


def _finish(run_dir, cfg, command, verdicts, extra, notes):
    payload = {
        "command": command,
        "config_hash": cfg.config_hash,
        "versions": _versions(),
        "verdicts": verdicts,
        "warnings": notes,
    }
    payload.update(extra)
    (run_dir / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"
    )
    for name in sorted(verdicts):
        click.echo(f"{'PASS' if verdicts[name] else 'FAIL'} {name}")
    click.echo(f"wrote {run_dir}")


def _write_state_files(run_dir, cfg, traj):
    stride = int(cfg.output.get("snapshot_stride", 0))
    if stride <= 0:
        return
    for idx in range(0, len(traj.states), stride):
        write_snapshot(traj.states[idx], run_dir / f"state_{idx:06d}.kgh")


def _write_run_series(run_dir, traj):
    _write_csv(
        run_dir / "energy.csv",
        ("time", "total", "drift", "mean_density"),
        zip(traj.step_times, traj.step_energy, traj.drift_series, traj.mean_density),
    )
    rows = [
        (t,) + tuple(parts) + (sum(parts), tail)
        for t, parts, tail in zip(traj.times, traj.energies, traj.tail_fraction)
    ]
    _write_csv(
        run_dir / "snapshots.csv",
        ("time", "kinetic", "gradient", "mass", "interaction", "total", "tail_fraction"),
        rows,
    )


_CONFIG_ARG = click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
_OUTDIR_OPT = click.option(
    "--outdir", default=None, type=click.Path(file_okay=False),
    help="Write into this directory instead of a timestamped one.",
)


@main.command()
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def simulate(config_path, outdir):
    """Evolve the configured datum and record the conservation ledger."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "simulate", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    traj, more = _integrate_logged(state, spec, integ)
    notes += more
    _write_run_series(run_dir, traj)
    _write_state_files(run_dir, cfg, traj)
    verdicts = {"no_blowup": not traj.blowup_suspected}
    energy_diag = cfg.diagnostics.get("energy", {})
    if energy_diag.get("enabled"):
        max_drift = float(energy_diag.get("max_drift", 1e-5))
        verdicts["energy_drift"] = traj.max_energy_drift <= max_drift
    extra = {
        "energy": _energy_block(traj),
        "adapted_steps": traj.adapted_steps,
        "steps": len(traj.step_times) - 1,
    }
    _finish(run_dir, cfg, "simulate", verdicts, extra, notes)
    return verdicts


@main.command("causality-test")
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def causality_test(config_path, outdir):
    """Evolve compactly supported data and measure mass outside the cone."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "causality-test", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("causality", {})
    radius = section.get("radius", _data_radius(cfg.data_section))
    if radius is None:
        raise ConfigError(
            ["diagnostics.causality.radius is required when the initial data "
             "has no declared support radius"]
        )
    tolerance = float(section.get("tolerance", 1e-6))
    traj, more = _integrate_logged(state, spec, integ)
    notes += more
    rep = causality_residual(traj, float(radius))
    table = rep.table()
    _write_csv(run_dir / "cone.csv", table[0], table[1:])
    max_relative = float(rep.relative.max())
    verdicts = {"causality": max_relative <= tolerance}
    extra = {
        "radius": rep.radius,
        "pad": rep.pad,
        "tolerance": tolerance,
        "max_relative": max_relative,
        "energy": _energy_block(traj),
    }
    _finish(run_dir, cfg, "causality-test", verdicts, extra, notes)
    return verdicts


@main.command()
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def morawetz(config_path, outdir):
    """Evolve and check the interaction monotonicity inequality."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "morawetz", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("morawetz", {})
    sigma = float(section.get("sigma", 0.0))
    if sigma <= 0.0:
        sigma = 2.0 * grid.spacing
    interval = section.get("interval")
    mcfg = MorawetzConfig(
        sigma=sigma,
        interval=tuple(interval) if interval else (None, None),
    )
    traj, more = _integrate_logged(state, spec, integ)
    notes += more
    rep = morawetz_check(traj, spec, mcfg)
    series = rep["integrand"]
    _write_csv(
        run_dir / "morawetz.csv",
        ("time", "integrand"),
        zip(series.times, series.values),
    )
    verdicts = {"morawetz": bool(rep["pass"])}
    extra = {
        "lhs": rep["lhs"],
        "rhs": rep["rhs"],
        "margin": rep["margin"],
        "sigma": rep["sigma"],
        "lhs_half_sigma": rep["lhs_half_sigma"],
        "sigma_sensitivity": rep["sigma_sensitivity"],
        "energy": _energy_block(traj),
    }
    _finish(run_dir, cfg, "morawetz", verdicts, extra, notes)
    return verdicts


@main.command("decay-scan")
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def decay_scan_cmd(config_path, outdir):
    """Evolve and tabulate L^r norms with the high-frequency bound."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "decay-scan", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("decay", {})
    r_list = [float(r) for r in section.get("r_list", [4.0])]
    cutoff = float(section.get("cutoff", 4.0))
    traj, more = _integrate_logged(state, spec, integ)
    notes += more
    rep = decay_scan(traj, r_list, cutoff)
    table = rep.table()
    _write_csv(run_dir / "decay_scan.csv", table[0], table[1:])
    verdicts = {"high_band_bound": bool(rep.bound_ok)}
    extra = {"cutoff": rep.cutoff, "r_list": r_list, "energy": _energy_block(traj)}
    _finish(run_dir, cfg, "decay-scan", verdicts, extra, notes)
    return verdicts


@main.command("dispersive-bench")
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def dispersive_bench(config_path, outdir):
    """Measure free-flow L^r decay of a band-projected datum."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "dispersive-bench", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("dispersive", {})
    band = (section.get("band", "low"), float(section.get("cutoff", 1.0)))
    r_raw = section.get("r", "inf")
    r = math.inf if isinstance(r_raw, str) else float(r_raw)
    t_min = float(section.get("t_min", 3.0))
    t_max = float(section.get("t_max", grid.extent / 4.0))
    samples = int(section.get("samples", 12))
    times = np.geomspace(t_min, t_max, samples)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bench = free_dispersive_bench(
            state, band, r, times,
            fit_window=(t_min, t_max),
            reduction=section.get("reduction", "none"),
        )
    notes += [str(w.message) for w in caught]
    _write_csv(
        run_dir / "dispersive.csv", ("time", "norm"), zip(bench.times, bench.values)
    )
    verdicts = {}
    expected = section.get("expected_slope")
    if expected is not None:
        tol = float(section.get("slope_tol", 0.2))
        verdicts["slope"] = abs(bench.slope - float(expected)) <= tol
    extra = {
        "band": list(bench.band),
        "r": "inf" if math.isinf(bench.r) else bench.r,
        "slope": bench.slope,
        "intercept": bench.intercept,
        "fit_window": list(bench.fit_window),
    }
    _finish(run_dir, cfg, "dispersive-bench", verdicts, extra, notes)
    return verdicts


@main.command("wave-operator")
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def wave_operator_cmd(config_path, outdir):
    """Build the Cauchy datum whose forward flow matches the configured pair."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "wave-operator", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("scattering", {})
    schedule = tuple(float(x) for x in section.get("t_schedule", DEFAULT_T_SCHEDULE))
    tol = float(section.get("tol", 1e-4))
    eta0 = float(section.get("eta0", 0.1))
    asym = AsymptoticState(state.u, state.udot, extraction_time=0.0, cauchy_gap=0.0)
    write_snapshot(asym.as_state(0.0), run_dir / "asymptotic_pair.kgh",
                   role=ROLE_ASYMPTOTIC)
    datum = wave_operator(asym, spec, integ, schedule, tol=tol, eta0=eta0)
    write_snapshot(datum, run_dir / "wave_datum.kgh")
    report = datum.wave_report
    _write_csv(
        run_dir / "gaps.csv", ("index", "gap"), list(enumerate(report["gaps"]))
    )
    verdicts = {"converged": True}
    extra = {
        "t_used": report["t_used"],
        "smallness": report["smallness"],
        "gaps": list(report["gaps"]),
        "tol": tol,
        "datum_norm": state_h1l2_norm(datum),
    }
    _finish(run_dir, cfg, "wave-operator", verdicts, extra, notes)
    return verdicts


@main.command("scatter-roundtrip")
@_CONFIG_ARG
@_OUTDIR_OPT
@_guarded
def scatter_roundtrip(config_path, outdir):
    """Apply the numerical scattering map to the configured free pair."""
    cfg = _load(config_path)
    run_dir = _make_run_dir(cfg, "scatter-roundtrip", outdir)
    grid, spec, state, integ, notes = _prepare(cfg)
    section = cfg.diagnostics.get("scattering", {})
    schedule = tuple(float(x) for x in section.get("t_schedule", DEFAULT_T_SCHEDULE))
    tol = float(section.get("tol", 1e-4))
    eta0 = float(section.get("eta0", 0.1))
    extraction = section.get("extraction_times")
    if extraction is not None:
        extraction = tuple(float(x) for x in extraction)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = scattering_roundtrip(
            state.u, state.udot, spec, integ, schedule,
            extraction_times=extraction, tol=tol, eta0=eta0,
        )
    notes += [str(w.message) for w in caught]
    write_snapshot(rep["input"].as_state(0.0), run_dir / "input_pair.kgh",
                   role=ROLE_ASYMPTOTIC)
    write_snapshot(rep["datum"], run_dir / "datum.kgh")
    write_snapshot(rep["output"].as_state(0.0), run_dir / "output_pair.kgh",
                   role=ROLE_ASYMPTOTIC)
    rows = [("output", i, g) for i, g in enumerate(rep["output"].gap_sequence)]
    _write_csv(run_dir / "gaps.csv", ("stage", "index", "gap"), rows)
    verdicts = {"converged": bool(rep["converged"])}
    extra = {
        "s_distance": rep["s_distance"],
        "free_energy_in": rep["free_energy_in"],
        "free_energy_out": rep["free_energy_out"],
        "energy_identity_gap": rep["energy_identity_gap"],
        "energy": _energy_block(rep["trajectory"]),
    }
    _finish(run_dir, cfg, "scatter-roundtrip", verdicts, extra, notes)
    return verdicts


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@_guarded
def report(run_dir):
    """Print the digest of an existing run directory."""
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise RuntimeError(f"{run_dir} holds no summary.json")
    data = json.loads(path.read_text())
    click.echo(f"command: {data.get('command', '?')}")
    click.echo(f"config hash: {data.get('config_hash', '?')}")
    versions = data.get("versions", {})
    click.echo("versions: " + ", ".join(f"{k} {v}" for k, v in sorted(versions.items())))
    energy = data.get("energy")
    if energy:
        click.echo(
            f"energy: first {energy['first']:.6g}, last {energy['last']:.6g}, "
            f"max drift {energy['max_drift']:.3e}"
        )
    for note in data.get("warnings", []):
        click.echo(f"warning: {note}")
    verdicts = data.get("verdicts", {})
    for name in sorted(verdicts):
        click.echo(f"{'PASS' if verdicts[name] else 'FAIL'} {name}")
    return verdicts


if __name__ == "__main__":
    main()
