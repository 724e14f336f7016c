"""TOML run configuration: parsing, whole-file validation, object builders.

parse_config collects every violation before failing (a ConfigError carries
the full list), including unknown keys, per-section bounds, and cross-field
policies: the CFL-type accuracy fence dt * lambda_max <= pi, the causality
box requirement R + t_end + 2h < extent/2, and the scattering box policy
extent >= 4 * (data radius + largest schedule time).
"""

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .data import bump_field, gaussian_field, zero_field
from .errors import ConfigError
from .evolve import DUHAMEL_RK4, GAUTSCHI2, IntegratorConfig
from .potential import (
    EXPLORATORY,
    K0_SCREENED,
    K0_ZERO,
    THEOREM,
    make_power_potential,
    make_table_potential,
    theorem_gamma_interval,
)
from .propagator import PhaseState
from .spectral import Grid

_GRID_KEYS = {"dim", "extent", "points"}
_POTENTIAL_KEYS = {
    "kind", "gamma", "mode", "alpha", "a", "k0_policy", "screen_mass",
    "table_r", "table_v", "p1", "p2", "a_alpha",
}
_INTEGRATOR_KEYS = {
    "scheme", "dt", "t_end", "snapshot_stride", "blowup_threshold", "adaptive",
}
_DATA_KEYS = {
    "kind", "width", "amplitude", "center", "phase_k", "radius", "smoothness",
    "path", "velocity",
}
_VELOCITY_KEYS = _DATA_KEYS - {"velocity"}
_OUTPUT_KEYS = {"directory", "snapshot_stride", "formats"}
_DIAG_SECTIONS = {
    "causality": {"enabled", "radius", "tolerance"},
    "morawetz": {"enabled", "sigma", "interval"},
    "decay": {"enabled", "r_list", "cutoff"},
    "scattering": {"enabled", "t_schedule", "tol", "eta0", "extraction_times"},
    "dispersive": {
        "band", "cutoff", "r", "t_min", "t_max", "samples", "reduction",
        "expected_slope", "slope_tol",
    },
    "energy": {"enabled", "max_drift"},
}
_SECTIONS = {"grid", "potential", "integrator", "initial-data", "diagnostics", "output"}


@dataclass
class RunConfig:
    raw: dict
    grid_section: dict
    potential_section: dict
    integrator_section: dict
    data_section: dict
    diagnostics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def config_hash(self):
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def build_grid(self):
        g = self.grid_section
        return Grid(int(g["dim"]), float(g["extent"]), int(g["points"]))

    def build_potential(self, grid):
        p = self.potential_section
        kind = p.get("kind", "power")
        if kind == "none":
            return None
        mode = p.get("mode", THEOREM)
        common = dict(
            alpha=float(p.get("alpha", 2.0)),
            a=float(p.get("a", 1.0)),
            k0_policy=p.get("k0_policy", K0_ZERO),
            screen_mass=float(p.get("screen_mass", 1.0)),
            mode=mode,
        )
        if kind == "power":
            return make_power_potential(grid, float(p["gamma"]), **common)
        extra = {k: p[k] for k in ("p1", "p2", "a_alpha") if k in p}
        return make_table_potential(
            grid, np.asarray(p["table_r"], dtype=float),
            np.asarray(p["table_v"], dtype=float), **common, **extra,
        )

    def build_integrator(self):
        i = self.integrator_section
        return IntegratorConfig(
            scheme=i.get("scheme", GAUTSCHI2),
            dt=float(i["dt"]),
            t_end=float(i["t_end"]),
            snapshot_stride=int(i.get("snapshot_stride", 1)),
            blowup_threshold=float(i.get("blowup_threshold", 1e3)),
            adaptive=bool(i.get("adaptive", False)),
        )

    def build_initial_state(self, grid):
        d = self.data_section
        if d.get("kind") == "file":
            from .snapshots import read_snapshot

            state, _role = read_snapshot(d["path"])
            if state.grid != grid:
                raise ConfigError(
                    [f"snapshot grid {state.grid.dim}d/{state.grid.points_per_dim} "
                     f"does not match the [grid] section"]
                )
            return state
        u = _build_field(grid, d)
        v_spec = d.get("velocity", {"kind": "zero"})
        udot = _build_field(grid, v_spec)
        return PhaseState(u, udot, 0.0)


def _build_field(grid, section):
    kind = section.get("kind", "zero")
    center = section.get("center")
    if center is not None:
        center = tuple(float(c) for c in center)
    phase_k = section.get("phase_k")
    if phase_k is not None:
        phase_k = tuple(float(c) for c in phase_k)
    if kind == "zero":
        return zero_field(grid)
    if kind == "gaussian":
        return gaussian_field(
            grid,
            width=float(section.get("width", 1.0)),
            amplitude=float(section.get("amplitude", 1.0)),
            center=center,
            phase_k=phase_k,
        )
    if kind == "bump":
        return bump_field(
            grid,
            radius=float(section.get("radius", 2.0)),
            amplitude=float(section.get("amplitude", 1.0)),
            center=center,
            smoothness=int(section.get("smoothness", 8)),
        )
    raise ConfigError([f"unknown field kind {kind!r}"])


def _check_keys(section_name, table, allowed, problems):
    for key in table:
        if key not in allowed:
            problems.append(f"unknown key {section_name}.{key}")


def _data_radius(data_section):
    """Declared support radius for box-size policies (all-but-1e-6 mass)."""
    kind = data_section.get("kind", "zero")
    if kind == "gaussian":
        return 3.5 * float(data_section.get("width", 1.0))
    if kind == "bump":
        return float(data_section.get("radius", 2.0))
    return None


def parse_config(text):
    """Parse and validate a TOML run configuration; raises ConfigError with
    the complete list of violations on any problem."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"not valid TOML: {exc}"]) from exc

    problems = []
    for section in raw:
        if section not in _SECTIONS:
            problems.append(f"unknown section [{section}]")

    grid_sec = raw.get("grid", {})
    _check_keys("grid", grid_sec, _GRID_KEYS, problems)
    for key in ("dim", "extent", "points"):
        if key not in grid_sec:
            problems.append(f"grid.{key} is required")
    grid_ok = not any(p.startswith("grid.") for p in problems)
    dim_known = None
    try:
        dim_known = int(grid_sec["dim"])
    except (KeyError, TypeError, ValueError):
        pass
    lam_max = None
    if grid_ok:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                probe = Grid(int(grid_sec["dim"]), float(grid_sec["extent"]),
                             int(grid_sec["points"]))
            lam_max = float(probe.lam.max())
        except (ValueError, TypeError) as exc:
            problems.append(f"grid: {exc}")
            grid_ok = False

    pot_sec = raw.get("potential", {})
    _check_keys("potential", pot_sec, _POTENTIAL_KEYS, problems)
    kind = pot_sec.get("kind", "power")
    if kind not in ("power", "table", "none"):
        problems.append(f"potential.kind must be power, table, or none, got {kind!r}")
    mode = pot_sec.get("mode", THEOREM)
    if mode not in (THEOREM, EXPLORATORY):
        problems.append(f"potential.mode must be {THEOREM!r} or {EXPLORATORY!r}")
    if kind == "power":
        if "gamma" not in pot_sec:
            problems.append("potential.gamma is required for a power-law potential")
        elif mode == THEOREM and dim_known is not None:
            lo, hi = theorem_gamma_interval(dim_known)
            gamma = float(pot_sec["gamma"])
            if not (lo < gamma < hi):
                problems.append(
                    f"potential.gamma = {gamma:g} is outside the theorem window "
                    f"({lo:g}, {hi:g})"
                )
    if kind == "table":
        if "table_r" not in pot_sec or "table_v" not in pot_sec:
            problems.append("potential.table_r and potential.table_v are required for a table potential")
        elif len(pot_sec["table_r"]) != len(pot_sec["table_v"]):
            problems.append("potential.table_r and potential.table_v differ in length")
    policy = pot_sec.get("k0_policy", K0_ZERO)
    if policy not in (K0_ZERO, K0_SCREENED):
        problems.append(f"potential.k0_policy must be {K0_ZERO!r} or {K0_SCREENED!r}")

    int_sec = raw.get("integrator", {})
    _check_keys("integrator", int_sec, _INTEGRATOR_KEYS, problems)
    for key in ("dt", "t_end"):
        if key not in int_sec:
            problems.append(f"integrator.{key} is required")
    dt = t_end = None
    if "dt" in int_sec and "t_end" in int_sec:
        try:
            cfg = IntegratorConfig(
                scheme=int_sec.get("scheme", GAUTSCHI2),
                dt=float(int_sec["dt"]),
                t_end=float(int_sec["t_end"]),
                snapshot_stride=int(int_sec.get("snapshot_stride", 1)),
                blowup_threshold=float(int_sec.get("blowup_threshold", 1e3)),
                adaptive=bool(int_sec.get("adaptive", False)),
            )
            dt, t_end = cfg.dt, cfg.t_end
        except (ValueError, TypeError) as exc:
            problems.append(f"integrator: {exc}")
        if dt is not None and lam_max is not None and dt * lam_max > math.pi * (1 + 1e-12):
            problems.append(
                f"integrator.dt = {dt:g} violates dt * lambda_max <= pi on this "
                f"grid (lambda_max = {lam_max:.4g}; need dt <= {math.pi / lam_max:.4g})"
            )
        if dt is not None and t_end is not None and t_end > 0:
            n_float = t_end / dt
            if abs(n_float - round(n_float)) > 1e-8 * max(1.0, abs(n_float)):
                problems.append(
                    f"integrator.t_end = {t_end:g} is not a whole number of dt steps"
                )
            else:
                stride = int(int_sec.get("snapshot_stride", 1))
                if stride >= 1 and int(round(n_float)) % stride != 0:
                    problems.append(
                        f"integrator.snapshot_stride = {stride} does not divide the "
                        f"step count {int(round(n_float))}"
                    )

    data_sec = raw.get("initial-data", {})
    _check_keys("initial-data", data_sec, _DATA_KEYS, problems)
    dkind = data_sec.get("kind")
    if dkind not in ("gaussian", "bump", "file"):
        problems.append(
            f"initial-data.kind must be gaussian, bump, or file, got {dkind!r}"
        )
    if dkind == "gaussian" and float(data_sec.get("width", 1.0)) <= 0:
        problems.append("initial-data.width must be positive")
    if dkind == "bump" and float(data_sec.get("radius", 2.0)) <= 0:
        problems.append("initial-data.radius must be positive")
    if dkind == "file" and "path" not in data_sec:
        problems.append("initial-data.path is required for kind = file")
    if grid_ok and data_sec.get("center") is not None:
        if len(data_sec["center"]) != int(grid_sec["dim"]):
            problems.append(
                f"initial-data.center has {len(data_sec['center'])} entries "
                f"for a {grid_sec['dim']}-dimensional grid"
            )
    vel = data_sec.get("velocity", {})
    if vel:
        _check_keys("initial-data.velocity", vel, _VELOCITY_KEYS, problems)
        if vel.get("kind", "zero") not in ("zero", "gaussian", "bump", "file"):
            problems.append(
                f"initial-data.velocity.kind must be zero, gaussian, bump, or "
                f"file, got {vel.get('kind')!r}"
            )

    diag = raw.get("diagnostics", {})
    for name, table in diag.items():
        if name not in _DIAG_SECTIONS:
            problems.append(f"unknown section [diagnostics.{name}]")
            continue
        _check_keys(f"diagnostics.{name}", table, _DIAG_SECTIONS[name], problems)

    out_sec = raw.get("output", {})
    _check_keys("output", out_sec, _OUTPUT_KEYS, problems)
    if "snapshot_stride" in out_sec and int(out_sec["snapshot_stride"]) < 0:
        problems.append("output.snapshot_stride must be >= 0 (0 disables snapshots)")

    # cross-field box policies
    if grid_ok and t_end is not None:
        extent = float(grid_sec["extent"])
        h = extent / int(grid_sec["points"])
        caus = diag.get("causality", {})
        if caus.get("enabled"):
            radius = float(caus.get("radius", _data_radius(data_sec) or 0.0))
            if radius + t_end + 2 * h >= extent / 2:
                problems.append(
                    f"causality diagnostic needs R + t_end + 2h < extent/2; "
                    f"got {radius:g} + {t_end:g} + {2 * h:g} >= {extent / 2:g}"
                )
        scat = diag.get("scattering", {})
        if scat.get("enabled"):
            schedule = scat.get("t_schedule", [10.0, 20.0, 40.0, 80.0])
            r_data = _data_radius(data_sec)
            if r_data is not None:
                needed = 4.0 * (r_data + float(max(schedule)))
                if extent < needed:
                    problems.append(
                        f"scattering box policy needs extent >= 4 * (data radius "
                        f"+ largest schedule time) = {needed:g}; got {extent:g}"
                    )

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        raw=raw,
        grid_section=grid_sec,
        potential_section=pot_sec,
        integrator_section=int_sec,
        data_section=data_sec,
        diagnostics=diag,
        output=out_sec,
    )
