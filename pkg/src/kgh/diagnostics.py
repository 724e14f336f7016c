"""Measured counterparts of the qualitative theorems: light-cone residuals,
Morawetz functionals, spatial/frequency splits, decay windows, and
perturbation response.

Everything here is read-only over trajectories.  Conventions shared by all
routines: distances are measured from the box center (the grid axes are
symmetric about 0), sharp indicator splits put the equality set on the
outside, and time integrals are trapezoid sums over snapshot stamps.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .evolve import integrate
from .norms import (
    birman_solomjak_norm,
    delta_exponent,
    energy,
    gradient_l2,
    lebesgue_norm,
    state_h1l2_distance,
    state_h1l2_norm,
    x1_norm,
)
from .potential import POWER_LAW, hartree_convolve
from .propagator import PhaseState
from .spectral import DEFAULT_PROFILE, PHYSICAL, SPECTRAL, Field, transform


@dataclass(frozen=True)
class MorawetzConfig:
    """sigma regularizes x/|x| as x/a(x), a = sqrt(|x|^2 + sigma^2)."""

    sigma: float
    interval: tuple = (None, None)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass
class ConeReport:
    times: np.ndarray
    outside_l2: np.ndarray
    relative: np.ndarray
    radius: float
    pad: float

    def table(self):
        return [("time", "outside_l2", "relative")] + [
            (t, o, r) for t, o, r in zip(self.times, self.outside_l2, self.relative)
        ]


@dataclass
class DiagnosticsSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)


@dataclass
class QuietWindowReport:
    found: bool
    t2: float | None
    trailing_integral: float | None
    bound_t2: float
    within_bound: bool
    window_length: float
    eps: float
    profile: DiagnosticsSeries | None = None


@dataclass
class DecayReport:
    """Per-snapshot L^r norms of u, its high and low frequency parts, and
    the high-frequency bound sqrt(E) * N^(delta(r) - 1)."""

    times: np.ndarray
    cutoff: float
    columns: dict
    bound_ok: bool

    def table(self):
        names = ["time"]
        arrays = [self.times]
        for r, cols in sorted(self.columns.items()):
            for key in ("full", "high", "low", "bound"):
                names.append(f"r={r:g}:{key}")
                arrays.append(cols[key])
        return [tuple(names)] + list(zip(*arrays))


def spatial_split(f, t, radius_factor=2.0):
    """Sharp indicator split of f at radius radius_factor * t from the box center.

    Returns (inside, outside); the equality sphere goes outside, so at t = 0
    the whole field is outside.  inside + outside reproduces f exactly.
    """
    if t < 0:
        raise ValueError(f"split time must be nonnegative, got {t}")
    grid = f.grid
    phys = transform(f, PHYSICAL)
    radius = radius_factor * t
    if radius >= grid.extent / 2:
        warnings.warn(
            f"split radius {radius:g} reaches the inscribed ball of the box "
            f"(extent {grid.extent:g}); the outside set may be empty",
            stacklevel=2,
        )
    inside_mask = grid.rmag < radius
    inside = np.where(inside_mask, phys.data, 0.0)
    outside = phys.data - inside
    return Field(grid, inside, PHYSICAL), Field(grid, outside, PHYSICAL)


def _l2_outside(field_phys, grid, radius):
    mask = grid.rmag > radius
    return math.sqrt(grid.cell_volume * float(np.sum(np.abs(field_phys.data[mask]) ** 2)))


def causality_residual(traj, R):
    """L^2 mass of u outside the padded light cone |x| <= R + t + 2h per snapshot.

    Preconditions: the initial datum must be supported in the R-ball (mass
    fraction outside below 1e-12) and the cone must stay clear of the box
    boundary (t_max + R < extent/2).
    """
    first = traj.states[0]
    grid = first.grid
    pad = 2.0 * grid.spacing
    u0 = first.u if first.u.representation == PHYSICAL else transform(first.u, PHYSICAL)
    v0 = first.udot if first.udot.representation == PHYSICAL else transform(first.udot, PHYSICAL)
    total0 = math.sqrt(
        grid.cell_volume * float(np.sum(np.abs(u0.data) ** 2 + np.abs(v0.data) ** 2))
    )
    out0 = math.sqrt(_l2_outside(u0, grid, R) ** 2 + _l2_outside(v0, grid, R) ** 2)
    if total0 == 0.0:
        raise ValueError("initial state is identically zero; no support to track")
    if out0 / total0 > 1e-12:
        raise ValueError(
            f"initial data is not supported in the R-ball: mass fraction "
            f"{out0 / total0:.3e} outside radius {R:g} exceeds 1e-12"
        )
    t_max = float(traj.times[-1]) - float(traj.times[0])
    if t_max + R >= grid.extent / 2:
        raise ValueError(
            f"light cone leaves the box: t_max + R = {t_max + R:g} must stay "
            f"below extent/2 = {grid.extent / 2:g}"
        )
    t0 = float(traj.times[0])
    times, outside, rel = [], [], []
    for t, state in zip(traj.times, traj.states):
        u = state.u if state.u.representation == PHYSICAL else transform(state.u, PHYSICAL)
        radius = R + (float(t) - t0) + pad
        out = _l2_outside(u, grid, radius)
        total = math.sqrt(grid.cell_volume * float(np.sum(np.abs(u.data) ** 2)))
        times.append(float(t))
        outside.append(out)
        rel.append(out / max(total, 1e-300))
    return ConeReport(
        times=np.asarray(times),
        outside_l2=np.asarray(outside),
        relative=np.asarray(rel),
        radius=R,
        pad=pad,
    )


def _nonincreasing_radial(spec):
    if spec.kind == POWER_LAW:
        return True
    return spec.a_alpha is not None and spec.a_alpha > 0


def _interval_slice(traj, interval):
    lo, hi = interval
    lo = traj.times[0] if lo is None else lo
    hi = traj.times[-1] if hi is None else hi
    mask = (traj.times >= lo - 1e-12) & (traj.times <= hi + 1e-12)
    idx = np.nonzero(mask)[0]
    if len(idx) < 2:
        raise ValueError(f"interval [{lo}, {hi}] holds fewer than 2 snapshots")
    return idx


def _morawetz_lhs(traj, spec, sigma, idx):
    grid = traj.states[0].grid
    a = np.sqrt(grid.rsq + sigma**2)
    weights = [grid.broadcast_axis(grid.x_axes[i], i) / a for i in range(grid.dim)]
    ik = [1j * grid.broadcast_axis(grid.k_axes[i], i) for i in range(grid.dim)]
    integrand = np.empty(len(idx))
    for row, i in enumerate(idx):
        state = traj.states[i]
        u = state.u if state.u.representation == PHYSICAL else transform(state.u, PHYSICAL)
        rho = np.abs(u.data) ** 2
        conv = hartree_convolve(spec, grid, rho)
        conv_hat = np.fft.fftn(conv)
        radial_dot = np.zeros_like(rho)
        for w, mult in zip(weights, ik):
            radial_dot += w * np.fft.ifftn(mult * conv_hat).real
        integrand[row] = -grid.cell_volume * float(np.sum(rho * radial_dot))
    return float(trapezoid(integrand, traj.times[idx])), integrand


def morawetz_check(traj, spec, cfg):
    """Monotonicity inequality: the weighted space-time interaction integral
    against 4 sup||udot|| sup||grad u|| over the interval.

    The radial direction x/|x| is regularized as x/a with a = sqrt(|x|^2 +
    sigma^2); since the continuum statement is the sigma -> 0 limit, the
    report carries a sigma-halving sensitivity line.
    """
    if spec is None or not _nonincreasing_radial(spec):
        raise ValueError(
            "the monotonicity inequality needs a nonincreasing radial potential"
        )
    idx = _interval_slice(traj, cfg.interval)
    lhs, integrand = _morawetz_lhs(traj, spec, cfg.sigma, idx)
    lhs_half, _ = _morawetz_lhs(traj, spec, 0.5 * cfg.sigma, idx)
    sup_kin = 0.0
    sup_grad = 0.0
    for i in idx:
        state = traj.states[i]
        sup_kin = max(sup_kin, lebesgue_norm(state.udot, 2))
        sup_grad = max(sup_grad, gradient_l2(state.u))
    rhs = 4.0 * sup_kin * sup_grad
    passed = lhs <= rhs * (1.0 + 1e-6)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "pass": passed,
        "margin": rhs - lhs,
        "sigma": cfg.sigma,
        "lhs_half_sigma": lhs_half,
        "sigma_sensitivity": abs(lhs_half - lhs) / max(abs(lhs), 1e-300),
        "integrand": DiagnosticsSeries(
            traj.times[idx], integrand, label="morawetz integrand"
        ),
    }


def weighted_morawetz(traj, alpha, a, sigma):
    """Time integral of ||u_<||^(alpha+4) in the block norm, weighted by 1/(2t+a).

    u_< is the inside part of the sharp spatial split at radius 2t; the block
    norm is l^(alpha+4) over sigma-cubes of local L^2 norms.  The trajectory
    must start at t1 >= 1.
    """
    if traj.times[0] < 1.0 - 1e-12:
        raise ValueError(
            f"the weighted bound is stated for 1 <= t1 <= t2; trajectory "
            f"starts at {traj.times[0]:g}"
        )
    if not a > 0:
        raise ValueError(f"weight offset a must be positive, got {a}")
    m = alpha + 4.0
    vals = np.empty(len(traj.times))
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        inside, _ = spatial_split(state.u, float(t))
        vals[i] = birman_solomjak_norm(inside, m, 2, sigma) ** m / (2.0 * float(t) + a)
    return float(trapezoid(vals, traj.times))


def block_norm_series(traj, alpha, sigma):
    """The unweighted integrand ||u_<(t)||^(alpha+4)_{l^(alpha+4)(L^2)} per snapshot."""
    m = alpha + 4.0
    vals = np.empty(len(traj.times))
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        inside, _ = spatial_split(state.u, float(t))
        vals[i] = birman_solomjak_norm(inside, m, 2, sigma) ** m
    return DiagnosticsSeries(
        np.asarray(traj.times, dtype=float),
        vals,
        label=f"block norm^{m:g}",
        meta={"alpha": alpha, "sigma": sigma},
    )


def find_quiet_window(series, l, eps, t1, a=1.0, weighted_total=None):
    """Smallest t2 >= t1 + l whose trailing-l integral of the series is <= eps.

    Also checks t2 against the a-priori bound exp((2+a) M l / eps) * (t1+l+1) - 1,
    with M the weighted integral measured from the series itself unless
    weighted_total is supplied.  When no window exists within the data horizon
    the report carries the trailing-integral profile instead.
    """
    times = np.asarray(series.times, dtype=float)
    vals = np.asarray(series.values, dtype=float)
    if not (l > 0 and eps > 0):
        raise ValueError("window length and eps must be positive")
    if times[0] > t1 + 1e-12 or times[-1] < t1 + l - 1e-12:
        raise ValueError(
            f"series covers [{times[0]:g}, {times[-1]:g}], not the window "
            f"start [{t1:g}, {t1 + l:g}]"
        )
    cumulative = np.concatenate([[0.0], cumulative_trapezoid(vals, times)])
    if weighted_total is None:
        weighted_total = float(trapezoid(vals / (2.0 * times + a), times))
    exponent = (2.0 + a) * weighted_total * l / eps
    # the a-priori bound is an existence bound and easily exceeds float range
    bound_t2 = math.exp(exponent) * (t1 + l + 1.0) - 1.0 if exponent < 700 else math.inf

    candidates = times[times >= t1 + l - 1e-12]
    trailing = np.interp(candidates, times, cumulative) - np.interp(
        candidates - l, times, cumulative
    )
    hits = np.nonzero(trailing <= eps)[0]
    profile = DiagnosticsSeries(candidates, trailing, label=f"trailing {l:g}-integral")
    if len(hits) == 0:
        return QuietWindowReport(
            found=False,
            t2=None,
            trailing_integral=None,
            bound_t2=bound_t2,
            within_bound=False,
            window_length=l,
            eps=eps,
            profile=profile,
        )
    k = hits[0]
    t2 = float(candidates[k])
    return QuietWindowReport(
        found=True,
        t2=t2,
        trailing_integral=float(trailing[k]),
        bound_t2=bound_t2,
        within_bound=t2 <= bound_t2 * (1.0 + 1e-12),
        window_length=l,
        eps=eps,
        profile=profile,
    )


@dataclass
class _DifferenceTrajectory:
    times: np.ndarray
    states: list


def perturbation_experiment(base, delta, forcing_eps, spec, config):
    """Response of the flow to an eps-sized datum shift plus eps-sized forcing.

    Integrates u from base+delta (exact equation) and a near-solution from
    base with a static source of L^2 size forcing_eps, then reports the
    difference in the interval (space-time) norm and in sup-in-time H^1 x L^2,
    with ratios to forcing_eps.
    """
    if state_h1l2_norm(delta) > forcing_eps * (1.0 + 1e-9):
        raise ValueError(
            f"datum shift has H1 x L2 size {state_h1l2_norm(delta):.3e}, "
            f"larger than forcing_eps = {forcing_eps:g}"
        )
    grid = base.grid
    shifted = PhaseState(
        Field(grid, base.u.data + transform(delta.u, base.u.representation).data,
              base.u.representation),
        Field(grid, base.udot.data + transform(delta.udot, base.udot.representation).data,
              base.udot.representation),
        base.time,
    )
    if forcing_eps > 0:
        profile = transform(delta.u, SPECTRAL).data
        size = math.sqrt(float(np.sum(np.abs(profile) ** 2)))
        if size == 0.0:
            raise ValueError(
                "forcing_eps > 0 needs a nonzero delta.u to shape the source term"
            )
        forcing_hat = (forcing_eps / size) * profile
    else:
        forcing_hat = None
    exact = integrate(shifted, spec, config)
    near = integrate(base, spec, config, forcing_hat=forcing_hat)
    diffs = []
    for sa, sb in zip(exact.states, near.states):
        du = transform(sa.u, PHYSICAL).data - transform(sb.u, PHYSICAL).data
        dv = transform(sa.udot, PHYSICAL).data - transform(sb.udot, PHYSICAL).data
        diffs.append(
            PhaseState(Field(grid, du, PHYSICAL), Field(grid, dv, PHYSICAL), sa.time)
        )
    diff_traj = _DifferenceTrajectory(exact.times, diffs)
    sup_h1l2 = max(state_h1l2_norm(s) for s in diffs)
    interval_norm, table = x1_norm(diff_traj)
    return {
        "interval_norm": interval_norm,
        "sup_h1l2": sup_h1l2,
        "forcing_eps": forcing_eps,
        "ratio_interval": interval_norm / forcing_eps if forcing_eps > 0 else None,
        "ratio_sup": sup_h1l2 / forcing_eps if forcing_eps > 0 else None,
        "norm_table": table,
    }


def decay_scan(traj, r_list, N):
    """Per-snapshot L^r norms of u and of its frequency split at cutoff N.

    Each r must lie strictly inside (2, 2n/(n-2)) (the whole of (2, inf) in
    dimensions 1 and 2); the high-frequency part is checked against
    sqrt(E(t)) * N^(delta(r)-1) with the measured total energy.
    """
    grid = traj.states[0].grid
    n = grid.dim
    two_star = 2.0 * n / (n - 2.0) if n >= 3 else math.inf
    problems = []
    for r in r_list:
        if r <= 2.0:
            problems.append(
                f"r = {r:g} rejected: decay fails at r = 2 (L^2 is conserved)"
            )
        elif r >= two_star:
            problems.append(f"r = {r:g} is outside (2, {two_star:g})")
    if problems:
        raise ValueError("; ".join(problems))
    if not N > 0:
        raise ValueError(f"frequency cutoff must be positive, got {N}")

    spec = getattr(traj, "potential", None)
    columns = {
        float(r): {key: np.empty(len(traj.times)) for key in ("full", "high", "low", "bound")}
        for r in r_list
    }
    bound_ok = True
    low_symbol = DEFAULT_PROFILE.low_symbol(grid, N)
    for i, state in enumerate(traj.states):
        u_hat = transform(state.u, SPECTRAL)
        low_hat = Field(grid, low_symbol * u_hat.data, SPECTRAL)
        high_hat = Field(grid, u_hat.data - low_hat.data, SPECTRAL)
        e_total = energy(state, spec).total
        for r in r_list:
            cols = columns[float(r)]
            cols["full"][i] = lebesgue_norm(state.u, r)
            cols["high"][i] = lebesgue_norm(high_hat, r)
            cols["low"][i] = lebesgue_norm(low_hat, r)
            cols["bound"][i] = math.sqrt(e_total) * N ** (delta_exponent(n, r) - 1.0)
            if cols["high"][i] > cols["bound"][i] + 1e-10:
                bound_ok = False
    return DecayReport(
        times=np.asarray(traj.times, dtype=float),
        cutoff=float(N),
        columns=columns,
        bound_ok=bound_ok,
    )
