"""Numerical wave operators, asymptotic-state extraction, and completeness
residuals.

An interacting solution scatters when V0(-t)(u, udot) settles to a limit pair
in H^1 x L^2; that limit is the asymptotic state.  The wave operator goes the
other way: given the asymptotic pair, place it at a large time T with the
free flow, integrate the full equation backward to 0, and let T grow until
the answers agree.  All residuals here lean on the exact unitarity of the
free rotation (free energy flat to roundoff), so every gap measured is a
property of the nonlinear flow, not of the bookkeeping.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .diagnostics import DiagnosticsSeries
from .evolve import IntegratorConfig, integrate
from .norms import AdmissibleTriple, state_h1l2_distance, state_h1l2_norm, strichartz_norm
from .propagator import PhaseState, apply_free, free_energy
from .spectral import require_same_grid

DEFAULT_T_SCHEDULE = (10.0, 20.0, 40.0, 80.0)
DEFAULT_ETA0 = 0.1


@dataclass
class AsymptoticState:
    u0_plus: object
    u1_plus: object
    extraction_time: float
    cauchy_gap: float
    gap_sequence: tuple = ()
    converged: bool = True

    def __post_init__(self):
        require_same_grid(self.u0_plus, self.u1_plus)
        if not math.isfinite(self.cauchy_gap):
            raise ValueError("cauchy_gap must be finite")

    @property
    def grid(self):
        return self.u0_plus.grid

    def as_state(self, time=0.0):
        return PhaseState(self.u0_plus.copy(), self.u1_plus.copy(), time)


def extract_asymptotic_state(traj, times):
    """Undo the free flow at each requested snapshot and return the limit pair.

    times must be increasing, with at least two entries, each matching a
    snapshot stamp.  The H^1 x L^2 gaps between consecutive candidates should
    decrease; if they do not, the state is flagged (and warned) as not yet
    asymptotic.
    """
    times = [float(t) for t in times]
    if len(times) < 2:
        raise ValueError("need at least two extraction times to measure a gap")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("extraction times must be strictly increasing")
    candidates = []
    for t in times:
        state = traj.state_at(t) if hasattr(traj, "state_at") else _lookup(traj, t)
        candidates.append(apply_free(state, -t))
    gaps = tuple(
        state_h1l2_distance(a, b) for a, b in zip(candidates, candidates[1:])
    )
    # gaps at the roundoff floor (V = 0, fully converged runs) carry no order
    floor = 1e-12 * max(state_h1l2_norm(candidates[-1]), 1e-300)
    converged = all(
        b <= max(a * (1.0 + 1e-9), floor) for a, b in zip(gaps, gaps[1:])
    )
    if not converged:
        warnings.warn(
            f"not yet asymptotic: extraction gaps increase along {times} "
            f"(gaps {[f'{g:.3e}' for g in gaps]})",
            stacklevel=2,
        )
    last = candidates[-1]
    return AsymptoticState(
        u0_plus=last.u,
        u1_plus=last.udot,
        extraction_time=times[-1],
        cauchy_gap=gaps[-1],
        gap_sequence=gaps,
        converged=converged,
    )


def _lookup(traj, t):
    times = np.asarray(traj.times, dtype=float)
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise KeyError(f"no snapshot at t = {t}")
    return traj.states[i]


def _kg_pair(n):
    q = 2.0 * (n + 2.0) / n
    return AdmissibleTriple(theta=1.0, q=q, r=q, rho=0.5, label="kg diagonal, energy level")


def free_flow_smallness(asym, window, samples=9):
    """Strichartz size of the free flow of the asymptotic pair over [T, T_end].

    This is the computable stand-in for the neighborhood-of-infinity smallness
    hypothesis: the backward construction is contractive only when this is
    below eta0.
    """
    t0, t1 = window
    stamps = np.linspace(t0, t1, samples)
    base = asym.as_state(0.0)
    states = [apply_free(base, float(t)) for t in stamps]
    traj = _FreeView(stamps, states)
    return strichartz_norm(traj, _kg_pair(asym.grid.dim))


@dataclass
class _FreeView:
    times: np.ndarray
    states: list


def wave_operator(asym, spec, config, t_schedule=DEFAULT_T_SCHEDULE, tol=1e-4, eta0=DEFAULT_ETA0):
    """Cauchy datum at t = 0 whose forward flow has the given asymptotic pair.

    For each T in the increasing schedule: place V0(T)(u0+, u1+) at time T and
    integrate the interacting equation backward to 0.  Stops once consecutive
    answers differ by less than tol in H^1 x L^2 (returning the larger-T one);
    an exhausted schedule raises with the measured gap sequence.

    The returned state carries a wave_report attribute with the horizon that
    converged, the gap sequence, and the measured smallness.
    """
    if any(b <= a for a, b in zip(t_schedule, t_schedule[1:])):
        raise ValueError("t_schedule must be strictly increasing")
    if t_schedule[0] <= 0:
        raise ValueError("t_schedule entries must be positive")
    smallness = free_flow_smallness(asym, (t_schedule[0], t_schedule[-1]))
    if smallness > eta0:
        raise ValueError(
            f"free flow is not small near infinity: Strichartz size {smallness:.3e} "
            f"exceeds eta0 = {eta0:g}; advise larger initial T in the schedule "
            f"(or smaller data)"
        )
    candidates = []
    gaps = []
    for T in t_schedule:
        datum = apply_free(asym.as_state(0.0), float(T))
        n_steps = int(round(T / config.dt))
        if abs(n_steps * config.dt - T) > 1e-9 * T or n_steps < 1:
            raise ValueError(
                f"schedule time T = {T:g} is not a whole number of dt = {config.dt:g} steps"
            )
        leg = IntegratorConfig(
            scheme=config.scheme,
            dt=config.dt,
            t_end=0.0,
            snapshot_stride=n_steps,
            blowup_threshold=config.blowup_threshold,
            adaptive=config.adaptive,
        )
        back = integrate(datum, spec, leg)
        candidates.append(back.states[-1])
        if len(candidates) >= 2:
            gap = state_h1l2_distance(candidates[-1], candidates[-2])
            gaps.append(gap)
            if gap < tol:
                result = candidates[-1]
                result.wave_report = {
                    "t_used": float(T),
                    "gaps": tuple(gaps),
                    "smallness": float(smallness),
                }
                return result
    raise RuntimeError(
        f"wave operator schedule {tuple(t_schedule)} exhausted without convergence; "
        f"gap sequence {[f'{g:.3e}' for g in gaps]} (tol {tol:g})"
    )


def completeness_residual(traj, asym):
    """Per-snapshot H^1 x L^2 distance between the run and the free flow of
    the asymptotic pair."""
    require_same_grid(traj.states[0].u, asym.u0_plus)
    base = asym.as_state(0.0)
    vals = np.empty(len(traj.times))
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        vals[i] = state_h1l2_distance(state, apply_free(base, float(t)))
    return DiagnosticsSeries(
        np.asarray(traj.times, dtype=float),
        vals,
        label="completeness residual",
        meta={"extraction_time": asym.extraction_time, "cauchy_gap": asym.cauchy_gap},
    )


def reflect_pair(phi, psi):
    """The time-reflection (phi, psi) -> (phi, -psi) on field pairs."""
    flipped = psi.copy()
    flipped.data = -flipped.data
    return phi.copy(), flipped


def scattering_roundtrip(
    phi,
    psi,
    spec,
    config,
    t_schedule=DEFAULT_T_SCHEDULE,
    extraction_times=None,
    tol=1e-4,
    eta0=DEFAULT_ETA0,
):
    """The scattering map S applied to a free pair (phi, psi), with residuals.

    Pipeline: build the datum whose backward-in-time asymptote is (phi, psi)
    (the minus wave operator, realized by time reflection of the plus one),
    integrate forward, extract the +infinity asymptotic pair, and report S
    input vs output together with the free-energy identity.  Stage failures
    re-raise with the stage named.
    """
    require_same_grid(phi, psi)
    horizon = t_schedule[-1] if extraction_times is None else max(extraction_times)
    in_pair = AsymptoticState(phi.copy(), psi.copy(), 0.0, 0.0)

    refl_phi, refl_psi = reflect_pair(phi, psi)
    minus_input = AsymptoticState(refl_phi, refl_psi, 0.0, 0.0)
    try:
        reflected_datum = wave_operator(
            minus_input, spec, config, t_schedule=t_schedule, tol=tol, eta0=eta0
        )
    except (ValueError, RuntimeError) as exc:
        raise RuntimeError(f"stage omega_minus: {exc}") from exc
    datum_u, datum_udot = reflect_pair(reflected_datum.u, reflected_datum.udot)
    datum = PhaseState(datum_u, datum_udot, 0.0)

    if extraction_times is None:
        extraction_times = [t for t in t_schedule if t <= horizon]
    n_steps = int(round(horizon / config.dt))
    stride = _snapshot_stride_for(extraction_times, horizon, n_steps, config.dt)
    fwd_cfg = IntegratorConfig(
        scheme=config.scheme,
        dt=config.dt,
        t_end=horizon,
        snapshot_stride=stride,
        blowup_threshold=config.blowup_threshold,
        adaptive=config.adaptive,
    )
    try:
        traj = integrate(datum, spec, fwd_cfg)
    except ValueError as exc:
        raise RuntimeError(f"stage forward_flow: {exc}") from exc
    try:
        out = extract_asymptotic_state(traj, extraction_times)
    except (ValueError, KeyError) as exc:
        raise RuntimeError(f"stage extraction: {exc}") from exc

    s_distance = state_h1l2_distance(in_pair.as_state(), out.as_state())
    e_in = free_energy(in_pair.as_state())
    e_out = free_energy(out.as_state())
    return {
        "input": in_pair,
        "datum": datum,
        "output": out,
        "trajectory": traj,
        "s_distance": s_distance,
        "free_energy_in": e_in,
        "free_energy_out": e_out,
        "energy_identity_gap": abs(e_out - e_in) / max(e_in, 1e-300),
        "converged": out.converged,
    }


def _snapshot_stride_for(extraction_times, horizon, n_steps, dt):
    """Largest stride that lands snapshots on every extraction time."""
    stride = n_steps
    for t in extraction_times:
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(
                f"extraction time {t:g} is not a whole number of dt = {dt:g} steps"
            )
        stride = math.gcd(stride, k)
    return max(stride, 1)
