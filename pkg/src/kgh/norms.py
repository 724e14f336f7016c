"""Norms and functionals: Lebesgue, Sobolev, Besov, block-lattice, Strichartz.

Space-time norms accept any trajectory-like object exposing `times` (array)
and `states` (list of PhaseState) so this module stays independent of the
integrator.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .potential import interaction_energy
from .spectral import (
    DEFAULT_PROFILE,
    PHYSICAL,
    SPECTRAL,
    Field,
    transform,
)


# ----------------------------------------------------------- admissible pairs


@dataclass(frozen=True)
class AdmissibleTriple:
    """A Strichartz exponent triple (theta, q, r) with Besov regularity rho.

    theta interpolates between the wave-like (0) and Klein-Gordon (1) decay
    scalings; (q, r) are the time and space Lebesgue exponents; rho is the
    Besov smoothness the trajectory is measured in.
    """

    theta: float
    q: float
    r: float
    rho: float = -0.5
    label: str = ""


STANDARD_MU_VALUES = (0.0, 0.5, 1.0)


def validate_admissible(triple, n, mu=None):
    """Check the admissibility system for dimension n and return the derived mu.

    Requirements:
      * 0 <= theta <= 1, 2 <= q, r <= inf,
      * 0 <= 2/q <= min((n - 1 + theta) (1/2 - 1/r), 1),
      * the endpoint (theta, n, q, r) = (0, 3, 2, inf) is excluded,
      * the scaling identity mu = rho + (n + theta)(1/2 - 1/r) - 1/q must land
        on a standard derivative budget (0, 1/2 or 1), or on the declared mu.
    """
    t = triple
    if not 0.0 <= t.theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {t.theta}")
    if t.q < 2.0 or t.r < 2.0:
        raise ValueError(f"q and r must be >= 2, got q={t.q}, r={t.r}")
    inv_q = 0.0 if np.isinf(t.q) else 1.0 / t.q
    inv_r = 0.0 if np.isinf(t.r) else 1.0 / t.r
    cap = min((n - 1 + t.theta) * (0.5 - inv_r), 1.0)
    if not 2.0 * inv_q <= cap + 1e-12:
        raise ValueError(
            f"inadmissible pair: 2/q = {2 * inv_q:.6g} exceeds "
            f"min((n-1+theta)(1/2-1/r), 1) = {cap:.6g}"
        )
    if t.theta == 0.0 and n == 3 and t.q == 2.0 and np.isinf(t.r):
        raise ValueError("the endpoint (theta, n, q, r) = (0, 3, 2, inf) is excluded")
    derived = t.rho + (n + t.theta) * (0.5 - inv_r) - inv_q
    if mu is not None:
        if abs(derived - mu) > 1e-9:
            raise ValueError(
                f"declared mu = {mu} does not match the scaling identity value {derived:.12g}"
            )
        return derived
    if min(abs(derived - m) for m in STANDARD_MU_VALUES) > 1e-9:
        raise ValueError(
            f"scaling identity gives mu = {derived:.12g}, not one of {STANDARD_MU_VALUES}"
        )
    return derived


def representative_pairs(n, rho=-0.5):
    """The worked diagonal pairs used by the space-time norm in dimension n.

    theta = 1 with q = r = 2(n+2)/n, and theta = 0 with q = r = 2(n+1)/(n-1);
    for n = 3 the latter is the classical wave pair q = r = 4.
    """
    pairs = [
        AdmissibleTriple(1.0, 2.0 * (n + 2) / n, 2.0 * (n + 2) / n, rho, "klein-gordon diagonal"),
        AdmissibleTriple(0.0, 2.0 * (n + 1) / (n - 1), 2.0 * (n + 1) / (n - 1), rho, "wave diagonal")
        if n > 1
        else None,
    ]
    return [p for p in pairs if p is not None]


# -------------------------------------------------------------- simple norms


def lebesgue_norm(f, r):
    """L^r norm on the grid (max of |f| for r = inf)."""
    if r < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {r}")
    phys = transform(f, PHYSICAL)
    mags = np.abs(phys.data)
    if np.isinf(r):
        return float(mags.max())
    return float((f.grid.cell_volume * np.sum(mags**r)) ** (1.0 / r))


def sobolev_norm(f, s):
    """H^s norm ||omega^s f||_2, computed spectrally."""
    spec = transform(f, SPECTRAL)
    if s == 0.0:
        return float(np.linalg.norm(spec.data.ravel()))
    weights = f.grid.lam ** (2.0 * s)
    return float(math.sqrt(np.sum(weights * np.abs(spec.data) ** 2)))


def gradient_l2(f):
    """||grad f||_2 via the spectral derivative."""
    spec = transform(f, SPECTRAL)
    return float(math.sqrt(np.sum(f.grid.ksq * np.abs(spec.data) ** 2)))


def besov_norm(f, s, r, profile=DEFAULT_PROFILE):
    """B^s_{r,2} norm: (||P_0 f||_r^2 + sum_j 2^(2js) ||Delta_j f||_r^2)^(1/2)."""
    g = f.grid
    spec = transform(f, SPECTRAL)
    block = Field(g, spec.data * profile.block_symbol(g), SPECTRAL)
    total = lebesgue_norm(block, r) ** 2
    for j in profile.bands_on_grid(g):
        piece = Field(g, spec.data * profile.band_symbol(g, j), SPECTRAL)
        total += 4.0 ** (j * s) * lebesgue_norm(piece, r) ** 2
    return float(math.sqrt(total))


def delta_exponent(n, r):
    """delta(r) = n (1/2 - 1/r), the regularity gap between L^2 and L^r."""
    inv_r = 0.0 if np.isinf(r) else 1.0 / r
    return n * (0.5 - inv_r)


def birman_solomjak_norm(f, m, r, sigma):
    """Block norm l^m(L^r): partition the box into sigma-cubes, take L^r on
    each cube and the discrete l^m norm of the resulting list.

    sigma must tile the box: extent/sigma an integer number of cubes, each
    holding an integer number of cells.  With m = r the blocks recombine into
    the global L^r norm exactly.
    """
    if m < 1 or r < 1:
        raise ValueError(f"block norm exponents must be >= 1, got m={m}, r={r}")
    g = f.grid
    cubes = g.extent / sigma
    if abs(cubes - round(cubes)) > 1e-9 * max(cubes, 1.0):
        raise ValueError(
            f"sigma = {sigma} does not divide the box extent {g.extent}"
        )
    cubes = int(round(cubes))
    cells = g.points_per_dim / cubes
    if abs(cells - round(cells)) > 1e-9:
        raise ValueError(
            f"sigma = {sigma} is not aligned with the grid "
            f"({g.points_per_dim} cells over {cubes} cubes per axis)"
        )
    cells = int(round(cells))
    phys = transform(f, PHYSICAL)
    mags = np.abs(phys.data)
    # reshape (M, M, ...) -> (cubes, cells) per axis, then move the cube axes up front
    shape = []
    for _ in range(g.dim):
        shape.extend([cubes, cells])
    blocks = mags.reshape(shape)
    order = list(range(0, 2 * g.dim, 2)) + list(range(1, 2 * g.dim, 2))
    blocks = blocks.transpose(order).reshape(cubes**g.dim, cells**g.dim)
    if np.isinf(r):
        local = blocks.max(axis=1)
    else:
        local = (g.cell_volume * np.sum(blocks**r, axis=1)) ** (1.0 / r)
    if np.isinf(m):
        return float(local.max())
    return float(np.sum(local**m) ** (1.0 / m))


# ------------------------------------------------------------------- energies


@dataclass(frozen=True)
class EnergyBreakdown:
    """Conserved energy split into its four parts; total is their exact sum."""

    kinetic: float
    gradient: float
    mass: float
    interaction: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total", self.kinetic + self.gradient + self.mass + self.interaction
        )


def energy(state, spec=None, conv=None):
    """EnergyBreakdown of a PhaseState under the given potential.

    kinetic = (1/2)||udot||^2, gradient = (1/2)||grad u||^2,
    mass = (1/2)||u||^2, interaction = (1/4) int |u|^2 (V * |u|^2).
    spec=None means free flow (zero interaction).  A precomputed convolution
    (V * |u|^2) can be passed to avoid redoing the transform.
    """
    su = transform(state.u, SPECTRAL)
    sv = transform(state.udot, SPECTRAL)
    g = state.u.grid
    kinetic = 0.5 * float(np.sum(np.abs(sv.data) ** 2))
    gradient = 0.5 * float(np.sum(g.ksq * np.abs(su.data) ** 2))
    mass = 0.5 * float(np.sum(np.abs(su.data) ** 2))
    if spec is None:
        inter = 0.0
    else:
        inter = interaction_energy(spec, state.u, conv=conv)
    return EnergyBreakdown(kinetic=kinetic, gradient=gradient, mass=mass, interaction=inter)


def state_h1l2_norm(state):
    """The energy-space size (||u||_{H^1}^2 + ||udot||_2^2)^(1/2)."""
    return float(math.sqrt(sobolev_norm(state.u, 1.0) ** 2 + sobolev_norm(state.udot, 0.0) ** 2))


def state_h1l2_distance(a, b):
    """H^1 x L^2 distance between two PhaseStates on one grid."""
    du = Field(a.u.grid, transform(a.u, SPECTRAL).data - transform(b.u, SPECTRAL).data, SPECTRAL)
    dv = Field(
        a.udot.grid,
        transform(a.udot, SPECTRAL).data - transform(b.udot, SPECTRAL).data,
        SPECTRAL,
    )
    return float(math.sqrt(sobolev_norm(du, 1.0) ** 2 + sobolev_norm(dv, 0.0) ** 2))


# ----------------------------------------------------------- spacetime norms


def _select_interval(times, interval):
    times = np.asarray(times, dtype=float)
    if interval is None:
        return np.arange(times.size)
    t0, t1 = interval
    idx = np.nonzero((times >= t0 - 1e-12) & (times <= t1 + 1e-12))[0]
    return idx


def strichartz_norm(traj, triple, interval=None, component="u"):
    """Mixed norm (int ||u(t)||_{B^rho_{r,2}}^q dt)^(1/q) over trajectory snapshots.

    The time integral uses the trapezoid rule on the stored snapshot times;
    q = inf takes the sup.  component picks "u", "udot" or "grad" (the
    gradient is measured axis-wise and combined in l^2).
    """
    idx = _select_interval(traj.times, interval)
    if idx.size == 0:
        raise ValueError(f"no snapshots inside interval {interval}")
    if idx.size == 1 and not np.isinf(triple.q):
        raise ValueError("time integration needs at least 2 snapshots in the interval")
    times = np.asarray(traj.times, dtype=float)[idx]
    vals = np.empty(times.size)
    for out_i, i in enumerate(idx):
        state = traj.states[i]
        vals[out_i] = _component_besov(state, triple.rho, triple.r, component)
    if np.isinf(triple.q):
        return float(vals.max())
    return float(trapezoid(vals**triple.q, times) ** (1.0 / triple.q))


def _component_besov(state, rho, r, component):
    if component == "u":
        return besov_norm(state.u, rho, r)
    if component == "udot":
        return besov_norm(state.udot, rho, r)
    if component == "grad":
        spec = transform(state.u, SPECTRAL)
        total = 0.0
        for ax in range(state.u.grid.dim):
            k = state.u.grid.broadcast_axis(state.u.grid.k_axes[ax], ax)
            part = Field(state.u.grid, 1j * k * spec.data, SPECTRAL)
            total += besov_norm(part, rho, r) ** 2
        return math.sqrt(total)
    raise ValueError(f"unknown component {component!r}")


def x1_norm(traj, interval=None, pairs=None):
    """The global space-time norm controlling scattering.

    Maximum of the Strichartz norms at Besov regularity -1/2 over the
    representative diagonal pairs and the components u, udot, grad u,
    together with the sup-in-time energy pieces sup ||u||_{H^1} and
    sup ||udot||_2.  Returns (value, table) where table maps a description
    of each piece to its value.
    """
    n = traj.states[0].u.grid.dim
    if pairs is None:
        pairs = representative_pairs(n)
    table = {}
    idx = _select_interval(traj.times, interval)
    for pair in pairs:
        for component in ("u", "udot", "grad"):
            key = f"L^{pair.q:.3g} B^{pair.rho:g}_{pair.r:.3g} [{component}]"
            table[key] = strichartz_norm(traj, pair, interval=interval, component=component)
    sup_h1 = max(sobolev_norm(traj.states[i].u, 1.0) for i in idx)
    sup_l2 = max(sobolev_norm(traj.states[i].udot, 0.0) for i in idx)
    table["sup_t H^1 [u]"] = sup_h1
    table["sup_t L^2 [udot]"] = sup_l2
    value = max(table.values())
    return value, table
