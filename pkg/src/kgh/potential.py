"""Interaction potentials and the Hartree nonlinearity f(u) = (V * |u|^2) u.

Two potential families are supported:

* power_law: V(x) = |x|^(-gamma), applied through its exact Fourier symbol
  V_hat(k) = c(n, gamma) |k|^(gamma - n) with the Riesz constant
  c(n, gamma) = pi^(n/2) 2^(n-gamma) Gamma((n-gamma)/2) / Gamma(gamma/2)
  (non-unitary integral convention, matching the unit-free convolution below).
  The k = 0 bin is not defined by the symbol; a policy chooses it.

* radial_table: V(x) = v(|x|) given by radial samples, whose symbol is
  computed by numerical radial Fourier transform and spline interpolation.

The convolution itself is evaluated spectrally,
(V * rho) = ifftn(V_hat * fftn(rho)), which with the trapezoid-exact
quadrature h^n sum_y V(x-y) rho(y) requires no normalization factors at all.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.special import j0

from .errors import NumericalConsistencyError
from .spectral import PHYSICAL, Field, transform

POWER_LAW = "power_law"
RADIAL_TABLE = "radial_table"

K0_ZERO = "zero"
K0_SCREENED = "screened"

THEOREM = "theorem"
EXPLORATORY = "exploratory"


def riesz_constant(n, gamma):
    """c(n, gamma) for the symbol of |x|^(-gamma) in dimension n (0 < gamma < n)."""
    if not 0 < gamma < n:
        raise ValueError(f"power-law symbol needs 0 < gamma < n, got gamma={gamma}, n={n}")
    return math.pi ** (n / 2.0) * 2.0 ** (n - gamma) * math.gamma((n - gamma) / 2.0) / math.gamma(gamma / 2.0)


def theorem_gamma_interval(n):
    """Open interval of gamma covered by the global theory in dimension n."""
    return (2.0, min(4.0, float(n)))


@dataclass(eq=False)
class PotentialSpec:
    """A validated interaction potential plus its hypothesis bookkeeping.

    p1 / p2 are the integrability exponents splitting V at the unit ball
    (tail in L^p1, near part in L^p2); alpha, a_alpha, a describe the radial
    lower bound v(r1) - v(r2) >= (A_alpha/alpha)(r2^alpha - r1^alpha) on (0, a].
    """

    kind: str
    dim: int
    gamma: float | None = None
    table_r: np.ndarray | None = None
    table_v: np.ndarray | None = None
    p1: float | None = None
    p2: float | None = None
    alpha: float = 2.0
    a_alpha: float | None = None
    a: float = 1.0
    k0_policy: str = K0_ZERO
    screen_mass: float = 1.0
    mode: str = THEOREM
    _symbols: dict = field(default_factory=dict, repr=False)
    _half_symbols: dict = field(default_factory=dict, repr=False)

    def profile(self, r):
        """The radial profile v(r) on positive radii."""
        r = np.asarray(r, dtype=float)
        if self.kind == POWER_LAW:
            return r**(-self.gamma)
        return np.interp(r, self.table_r, self.table_v, right=0.0)

    def __post_init__(self):
        problems = []
        if self.kind not in (POWER_LAW, RADIAL_TABLE):
            problems.append(f"kind must be {POWER_LAW!r} or {RADIAL_TABLE!r}, got {self.kind!r}")
        if self.k0_policy not in (K0_ZERO, K0_SCREENED):
            problems.append(f"k0_policy must be {K0_ZERO!r} or {K0_SCREENED!r}")
        if self.k0_policy == K0_SCREENED and not self.screen_mass > 0:
            problems.append("screened k0 policy needs screen_mass > 0")
        if self.alpha < 2:
            problems.append(f"alpha must be >= 2, got {self.alpha}")
        if not self.a > 0:
            problems.append(f"a must be positive, got {self.a}")
        if self.a_alpha is not None and not self.a_alpha > 0:
            problems.append(f"A_alpha must be positive, got {self.a_alpha}")
        if problems:
            raise ValueError("; ".join(problems))


def _h1_exponents(n, gamma):
    """Midpoints of the admissible (p2, p1) intervals straddling n/gamma.

    Near part of |x|^(-gamma) is L^p for p < n/gamma, the tail for p > n/gamma;
    the hypotheses ask for max(1, n/4) <= p2 < n/gamma < p1 < n/2.  Returns
    (p1, p2) or (None, None) when the straddle is empty for this gamma.
    """
    lo = max(1.0, n / 4.0)
    split = n / gamma
    hi = n / 2.0
    if not (lo < split < hi):
        return None, None
    return 0.5 * (split + hi), 0.5 * (lo + split)


def make_power_potential(grid, gamma, mode=THEOREM, alpha=2.0, a=1.0,
                         k0_policy=K0_ZERO, screen_mass=1.0):
    """Build the |x|^(-gamma) PotentialSpec for the given grid's dimension.

    In theorem mode gamma must lie in the open interval (2, min(4, n));
    exploratory mode only requires 0 < gamma < n (symbol validity).
    A_alpha is filled with the sharp constant gamma * a^(-gamma-alpha), the
    infimum over r1 < r2 <= a of alpha*(v(r1)-v(r2))/(r2^alpha - r1^alpha).
    """
    n = grid.dim
    if mode not in (THEOREM, EXPLORATORY):
        raise ValueError(f"mode must be {THEOREM!r} or {EXPLORATORY!r}, got {mode!r}")
    if mode == THEOREM:
        lo, hi = theorem_gamma_interval(n)
        if not lo < gamma < hi:
            raise ValueError(
                f"theorem mode requires gamma in the open interval ({lo}, {hi}) "
                f"for n={n}, got gamma={gamma}"
            )
    if not 0 < gamma < n:
        raise ValueError(f"power-law symbol needs 0 < gamma < n, got gamma={gamma}, n={n}")
    p1, p2 = _h1_exponents(n, gamma)
    if p1 is None:
        warnings.warn(
            f"integrability straddle is empty for gamma={gamma}, n={n}; "
            "p1/p2 left unset",
            stacklevel=2,
        )
    return PotentialSpec(
        kind=POWER_LAW,
        dim=n,
        gamma=float(gamma),
        p1=p1,
        p2=p2,
        alpha=float(alpha),
        a_alpha=gamma * a ** (-gamma - alpha),
        a=float(a),
        k0_policy=k0_policy,
        screen_mass=float(screen_mass),
        mode=mode,
    )


def make_table_potential(grid, r, v, p1=None, p2=None, alpha=2.0, a=1.0,
                         a_alpha=None, mode=EXPLORATORY, k0_policy=K0_ZERO,
                         screen_mass=1.0):
    """Build a radial-table PotentialSpec from samples v_i = v(r_i).

    The table must start at r = 0 (or close to it), be strictly increasing in
    r, and cover the radii it is expected to act on; the profile is taken as
    zero beyond the last sample.  If a_alpha is omitted it is measured with
    validate_h2.  In theorem mode the symbol must come out nonnegative on the
    grid (interaction-energy positivity); exploratory mode only warns.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    problems = []
    if r.ndim != 1 or v.shape != r.shape or r.size < 8:
        problems.append("table needs matching 1d arrays with at least 8 samples")
    elif np.any(np.diff(r) <= 0) or r[0] < 0:
        problems.append("table radii must be nonnegative and strictly increasing")
    if not np.all(np.isfinite(v)):
        problems.append("table values must be finite")
    if problems:
        raise ValueError("; ".join(problems))
    spec = PotentialSpec(
        kind=RADIAL_TABLE,
        dim=grid.dim,
        table_r=r,
        table_v=v,
        p1=p1,
        p2=p2,
        alpha=float(alpha),
        a_alpha=a_alpha,
        a=float(a),
        k0_policy=k0_policy,
        screen_mass=float(screen_mass),
        mode=mode,
    )
    if a_alpha is None:
        spec.a_alpha = validate_h2(spec)["a_alpha_measured"]
        if not spec.a_alpha > 0:
            raise ValueError(
                "table profile is not strictly decreasing on (0, a]; "
                "measured A_alpha <= 0"
            )
    sym = hartree_symbol(spec, grid)
    if sym.min() < -1e-12 * max(abs(sym).max(), 1.0):
        msg = f"table potential has a negative Fourier symbol (min {sym.min():.3e})"
        if mode == THEOREM:
            raise ValueError(msg + "; interaction energy would lose positivity")
        warnings.warn(msg, stacklevel=2)
    return spec


def _radial_symbol_values(spec, n, k_values):
    """Numerical radial Fourier transform of the table profile at given |k|.

    n=1: 2 int v(r) cos(kr) dr
    n=2: 2 pi int v(r) J0(kr) r dr
    n=3: (4 pi / k) int v(r) sin(kr) r dr, with the k -> 0 limit 4 pi int v r^2 dr
    """
    r = spec.table_r
    v = spec.table_v
    k_values = np.atleast_1d(np.asarray(k_values, dtype=float))
    out = np.empty_like(k_values)
    # chunk the (n_k, n_r) integrand matrix to bound memory
    step = max(1, int(4e6 / max(r.size, 1)))
    for start in range(0, k_values.size, step):
        k = k_values[start : start + step, np.newaxis]
        if n == 1:
            vals = 2.0 * simpson(v * np.cos(k * r), x=r, axis=-1)
        elif n == 2:
            vals = 2.0 * np.pi * simpson(v * j0(k * r) * r, x=r, axis=-1)
        else:
            safe = np.where(k < 1e-12, 1.0, k)
            vals = 4.0 * np.pi / safe[:, 0] * simpson(v * np.sin(k * r) * r, x=r, axis=-1)
            zero = k[:, 0] < 1e-12
            if np.any(zero):
                vals[zero] = 4.0 * np.pi * simpson(v * r**2, x=r)
        out[start : start + step] = vals
    return out


_TABLE_SYMBOL_SAMPLES = 4096


def hartree_symbol(spec, grid):
    """V_hat on the grid's frequency lattice, with the k = 0 policy applied."""
    if grid.dim != spec.dim:
        raise ValueError(f"potential built for n={spec.dim}, grid has n={grid.dim}")
    cached = spec._symbols.get(grid)
    if cached is not None:
        return cached
    if spec.kind == POWER_LAW:
        gamma = spec.gamma
        c = riesz_constant(spec.dim, gamma)
        with np.errstate(divide="ignore"):
            sym = c * grid.kmag ** (gamma - spec.dim)
        zero_bin = grid.kmag == 0.0
        if spec.k0_policy == K0_SCREENED:
            sym[zero_bin] = c * spec.screen_mass ** (gamma - spec.dim)
        else:
            sym[zero_bin] = 0.0
    else:
        k_dense = np.linspace(0.0, grid.kmag.max() * (1.0 + 1e-9), _TABLE_SYMBOL_SAMPLES)
        vals = _radial_symbol_values(spec, spec.dim, k_dense)
        sym = CubicSpline(k_dense, vals)(grid.kmag)
    sym = np.ascontiguousarray(sym)
    spec._symbols[grid] = sym
    return sym


def _half_symbol(spec, grid):
    """The symbol restricted to numpy's rfftn layout (last axis halved)."""
    cached = spec._half_symbols.get(grid)
    if cached is None:
        m = grid.points_per_dim
        full = hartree_symbol(spec, grid)
        cached = np.ascontiguousarray(full[..., : m // 2 + 1])
        spec._half_symbols[grid] = cached
    return cached


def hartree_convolve(spec, grid, rho):
    """(V * rho) for a real density rho, via the real-to-complex transform."""
    axes = tuple(range(grid.dim))
    return np.fft.irfftn(np.fft.rfftn(rho) * _half_symbol(spec, grid), s=grid.shape, axes=axes)


def hartree_apply(spec, u, check=False):
    """The nonlinearity f(u) = (V * |u|^2) u as a physical Field.

    The production path runs rho = |u|^2 through the real transform, so the
    convolution is real by construction.  With check=True the convolution is
    recomputed with the full complex transform and its imaginary residue is
    verified below 1e-8 of the field scale (raising NumericalConsistencyError
    beyond that), which guards the symbol's radial symmetry.
    """
    phys = transform(u, PHYSICAL)
    rho = np.abs(phys.data) ** 2
    conv = hartree_convolve(spec, u.grid, rho)
    if check:
        full = np.fft.ifftn(np.fft.fftn(rho) * hartree_symbol(spec, u.grid))
        scale = max(np.abs(full).max(), 1e-300)
        residue = np.abs(full.imag).max()
        if residue > 1e-8 * scale:
            raise NumericalConsistencyError(
                f"Hartree convolution picked up an imaginary part "
                f"({residue:.3e} vs scale {scale:.3e}); symbol is not symmetric"
            )
        if np.abs(full.real - conv).max() > 1e-10 * scale:
            raise NumericalConsistencyError(
                "real-transform and complex-transform Hartree paths disagree"
            )
    return Field(u.grid, conv * phys.data, PHYSICAL)


def interaction_energy(spec, u, conv=None):
    """(1/4) integral of |u|^2 (V * |u|^2), always >= 0 for a nonnegative symbol."""
    phys = transform(u, PHYSICAL)
    rho = np.abs(phys.data) ** 2
    if conv is None:
        conv = hartree_convolve(spec, u.grid, rho)
    return 0.25 * u.grid.cell_volume * float(np.sum(rho * conv))


def omitted_zero_mode(spec, u):
    """What the k = 0 bin contributes (or would): mean density and applied symbol.

    Under the zero policy the spatially constant part of V * |u|^2 is dropped;
    this reports mean(|u|^2) together with the symbol value actually used at
    k = 0 so runs can log the omitted (or screened) constant.
    """
    phys = transform(u, PHYSICAL)
    mean_density = float(np.mean(np.abs(phys.data) ** 2))
    if spec.kind == POWER_LAW and spec.k0_policy == K0_SCREENED:
        applied = riesz_constant(spec.dim, spec.gamma) * spec.screen_mass ** (spec.gamma - spec.dim)
    elif spec.kind == POWER_LAW:
        applied = 0.0
    else:
        applied = float(_radial_symbol_values(spec, spec.dim, np.array([0.0]))[0])
    return {"mean_density": mean_density, "symbol_at_zero": applied}


def validate_h2(spec, sample_count=10000):
    """Measure the radial-monotonicity constant on (0, a].

    Checks v(r1) - v(r2) >= (A_alpha/alpha) (r2^alpha - r1^alpha) by measuring
    inf alpha*(v(r1)-v(r2)) / (r2^alpha - r1^alpha) over geometrically spaced
    adjacent pairs (adjacent pairs suffice: every pair ratio is a weighted
    average of the adjacent ones).  Returns the measured constant, the
    worst-case pair, and whether the declared A_alpha is admissible.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    if spec.kind == POWER_LAW:
        r_lo = spec.a * 1e-6
    else:
        first = spec.table_r[0]
        r_lo = max(first, spec.a * 1e-6)
        if r_lo == 0.0:
            r_lo = spec.table_r[1]
    r = np.geomspace(r_lo, spec.a, sample_count)
    v = spec.profile(r)
    num = spec.alpha * (v[:-1] - v[1:])
    den = r[1:] ** spec.alpha - r[:-1] ** spec.alpha
    ratios = num / den
    worst = int(np.argmin(ratios))
    measured = float(ratios[worst])
    declared = spec.a_alpha
    passes = declared is not None and measured >= declared * (1.0 - 1e-9)
    return {
        "a_alpha_measured": measured,
        "a_alpha_declared": declared,
        "pass": bool(passes),
        "witness": (float(r[worst]), float(r[worst + 1])),
    }
