"""Grids, unitary Fourier transforms, and dyadic (Littlewood-Paley) projections.

Everything downstream (propagators, norms, diagnostics) goes through the
Grid/Field pair defined here, so the normalization conventions are fixed in
one place:

* physical samples live on the uniform tensor grid x_j = -L/2 + j*h with
  h = L/M, periodic on [-L/2, L/2)^n;
* spectral data is fftn(samples) * sqrt(L^n)/M^n, kept in numpy's fftfreq
  bin layout.  This scaling makes the transform unitary,
  sum_k |u_hat_k|^2 == h^n sum_x |u_x|^2, so spectral-side norms are plain
  vector norms of the coefficient array.
"""

import warnings

import numpy as np

PHYSICAL = "physical"
SPECTRAL = "spectral"

_ALLOWED_DIMS = (1, 2, 3)


def _is_fft_friendly(m):
    """True if m has no prime factor beyond 5."""
    for p in (2, 3, 5):
        while m % p == 0:
            m //= p
    return m == 1


class Grid:
    """Uniform periodic grid on the box [-L/2, L/2)^n.

    Frequency tables (|k|^2, |k|, lambda = sqrt(1+|k|^2)) are precomputed
    once since every propagator step and projection reuses them.
    """

    def __init__(self, dim, extent, points_per_dim):
        problems = []
        if dim not in _ALLOWED_DIMS:
            problems.append(f"dim must be one of {_ALLOWED_DIMS}, got {dim}")
        if not (np.isfinite(extent) and extent > 0):
            problems.append(f"extent must be a positive finite number, got {extent}")
        m = int(points_per_dim)
        if m != points_per_dim or m < 8:
            problems.append(f"points_per_dim must be an integer >= 8, got {points_per_dim}")
        elif m % 2 != 0:
            problems.append(f"points_per_dim must be even, got {m}")
        elif not _is_fft_friendly(m):
            problems.append(
                f"points_per_dim must have no prime factor beyond 5 "
                f"(fast transform sizes), got {m}"
            )
        if problems:
            raise ValueError("; ".join(problems))
        if dim < 3:
            warnings.warn(
                f"theory-out-of-range: n={dim} is outside the n>=3 regime the "
                "decay and scattering statements assume; results are exploratory",
                stacklevel=2,
            )

        self.dim = dim
        self.extent = float(extent)
        self.points_per_dim = m
        self.spacing = self.extent / m
        self.shape = (m,) * dim
        self.size = m**dim
        self.cell_volume = self.spacing**dim
        self.volume = self.extent**dim

        axis_x = -self.extent / 2 + self.spacing * np.arange(m)
        axis_k = 2 * np.pi * np.fft.fftfreq(m, d=self.spacing)
        self.x_axes = [axis_x] * dim
        self.k_axes = [axis_k] * dim
        self.kmax = np.pi * m / self.extent

        ksq = np.zeros(self.shape)
        for ax in range(dim):
            view = [np.newaxis] * dim
            view[ax] = slice(None)
            ksq = ksq + axis_k[tuple(view)] ** 2
        self.ksq = ksq
        self.kmag = np.sqrt(ksq)
        self.lam = np.sqrt(1.0 + ksq)

        self._rsq = None

    @property
    def rsq(self):
        """|x|^2 on the physical grid (box center at the origin), cached."""
        if self._rsq is None:
            axis_x = self.x_axes[0]
            rsq = np.zeros(self.shape)
            for ax in range(self.dim):
                view = [np.newaxis] * self.dim
                view[ax] = slice(None)
                rsq = rsq + axis_x[tuple(view)] ** 2
            self._rsq = rsq
        return self._rsq

    @property
    def rmag(self):
        return np.sqrt(self.rsq)

    def broadcast_axis(self, values, axis):
        """Reshape a 1d per-axis array so it broadcasts over the full grid."""
        view = [np.newaxis] * self.dim
        view[axis] = slice(None)
        return values[tuple(view)]

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dim == other.dim
            and self.extent == other.extent
            and self.points_per_dim == other.points_per_dim
        )

    def __hash__(self):
        return hash((self.dim, self.extent, self.points_per_dim))

    def __repr__(self):
        return f"Grid(dim={self.dim}, extent={self.extent}, points_per_dim={self.points_per_dim})"


class Field:
    """A complex scalar field on a Grid, in physical or spectral representation."""

    __slots__ = ("grid", "data", "representation")

    def __init__(self, grid, data, representation=PHYSICAL):
        if representation not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"representation must be '{PHYSICAL}' or '{SPECTRAL}'")
        data = np.asarray(data)
        if data.shape != grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid shape {grid.shape}")
        if data.dtype != np.complex128:
            data = data.astype(np.complex128)
        self.grid = grid
        self.data = data
        self.representation = representation

    def copy(self):
        return Field(self.grid, self.data.copy(), self.representation)

    def __repr__(self):
        return f"Field({self.grid!r}, representation={self.representation!r})"


def transform(field, to=None):
    """Move a Field between representations with the unitary scaling.

    With no target given, flips to the other representation.  Returns the
    input object unchanged if it is already there.
    """
    if to is None:
        to = SPECTRAL if field.representation == PHYSICAL else PHYSICAL
    if to not in (PHYSICAL, SPECTRAL):
        raise ValueError(f"unknown representation {to!r}")
    if to == field.representation:
        return field
    g = field.grid
    root_volume = np.sqrt(g.volume)
    if to == SPECTRAL:
        out = np.fft.fftn(field.data) * (root_volume / g.size)
    else:
        out = np.fft.ifftn(field.data) * (g.size / root_volume)
    return Field(g, out, to)


def apply_omega_power(field, s):
    """Apply the multiplier (1 + |k|^2)^(s/2), i.e. a power of omega = (1-Laplacian)^(1/2).

    Works in either representation and returns the result in the same
    representation the input came in.
    """
    spec = transform(field, SPECTRAL)
    if s == 0:
        out = spec
    else:
        mult = field.grid.lam if s == 1.0 else field.grid.lam**s
        out = Field(field.grid, spec.data * mult, SPECTRAL)
    return transform(out, field.representation)


class DyadicProfile:
    """Smooth radial dyadic partition of unity.

    Built from the C^infinity ramp Q(t) = exp(-1/t) for t > 0 (else 0):

        Phi(s) = Q(2 - s) / (Q(2 - s) + Q(s - 1))

    so Phi == 1 for s <= 1 and Phi == 0 for s >= 2 (exact branch values, not
    just numerically small).  The block profile is psi0_hat(xi) = Phi(|xi|)
    and the band profile psi_hat(xi) = psi0_hat(xi) - psi0_hat(2 xi), which
    is supported in 1/2 <= |xi| <= 2.  Band j >= 1 uses psi_hat(xi / 2^j),
    so the partition telescopes exactly:

        psi0_hat(xi) + sum_{j=1}^{J} psi_hat(xi / 2^j) = psi0_hat(xi / 2^J).
    """

    @staticmethod
    def _ramp(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        with np.errstate(divide="ignore", over="ignore"):
            out[pos] = np.exp(-1.0 / t[pos])
        return out

    def phi(self, s):
        """The transition function Phi on scalars or arrays."""
        s_arr = np.asarray(s, dtype=float)
        scalar = s_arr.ndim == 0
        if scalar:
            s_arr = s_arr[np.newaxis]
        lo = self._ramp(2.0 - s_arr)
        hi = self._ramp(s_arr - 1.0)
        out = np.ones_like(s_arr)
        mid = hi > 0
        out[mid] = lo[mid] / (lo[mid] + hi[mid])
        return float(out[0]) if scalar else out

    def low_symbol(self, grid, cutoff):
        """psi0_hat(k / cutoff): identically 1 for |k| <= cutoff, 0 for |k| >= 2*cutoff."""
        if not cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {cutoff}")
        return self.phi(grid.kmag / cutoff)

    def band_symbol(self, grid, j):
        """psi_hat(k / 2^j), supported in 2^(j-1) <= |k| <= 2^(j+1)."""
        if j != int(j) or j < 1:
            raise ValueError(f"band index j must be an integer >= 1, got {j}")
        scale = 2.0 ** int(j)
        return self.phi(grid.kmag / scale) - self.phi(grid.kmag / (scale / 2.0))

    def block_symbol(self, grid):
        """psi0_hat(k), the j = 0 block of the decomposition."""
        return self.phi(grid.kmag)

    def bands_on_grid(self, grid):
        """Band indices j >= 1 whose symbol is not identically zero on this grid.

        The band-j symbol vanishes once 2^(j-1) exceeds the largest grid
        frequency, so the list is finite.
        """
        out = []
        j = 1
        while 2.0 ** (j - 1) < grid.kmag.max():
            out.append(j)
            j += 1
        return out


DEFAULT_PROFILE = DyadicProfile()

_PROJECTION_KINDS = ("delta_j", "p0", "low_pass", "high_pass")


def project(field, kind, j=None, cutoff=None, profile=DEFAULT_PROFILE):
    """Apply one of the dyadic projections to a Field.

    kind:
      "delta_j"   frequency band at |k| ~ 2^j (requires j >= 1),
      "p0"        the low block psi0_hat(k),
      "low_pass"  psi0_hat(k / cutoff), equal to 1 on |k| <= cutoff,
      "high_pass" 1 - psi0_hat(k / cutoff).

    low_pass and high_pass at the same cutoff sum to the identity, and
    low_pass(N) after low_pass(N/4) equals low_pass(N/4) because the profile
    supports nest.  The result comes back in the input's representation.
    """
    if kind not in _PROJECTION_KINDS:
        raise ValueError(f"unknown projection kind {kind!r}, expected one of {_PROJECTION_KINDS}")
    g = field.grid
    if kind == "delta_j":
        sym = profile.band_symbol(g, j)
    elif kind == "p0":
        sym = profile.block_symbol(g)
    else:
        if cutoff is None:
            raise ValueError(f"projection kind {kind!r} requires a cutoff")
        sym = profile.low_symbol(g, cutoff)
        if kind == "high_pass":
            sym = 1.0 - sym
    spec = transform(field, SPECTRAL)
    out = Field(g, spec.data * sym, SPECTRAL)
    return transform(out, field.representation)


def require_same_grid(*objects):
    """Raise if the Fields/states passed do not share one grid."""
    grids = {obj.grid for obj in objects}
    if len(grids) > 1:
        raise ValueError(f"operands live on different grids: {sorted(map(repr, grids))}")
