"""Periodic grid fields on the flat complex torus, and their calculus.

Geometry.  The torus is ``C^n / (Z^n + i Z^n)`` with unit period in each of
the ``2n`` real coordinates.  Grid arrays carry the axes
``(x_1, ..., x_n, y_1, ..., y_n)`` with ``N`` points per axis, where
``z_j = x_j + i y_j``.  Matrix-valued fields append two axes of length ``n``.

Differentiation is spectral.  For the mode ``exp(2*pi*i*(k.x + l.y))`` the
symbol of ``d/dz_j = (d/dx_j - i d/dy_j)/2`` is ``zeta_j = pi*(l_j + i*k_j)``,
so the complex Hessian entry ``(i, j)`` has multiplier ``-zeta_i*conj(zeta_j)``.
Nyquist columns are zeroed so real input always yields Hermitian output; all
exactness claims are for band-limited data (max frequency < N/2).

Density convention (fixed once, used everywhere): a wedge of ``n``
(1,1)-forms with coefficient matrices ``A_1..A_n`` is the measure
``D(A_1,..,A_n) * dLeb`` with

    D(A_1,..,A_n) = sum_{sigma,tau} sgn(sigma) sgn(tau) prod_k A_k[sigma(k), tau(k)],

so ``omega^n`` has density ``n! * det(g)`` and the grid integral of a field
``s`` against a wedge is the plain grid mean of ``s * D``.  Total volume is 1.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import InitVar, dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import DataError, DomainError, NotKahlerError, UsageError

__all__ = [
    "TorusGeometry",
    "ScalarField",
    "FormField",
    "form_field",
    "constant_form",
    "field_from_modes",
    "random_bandlimited",
    "complex_hessian",
    "hessian_values",
    "kahler_form",
    "mixed_density",
    "integrate",
    "wedge_integral",
    "complex_gradient",
    "relative_spectrum_field",
    "min_eigenvalue_field",
    "smooth_array",
    "mollify",
    "mollifier_profile",
    "mollifier_normalization",
    "regularized_max",
    "save_scalar_field",
    "load_scalar_field",
]


@dataclass(frozen=True)
class TorusGeometry:
    """Complex dimension ``n`` (1..3) and grid resolution ``N`` per real axis."""

    n: int
    N: int

    def __post_init__(self):
        if not 1 <= int(self.n) <= 3:
            raise UsageError(f"complex dimension must be 1..3, got {self.n}")
        N = int(self.N)
        if N < 8 or (N & (N - 1)) != 0:
            raise UsageError(f"N must be a power of two >= 8, got {N}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "N", N)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * (2 * self.n)

    @property
    def grid_size(self) -> int:
        return self.N ** (2 * self.n)

    def coordinates(self) -> list[np.ndarray]:
        """The 2n broadcastable coordinate arrays in [0, 1)."""
        axes = np.arange(self.N) / self.N
        return list(np.meshgrid(*([axes] * (2 * self.n)), indexing="ij", sparse=True))


@functools.lru_cache(maxsize=8)
def _zeta(geom: TorusGeometry) -> np.ndarray:
    """Symbols of d/dz_j, shape (n,) + grid; Nyquist columns zeroed."""
    N = geom.N
    freq = sfft.fftfreq(N, d=1.0 / N)
    freq[N // 2] = 0.0  # Nyquist is sign-ambiguous for odd-order symbols
    out = np.zeros((geom.n,) + geom.shape, dtype=complex)
    for j in range(geom.n):
        kx = freq.reshape((1,) * j + (N,) + (1,) * (2 * geom.n - j - 1))
        ky = freq.reshape((1,) * (geom.n + j) + (N,) + (1,) * (geom.n - j - 1))
        out[j] = math.pi * (ky + 1j * kx)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=8)
def _axis_laplace(geom: TorusGeometry) -> np.ndarray:
    """Symbols of |d/dz_j|^2 per axis pair; even in k, so Nyquist-safe."""
    N = geom.N
    freq = sfft.fftfreq(N, d=1.0 / N)  # includes -N/2
    out = np.zeros((geom.n,) + geom.shape)
    for j in range(geom.n):
        kx = freq.reshape((1,) * j + (N,) + (1,) * (2 * geom.n - j - 1))
        ky = freq.reshape((1,) * (geom.n + j) + (N,) + (1,) * (geom.n - j - 1))
        out[j] = math.pi ** 2 * (kx * kx + ky * ky)
    out.setflags(write=False)
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    """Real function sampled on the periodic grid.

    ``mean_zero=True`` normalizes the stored values to zero grid mean.
    """

    geometry: TorusGeometry
    values: np.ndarray
    mean_zero: InitVar[bool] = False

    def __post_init__(self, mean_zero):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.geometry.shape:
            raise UsageError(f"values shape {vals.shape} != grid shape {self.geometry.shape}")
        if mean_zero:
            vals = vals - vals.mean()
        object.__setattr__(self, "values", _readonly(vals))

    @classmethod
    def zeros(cls, geom: TorusGeometry) -> "ScalarField":
        return cls(geom, np.zeros(geom.shape))

    @classmethod
    def constant(cls, geom: TorusGeometry, value: float) -> "ScalarField":
        return cls(geom, np.full(geom.shape, float(value)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def oscillation(self) -> float:
        return float(np.max(self.values) - np.min(self.values))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _same_geometry(self, other)
            return ScalarField(self.geometry, self.values + other.values)
        return ScalarField(self.geometry, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            _same_geometry(self, other)
            return ScalarField(self.geometry, self.values - other.values)
        return ScalarField(self.geometry, self.values - float(other))

    def __mul__(self, scalar):
        return ScalarField(self.geometry, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.geometry, -self.values)


def _same_geometry(a, b) -> None:
    if a.geometry != b.geometry:
        raise UsageError("fields live on different grids")


def field_from_modes(geom: TorusGeometry, modes) -> ScalarField:
    """Build ``sum_m amp * cos(2*pi*(freq . u) + phase)`` from mode triples.

    ``modes`` is an iterable of ``(freq, amp)`` or ``(freq, amp, phase)``
    with ``freq`` a vector of 2n integers over ``(x_1..x_n, y_1..y_n)``.
    """
    coords = geom.coordinates()
    vals = np.zeros(geom.shape)
    for mode in modes:
        freq, amp, *rest = mode
        phase = float(rest[0]) if rest else 0.0
        freq = [int(f) for f in freq]
        if len(freq) != 2 * geom.n:
            raise UsageError(f"frequency vector must have length {2 * geom.n}")
        if max(abs(f) for f in freq) >= geom.N // 2:
            raise UsageError("mode frequency at or above Nyquist")
        arg = np.zeros(geom.shape)
        for f, u in zip(freq, coords):
            if f:
                arg = arg + (2.0 * math.pi * f) * u
        vals += float(amp) * np.cos(arg + phase)
    return ScalarField(geom, vals)


def random_bandlimited(geom: TorusGeometry, rng: np.random.Generator,
                       kmax: int = 2, amplitude: float = 0.01,
                       n_modes: int = 4) -> ScalarField:
    """Random small trig polynomial with frequencies bounded by ``kmax``."""
    modes = []
    for _ in range(n_modes):
        freq = rng.integers(-kmax, kmax + 1, size=2 * geom.n)
        if not np.any(freq):
            freq[rng.integers(0, 2 * geom.n)] = 1
        modes.append((freq, amplitude * rng.uniform(-1.0, 1.0), rng.uniform(0, 2 * math.pi)))
    return field_from_modes(geom, modes)


# ---------------------------------------------------------------------------
# spectral calculus


def hessian_values(phi: ScalarField) -> np.ndarray:
    """Complex Hessian ``(d^2 phi / dz_i dzbar_j)`` as a grid of n x n matrices.

    Diagonal entries use the even per-axis Laplace symbol so they keep
    Nyquist content; off-diagonal symbols are Nyquist-zeroed (sign-ambiguous
    there).  Exact for band-limited potentials either way.
    """
    if not np.all(np.isfinite(phi.values)):
        raise DataError("potential contains non-finite values")
    return _hessian_raw(phi.geometry, sfft.fftn(phi.values, workers=-1))


def _hessian_raw(geom: TorusGeometry, phat: np.ndarray) -> np.ndarray:
    zeta = _zeta(geom)
    lap = _axis_laplace(geom)
    n = geom.n
    out = np.empty(geom.shape + (n, n), dtype=complex)
    for i in range(n):
        out[..., i, i] = sfft.ifftn(-lap[i] * phat, workers=-1).real
        for j in range(i + 1, n):
            entry = sfft.ifftn(-zeta[i] * np.conj(zeta[j]) * phat, workers=-1)
            out[..., i, j] = entry
            out[..., j, i] = np.conj(entry)
    return out


def complex_gradient(phi: ScalarField) -> np.ndarray:
    """``(d phi / dz_j)`` as a grid of n complex components (last axis)."""
    geom = phi.geometry
    zeta = _zeta(geom)
    phat = sfft.fftn(phi.values, workers=-1)
    out = np.empty(geom.shape + (geom.n,), dtype=complex)
    for j in range(geom.n):
        out[..., j] = sfft.ifftn(zeta[j] * phat, workers=-1)
    return out


@dataclass(frozen=True)
class FormField:
    """Closed (1,1)-form: constant Hermitian base plus a potential's Hessian.

    The only constructors are :func:`form_field` and linear combinations, so
    closedness holds by construction.  ``values`` has shape grid + (n, n);
    for constant forms it is a broadcast view over the base matrix.
    """

    geometry: TorusGeometry
    base: np.ndarray
    potential: ScalarField | None
    values: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=complex)
        if base.shape != (self.geometry.n, self.geometry.n):
            raise UsageError(f"base must be {self.geometry.n} x {self.geometry.n}")
        object.__setattr__(self, "base", _readonly(base))
        vals = np.asarray(self.values, dtype=complex)
        if vals.flags.writeable:
            vals = np.ascontiguousarray(vals)
            vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "FormField") -> "FormField":
        _same_geometry(self, other)
        pot = _combine_potentials((1.0, self.potential), (1.0, other.potential), geom=self.geometry)
        base = self.base + other.base
        if pot is None:
            return form_field(self.geometry, base)
        return FormField(self.geometry, base, pot, self.values + other.values)

    def __mul__(self, scalar) -> "FormField":
        s = float(scalar)
        if self.potential is None:
            return form_field(self.geometry, self.base * s)
        return FormField(self.geometry, self.base * s, self.potential * s, self.values * s)

    __rmul__ = __mul__

    def min_eigenvalue(self) -> float:
        """Smallest pointwise eigenvalue over the grid (positivity margin)."""
        if self.potential is None:
            return float(np.linalg.eigvalsh(self.base)[0])
        return float(np.min(min_eigenvalue_field(self.values)))


def _combine_potentials(*terms, geom: TorusGeometry) -> ScalarField | None:
    vals = None
    for coeff, pot in terms:
        if pot is None:
            continue
        vals = coeff * pot.values if vals is None else vals + coeff * pot.values
    return None if vals is None else ScalarField(geom, vals)


def form_field(geom: TorusGeometry, base: np.ndarray,
               potential: ScalarField | None = None) -> FormField:
    """The (1,1)-form ``base + i d dbar(potential)``."""
    base = np.asarray(base, dtype=complex)
    if base.shape != (geom.n, geom.n):
        raise UsageError(f"base must be {geom.n} x {geom.n}")
    if hermitian_defect_matrix(base) > 1e-10 * max(1.0, float(np.max(np.abs(base)))):
        raise UsageError("base matrix is not Hermitian to 1e-10")
    if potential is None:
        vals = np.broadcast_to(base, geom.shape + base.shape)
    else:
        _require_geom(potential, geom)
        vals = hessian_values(potential) + base
    return FormField(geom, base, potential, vals)


def hermitian_defect_matrix(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().swapaxes(-1, -2))))


def _require_geom(fieldlike, geom: TorusGeometry) -> None:
    if fieldlike.geometry != geom:
        raise UsageError("field lives on a different grid")


def constant_form(geom: TorusGeometry, base: np.ndarray) -> FormField:
    return form_field(geom, base, None)


def complex_hessian(phi: ScalarField) -> FormField:
    """The exact form ``i d dbar(phi)`` (zero base)."""
    zero = np.zeros((phi.geometry.n, phi.geometry.n), dtype=complex)
    return FormField(phi.geometry, zero, phi, hessian_values(phi))


def kahler_form(geom: TorusGeometry, base: np.ndarray, phi: ScalarField | None) -> FormField:
    """``base + i d dbar(phi)`` with a positivity check over the grid.

    Raises :class:`NotKahlerError` carrying the offending grid point when the
    minimum eigenvalue margin is non-positive.
    """
    base = np.asarray(base, dtype=complex)
    if not np.all(np.linalg.eigvalsh(0.5 * (base + base.conj().T)) > 0):
        raise DomainError("base matrix must be positive definite")
    form = form_field(geom, base, phi)
    if phi is None:
        return form
    margins = min_eigenvalue_field(form.values)
    idx_flat = int(np.argmin(margins))
    margin = float(margins.reshape(-1)[idx_flat])
    if margin <= 0.0:
        idx = np.unravel_index(idx_flat, geom.shape)
        raise NotKahlerError(
            f"form is not positive at grid index {idx} (margin {margin:.3e})",
            grid_index=idx, margin=margin)
    return form


# ---------------------------------------------------------------------------
# batched small-matrix kernels


def _eigvalsh_grid(mats: np.ndarray, n: int) -> np.ndarray:
    """Ascending eigenvalues of a grid of Hermitian n x n matrices."""
    if n == 1:
        return mats[..., 0, 0].real[..., None]
    if n == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        b2 = np.abs(mats[..., 0, 1]) ** 2
        m = 0.5 * (a + d)
        r = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b2, 0.0))
        return np.stack([m - r, m + r], axis=-1)
    return np.linalg.eigvalsh(mats)


def min_eigenvalue_field(mats: np.ndarray) -> np.ndarray:
    n = mats.shape[-1]
    return _eigvalsh_grid(mats, n)[..., 0]


def relative_spectrum_field(chi_vals: np.ndarray, omega_vals: np.ndarray) -> np.ndarray:
    """Ascending generalized eigenvalues of (omega, chi) at every grid point.

    ``chi`` must be pointwise positive definite; reduction goes through its
    Cholesky factor so the result is congruence-invariant.
    """
    n = chi_vals.shape[-1]
    if n == 1:
        return (omega_vals[..., 0, 0].real / chi_vals[..., 0, 0].real)[..., None]
    if n == 2:
        det_chi = (chi_vals[..., 0, 0] * chi_vals[..., 1, 1]
                   - chi_vals[..., 0, 1] * chi_vals[..., 1, 0]).real
        det_om = (omega_vals[..., 0, 0] * omega_vals[..., 1, 1]
                  - omega_vals[..., 0, 1] * omega_vals[..., 1, 0]).real
        mixed = (omega_vals[..., 0, 0] * chi_vals[..., 1, 1]
                 + omega_vals[..., 1, 1] * chi_vals[..., 0, 0]
                 - omega_vals[..., 0, 1] * chi_vals[..., 1, 0]
                 - omega_vals[..., 1, 0] * chi_vals[..., 0, 1]).real
        disc = np.sqrt(np.maximum(mixed * mixed - 4.0 * det_chi * det_om, 0.0))
        lo = (mixed - disc) / (2.0 * det_chi)
        hi = (mixed + disc) / (2.0 * det_chi)
        return np.stack([lo, hi], axis=-1)
    L = np.linalg.cholesky(chi_vals)
    Linv = np.linalg.inv(L)
    reduced = Linv @ omega_vals @ Linv.conj().swapaxes(-1, -2)
    return np.linalg.eigvalsh(reduced)


# ---------------------------------------------------------------------------
# wedge densities and integration


@functools.lru_cache(maxsize=8)
def _perm_pairs(n: int):
    perms = list(itertools.permutations(range(n)))
    signs = []
    for p in perms:
        s = 1
        for i in range(n):
            for j in range(i + 1, n):
                if p[i] > p[j]:
                    s = -s
        signs.append(s)
    return perms, signs


def mixed_density(mats) -> np.ndarray:
    """Density ``D(A_1,..,A_n)`` of the wedge of n (1,1)-forms.

    Each entry of ``mats`` is an array broadcastable to grid + (n, n); the
    result is real with ``D(A,..,A) = n! det(A)``.
    """
    mats = [np.asarray(m) for m in mats]
    n = mats[0].shape[-1]
    if len(mats) != n:
        raise UsageError(f"need exactly n = {n} factor forms, got {len(mats)}")
    perms, signs = _perm_pairs(n)
    if n == 1:
        return mats[0][..., 0, 0].real.copy()
    out = None
    for sig, ssig in zip(perms, signs):
        for tau, stau in zip(perms, signs):
            term = mats[0][..., sig[0], tau[0]]
            for k in range(1, n):
                term = term * mats[k][..., sig[k], tau[k]]
            contrib = (ssig * stau) * term
            out = contrib if out is None else out + contrib
    return np.asarray(out.real)


def wedge_integral(geom: TorusGeometry, mats, scalar: np.ndarray | None = None) -> float:
    """Grid mean of ``scalar * D(mats)`` (unit total volume)."""
    dens = mixed_density(mats)
    if scalar is not None:
        dens = dens * scalar
    return float(np.mean(dens))


def integrate(field: ScalarField | None, weights, geom: TorusGeometry | None = None) -> float:
    """Integral of a scalar against a wedge of forms.

    ``weights`` is a list of :class:`FormField` (or raw matrix grids) whose
    length must equal ``n``.  Geometry mismatches raise ``UsageError``.
    """
    forms = []
    geoms = set()
    for w in weights:
        if isinstance(w, FormField):
            geoms.add(w.geometry)
            forms.append(w.values)
        else:
            forms.append(np.asarray(w))
    if field is not None:
        geoms.add(field.geometry)
    if geom is not None:
        geoms.add(geom)
    if len(geoms) > 1:
        raise UsageError("integrate: geometry mismatch between factors")
    g = geoms.pop() if geoms else None
    if g is None:
        raise UsageError("integrate: cannot infer geometry from constant factors")
    return wedge_integral(g, forms, None if field is None else field.values)


# ---------------------------------------------------------------------------
# mollification


def mollifier_profile(r: np.ndarray) -> np.ndarray:
    """Unnormalized radial bump: 1 on [0, 1/4], smooth cutoff, 0 beyond 1."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[r <= 0.25] = 1.0
    mid = (r > 0.25) & (r < 1.0)
    q = (r[mid] - 0.25) / 0.75
    a = np.exp(-1.0 / (1.0 - q))
    b = np.exp(-1.0 / q)
    out[mid] = a / (a + b)
    return out


@functools.lru_cache(maxsize=8)
def mollifier_normalization(n: int) -> float:
    """Constant making ``int_0^1 rho(t) t^(2n-1) Vol(dB_1) dt = 1`` in C^n."""
    ts = np.linspace(0.0, 1.0, 20001)
    sphere_area = 2.0 * math.pi ** n / math.gamma(n)
    integrand = mollifier_profile(ts) * ts ** (2 * n - 1) * sphere_area
    return 1.0 / float(np.trapezoid(integrand, ts))


@functools.lru_cache(maxsize=32)
def _mollify_transfer(geom: TorusGeometry, delta: float) -> np.ndarray:
    coords = geom.coordinates()
    r2 = np.zeros(geom.shape)
    for u in coords:
        d = np.minimum(u, 1.0 - u)
        r2 = r2 + d * d
    kernel = mollifier_normalization(geom.n) * mollifier_profile(np.sqrt(r2) / delta)
    kernel = kernel / delta ** (2 * geom.n)
    transfer = sfft.fftn(kernel, workers=-1) / geom.grid_size
    transfer = transfer / transfer.flat[0].real  # preserve constants exactly
    transfer.setflags(write=False)
    return transfer


def smooth_array(geom: TorusGeometry, values: np.ndarray, delta: float) -> np.ndarray:
    """Periodic convolution of a (possibly matrix-valued) grid array with the kernel.

    Trailing axes beyond the grid are convolved componentwise.
    """
    if not 0.0 < delta < 0.25:
        raise UsageError("mollification radius must lie in (0, 1/4)")
    transfer = _mollify_transfer(geom, float(delta))
    grid_axes = tuple(range(2 * geom.n))
    extra = values.ndim - 2 * geom.n
    mult = transfer.reshape(geom.shape + (1,) * extra) if extra else transfer
    out = sfft.ifftn(sfft.fftn(values, axes=grid_axes, workers=-1) * mult,
                     axes=grid_axes, workers=-1)
    return out.real if np.isrealobj(values) else out


def mollify(phi: ScalarField, delta: float) -> ScalarField:
    """Convolution against the radial kernel scaled to radius ``delta``.

    Commutes with :func:`complex_hessian` (both act diagonally in Fourier).
    """
    return ScalarField(phi.geometry, smooth_array(phi.geometry, phi.values, delta))


# ---------------------------------------------------------------------------
# regularized maximum


@functools.lru_cache(maxsize=4)
def _reg_max_nodes(order: int = 32):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    dens = np.exp(-1.0 / np.maximum(1.0 - nodes * nodes, 1e-300))
    dens[np.abs(nodes) >= 1.0] = 0.0
    weights = weights * dens
    weights = weights / np.sum(weights)
    return nodes, weights


def regularized_max(f1: ScalarField, f2: ScalarField, eta: float) -> ScalarField:
    """Smooth, convex regularization of ``max(f1, f2)``.

    Convolves ``max`` against a product bump at scale ``eta``; the output
    lies in ``[max, max + eta]`` and equals ``max`` wherever
    ``|f1 - f2| >= 2*eta``.
    """
    _same_geometry(f1, f2)
    eta = float(eta)
    if eta <= 0.0:
        raise UsageError("eta must be positive")
    nodes, weights = _reg_max_nodes()
    d = f2.values - f1.values
    acc = np.zeros_like(d)
    for h1, w1 in zip(nodes, weights):
        inner = np.maximum(eta * h1, d[..., None] + eta * nodes)
        acc += w1 * (inner @ weights)
    return ScalarField(f1.geometry, f1.values + acc)


# ---------------------------------------------------------------------------
# serialization: JSON header + raw little-endian float64 (C order)


def save_scalar_field(path: str | Path, phi: ScalarField,
                      base: np.ndarray | None = None, fmt: str = "binary") -> Path:
    """Write ``<path>.json`` header plus ``<path>.bin`` (or ``.csv``) payload.

    Binary payload is little-endian float64 in C order; CSV uses one ``%.17g``
    value per line (both round-trip float64 exactly).
    """
    path = Path(path)
    geom = phi.geometry
    if fmt not in ("binary", "csv"):
        raise UsageError("fmt must be 'binary' or 'csv'")
    data_name = path.name + (".bin" if fmt == "binary" else ".csv")
    header = {
        "n": geom.n,
        "N": geom.N,
        "base": None if base is None else
            [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(base, dtype=complex)],
        "dtype": "float64",
        "byte_order": "little-endian",
        "order": "C",
        "format": fmt,
        "values_file": data_name,
    }
    header_path = path.with_name(path.name + ".json")
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    flat = np.ascontiguousarray(phi.values, dtype="<f8").reshape(-1)
    data_path = path.with_name(data_name)
    if fmt == "binary":
        data_path.write_bytes(flat.tobytes())
    else:
        data_path.write_text("\n".join(f"{v:.17g}" for v in flat) + "\n")
    return header_path


def load_scalar_field(header_path: str | Path) -> tuple[ScalarField, np.ndarray | None]:
    """Inverse of :func:`save_scalar_field`; returns the field and base matrix."""
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text())
        geom = TorusGeometry(int(header["n"]), int(header["N"]))
        data_path = header_path.with_name(header["values_file"])
        if header.get("format", "binary") == "binary":
            flat = np.frombuffer(data_path.read_bytes(), dtype="<f8")
        else:
            flat = np.array([float(line) for line in data_path.read_text().split()])
    except (KeyError, ValueError, OSError) as exc:
        raise DataError(f"cannot load field from {header_path}: {exc}") from exc
    if flat.size != geom.grid_size:
        raise DataError(f"payload has {flat.size} values, expected {geom.grid_size}")
    base = header.get("base")
    base_mat = None
    if base is not None:
        base_mat = np.array([[complex(re, im) for re, im in row] for row in base])
    return ScalarField(geom, flat.reshape(geom.shape).copy()), base_mat
