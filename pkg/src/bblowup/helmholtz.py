"""Uniform grid, the Helmholtz operator ``1 - alpha^2 d^2`` and discrete Sobolev norms.

Fields live on a truncated line ``[-L, L]`` and are zero-extended outside it.
The inverse Helmholtz operator is available two ways: a banded Cholesky solve
that is the exact inverse of the discrete forward operator, and a trapezoidal
convolution with the exponential kernel ``exp(-|x/alpha|) / (2 alpha)``.  The
second one exists to cross-check the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.linalg import cho_solve_banded, cholesky_banded

DEFAULT_BOUNDARY_TOL = 1e-6


class DomainTooSmallError(ValueError):
    """A field does not decay at the ends of the truncated domain."""

    def __init__(self, message: str, suggested_half_width: float) -> None:
        super().__init__(f"{message}; try half_width >= {suggested_half_width:g}")
        self.suggested_half_width = suggested_half_width


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    half_width: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.half_width > 0.0:
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        if self.n_points < 16:
            raise ValueError(f"need at least 16 grid points, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    def describe(self) -> dict[str, float]:
        return {"half_width": self.half_width, "n_points": self.n_points, "spacing": self.spacing}


@dataclass(frozen=True)
class Field:
    """Real samples of a function on ``grid``; NaN and Inf are rejected."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes


def d1_centered(g: np.ndarray, h: float) -> np.ndarray:
    """Second-order centered first derivative with zero extension."""
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - g[:-2]) / (2.0 * h)
    out[0] = g[1] / (2.0 * h)
    out[-1] = -g[-2] / (2.0 * h)
    return out


def d2_centered(g: np.ndarray, h: float) -> np.ndarray:
    out = -2.0 * g
    out[1:] += g[:-1]
    out[:-1] += g[1:]
    return out / (h * h)


def symbol(xi: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Fourier symbol ``1 + alpha^2 xi^2`` of the Helmholtz operator."""
    return 1.0 + (alpha * xi) ** 2


def _padded_spectrum(g: np.ndarray, h: float, pad: int) -> tuple[np.ndarray, np.ndarray, int]:
    m = sfft.next_fast_len(pad * g.size, real=True)
    spec = sfft.rfft(g, n=m)
    xi = 2.0 * np.pi * sfft.rfftfreq(m, d=h)
    return spec, xi, m


def sobolev_norm_sq(
    g: np.ndarray, h: float, s: float, alpha: float = 1.0, pad: int = 2
) -> float:
    """Squared ``H^s`` norm with weight ``(1 + alpha^2 xi^2)^s``.

    ``alpha=1`` gives the standard ``(1 + xi^2)^s`` norm.  The field is
    zero-padded to at least ``pad * len(g)`` samples before transforming.
    """
    spec, xi, m = _padded_spectrum(np.asarray(g, dtype=float), h, pad)
    weight = symbol(xi, alpha) ** s
    power = np.abs(spec) ** 2
    # rfft stores each nonzero mode once; double all but DC and (even m) Nyquist
    mult = np.full(power.size, 2.0)
    mult[0] = 1.0
    if m % 2 == 0:
        mult[-1] = 1.0
    return float(h / m * np.sum(mult * weight * power))


def sobolev_norm(g: np.ndarray, h: float, s: float, alpha: float = 1.0, pad: int = 2) -> float:
    return float(np.sqrt(sobolev_norm_sq(g, h, s, alpha, pad)))


def dealias(g: np.ndarray, h: float, pad: int = 2, fraction: float = 2.0 / 3.0) -> np.ndarray:
    """Zero every mode above ``fraction`` of the grid Nyquist wavenumber."""
    spec, xi, m = _padded_spectrum(g, h, pad)
    spec[xi > fraction * np.pi / h] = 0.0
    return sfft.irfft(spec, n=m)[: g.size]


def kernel(x: np.ndarray, alpha: float) -> np.ndarray:
    """Fundamental solution ``exp(-|x/alpha|) / (2|alpha|)`` of ``1 - alpha^2 d^2``."""
    a = abs(alpha)
    return np.exp(-np.abs(x) / a) / (2.0 * a)


def kernel_self_convolution(x: np.ndarray, alpha: float) -> np.ndarray:
    """Closed form of ``(p * p)(x)`` for the exponential kernel."""
    a = abs(alpha)
    r = np.abs(x) / a
    return (1.0 + r) * np.exp(-r) / (4.0 * a)


@dataclass(frozen=True)
class HelmholtzOps:
    """Discrete ``Lambda^2 = 1 - alpha^2 d^2`` on ``grid`` and its inverse.

    Immutable after construction; every method is read-only.
    """

    alpha: float
    grid: Grid
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    pad: int = 2
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _kernel: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.alpha == 0.0:
            raise ValueError("Helmholtz operator needs alpha != 0")
        n, h = self.grid.n_points, self.grid.spacing
        c = (self.alpha / h) ** 2
        # upper banded storage of the SPD tridiagonal matrix
        ab = np.empty((2, n))
        ab[0, 0] = 0.0
        ab[0, 1:] = -c
        ab[1, :] = 1.0 + 2.0 * c
        object.__setattr__(self, "_chol", cholesky_banded(ab, lower=False))
        offsets = h * np.arange(-(n - 1), n)
        object.__setattr__(self, "_kernel", kernel(offsets, self.alpha))

    @property
    def h(self) -> float:
        return self.grid.spacing

    @property
    def kernel_samples(self) -> np.ndarray:
        """Kernel sampled at the grid nodes (centered at zero)."""
        return kernel(self.grid.nodes, self.alpha)

    def kernel_mass(self) -> float:
        """Trapezoidal integral of the kernel over ``[-L, L]``."""
        return float(np.trapezoid(kernel(self.grid.nodes, self.alpha), dx=self.h))

    def _values(self, g) -> np.ndarray:
        if isinstance(g, Field):
            if g.grid != self.grid:
                raise GridMismatchError("field lives on a different grid")
            return g.values
        arr = np.asarray(g, dtype=float)
        if arr.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} samples, got shape {arr.shape}"
            )
        return arr

    def check_decay(self, g) -> None:
        """Raise :class:`DomainTooSmallError` if ``g`` is not small at both ends."""
        v = self._values(g)
        scale = float(np.max(np.abs(v))) if v.size else 0.0
        if scale == 0.0:
            return
        edge = max(abs(v[0]), abs(v[-1]))
        if edge > self.boundary_tol * scale:
            raise DomainTooSmallError(
                f"field does not decay at the boundary (|edge|/max = {edge / scale:.3g} "
                f"> {self.boundary_tol:g})",
                suggested_half_width=self.grid.half_width + 20.0 * abs(self.alpha),
            )

    def apply_forward(self, g) -> np.ndarray:
        """``g - alpha^2 g''`` by the three-point stencil, zero-extended."""
        v = self._values(g)
        return v - self.alpha**2 * d2_centered(v, self.h)

    def apply_inverse(self, w, check: bool = True) -> np.ndarray:
        """Solve ``(I - alpha^2 D2) v = w`` with zero values beyond the ends."""
        v = self._values(w)
        if check:
            self.check_decay(v)
        return cho_solve_banded((self._chol, False), v, check_finite=False)

    def convolve_kernel(self, w, check: bool = True) -> np.ndarray:
        """Trapezoidal quadrature of ``p * w`` with the exact kernel."""
        v = self._values(w)
        if check:
            self.check_decay(v)
        weights = v.copy()
        weights[0] *= 0.5
        weights[-1] *= 0.5
        n = self.grid.n_points
        full = np.convolve(self._kernel, weights, mode="full")
        return self.h * full[n - 1 : 2 * n - 1]

    def apply_power(self, g, s: float) -> np.ndarray:
        """``Lambda^s g`` through the Fourier symbol ``(1 + alpha^2 xi^2)^(s/2)``."""
        v = self._values(g)
        spec, xi, m = _padded_spectrum(v, self.h, self.pad)
        spec *= symbol(xi, self.alpha) ** (0.5 * s)
        return sfft.irfft(spec, n=m)[: v.size]

    def sobolev_norm(self, g, s: float, check: bool = True, standard: bool = False) -> float:
        """``H^s`` norm, alpha-weighted unless ``standard`` is set."""
        v = self._values(g)
        if check:
            self.check_decay(v)
        return sobolev_norm(v, self.h, s, 1.0 if standard else self.alpha, self.pad)

    def inner(self, f, g, s: float) -> float:
        """``(Lambda^s f, Lambda^s g)`` evaluated spectrally."""
        a, b = self._values(f), self._values(g)
        fa, xi, m = _padded_spectrum(a, self.h, self.pad)
        fb, _, _ = _padded_spectrum(b, self.h, self.pad)
        mult = np.full(fa.size, 2.0)
        mult[0] = 1.0
        if m % 2 == 0:
            mult[-1] = 1.0
        weight = symbol(xi, self.alpha) ** s
        return float(self.h / m * np.sum(mult * weight * (fa * np.conj(fb)).real))

    def dealias(self, g) -> np.ndarray:
        return dealias(self._values(g), self.h, self.pad)
