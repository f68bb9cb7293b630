"""Closed-form self-similar blowup profile and a finite-difference residual oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ModelParams


class BlowupDomainError(ValueError):
    """Evaluation requested at or beyond the blowup time."""


class StencilError(ValueError):
    pass


def _as_real(a) -> np.ndarray:
    a = np.asarray(a)
    return a if np.issubdtype(a.dtype, np.floating) else a.astype(float)


def _check_time(params: ModelParams, t) -> np.ndarray:
    t = _as_real(t)
    if np.any(t >= params.T) or np.any(t < 0.0):
        raise BlowupDomainError(f"need 0 <= t < T = {params.T}, got t = {t}")
    return t


def eval_u0(params: ModelParams, t, x):
    """Self-similar profile ``-(x/(T - t) + c0) / (b + 1)``.

    ``t`` and ``x`` broadcast against each other; scalars in give a float out.
    """
    t = _check_time(params, t)
    out = -(_as_real(x) / (params.T - t) + params.c0) / params.bp1
    return float(out) if out.ndim == 0 else out


def slope_at_origin(params: ModelParams, t):
    """``d/dx u0(t, 0) = -1 / ((b + 1)(T - t))``."""
    t = _check_time(params, t)
    out = -1.0 / (params.bp1 * (params.T - t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BreakingDiagnostic:
    t: float
    slope: float
    magnitude: float
    sign: int
    # slope * (T - t); constant -1/(b+1) for a type I singularity
    scaled_slope: float


def breaking_diagnostic(params: ModelParams, t: float) -> BreakingDiagnostic:
    slope = slope_at_origin(params, t)
    return BreakingDiagnostic(
        t=float(t),
        slope=slope,
        magnitude=abs(slope),
        sign=int(np.sign(slope)),
        scaled_slope=slope * (params.T - t),
    )


def exact_table(params: ModelParams, times, xs) -> np.ndarray:
    """Rows ``(t, x, u0, du0/dx)`` for the tensor grid ``times x xs``."""
    tt, xx = np.meshgrid(np.asarray(times, float), np.asarray(xs, float), indexing="ij")
    u = eval_u0(params, tt, xx)
    ux = np.broadcast_to(slope_at_origin(params, tt[:, :1]), tt.shape)
    return np.column_stack([tt.ravel(), xx.ravel(), np.ravel(u), np.ravel(ux)])


def pde_residual(
    params: ModelParams,
    u: np.ndarray,
    u_t: np.ndarray,
    u_x: np.ndarray,
    u_xx: np.ndarray,
    u_xxx: np.ndarray,
    u_txx: np.ndarray,
) -> np.ndarray:
    """Pointwise residual of the generalized b-equation from supplied derivatives."""
    p = params
    a2 = p.alpha**2
    return (
        u_t
        - a2 * u_txx
        + p.c0 * u_x
        + p.bp1 * u * u_x
        + p.gamma * u_xxx
        - a2 * (p.c1 * u_x * u_xx + p.c2 * u * u_xxx)
    )


def fd_residual(params: ModelParams, field: np.ndarray, h: float, dt: float) -> np.ndarray:
    """Residual on interior stencil points of ``field[time, space]``.

    Centered differences throughout; the third x-derivative uses the
    five-point stencil, so two x-points and one time level are lost on
    each side.
    """
    u = _as_real(field)
    if u.ndim != 2 or u.shape[0] < 3 or u.shape[1] < 5:
        raise StencilError(
            f"need at least 3 time levels and 5 space points, got shape {np.shape(field)}"
        )
    c = u[1:-1, 2:-2]
    u_t = (u[2:, 2:-2] - u[:-2, 2:-2]) / (2.0 * dt)
    u_x = (u[1:-1, 3:-1] - u[1:-1, 1:-3]) / (2.0 * h)
    u_xx = (u[1:-1, 3:-1] - 2.0 * c + u[1:-1, 1:-3]) / h**2
    u_xxx = (u[1:-1, 4:] - 2.0 * u[1:-1, 3:-1] + 2.0 * u[1:-1, 1:-3] - u[1:-1, :-4]) / (2.0 * h**3)
    lap = (u[:, 3:-1] - 2.0 * u[:, 2:-2] + u[:, 1:-3]) / h**2
    u_txx = (lap[2:] - lap[:-2]) / (2.0 * dt)
    return pde_residual(params, c, u_t, u_x, u_xx, u_xxx, u_txx)


@dataclass(frozen=True)
class ResidualReport:
    grid_spacing: float
    time_step: float
    max_abs_residual: float
    convergence_order: float
    levels: tuple[tuple[float, float, float], ...] = ()


def sample_field(
    fn: Callable, t_window, x_window, h: float, dt: float, dtype=np.longdouble
) -> np.ndarray:
    """Sample ``fn(t, x)`` on a uniform space-time grid.

    Extended precision by default: third differences at ``h ~ 1e-3`` amplify
    float64 rounding to about ``1e-6``, which would swamp the truncation error.
    """
    t0, t1 = t_window
    x0, x1 = x_window
    nt = int(round((t1 - t0) / dt)) + 1
    nx = int(round((x1 - x0) / h)) + 1
    ts = dtype(t0) + dtype(dt) * np.arange(nt, dtype=dtype)
    xs = dtype(x0) + dtype(h) * np.arange(nx, dtype=dtype)
    tt, xx = np.meshgrid(ts, xs, indexing="ij")
    return fn(tt, xx)


def residual_oracle(
    params: ModelParams,
    field: np.ndarray | Callable,
    h: float,
    dt: float,
    t_window: tuple[float, float] | None = None,
    x_window: tuple[float, float] | None = None,
    levels: int = 3,
    dtype=np.longdouble,
) -> ResidualReport:
    """Max residual of a candidate solution, with an observed order.

    ``field`` is either a sampled array ``u[time, space]`` (single level, the
    order is NaN) or a callable ``u(t, x)``.  A callable is sampled on
    ``t_window x x_window`` at ``(h, dt) * 2**k`` for ``k < levels`` and
    the order is the least-squares slope of ``log max|R|`` against
    ``log h``.
    """
    if not callable(field):
        res = fd_residual(params, field, h, dt)
        m = float(np.max(np.abs(res)))
        return ResidualReport(h, dt, m, float("nan"), ((h, dt, m),))
    if t_window is None or x_window is None:
        raise ValueError("a callable field needs t_window and x_window")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    rows = []
    for k in range(levels):
        hk, dtk = h * 2**k, dt * 2**k
        sampled = sample_field(field, t_window, x_window, hk, dtk, dtype)
        res = fd_residual(params, sampled, dtype(hk), dtype(dtk))
        rows.append((hk, dtk, float(np.max(np.abs(res)))))
    order = float("nan")
    if levels >= 2:
        hs = np.array([r[0] for r in rows])
        ms = np.array([r[2] for r in rows])
        if np.all(ms > 0.0):
            order = float(np.polyfit(np.log(hs), np.log(ms), 1)[0])
        elif np.all(ms == 0.0):
            order = float("inf")
    return ResidualReport(h, dt, rows[0][2], order, tuple(rows))


def u0_sampler(params: ModelParams) -> Callable:
    return lambda t, x: eval_u0(params, t, x)
