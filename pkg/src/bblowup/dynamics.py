"""Nonlocal perturbation dynamics around the self-similar blowup profile.

In the rescaled similarity frame the perturbation is carried by
``w = vbar - alpha^2 vbar''`` and evolves as ``w_tau = L[w] + f(w)`` with

    L[w] = -a w + cw(x, tau) w' + a P - cp(x, tau) P'
    f(w) = ((c1 + c2 - b - 1) P - c1 w) P' - c2 w' P

where ``P = p * w`` is the inverse Helmholtz image, ``a = 1 - c1/(b+1)``,

    cw = e^{-tau} (G/alpha^2 + c0 c2/(b+1)) + c2/(b+1) x
    cp = e^{-tau} (G/alpha^2 + c0 c2/(b+1)) + (c2 - b - 1)/(b+1) x

and ``x`` is the rescaled coordinate (which coincides with the physical one).
The transport term ``cw w'`` is upwinded; everything else uses centered
differences.  Time stepping is classical RK4 under a CFL limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .helmholtz import DomainTooSmallError, Grid, HelmholtzOps, d1_centered
from .model import ModelParams, classify

SCHEMES = ("upwind", "weno3")


class CFLViolation(ValueError):
    def __init__(self, dt: float, limit: float) -> None:
        super().__init__(f"dt = {dt:.6g} exceeds the CFL limit {limit:.6g}")
        self.dt = dt
        self.limit = limit


class NumericalBlowup(FloatingPointError):
    """A step produced non-finite values; ``last_good`` holds the state before it."""

    def __init__(self, message: str, last_good: "SimState") -> None:
        super().__init__(message)
        self.last_good = last_good


@dataclass(frozen=True)
class SimState:
    w: np.ndarray
    tau: float
    params: ModelParams
    step_count: int = 0
    last_dt: float = 0.0

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise ValueError("w must be one-dimensional")
        if not np.all(np.isfinite(w)):
            raise ValueError("w contains non-finite values")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class RhsBreakdown:
    linear_part: np.ndarray
    nonlinear_part: np.ndarray
    transport_coefficient_w: np.ndarray
    transport_coefficient_pw: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.linear_part + self.nonlinear_part


@dataclass(frozen=True)
class DissipativityReport:
    quad_form: float
    predicted: float
    relative_gap: float
    tau: float
    s: float
    # continuum value of the quadratic form with the commutator terms kept
    commutator_form: float


def _upwind_derivative(g: np.ndarray, coef: np.ndarray, h: float) -> np.ndarray:
    # w_tau = coef * w' moves information from the side coef points to
    fwd = np.empty_like(g)
    fwd[:-1] = (g[1:] - g[:-1]) / h
    fwd[-1] = -g[-1] / h
    bwd = np.empty_like(g)
    bwd[1:] = (g[1:] - g[:-1]) / h
    bwd[0] = g[0] / h
    return np.where(coef > 0.0, fwd, bwd)


def _weno3_derivative(g: np.ndarray, coef: np.ndarray, h: float) -> np.ndarray:
    # forward differences on the zero-extended field: delta[j] = (g[j+1] - g[j]) / h, j = -2 .. n
    ext = np.concatenate(([0.0, 0.0], g, [0.0, 0.0]))
    delta = np.diff(ext) / h
    d_m2, d_m1, d_0, d_p1 = delta[:-3], delta[1:-2], delta[2:-1], delta[3:]
    eps = 1e-6 * float(np.max(delta * delta)) + 1e-300
    r_m = (eps + (d_m1 - d_m2) ** 2) / (eps + (d_0 - d_m1) ** 2)
    om_m = 1.0 / (1.0 + 2.0 * r_m * r_m)
    left = 0.5 * (d_m1 + d_0) - 0.5 * om_m * (d_0 - 2.0 * d_m1 + d_m2)
    r_p = (eps + (d_p1 - d_0) ** 2) / (eps + (d_0 - d_m1) ** 2)
    om_p = 1.0 / (1.0 + 2.0 * r_p * r_p)
    right = 0.5 * (d_m1 + d_0) - 0.5 * om_p * (d_p1 - 2.0 * d_0 + d_m1)
    return np.where(coef > 0.0, right, left)


class Dynamics:
    """Right-hand side, time stepping and energy diagnostics for one parameter set."""

    def __init__(
        self,
        params: ModelParams,
        grid: Grid,
        scheme: str = "upwind",
        dealias: bool = True,
        boundary_tol: float = 1e-6,
        boundary_band: int = 3,
        pad: int = 2,
    ) -> None:
        if params.alpha == 0.0:
            raise ValueError("the nonlocal dynamics needs alpha != 0 (G/alpha^2 is undefined)")
        if scheme not in SCHEMES:
            raise ValueError(f"unknown transport scheme {scheme!r}; choose from {SCHEMES}")
        self.params = params
        self.grid = grid
        self.scheme = scheme
        self.use_dealias = dealias
        self.boundary_band = boundary_band
        self.ops = HelmholtzOps(params.alpha, grid, boundary_tol=boundary_tol, pad=pad)
        self.x = grid.nodes
        self.h = grid.spacing
        p = params
        bp1 = p.bp1
        self.a = 1.0 - p.c1 / bp1
        self.shift = p.gamma / p.alpha**2 + p.c0 * p.c2 / bp1
        self.slope_w = p.c2 / bp1
        self.slope_p = (p.c2 - bp1) / bp1
        self.n_coef = p.c1 + p.c2 - bp1
        self.report = classify(p)

    # coefficients ---------------------------------------------------------

    def coefficients(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        base = math.exp(-tau) * self.shift
        return base + self.slope_w * self.x, base + self.slope_p * self.x

    def cfl_limit(self, tau: float, safety: float = 0.5) -> float:
        cw, cp = self.coefficients(tau)
        vmax = max(float(np.max(np.abs(cw))), float(np.max(np.abs(cp))))
        return math.inf if vmax == 0.0 else safety * self.h / vmax

    # state checks ----------------------------------------------------------

    def check_state(self, w: np.ndarray) -> None:
        if w.shape != (self.grid.n_points,):
            raise ValueError(f"w has shape {w.shape}, grid has {self.grid.n_points} points")
        scale = float(np.max(np.abs(w)))
        if scale == 0.0:
            return
        k = self.boundary_band
        edge = max(float(np.max(np.abs(w[:k]))), float(np.max(np.abs(w[-k:]))))
        if edge > self.ops.boundary_tol * scale:
            raise DomainTooSmallError(
                f"perturbation reached the boundary (|edge|/max = {edge / scale:.3g})",
                suggested_half_width=self.grid.half_width + 20.0 * abs(self.params.alpha),
            )

    # right-hand side ------------------------------------------------------

    def transport_derivative(self, w: np.ndarray, coef: np.ndarray) -> np.ndarray:
        if self.scheme == "weno3":
            return _weno3_derivative(w, coef, self.h)
        return _upwind_derivative(w, coef, self.h)

    def breakdown(self, w: np.ndarray, tau: float) -> RhsBreakdown:
        w = np.asarray(w, dtype=float)
        cw, cp = self.coefficients(tau)
        P = self.ops.apply_inverse(w, check=False)
        dP = d1_centered(P, self.h)
        linear = -self.a * w + cw * self.transport_derivative(w, cw) + self.a * P - cp * dP
        dw = d1_centered(w, self.h)
        nonlinear = (self.n_coef * P - self.params.c1 * w) * dP - self.params.c2 * dw * P
        if self.use_dealias:
            nonlinear = self.ops.dealias(nonlinear)
        return RhsBreakdown(linear, nonlinear, cw, cp)

    def linear_rhs(self, state: SimState) -> np.ndarray:
        self.check_state(state.w)
        return self.breakdown(state.w, state.tau).linear_part

    def nonlinear_rhs(self, state: SimState) -> np.ndarray:
        self.check_state(state.w)
        return self.breakdown(state.w, state.tau).nonlinear_part

    def rhs(self, w: np.ndarray, tau: float) -> np.ndarray:
        """Method-of-lines right-hand side; the two end nodes are held at zero."""
        out = self.breakdown(w, tau).total
        out[0] = 0.0
        out[-1] = 0.0
        return out

    def rhs_direct(self, w: np.ndarray, tau: float) -> np.ndarray:
        """Full right-hand side assembled from the ``vbar`` form of the equation.

        Uses ``vbar'' = (P - w)/alpha^2`` and ``vbar''' = (P' - w')/alpha^2``
        instead of the split into ``L`` and ``f``; agrees with :meth:`rhs`
        to rounding.
        """
        p = self.params
        cw, _ = self.coefficients(tau)
        P = self.ops.apply_inverse(w, check=False)
        dP = d1_centered(P, self.h)
        dw = d1_centered(w, self.h)
        lap = P - w  # alpha^2 vbar''
        third = dP - dw  # alpha^2 vbar''' with centered w'
        linear = self.a * lap + self.x * dP - cw * (dP - self.transport_derivative(w, cw))
        products = -p.bp1 * P * dP + p.c1 * dP * lap + p.c2 * P * third
        if self.use_dealias:
            products = self.ops.dealias(products)
        return linear + products

    # time stepping ----------------------------------------------------------

    def step(self, state: SimState, dt: float, cfl_safety: float = 0.5, dt_max: float | None = None) -> SimState:
        """One classical RK4 step of size ``dt``."""
        limit = self.cfl_limit(state.tau, cfl_safety)
        if dt_max is not None:
            limit = min(limit, dt_max)
        if not dt > 0.0 or dt > limit * (1.0 + 1e-12):
            raise CFLViolation(dt, limit)
        self.check_state(state.w)
        w, tau = state.w, state.tau
        k1 = self.rhs(w, tau)
        k2 = self.rhs(w + 0.5 * dt * k1, tau + 0.5 * dt)
        k3 = self.rhs(w + 0.5 * dt * k2, tau + 0.5 * dt)
        k4 = self.rhs(w + dt * k3, tau + dt)
        new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new[0] = 0.0
        new[-1] = 0.0
        if not np.all(np.isfinite(new)):
            raise NumericalBlowup(f"non-finite values at tau = {tau + dt:.6g}", state)
        return SimState(new, tau + dt, state.params, state.step_count + 1, dt)

    def next_dt(self, state: SimState, cfl_safety: float = 0.5, dt_max: float = math.inf, tau_end: float = math.inf) -> float:
        dt = min(self.cfl_limit(state.tau, cfl_safety), dt_max)
        remaining = tau_end - state.tau
        if remaining < dt * (1.0 + 1e-9):
            dt = remaining
        return dt

    # energy diagnostics ----------------------------------------------------------

    def commutator_form(self, w: np.ndarray, s: float) -> float:
        """Continuum ``(Lambda^s L[w], Lambda^s w)`` with the commutators kept.

        For the affine coefficients of ``L`` the constant parts are skew and
        drop out, and integrating the symbol exactly gives

            (-a + k1 (s - 1/2)) |w|_s^2 + (a - k1 s - k2 (s + 1/2)) |w|_{s-1}^2
                + k2 (s + 1) |w|_{s-2}^2

        with ``k1, k2`` the slopes of ``cw`` and ``cp``.
        """
        ops, a, k1, k2 = self.ops, self.a, self.slope_w, self.slope_p
        n_s = ops.sobolev_norm(w, s, check=False) ** 2
        n_s1 = ops.sobolev_norm(w, s - 1.0, check=False) ** 2
        n_s2 = ops.sobolev_norm(w, s - 2.0, check=False) ** 2
        return (-a + k1 * (s - 0.5)) * n_s + (a - k1 * s - k2 * (s + 0.5)) * n_s1 + k2 * (s + 1.0) * n_s2

    def dissipativity_report(self, state: SimState, s: float) -> DissipativityReport:
        if not s > 2.0:
            raise ValueError(f"dissipativity is stated for s > 2, got s = {s}")
        w = state.w
        lw = self.breakdown(w, state.tau).linear_part
        quad = self.ops.inner(lw, w, s)
        ratio_a, ratio_b = self.report.ratio_a, self.report.ratio_b
        predicted = -ratio_a * self.ops.sobolev_norm(w, s, check=False) ** 2 - ratio_b * self.ops.sobolev_norm(w, s - 1.0, check=False) ** 2
        gap = abs(quad - predicted) / max(abs(predicted), np.finfo(float).tiny)
        if quad == 0.0 and predicted == 0.0:
            gap = 0.0
        return DissipativityReport(quad, predicted, gap, state.tau, s, self.commutator_form(w, s))


def zero_state(params: ModelParams, grid: Grid, tau: float = 0.0) -> SimState:
    return SimState(np.zeros(grid.n_points), tau, params)


def integrate(
    dyn: Dynamics,
    state: SimState,
    tau_end: float,
    cfl_safety: float = 0.5,
    dt_max: float = math.inf,
    callback=None,
    ceiling: float | None = None,
    norm=None,
) -> tuple[SimState, str]:
    """Advance ``state`` to ``tau_end``.

    ``callback(state)`` is called after every accepted step.  When ``ceiling``
    is given, ``norm(state.w)`` is compared against it and the run stops with
    exit reason ``"ceiling-hit"``.  Returns the final state and exit reason.
    """
    while state.tau < tau_end - 1e-12:
        dt = dyn.next_dt(state, cfl_safety, dt_max, tau_end)
        state = dyn.step(state, dt, cfl_safety, None)
        if callback is not None:
            callback(state)
        if ceiling is not None and norm is not None and norm(state.w) >= ceiling:
            return state, "ceiling-hit"
    return state, "completed"


def with_tau(state: SimState, tau: float) -> SimState:
    return replace(state, tau=tau)
