"""Coordinate changes between the physical, similarity and rescaled frames.

    tau = -log(T - t),   rho = x / (T - t),   rho0 = e^{-tau} rho = x

Field roles along the chain ``u -> v -> vbar -> w`` at fixed ``tau``:

* ``u``     physical solution
* ``v``     ``u - u0`` written in ``(tau, rho)``
* ``vbar``  ``e^{-tau} v`` written in ``(tau, rho0)``
* ``w``     ``vbar - alpha^2 vbar''``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .exact import BlowupDomainError, eval_u0
from .helmholtz import Grid, HelmholtzOps, d2_centered
from .model import ModelParams

ROLES = ("u", "v", "vbar", "w")


@dataclass(frozen=True)
class SimilarityPoint:
    tau: float
    rho: float


@dataclass(frozen=True)
class RescaledPoint:
    tau: float
    rho0: float


@dataclass(frozen=True)
class FieldRole:
    role: str
    nodes: np.ndarray
    values: np.ndarray
    tau: float
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown field role {self.role!r}")
        if np.shape(self.nodes) != np.shape(self.values):
            raise ValueError("nodes and values must have the same shape")


def to_similarity(T: float, t: float, x: float) -> SimilarityPoint:
    if not t < T:
        raise BlowupDomainError(f"need t < T = {T}, got t = {t}")
    return SimilarityPoint(-math.log(T - t), x / (T - t))


def from_similarity(T: float, tau: float, rho: float) -> tuple[float, float]:
    gap = math.exp(-tau)
    return T - gap, rho * gap


def to_rescaled(point: SimilarityPoint) -> RescaledPoint:
    return RescaledPoint(point.tau, math.exp(-point.tau) * point.rho)


def start_tau(T: float) -> float:
    """Similarity time of the physical start ``t = 0``."""
    return -math.log(T)


def resample(nodes: np.ndarray, values: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cubic interpolation with zero extension outside ``nodes``.

    Returns the samples and whether any target fell outside the source range
    while the source was nonzero near that end.
    """
    spline = CubicSpline(nodes, values, bc_type="not-a-knot", extrapolate=False)
    out = np.nan_to_num(spline(targets), nan=0.0)
    outside = (targets < nodes[0]) | (targets > nodes[-1])
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    edge = max(abs(values[0]), abs(values[-1]))
    truncated = bool(np.any(outside)) and scale > 0.0 and edge > 1e-8 * scale
    return out, truncated


def perturbation_from_physical(
    params: ModelParams, x: np.ndarray, u: np.ndarray, t: float, rho_nodes: np.ndarray | None = None
) -> FieldRole:
    """``v(tau, rho) = u(t, x) - u0(t, x)`` resampled to ``rho_nodes``."""
    x = np.asarray(x, dtype=float)
    pert = np.asarray(u, dtype=float) - eval_u0(params, t, x)
    pt = to_similarity(params.T, t, 0.0)
    gap = params.T - t
    if rho_nodes is None:
        rho_nodes = x / gap
    rho_nodes = np.asarray(rho_nodes, dtype=float)
    values, truncated = resample(x, pert, rho_nodes * gap)
    notes = ("similarity grid extends beyond the physical domain; zero-extended",) if truncated else ()
    return FieldRole("v", rho_nodes, values, pt.tau, notes)


def physical_from_perturbation(params: ModelParams, v: FieldRole, x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`perturbation_from_physical`: ``u = u0 + v`` on ``x``."""
    if v.role != "v":
        raise ValueError(f"expected a 'v' field, got {v.role!r}")
    t, _ = from_similarity(params.T, v.tau, 0.0)
    gap = params.T - t
    values, _ = resample(v.nodes * gap, v.values, np.asarray(x, dtype=float))
    return eval_u0(params, t, x) + values


def _check_resolved(pert: np.ndarray) -> None:
    spec = np.abs(np.fft.rfft(pert)) ** 2
    total = float(np.sum(spec))
    if total == 0.0:
        return
    top = float(np.sum(spec[int(2 * spec.size / 3):]))
    if top > 1e-8 * total:
        raise ValueError(
            "initial datum is under-resolved on this grid "
            f"({top / total:.2e} of its energy sits in the top third of modes)"
        )


def build_initial_w(params: ModelParams, grid: Grid, u_initial: np.ndarray) -> FieldRole:
    """Helmholtz image of the initial perturbation.

    ``w0 = T * (g - alpha^2 g'')`` with ``g = u(0, x) + (x/T + c0)/(b+1)``.
    For ``T = 1`` this is the usual ``u - alpha^2 u'' + (x + c0)/(b+1)``; the
    factor ``T`` comes from ``vbar = (T - t)(u - u0)`` at ``t = 0``.
    """
    x = grid.nodes
    pert = np.asarray(u_initial, dtype=float) - eval_u0(params, 0.0, x)
    if pert.shape != x.shape:
        raise ValueError("initial datum does not match the grid")
    _check_resolved(pert)
    w0 = params.T * (pert - params.alpha**2 * d2_centered(pert, grid.spacing))
    notes = ()
    if params.T != 1.0:
        notes = (f"T = {params.T:g}: tau starts at {start_tau(params.T):.6g}, w0 scaled by T",)
    return FieldRole("w", x, w0, start_tau(params.T), notes)


@dataclass(frozen=True)
class Reconstruction:
    tau: float
    t: float
    vbar: FieldRole
    v: FieldRole
    # u - u0 at time t on the physical nodes (equal to the rho0 nodes)
    physical: np.ndarray


def reconstruct_physical(params: ModelParams, ops: HelmholtzOps, w: np.ndarray, tau: float) -> Reconstruction:
    """Undo the Helmholtz and similarity rescalings of ``w``.

    ``vbar = p * w``; ``v(rho) = e^tau vbar(rho0)`` with ``rho = e^tau rho0``;
    the physical perturbation at ``t = T - e^{-tau}`` is ``e^tau vbar(x)``.
    """
    x = ops.grid.nodes
    vbar = ops.apply_inverse(w)
    scale = math.exp(tau)
    t = params.T - math.exp(-tau)
    return Reconstruction(
        tau=tau,
        t=t,
        vbar=FieldRole("vbar", x, vbar, tau),
        v=FieldRole("v", scale * x, scale * vbar, tau),
        physical=scale * vbar,
    )
