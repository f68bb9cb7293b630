"""Energy ledger of a run, exponential-rate fits and rate verdicts."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import SimState
from .helmholtz import HelmholtzOps
from .model import ModelParams, Verdict, classify

LEDGER_COLUMNS = ("tau", "dt", "hs_norm", "hs1_norm", "d_energy", "defect", "K", "phys_norm")
DEFAULT_WINDOW = (0.5, 4.0)
MIN_FIT_SAMPLES = 10
RATE_TOLERANCE = 0.2


class CannotFit(ValueError):
    """Too few samples, or the norm died to zero inside the fit window."""


class EnergyLedger:
    """Per-step Sobolev norms of ``w`` and the terms of the energy inequality.

    ``defect = d/dtau |w|_s^2 + ratio_a |w|_s^2 + ratio_b |w|_{s-1}^2`` and
    ``K = defect / |w|_s^3``.  The time derivative is a second-order
    (non-uniform) centered difference over the recorded rows, so the last row
    changes as rows are appended.
    """

    def __init__(self, params: ModelParams, s: float, ops: HelmholtzOps | None = None) -> None:
        self.params = params
        self.s = float(s)
        self.ops = ops
        report = classify(params)
        self.ratio_a = report.ratio_a
        self.ratio_b = report.ratio_b
        self.verdict = report.verdict
        self._tau: list[float] = []
        self._dt: list[float] = []
        self._hs: list[float] = []
        self._hs1: list[float] = []
        self._phys: list[float] = []

    @classmethod
    def from_arrays(cls, params: ModelParams, s: float, tau, hs, hs1=None, phys=None, dt=None) -> "EnergyLedger":
        """Build a ledger from precomputed norms (for synthetic checks and reloads)."""
        led = cls(params, s)
        tau = np.asarray(tau, dtype=float)
        hs = np.asarray(hs, dtype=float)
        hs1 = np.zeros_like(hs) if hs1 is None else np.asarray(hs1, dtype=float)
        phys = np.full_like(hs, np.nan) if phys is None else np.asarray(phys, dtype=float)
        dt = np.concatenate(([0.0], np.diff(tau))) if dt is None else np.asarray(dt, dtype=float)
        for row in zip(tau, dt, hs, hs1, phys):
            led.append(*row)
        return led

    def __len__(self) -> int:
        return len(self._tau)

    def append(self, tau: float, dt: float, hs: float, hs1: float, phys: float = math.nan) -> None:
        if self._tau and not tau > self._tau[-1]:
            raise ValueError(f"ledger times must increase: {tau} after {self._tau[-1]}")
        if hs < 0.0 or hs1 < 0.0:
            raise ValueError("norms must be non-negative")
        self._tau.append(float(tau))
        self._dt.append(float(dt))
        self._hs.append(float(hs))
        self._hs1.append(float(hs1))
        self._phys.append(float(phys))

    def record(self, state: SimState) -> "EnergyLedger":
        if self.ops is None:
            raise ValueError("this ledger has no Helmholtz operators to measure norms with")
        if state.params != self.params:
            raise ValueError("state parameters differ from the ledger's")
        if state.w.shape != (self.ops.grid.n_points,):
            raise ValueError("state lives on a different grid")
        w = state.w
        hs = self.ops.sobolev_norm(w, self.s, check=False)
        hs1 = self.ops.sobolev_norm(w, self.s - 1.0, check=False)
        pw = self.ops.apply_inverse(w, check=False)
        phys = math.exp(state.tau) * self.ops.sobolev_norm(pw, self.s, check=False)
        self.append(state.tau, state.last_dt, hs, hs1, phys)
        return self

    # columns --------------------------------------------------------------

    @property
    def tau(self) -> np.ndarray:
        return np.array(self._tau)

    @property
    def dt(self) -> np.ndarray:
        return np.array(self._dt)

    @property
    def hs_norm(self) -> np.ndarray:
        return np.array(self._hs)

    @property
    def hs1_norm(self) -> np.ndarray:
        return np.array(self._hs1)

    @property
    def phys_norm(self) -> np.ndarray:
        return np.array(self._phys)

    @property
    def energy_derivative(self) -> np.ndarray:
        e = self.hs_norm**2
        if e.size < 2:
            return np.zeros_like(e)
        return np.gradient(e, self.tau, edge_order=2 if e.size > 2 else 1)

    @property
    def inequality_defect(self) -> np.ndarray:
        return self.energy_derivative + self.ratio_a * self.hs_norm**2 + self.ratio_b * self.hs1_norm**2

    @property
    def cubic_bound_constant(self) -> np.ndarray:
        """``defect / |w|_s^3``; NaN where the norm vanishes."""
        hs3 = self.hs_norm**3
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(hs3 > 0.0, self.inequality_defect / np.where(hs3 > 0.0, hs3, 1.0), np.nan)

    def cubic_constant(self, tau_min: float = -math.inf) -> float:
        """Smallest ``K >= 0`` with ``defect <= K |w|_s^3`` on every row past ``tau_min``."""
        k = self.cubic_bound_constant[self.tau >= tau_min]
        k = k[np.isfinite(k)]
        return float(max(0.0, np.max(k))) if k.size else math.nan

    def is_nonincreasing(self, tau_min: float = DEFAULT_WINDOW[0]) -> tuple[bool, float]:
        """Whether ``|w|_s`` never grows past ``tau_min``; also the largest relative increase."""
        hs = self.hs_norm[self.tau >= tau_min]
        if hs.size < 2:
            return True, 0.0
        rel = np.diff(hs) / np.maximum(hs[:-1], np.finfo(float).tiny)
        worst = float(np.max(rel))
        return worst <= 0.0, worst

    def rows(self) -> list[tuple[float, ...]]:
        cols = (
            self.tau,
            self.dt,
            self.hs_norm,
            self.hs1_norm,
            self.energy_derivative,
            self.inequality_defect,
            self.cubic_bound_constant,
            self.phys_norm,
        )
        return [tuple(float(c[i]) for c in cols) for i in range(len(self))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LEDGER_COLUMNS)
        for row in self.rows():
            writer.writerow(["" if math.isnan(v) else repr(v) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class RateVerdict:
    fitted_rate: float
    theoretical_rate: float
    regime: str
    passed: bool
    window: tuple[float, float]
    n_samples: int
    applicable: bool = True
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def fit_log_slope(tau: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of ``log(values)`` against ``tau``."""
    return float(np.polyfit(tau, np.log(values), 1)[0])


def _window(ledger: EnergyLedger, column: np.ndarray, window: tuple[float, float]):
    lo, hi = window
    tau = ledger.tau
    mask = (tau >= lo) & (tau <= hi)
    t, y = tau[mask], column[mask]
    if t.size < MIN_FIT_SAMPLES:
        raise CannotFit(f"only {t.size} ledger rows in window {window}; need {MIN_FIT_SAMPLES}")
    if np.any(~(y > 0.0)):
        raise CannotFit(f"norm vanished inside window {window}; the perturbation died to rounding")
    return t, y


def fit_rate(ledger: EnergyLedger, window: tuple[float, float] = DEFAULT_WINDOW) -> RateVerdict:
    """Exponential rate of ``|w|_{H^s}`` over ``window``.

    Stable regime passes when the fitted rate is at most ``-0.8 * ratio_a``;
    unstable regime passes when it is positive.  No rule exists for the other
    regimes, so they never pass.
    """
    t, y = _window(ledger, ledger.hs_norm, window)
    slope = fit_log_slope(t, y)
    verdict = ledger.verdict
    if verdict is Verdict.STABLE:
        theory = -ledger.ratio_a
        passed = slope <= (1.0 - RATE_TOLERANCE) * theory
        note = "decay at least 80% of the claimed rate"
    elif verdict is Verdict.UNSTABLE:
        theory = math.nan
        passed = slope > 0.0
        note = "growth constant is not specified; any positive rate passes"
    else:
        theory = math.nan
        passed = False
        note = f"no rate claim for regime {verdict.value}"
    return RateVerdict(slope, theory, verdict.value, bool(passed), tuple(window), int(t.size), True, note)


def physical_rate_verdict(
    params: ModelParams, ledger: EnergyLedger, window: tuple[float, float] = DEFAULT_WINDOW
) -> RateVerdict:
    """Fitted power of ``(T - t)`` in ``|u - u0|_{H^s}`` against the claimed one.

    The ledger's ``phys_norm`` column holds ``e^tau |p * w|_{H^s}``, the norm of
    the physical perturbation at ``t = T - e^{-tau}``.  Since
    ``T - t = e^{-tau}``, the power is minus the log-slope in ``tau``.
    """
    report = classify(params)
    theory = report.physical_exponent
    if report.verdict is not Verdict.STABLE:
        return RateVerdict(
            math.nan, theory, report.verdict.value, False, tuple(window), 0, False,
            "power-law decay is only claimed in the stable regime",
        )
    t, y = _window(ledger, ledger.phys_norm, window)
    power = -fit_log_slope(t, y)
    passed = abs(power - theory) <= RATE_TOLERANCE * abs(theory)
    return RateVerdict(power, theory, report.verdict.value, bool(passed), tuple(window), int(t.size), True,
                       "fitted power of (T - t) within 20% of the claimed exponent")
