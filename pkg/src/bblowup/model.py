"""Parameters of the generalized b-equation and the stability-regime classifier.

The equation family is

    u_t - a^2 u_txx + c0 u_x + (b+1) u u_x + G u_xxx = a^2 (c1 u_x u_xx + c2 u u_xxx)

with dispersion length ``alpha`` (a), linear speed ``c0``, convection
parameter ``b``, third-order dispersion ``gamma`` (G) and the two extra
nonlinear weights ``c1`` and ``c2``.  ``T`` is the blowup time of the
self-similar solution.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace

# relative tolerance used to decide that a regime numerator is exactly zero
ZERO_RTOL = 1e-12


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    UNCLASSIFIED = "Unclassified"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    c0: float
    b: float
    gamma: float
    c1: float
    c2: float
    T: float = 1.0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value!r}")
        if self.b == -1.0:
            raise ValueError("b = -1 is excluded: the exact solution divides by b+1")
        if self.T <= 0.0:
            raise ValueError(f"blowup time T must be positive, got {self.T!r}")

    @property
    def bp1(self) -> float:
        return self.b + 1.0

    def with_(self, **changes: float) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


PRESETS: dict[str, ModelParams] = {
    "camassa-holm": ModelParams(alpha=1.0, c0=0.0, b=2.0, gamma=0.0, c1=2.0, c2=1.0),
    "degasperis-procesi": ModelParams(alpha=1.0, c0=0.0, b=3.0, gamma=0.0, c1=3.0, c2=1.0),
    "fornberg-whitham": ModelParams(alpha=1.0, c0=-1.0, b=0.5, gamma=0.0, c1=4.5, c2=1.5),
    # c1, c2 multiply alpha^2 and are irrelevant for KdV
    "kdv": ModelParams(alpha=0.0, c0=0.0, b=2.0, gamma=1.0, c1=0.0, c2=0.0),
}

_ALIASES = {
    "camassaholm": "camassa-holm",
    "ch": "camassa-holm",
    "degasperisprocesi": "degasperis-procesi",
    "dp": "degasperis-procesi",
    "fornbergwhitham": "fornberg-whitham",
    "fw": "fornberg-whitham",
}


def preset_key(name: str) -> str:
    key = name.strip().lower().replace("_", "-").replace(" ", "-")
    key = _ALIASES.get(key.replace("-", ""), key)
    if key not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return key


def load_preset(name: str, T: float = 1.0) -> ModelParams:
    """Return the parameter tuple of a named preset.

    Accepts the CLI spelling (``"camassa-holm"``), the CamelCase name
    (``"CamassaHolm"``) or the usual abbreviation (``"CH"``).
    """
    return replace(PRESETS[preset_key(name)], T=T)


@dataclass(frozen=True)
class RegimeReport:
    ratio_a: float
    ratio_b: float
    numerator_a: float
    verdict: Verdict

    @property
    def decay_exponent(self) -> float:
        """Exponential decay rate claimed for ``||w||_{H^s}`` in the stable regime."""
        return self.ratio_a

    @property
    def physical_exponent(self) -> float:
        """Claimed power of ``(T - t)`` for ``||u - u0||_{H^s}``."""
        return self.ratio_a + 1.0


def regime_ratios(params: ModelParams) -> tuple[float, float, float]:
    """Return ``(ratio_a, ratio_b, numerator_a)`` for ``params``."""
    bp1 = params.bp1
    num_a = 2.0 * bp1 + params.c2 - 2.0 * params.c1
    num_b = 2.0 * params.c1 + 1.0 - params.c2
    return num_a / bp1, num_b / bp1, num_a


def _is_zero(value: float, *scale: float) -> bool:
    ref = max([1.0] + [abs(s) for s in scale])
    return abs(value) <= ZERO_RTOL * ref


def classify(params: ModelParams) -> RegimeReport:
    ratio_a, ratio_b, num_a = regime_ratios(params)
    if params.alpha == 0.0:
        verdict = Verdict.NOT_APPLICABLE
    else:
        bp1, c1, c2 = params.bp1, params.c1, params.c2
        num_a_zero = _is_zero(num_a, 2.0 * bp1, c2, 2.0 * c1)
        num_b = 2.0 * c1 + 1.0 - c2
        num_b_zero = _is_zero(num_b, 2.0 * c1, 1.0, c2)
        a_pos = ratio_a > 0.0 and not num_a_zero
        a_neg = ratio_a < 0.0 and not num_a_zero
        b_pos = ratio_b > 0.0 and not num_b_zero
        b_neg = ratio_b < 0.0 and not num_b_zero
        if a_pos and b_pos:
            verdict = Verdict.STABLE
        elif a_neg or (num_a_zero and b_neg):
            verdict = Verdict.UNSTABLE
        else:
            verdict = Verdict.UNCLASSIFIED
    if num_a != 0.0 and _is_zero(num_a, 2.0 * params.bp1, params.c2, 2.0 * params.c1):
        num_a = 0.0
        ratio_a = 0.0
    return RegimeReport(ratio_a=ratio_a, ratio_b=ratio_b, numerator_a=num_a, verdict=verdict)
