"""Run configuration, experiment orchestration and persistence.

A run starts from ``u(0, x) = u0(0, x) + g(x)`` with a perturbation ``g`` of
prescribed ``H^s`` size, evolves ``w`` in similarity time and writes

* ``ledger.csv``      energy ledger, one row per accepted step
* ``ledger.dat``      the same norms as whitespace columns for gnuplot
* ``checkpoint.csv``  final ``w`` with a self-describing header
* ``verdict.json``    regime, rate fits and exit reason
* ``manifest.json``   config hash, timings and a checksum of every file above
"""

from __future__ import annotations

import concurrent.futures as cf
import copy
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import DEFAULT_WINDOW, CannotFit, EnergyLedger, fit_rate, physical_rate_verdict
from .dynamics import CFLViolation, Dynamics, NumericalBlowup, SimState
from .frames import start_tau
from .helmholtz import DomainTooSmallError, Grid
from .model import PRESETS, ModelParams, Verdict, classify, load_preset, preset_key

SHAPES = ("gaussian", "sine-window", "random-smooth")
EXIT_REASONS = ("completed", "ceiling-hit", "cfl-abort", "nan-abort", "domain-abort")


class ConfigError(ValueError):
    pass


@dataclass
class PerturbationConfig:
    shape: str = "gaussian"
    amplitude: float = 1e-3
    center: float = 0.0
    width: float = 1.0
    seed: int = 0
    wavenumber: float = 2.0
    periods: float = 3.0


@dataclass
class IntegratorConfig:
    scheme: str = "upwind"
    dealias: bool = True
    dt_max: float = 0.05
    cfl_safety: float = 0.5
    tau_end: float = 4.0
    # stop once |w|_s exceeds ceiling * |w0|_s
    ceiling: float = 1e3


@dataclass
class OutputConfig:
    directory: str = "runs/default"
    formats: tuple[str, ...] = ("csv", "json", "dat")


@dataclass
class RunConfig:
    model: str = "camassa-holm"
    params: ModelParams | None = None
    half_width: float = 30.0
    n_points: int = 2049
    s: float = 3.0
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    window: tuple[float, float] = DEFAULT_WINDOW
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self) -> None:
        if self.params is None:
            if self.model == "custom":
                raise ConfigError("model = 'custom' needs explicit parameters")
            self.params = load_preset(self.model)
        self.validate()

    def validate(self) -> None:
        p = self.perturbation
        if p.shape not in SHAPES:
            raise ConfigError(f"perturbation shape must be one of {SHAPES}, got {p.shape!r}")
        if not p.amplitude > 0.0:
            raise ConfigError(f"perturbation amplitude sigma must be > 0, got {p.amplitude!r}")
        if not p.width > 0.0:
            raise ConfigError("perturbation width must be > 0")
        i = self.integrator
        if not i.tau_end > 0.0:
            raise ConfigError(f"tau_end must be > 0, got {i.tau_end!r}")
        if not (i.dt_max > 0.0 and i.cfl_safety > 0.0 and i.ceiling > 1.0):
            raise ConfigError("dt_max and cfl_safety must be > 0 and ceiling > 1")
        if not self.s > 2.0:
            raise ConfigError(f"dynamics runs need s > 2, got s = {self.s}")
        if self.params.alpha == 0.0:
            raise ConfigError("the perturbation dynamics need alpha != 0")
        if self.n_points < 16 or not self.half_width > 0.0:
            raise ConfigError("grid needs n_points >= 16 and half_width > 0")
        lo, hi = self.window
        if not hi > lo:
            raise ConfigError("analysis window must satisfy lo < hi")

    @property
    def grid(self) -> Grid:
        return Grid(self.half_width, self.n_points)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        d["window"] = list(self.window)
        d["outputs"]["formats"] = list(self.outputs.formats)
        return d

    def physics_dict(self) -> dict:
        """Everything that affects the numbers (not where they are written)."""
        d = self.to_dict()
        del d["outputs"]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        new = copy.deepcopy(self)
        for key, value in changes.items():
            setattr(new, key, value)
        new.validate()
        return new


def _params_from(model: str, T: float, table: dict) -> ModelParams:
    if model == "custom":
        missing = {"alpha", "c0", "b", "gamma", "c1", "c2"} - set(table)
        if missing:
            raise ConfigError(f"custom model is missing {sorted(missing)}")
        return ModelParams(T=T, **{k: float(table[k]) for k in ("alpha", "c0", "b", "gamma", "c1", "c2")})
    base = load_preset(model, T=T)
    if table:
        raise ConfigError("[params] overrides are only allowed with model = 'custom'")
    return base


def config_from_dict(data: dict) -> RunConfig:
    data = copy.deepcopy(data)
    model = str(data.pop("model", "camassa-holm"))
    if model != "custom":
        try:
            model = preset_key(model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    T = float(data.pop("T", 1.0))
    try:
        params = _params_from(model, T, data.pop("params", {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = data.pop("grid", {})
    pert = PerturbationConfig(**data.pop("perturbation", {}))
    integ = IntegratorConfig(**data.pop("integrator", {}))
    analysis = data.pop("analysis", {})
    out = data.pop("outputs", {})
    if "formats" in out:
        out["formats"] = tuple(out["formats"])
    s = float(data.pop("s", 3.0))
    if data:
        raise ConfigError(f"unknown config keys: {sorted(data)}")
    return RunConfig(
        model=model,
        params=params,
        half_width=float(grid.get("half_width", 30.0)),
        n_points=int(grid.get("n_points", 2049)),
        s=s,
        perturbation=pert,
        integrator=integ,
        window=tuple(analysis.get("window", DEFAULT_WINDOW)),
        outputs=OutputConfig(**out),
    )


def load_config(path: str | Path) -> RunConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


CONFIG_TEMPLATE = """\
# Run configuration.  Lengths are in units of the rescaled coordinate
# rho0 (equal to the physical x); times are similarity times tau.

model = "{model}"      # camassa-holm | degasperis-procesi | fornberg-whitham | kdv | custom
T = 1.0                   # blowup time; tau starts at -log(T)
s = 3.0                   # Sobolev order of every norm (s > 2)

# [params]                # only with model = "custom"
# alpha = 1.0
# c0 = 0.0
# b = 2.0
# gamma = 0.0
# c1 = 2.0
# c2 = 1.0

[grid]
half_width = 30.0         # L: the domain is [-L, L]
n_points = 2049           # N, including both ends

[perturbation]
shape = "gaussian"        # gaussian | sine-window | random-smooth
amplitude = 1e-3          # sigma: H^s norm of u(0, .) minus the exact profile
center = 0.0
width = 1.0
seed = 0                  # random-smooth only
wavenumber = 2.0          # sine-window only
periods = 3.0             # sine-window only

[integrator]
scheme = "upwind"         # upwind | weno3
dealias = true            # 2/3-rule filter on the quadratic terms
dt_max = 0.05
cfl_safety = 0.5          # dt <= cfl_safety * h / max|transport coefficient|
tau_end = 4.0
ceiling = 1000.0          # stop when |w|_s > ceiling * |w0|_s

[analysis]
window = [0.5, 4.0]       # tau window for rate fits

[outputs]
directory = "runs/{model}"
formats = ["csv", "json", "dat"]
"""


def config_template(model: str = "camassa-holm") -> str:
    return CONFIG_TEMPLATE.format(model=model)


# perturbations ----------------------------------------------------------------


def _shape(cfg: PerturbationConfig, x: np.ndarray) -> np.ndarray:
    z = (x - cfg.center) / cfg.width
    if cfg.shape == "gaussian":
        return np.exp(-z * z)
    if cfg.shape == "sine-window":
        k = cfg.wavenumber
        half = 0.5 * cfg.periods * 2.0 * np.pi / k
        r = (x - cfg.center) / half
        return np.sin(k * (x - cfg.center)) * np.exp(-(r**8))
    # random-smooth: seeded Fourier series under a gaussian envelope.  The
    # coefficients come from a counter-based generator and do not depend on
    # the grid, so refinement studies see the same function.
    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed)))
    n_modes = 8
    k = np.arange(1, n_modes + 1) * (0.5 / cfg.width)
    damp = np.exp(-((k * cfg.width) ** 2) / 4.0)
    a = rng.standard_normal(n_modes) * damp
    b = rng.standard_normal(n_modes) * damp
    phase = np.outer(x - cfg.center, k)
    series = np.cos(phase) @ a + np.sin(phase) @ b
    return series * np.exp(-0.25 * z * z)


def make_perturbation(config: RunConfig, dyn: Dynamics) -> np.ndarray:
    """``g(x)`` scaled so that ``|g|_{H^s} = sigma``."""
    g = _shape(config.perturbation, dyn.x)
    norm = dyn.ops.sobolev_norm(g, config.s)
    if norm == 0.0:
        raise ConfigError("perturbation shape vanishes on this grid")
    return g * (config.perturbation.amplitude / norm)


def initial_w(config: RunConfig, dyn: Dynamics, g: np.ndarray) -> np.ndarray:
    """``T (g - alpha^2 g'')``: the Helmholtz image of the initial perturbation.

    Same as :func:`bblowup.frames.build_initial_w` on ``u0(0, .) + g`` but
    without the cancellation of adding and removing the exact profile.
    """
    return config.params.T * dyn.ops.apply_forward(g)


# runs ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    started: float
    finished: float
    exit_reason: str
    files: dict[str, str]
    environment: dict[str, str]
    notes: list[str] = field(default_factory=list)
    passed: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class RunResult:
    config: RunConfig
    ledger: EnergyLedger
    state: SimState
    exit_reason: str
    verdict: dict
    manifest: RunManifest | None = None


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def _checkpoint_text(config: RunConfig, state: SimState) -> str:
    lines = [
        f"# config_hash={config.config_hash()}",
        "# frame=rescaled-similarity (rho0), role=w",
        f"# tau={state.tau!r} step={state.step_count}",
        f"# half_width={config.half_width!r} n_points={config.n_points}",
        "rho0,w",
    ]
    x = config.grid.nodes
    lines += [f"{a!r},{b!r}" for a, b in zip(x.tolist(), state.w.tolist())]
    return "\n".join(lines) + "\n"


def read_checkpoint(path: str | Path) -> tuple[dict, np.ndarray, np.ndarray]:
    header: dict[str, str] = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            for item in line[1:].replace(",", " ").split():
                if "=" in item:
                    key, value = item.split("=", 1)
                    header[key] = value
        elif line and line[0] not in "rw":
            rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows)
    return header, arr[:, 0], arr[:, 1]


def _plot_text(config: RunConfig, ledger: EnergyLedger) -> str:
    lines = [
        f"# config_hash={config.config_hash()}",
        f"# tau  |w|_H{config.s:g}  |w|_H{config.s - 1:g}  |u-u0|_H{config.s:g}",
    ]
    for t, a, b, c in zip(ledger.tau, ledger.hs_norm, ledger.hs1_norm, ledger.phys_norm):
        lines.append(f"{_fmt(t)} {_fmt(a)} {_fmt(b)} {_fmt(c)}")
    return "\n".join(lines) + "\n"


def _evaluate(config: RunConfig, ledger: EnergyLedger, exit_reason: str) -> dict:
    report = classify(config.params)
    verdict: dict = {
        "model": config.model,
        "params": config.params.as_dict(),
        "ratio_a": report.ratio_a,
        "ratio_b": report.ratio_b,
        "regime": report.verdict.value,
        "exit_reason": exit_reason,
        "s": config.s,
        "tau_final": float(ledger.tau[-1]) if len(ledger) else 0.0,
    }
    hs = ledger.hs_norm
    if len(ledger):
        verdict["hs_initial"] = float(hs[0])
        verdict["hs_final"] = float(hs[-1])
        verdict["max_growth"] = float(np.max(hs) / hs[0]) if hs[0] > 0 else math.nan
    lo, hi = config.window
    try:
        rate = fit_rate(ledger, (lo, hi))
    except CannotFit as exc:
        # a ceiling hit may end the run before the window fills
        try:
            rate = fit_rate(ledger, (0.0, hi))
            verdict["rate_note"] = f"fitted over [0, {hi}] because: {exc}"
        except CannotFit as exc2:
            rate = None
            verdict["rate_note"] = str(exc2)
    verdict["rate"] = rate.as_dict() if rate else None
    if report.verdict is Verdict.STABLE:
        mono, worst = ledger.is_nonincreasing(lo)
        verdict["nonincreasing_after_window_start"] = mono
        verdict["largest_relative_increase"] = worst
        try:
            verdict["physical"] = physical_rate_verdict(config.params, ledger, (lo, hi)).as_dict()
        except CannotFit as exc:
            verdict["physical"] = None
            verdict["physical_note"] = str(exc)
        if config.s <= 3.0:
            verdict["physical_note"] = "power-law claim assumes s > 3"
    verdict["cubic_constant"] = ledger.cubic_constant()
    if report.verdict is Verdict.STABLE:
        passed = bool(rate and rate.passed) and exit_reason == "completed"
    elif report.verdict is Verdict.UNSTABLE:
        passed = exit_reason == "ceiling-hit" or bool(rate and rate.passed)
    else:
        passed = exit_reason in ("completed", "ceiling-hit")
    verdict["passed"] = passed
    return verdict


def simulate(config: RunConfig, record: bool = True, w0: np.ndarray | None = None) -> RunResult:
    """Integrate ``config`` in memory; nothing is written."""
    dyn = Dynamics(config.params, config.grid, scheme=config.integrator.scheme, dealias=config.integrator.dealias)
    if w0 is None:
        w0 = initial_w(config, dyn, make_perturbation(config, dyn))
    state = SimState(np.asarray(w0, dtype=float), start_tau(config.params.T), config.params)
    ledger = EnergyLedger(config.params, config.s, dyn.ops)
    if record:
        ledger.record(state)
    integ = config.integrator
    tau_end = state.tau + integ.tau_end
    hs0 = dyn.ops.sobolev_norm(state.w, config.s, check=False)
    ceiling = integ.ceiling * hs0 if hs0 > 0.0 else math.inf
    exit_reason = "completed"
    try:
        while state.tau < tau_end - 1e-12:
            dt = dyn.next_dt(state, integ.cfl_safety, integ.dt_max, tau_end)
            state = dyn.step(state, dt, integ.cfl_safety)
            if record:
                ledger.record(state)
            if dyn.ops.sobolev_norm(state.w, config.s, check=False) >= ceiling:
                exit_reason = "ceiling-hit"
                break
    except CFLViolation:
        exit_reason = "cfl-abort"
    except NumericalBlowup as exc:
        state = exc.last_good
        exit_reason = "nan-abort"
    except DomainTooSmallError:
        exit_reason = "domain-abort"
    verdict = _evaluate(config, ledger, exit_reason) if record and len(ledger) else {"exit_reason": exit_reason}
    return RunResult(config, ledger, state, exit_reason, verdict)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(config: RunConfig, directory: str | Path | None = None) -> RunResult:
    """Execute one run and persist ledger, checkpoint, verdict and manifest."""
    config.validate()
    out = Path(directory or config.outputs.directory)
    started = time.time()
    result = simulate(config)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    formats = set(config.outputs.formats)
    if "csv" in formats:
        (out / "ledger.csv").write_text(result.ledger.to_csv())
        (out / "checkpoint.csv").write_text(_checkpoint_text(config, result.state))
        written += [out / "ledger.csv", out / "checkpoint.csv"]
    if "dat" in formats:
        (out / "ledger.dat").write_text(_plot_text(config, result.ledger))
        written.append(out / "ledger.dat")
    if "json" in formats:
        (out / "verdict.json").write_text(json.dumps(result.verdict, indent=2, sort_keys=True, default=float))
        written.append(out / "verdict.json")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    written.append(out / "config.json")
    notes = [f"sigma = {config.perturbation.amplitude:g} (smallness threshold is not quantified)"]
    if config.params.T != 1.0:
        notes.append(f"T = {config.params.T:g}: similarity time starts at tau = {start_tau(config.params.T):.6g}")
    manifest = RunManifest(
        config_hash=config.config_hash(),
        code_version=__version__,
        started=started,
        finished=time.time(),
        exit_reason=result.exit_reason,
        files={p.name: _sha256(p) for p in written},
        environment={
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "platform": platform.platform(),
        },
        notes=notes,
        passed=bool(result.verdict.get("passed", False)),
    )
    (out / "manifest.json").write_text(manifest.to_json())
    result.manifest = manifest
    return result


# sweeps -------------------------------------------------------------------------


def _sweep_point(base: RunConfig, overrides: dict, directory: str | None) -> dict:
    row = {k: overrides.get(k, getattr(base.params, k)) for k in ("b", "c1", "c2")}
    try:
        params = base.params.with_(**{k: float(v) for k, v in overrides.items()})
        report = classify(params)
        row.update(ratio_a=report.ratio_a, ratio_b=report.ratio_b, predicted=report.verdict.value)
        cfg = base.replace(params=params, model="custom")
        result = run(cfg, directory) if directory else simulate(cfg)
        rate = result.verdict.get("rate")
        fitted = rate["fitted_rate"] if rate else math.nan
        row.update(
            fitted_rate=fitted,
            empirical="growing" if fitted > 0 else "decaying" if fitted < 0 else "undetermined",
            exit_reason=result.exit_reason,
            error="",
        )
    except (ValueError, ArithmeticError) as exc:
        row.update(
            ratio_a=row.get("ratio_a", math.nan), ratio_b=row.get("ratio_b", math.nan),
            predicted=row.get("predicted", "rejected"), fitted_rate=math.nan, empirical="failed",
            exit_reason="rejected", error=str(exc),
        )
    return row


SWEEP_COLUMNS = ("b", "c1", "c2", "ratio_a", "ratio_b", "predicted", "fitted_rate", "empirical", "exit_reason", "error")


def sweep(base: RunConfig, points: list[dict], directory: str | Path | None = None, workers: int = 1) -> list[dict]:
    """One independent run per parameter override; failures are recorded per point."""
    dirs = [str(Path(directory) / f"point_{i:03d}") if directory else None for i in range(len(points))]
    if workers <= 1:
        rows = [_sweep_point(base, p, d) for p, d in zip(points, dirs)]
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [base] * len(points), points, dirs))
    if directory:
        Path(directory).mkdir(parents=True, exist_ok=True)
        (Path(directory) / "regime_map.csv").write_text(table_csv(rows, SWEEP_COLUMNS))
    return rows


def table_csv(rows: list[dict], columns) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) if isinstance(r[c], float) else str(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


# refinement studies -------------------------------------------------------------------


def _order(values: list[float]) -> list[float]:
    out = []
    for a, b, c in zip(values, values[1:], values[2:]):
        d1, d2 = abs(a - b), abs(b - c)
        out.append(math.log2(d1 / d2) if d1 > 0 and d2 > 0 else math.nan)
    return out


def refine(config: RunConfig, levels: int = 3, max_points: int = 2**14 + 1, zero: bool = False) -> dict:
    """Halve ``h`` (and with it the CFL step) ``levels - 1`` times.

    Returns a table with the final ``|w|_s``, the fitted rate per level, and
    observed orders from successive differences.  ``zero`` starts every
    level from ``w0 = 0`` instead of the configured perturbation.
    """
    if levels < 2:
        raise ValueError("a refinement study needs at least two levels")
    rows, note = [], ""
    for k in range(levels):
        n = (config.n_points - 1) * 2**k + 1
        if n > max_points:
            note = f"stopped before level {k}: {n} points exceeds the budget of {max_points}"
            break
        cfg = config.replace(n_points=n, integrator=_halved(config.integrator, k))
        res = simulate(cfg, w0=np.zeros(n) if zero else None)
        rate = res.verdict.get("rate") if res.verdict else None
        rows.append({
            "level": k,
            "n_points": n,
            "hs_final": float(res.ledger.hs_norm[-1]),
            "fitted_rate": rate["fitted_rate"] if rate else math.nan,
            "exit_reason": res.exit_reason,
            "max_abs_w": float(np.max(np.abs(res.state.w))),
        })
    hs_orders = _order([r["hs_final"] for r in rows])
    rate_orders = _order([r["fitted_rate"] for r in rows])
    rates = [r["fitted_rate"] for r in rows]
    spread = (max(rates) - min(rates)) / abs(np.mean(rates)) if rows and np.mean(rates) != 0 else math.nan
    return {"rows": rows, "hs_orders": hs_orders, "rate_orders": rate_orders, "rate_spread": spread, "note": note}


def _halved(integ: IntegratorConfig, k: int) -> IntegratorConfig:
    new = copy.deepcopy(integ)
    new.dt_max = integ.dt_max / 2**k
    return new


def temporal_study(config: RunConfig, tau_end: float = 1.0, levels: int = 3, safety: float = 1.0) -> dict:
    """RK4 step-halving on a fixed grid over ``[tau0, tau0 + tau_end]``.

    The coarsest step is the largest ``tau_end / n`` under ``safety`` times
    the CFL limit; the observed order is ``log2`` of successive max-norm
    differences of ``w(tau_end)``.  The ladder starts at the full limit
    because at fine grids the half-limit differences already sit at the
    float64 rounding floor.
    """
    dyn = Dynamics(config.params, config.grid, scheme=config.integrator.scheme, dealias=config.integrator.dealias)
    w0 = initial_w(config, dyn, make_perturbation(config, dyn))
    tau0 = start_tau(config.params.T)
    limit = min(dyn.cfl_limit(tau0, safety), config.integrator.dt_max)
    n0 = int(math.ceil(tau_end / limit))
    finals, steps = [], []
    for k in range(levels):
        n = n0 * 2**k
        dt = tau_end / n
        state = SimState(w0, tau0, config.params)
        for i in range(n):
            state = dyn.step(state, dt, safety)
        finals.append(state.w)
        steps.append(dt)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    orders = [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(diffs, diffs[1:])]
    return {"dt": steps, "diffs": diffs, "orders": orders, "w_scale": float(np.max(np.abs(finals[-1])))}


def preset_names() -> list[str]:
    return sorted(PRESETS)
