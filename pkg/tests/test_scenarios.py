import hashlib
import json

import numpy as np
import pytest

from bblowup.dynamics import Dynamics
from bblowup.scenarios import (
    ConfigError,
    IntegratorConfig,
    OutputConfig,
    PerturbationConfig,
    RunConfig,
    config_from_dict,
    config_template,
    make_perturbation,
    read_checkpoint,
    refine,
    run,
    simulate,
    sweep,
    temporal_study,
)

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def small(model="camassa-holm", **kw):
    integ = IntegratorConfig(tau_end=kw.pop("tau_end", 1.0), ceiling=kw.pop("ceiling", 1e3))
    return RunConfig(model=model, n_points=kw.pop("n_points", 257), half_width=30.0, integrator=integ,
                     window=(0.2, 1.0), **kw)


def test_template_roundtrip():
    cfg = config_from_dict(tomllib.loads(config_template("degasperis-procesi")))
    assert cfg.model == "degasperis-procesi"
    assert cfg.physics_dict() == RunConfig(model="degasperis-procesi").physics_dict()


def test_aliases_and_custom():
    assert config_from_dict({"model": "CH"}).model == "camassa-holm"
    cfg = config_from_dict({"model": "custom", "params": dict(alpha=1, c0=0, b=1, gamma=0, c1=1, c2=1)})
    assert cfg.params.b == 1.0


@pytest.mark.parametrize(
    "data",
    [
        {"perturbation": {"amplitude": 0.0}},
        {"perturbation": {"shape": "square"}},
        {"integrator": {"tau_end": -1.0}},
        {"s": 2.0},
        {"model": "custom", "params": {"alpha": 1.0}},
        {"model": "custom", "params": dict(alpha=1, c0=0, b=-1, gamma=0, c1=1, c2=1)},
        {"model": "kdv"},
        {"model": "ch", "params": {"b": 3.0}},
        {"colour": "blue"},
        {"model": "nope"},
    ],
)
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_invalid_config_writes_nothing(tmp_path):
    cfg = small()
    cfg.perturbation.amplitude = -1.0
    with pytest.raises(ConfigError):
        run(cfg, tmp_path / "out")
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("shape", ["gaussian", "sine-window", "random-smooth"])
def test_perturbation_has_requested_size(shape):
    cfg = small(perturbation=PerturbationConfig(shape=shape, amplitude=2e-3, seed=4))
    dyn = Dynamics(cfg.params, cfg.grid)
    g = make_perturbation(cfg, dyn)
    assert dyn.ops.sobolev_norm(g, 3.0) == pytest.approx(2e-3, rel=1e-12)


def test_random_smooth_is_grid_independent_and_seeded():
    def raw(n, seed):
        cfg = small(n_points=n, perturbation=PerturbationConfig(shape="random-smooth", seed=seed))
        from bblowup.scenarios import _shape

        return _shape(cfg.perturbation, cfg.grid.nodes)

    coarse, fine = raw(257, 3), raw(513, 3)
    assert np.array_equal(coarse, fine[::2]) or np.allclose(coarse, fine[::2], rtol=0, atol=1e-15)
    assert not np.allclose(raw(257, 3), raw(257, 4))


def test_run_outputs_and_manifest(tmp_path):
    res = run(small(), tmp_path / "a")
    out = tmp_path / "a"
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_reason"] == res.exit_reason == "completed"
    assert set(man["files"]) >= {"ledger.csv", "checkpoint.csv", "verdict.json", "ledger.dat", "config.json"}
    for name, digest in man["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert man["config_hash"] == res.config.config_hash()
    header, x, w = read_checkpoint(out / "checkpoint.csv")
    assert header["config_hash"] == man["config_hash"]
    assert np.array_equal(w, res.state.w)
    assert np.array_equal(x, res.config.grid.nodes)
    assert len((out / "ledger.dat").read_text().splitlines()) == len(res.ledger) + 2


def test_rerun_is_bit_identical(tmp_path):
    a = run(small(), tmp_path / "a").manifest
    b = run(small(), tmp_path / "b").manifest
    assert a.files == b.files


def test_unstable_run_hits_ceiling():
    res = simulate(small("fw", tau_end=4.0, ceiling=100.0))
    assert res.exit_reason == "ceiling-hit"
    assert res.verdict["regime"] == "Unstable"
    assert res.verdict["passed"]


def test_domain_abort_is_reported():
    cfg = RunConfig(model="fw", n_points=129, half_width=6.0,
                    perturbation=PerturbationConfig(width=1.0),
                    integrator=IntegratorConfig(tau_end=2.0))
    res = simulate(cfg)
    assert res.exit_reason == "domain-abort"
    assert not res.verdict["passed"]


def test_sweep_records_failures_per_point(tmp_path):
    base = small(tau_end=0.5)
    rows = sweep(base, [{"b": 2.0}, {"b": -1.0}, {"c1": 1.0}], tmp_path)
    assert [r["exit_reason"] for r in rows][1] == "rejected"
    assert rows[0]["predicted"] == "Stable" and rows[0]["error"] == ""
    assert rows[2]["error"] == ""
    table = (tmp_path / "regime_map.csv").read_text().splitlines()
    assert table[0].startswith("b,c1,c2,ratio_a,ratio_b,predicted,fitted_rate,empirical")
    assert len(table) == 4


def test_sweep_serial_equals_parallel():
    base = small(tau_end=0.5)
    points = [{"c1": 1.0}, {"c1": 2.0}]
    assert sweep(base, points) == sweep(base, points, workers=2)


def test_refine_zero_stays_zero():
    table = refine(small(tau_end=0.3), levels=2, zero=True)
    assert all(r["max_abs_w"] == 0.0 for r in table["rows"])


def test_refine_budget_note():
    table = refine(small(tau_end=0.3), levels=3, max_points=600)
    assert len(table["rows"]) == 2 and "budget" in table["note"]


def test_refine_needs_two_levels():
    with pytest.raises(ValueError):
        refine(small(), levels=1)


def test_temporal_study_small_grid():
    cfg = RunConfig(model="ch", n_points=129, half_width=20.0,
                    perturbation=PerturbationConfig(amplitude=1e-2))
    study = temporal_study(cfg, tau_end=0.5)
    assert study["orders"][0] == pytest.approx(4.0, abs=0.3)


def test_output_formats_respected(tmp_path):
    cfg = small(outputs=OutputConfig(directory=str(tmp_path / "j"), formats=("json",)))
    run(cfg)
    names = {p.name for p in (tmp_path / "j").iterdir()}
    assert names == {"verdict.json", "config.json", "manifest.json"}
