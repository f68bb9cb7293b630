import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bblowup.helmholtz import (
    DomainTooSmallError,
    Field,
    Grid,
    GridMismatchError,
    HelmholtzOps,
    d1_centered,
    dealias,
    kernel,
    kernel_self_convolution,
    sobolev_norm,
)

from conftest import gaussian


def test_grid_basics():
    g = Grid(10.0, 101)
    assert g.spacing == pytest.approx(0.2)
    assert g.nodes[0] == -10.0 and g.nodes[-1] == 10.0
    with pytest.raises(ValueError):
        Grid(10.0, 8)
    with pytest.raises(ValueError):
        Grid(0.0, 101)


def test_field_rejects_nan_and_wrong_length():
    g = Grid(5.0, 33)
    with pytest.raises(ValueError):
        Field(g, np.full(33, np.nan))
    with pytest.raises(GridMismatchError):
        Field(g, np.zeros(32))


def test_kernel_unit_mass(ops):
    assert ops.kernel_mass() == pytest.approx(1.0, abs=1e-3)


def test_gaussian_norms_closed_form():
    # |e^{-x^2}|_{L2}^2 = sqrt(pi/2); |.|_{H1}^2 adds |g'|^2 = sqrt(pi/2)
    grid = Grid(12.0, 1025)
    g = gaussian(grid.nodes)
    h = grid.spacing
    assert sobolev_norm(g, h, 0.0) ** 2 == pytest.approx(np.sqrt(np.pi / 2), rel=1e-10)
    assert sobolev_norm(g, h, 1.0) ** 2 == pytest.approx(2 * np.sqrt(np.pi / 2), rel=1e-10)
    # alpha-weighted: (1 + 4 xi^2) -> |g|^2 + 4 |g'|^2
    assert sobolev_norm(g, h, 1.0, alpha=2.0) ** 2 == pytest.approx(5 * np.sqrt(np.pi / 2), rel=1e-10)


def test_norm_monotone_in_s(ops, grid):
    g = gaussian(grid.nodes, 0.7)
    norms = [ops.sobolev_norm(g, s) for s in (0, 1, 2, 3)]
    assert np.all(np.diff(norms) > 0)


def test_roundtrip(ops, grid):
    g = gaussian(grid.nodes, 1.3, 0.4)
    back = ops.apply_inverse(ops.apply_forward(g))
    assert np.max(np.abs(back - g)) <= 1e-12 * np.max(np.abs(g))


@pytest.mark.parametrize("method", ["convolve_kernel", "apply_inverse"])
def test_inverse_of_kernel_oracle(method):
    # Lambda^{-2} p = p * p, which has a closed form
    errs = []
    for n in (1025, 2049, 4097):
        grid = Grid(30.0, n)
        ops = HelmholtzOps(1.0, grid)
        p = kernel(grid.nodes, 1.0)
        approx = getattr(ops, method)(p, check=False)
        errs.append(np.max(np.abs(approx - kernel_self_convolution(grid.nodes, 1.0))))
    assert errs[-1] < 2e-5
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)


def test_tridiagonal_matches_quadrature_second_order():
    errs = []
    for n in (513, 1025, 2049):
        grid = Grid(20.0, n)
        ops = HelmholtzOps(1.0, grid)
        w = gaussian(grid.nodes, 1.5)
        errs.append(np.max(np.abs(ops.apply_inverse(w) - ops.convolve_kernel(w))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_domain_too_small():
    grid = Grid(3.0, 129)
    ops = HelmholtzOps(1.0, grid)
    with pytest.raises(DomainTooSmallError) as exc:
        ops.apply_inverse(gaussian(grid.nodes, 2.0))
    assert exc.value.suggested_half_width > 3.0


def test_grid_mismatch(ops):
    with pytest.raises(GridMismatchError):
        ops.apply_inverse(np.zeros(10))


def test_inner_product_symmetry_and_norm(ops, grid):
    f = gaussian(grid.nodes, 1.0, 0.5)
    g = gaussian(grid.nodes, 0.8, -0.3)
    assert ops.inner(f, g, 2.0) == pytest.approx(ops.inner(g, f, 2.0))
    assert ops.inner(f, f, 2.0) == pytest.approx(ops.sobolev_norm(f, 2.0) ** 2)


def test_apply_power_shifts_norm_order(ops, grid):
    g = gaussian(grid.nodes)
    lg = ops.apply_power(g, 2.0)
    assert ops.sobolev_norm(lg, 1.0, check=False) == pytest.approx(ops.sobolev_norm(g, 3.0), rel=1e-6)


def test_dealias_kills_high_modes_keeps_low():
    n, h = 256, 0.1
    x = np.arange(n) * h
    window = np.exp(-(((x - x.mean()) / 2.0) ** 2))
    low = window * np.cos(0.5 * x)
    high = window * np.cos(0.95 * np.pi / h * x)
    assert np.max(np.abs(dealias(low, h) - low)) < 1e-10
    assert np.max(np.abs(dealias(high, h))) < 1e-3 * np.max(np.abs(high))


def test_centered_derivative_second_order():
    errs = []
    for n in (201, 401, 801):
        x = np.linspace(-10, 10, n)
        h = x[1] - x[0]
        errs.append(np.max(np.abs(d1_centered(gaussian(x), h) + 2 * x * gaussian(x))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


@settings(max_examples=25, deadline=None)
@given(
    center=st.floats(-3, 3),
    width=st.floats(0.8, 3.0),
    amp=st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3),
)
def test_roundtrip_property(center, width, amp):
    grid = Grid(25.0, 257)
    ops = HelmholtzOps(1.0, grid)
    g = amp * gaussian(grid.nodes, width, center)
    back = ops.apply_forward(ops.apply_inverse(g))
    assert np.max(np.abs(back - g)) <= 1e-10 * np.max(np.abs(g))


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0, 4), scale=st.floats(-10, 10).filter(lambda a: abs(a) > 1e-6))
def test_norm_homogeneity(s, scale):
    x = np.linspace(-10, 10, 257)
    g = gaussian(x)
    h = x[1] - x[0]
    assert sobolev_norm(scale * g, h, s) == pytest.approx(abs(scale) * sobolev_norm(g, h, s), rel=1e-12)
