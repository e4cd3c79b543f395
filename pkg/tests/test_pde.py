import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2bnet.grids import line1d, make_quadrature, rect2d, sample_on_grid
from c2bnet.numkit import Rng
from c2bnet.pde import (
    EllipticParams,
    HeatIC,
    RteSigma,
    SampleError,
    generate_dataset,
    get_problem,
    sample_elliptic_kappa,
    sample_heat_ic,
    sample_rte_sigma,
    solve_elliptic,
    solve_heat,
    solve_rte,
    with_output_grid,
)
from c2bnet.pde import dataset as dataset_mod
from c2bnet.pde import elliptic, rte
from c2bnet.pde.problems import PROBLEMS, Problem
from c2bnet.harness.verify import elliptic_manufactured


# --- elliptic ---------------------------------------------------------------


def test_kappa_zero_weights_is_offset():
    k = EllipticParams(np.zeros(4)).kappa()
    assert np.allclose(k(np.array([0.0, 0.3]), np.array([0.7, 1.0])), 4.1)


def test_kappa_origin():
    assert EllipticParams(np.array([1.0, 0, 0, 0])).kappa()(0.0, 0.0) == pytest.approx(4.1)


def test_kappa_lower_bound():
    g = rect2d(101, 101, "endpoints")
    root = Rng(4)
    for i in range(50):
        _, kappa = sample_elliptic_kappa(root.split(i))
        assert sample_on_grid(kappa, g).values.min() >= 4.1 - 2 * math.sqrt(2)


def test_elliptic_params_validation():
    with pytest.raises(ValueError):
        EllipticParams(np.array([1.5, 0, 0, 0]))
    with pytest.raises(ValueError):
        EllipticParams(np.zeros(3))


def test_elliptic_manufactured_and_order():
    e32, e64 = elliptic_manufactured(32), elliptic_manufactured(64)
    assert e64 < 1e-2
    assert 4 * 0.8 <= e32 / e64 <= 4 * 1.2


def test_elliptic_zero_source():
    u = solve_elliptic(lambda x, y: np.ones_like(x), 0.0, elliptic.solve_grid(16))
    assert np.array_equal(u.values, np.zeros(17 * 17))


def test_elliptic_rejects_nonpositive_kappa():
    with pytest.raises(ValueError):
        solve_elliptic(lambda x, y: x - 0.5, 1.0, elliptic.solve_grid(8))


def test_elliptic_solution_nonnegative_and_restricted():
    _, kappa = sample_elliptic_kappa(Rng(3))
    u = solve_elliptic(kappa, 1.0)
    assert u.values.min() >= 0.0
    coarse = elliptic.restrict_nearest(u, rect2d(10, 10, "cell"))
    assert coarse.shape == (100,) and coarse.min() > 0.0


# --- heat -------------------------------------------------------------------


def test_heat_ic_examples():
    assert np.array_equal(HeatIC(np.zeros(3), np.zeros(3)).u0()(np.linspace(0, 2, 5)), np.zeros(5))
    assert HeatIC(np.array([1.0, 0, 0]), np.zeros(3)).u0()(0.5) == pytest.approx(1.0)
    ic, u0 = sample_heat_ic(Rng(8))
    assert u0(0.0) == pytest.approx(ic.p.sum(), abs=1e-14)
    assert np.all(np.abs(np.concatenate([ic.w, ic.p])) <= 1.0)


def test_heat_sine_mode_decay():
    u = solve_heat(lambda x: np.sin(np.pi * x), T=0.01)
    x = u.grid.nodes()
    assert np.max(np.abs(u.values - math.exp(-np.pi**2 * 0.01) * np.sin(np.pi * x))) < 1e-5


def test_heat_constant_is_steady():
    u = solve_heat(lambda x: np.full_like(x, 0.7), T=0.01)
    assert np.max(np.abs(u.values - 0.7)) < 1e-14


def test_heat_mode_ratio():
    x = line1d(0, 2, 257).nodes()
    one = solve_heat(lambda x: np.sin(np.pi * x)).values
    two = solve_heat(lambda x: np.sin(2 * np.pi * x)).values
    i1, i2 = 64, 32  # peaks of sin(pi x) at x=0.5 and sin(2 pi x) at x=0.25
    assert np.isclose(x[i1], 0.5) and np.isclose(x[i2], 0.25)
    assert two[i2] / one[i1] == pytest.approx(math.exp(-3 * np.pi**2 * 0.01), rel=1e-4)


def test_heat_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        solve_heat(lambda x: x, T=0.0)


# --- radiative transfer -----------------------------------------------------


def test_channel_area():
    s = RteSigma(np.full(5, 0.3), np.full(5, 0.02))
    r = s.rectangles()
    assert np.sum((r[:, 1] - r[:, 0]) * (r[:, 3] - r[:, 2])) == pytest.approx(0.03, abs=1e-15)


def test_sigma_background_and_channel():
    s = RteSigma(np.full(5, 0.5), np.full(5, 0.04))
    sig = s.sigma()
    assert sig(0.9, 0.2) == pytest.approx(0.1)
    assert sig(0.2, 0.3) == pytest.approx(1.0)


def test_cell_average_matches_fine_sampling():
    s, sig = sample_rte_sigma(Rng(6))
    avg = s.cell_average(rect2d(10, 10, "cell")).reshape(10, 10)
    fine = sample_on_grid(sig, rect2d(1000, 1000, "cell")).values.reshape(10, 100, 10, 100).mean(axis=(1, 3))
    assert np.max(np.abs(avg - fine)) < 5e-3
    assert abs(avg.mean() - (0.1 + 0.9 * np.sum(s.lengths * s.widths))) < 1e-12


def test_rte_parameter_count_and_bounds():
    s, _ = sample_rte_sigma(Rng(3))
    assert s.lengths.size + s.widths.size == get_problem("rte").intrinsic_dim == 10
    assert np.all((0.3 <= s.lengths) & (s.lengths <= 1.0))
    assert np.all((0.02 <= s.widths) & (s.widths <= 0.08))


def test_rte_constant_inflow_without_scattering():
    sides = dict.fromkeys(("left", "right", "bottom", "top"), 0.6)
    intensity, _ = solve_rte(np.zeros((12, 12)), inflow=sides)
    assert np.max(np.abs(intensity - 0.6)) < 1e-12


def test_rte_isotropic_fixed_point_with_scattering():
    sides = dict.fromkeys(("left", "right", "bottom", "top"), 1.0)
    intensity, _ = solve_rte(np.full((10, 10), 0.8), inflow=sides)
    assert np.max(np.abs(intensity - 1.0)) < 1e-9


def test_rte_left_inflow_maximum_principle():
    intensity, _ = solve_rte(np.zeros((16, 16)), i_in=1.0)
    d0 = intensity[0]  # theta = pi/4, travelling right and up
    assert d0.min() >= 0.0 and d0.max() <= 1.0
    assert np.all(np.diff(d0, axis=1) <= 1e-15)
    # directions with negative x-velocity see no light from the left
    assert np.max(np.abs(intensity[1:3])) < 1e-15


def test_rte_intensity_bounds_with_channels():
    s, _ = sample_rte_sigma(Rng(9))
    sigma = s.cell_average(rte.solve_grid(24)).reshape(24, 24)
    intensity, sweeps = solve_rte(sigma, i_in=1.0)
    assert sweeps > 1
    assert intensity.min() >= -1e-12 and intensity.max() <= 1.0 + 1e-12


def test_rte_rejects_negative_sigma():
    with pytest.raises(ValueError):
        solve_rte(-np.ones((4, 4)))


def test_observation_restriction_is_exact_for_bilinear_fields():
    n = 16
    xc = (np.arange(n) + 0.5) / n
    cells = 1.0 + 2.0 * xc[None, :] + 3.0 * xc[:, None]
    target = rect2d(11, 11, "cell")  # interior points only
    vals = rte.restrict_bilinear(cells, target)
    xy = target.nodes()
    assert np.allclose(vals, 1.0 + 2.0 * xy[:, 0] + 3.0 * xy[:, 1], atol=1e-13)


# --- datasets ---------------------------------------------------------------


@pytest.mark.parametrize("tag", ["elliptic", "heat", "rte"])
def test_dataset_shapes_and_determinism(tag):
    a = generate_dataset(tag, 2, 123)
    b = generate_dataset(tag, 2, 123)
    prob = get_problem(tag)
    assert a.inputs.shape == (2, prob.input_grid.size) and a.outputs.shape == (2, prob.output_grid.size)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.outputs, b.outputs)
    assert np.array_equal(a.seeds, b.seeds)
    assert np.all(np.isfinite(a.inputs)) and np.all(np.isfinite(a.outputs))


def test_elliptic_output_equals_sampled_kappa():
    d = generate_dataset("elliptic", 1, 5)
    params = get_problem("elliptic").sample(Rng(int(d.seeds[0])).split("params"))
    kappa = sample_on_grid(params.kappa(), rect2d(10, 10, "cell")).values
    assert np.array_equal(d.outputs[0], kappa)


def test_physical_bounds_of_generated_rows():
    ell = generate_dataset("elliptic", 5, 1)
    assert ell.inputs.min() >= 0.0
    r = generate_dataset("rte", 3, 1)
    assert r.inputs.min() >= -1e-12 and r.inputs.max() <= 1.0 + 1e-12


def test_noise_statistics():
    zero = Problem(
        tag="zero",
        input_grid=line1d(0, 1, 2),
        output_grid=line1d(0, 1, 5),
        transfer_grid=line1d(0, 1, 9),
        metric="l2",
        d_low=1,
        intrinsic_dim=0,
        sample=lambda rng: None,
        forward=lambda p, profile: np.zeros(2),
        discretize=lambda p, grid: np.zeros(grid.size),
    )
    PROBLEMS["zero"] = zero
    try:
        d = generate_dataset("zero", 10_000, 3, noise_sigma=0.1)
    finally:
        del PROBLEMS["zero"]
    var = d.outputs.var(axis=0)
    assert np.all(np.abs(var - 0.01) < 0.05 * 0.01)


def test_regeneration_from_seeds_and_grid_change():
    d = generate_dataset("heat", 4, 77)
    again = dataset_mod.from_seeds("heat", d.seeds)
    assert np.array_equal(d.inputs, again.inputs) and np.array_equal(d.outputs, again.outputs)
    fine = with_output_grid(d, line1d(0, 2, 127))
    assert fine.outputs.shape == (4, 127)
    assert np.array_equal(fine.inputs, d.inputs)
    direct = generate_dataset("heat", 4, 77, output_grid=line1d(0, 2, 127))
    assert np.array_equal(direct.outputs, fine.outputs)


def test_sample_failure_names_index():
    bad = Problem(
        tag="bad",
        input_grid=line1d(0, 1, 2),
        output_grid=line1d(0, 1, 2),
        transfer_grid=line1d(0, 1, 3),
        metric="l2",
        d_low=1,
        intrinsic_dim=1,
        sample=lambda rng: rng.uniform(),
        forward=lambda p, profile: np.zeros(2) if p < 0.9 else 1 / 0,
        discretize=lambda p, grid: np.zeros(grid.size),
    )
    PROBLEMS["bad"] = bad
    try:
        with pytest.raises(SampleError) as info:
            generate_dataset("bad", 200, 1)
    finally:
        del PROBLEMS["bad"]
    assert info.value.index >= 0


def test_dataset_validation():
    d = generate_dataset("heat", 3, 1)
    with pytest.raises(ValueError):
        dataset_mod.Dataset("heat", d.inputs, d.outputs[:2], d.input_grid, d.output_grid, d.seeds)
    with pytest.raises(ValueError):
        generate_dataset("heat", 0, 1)
    with pytest.raises(ValueError):
        generate_dataset("unknown", 1, 1)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_take_selects_rows(seed):
    d = generate_dataset("heat", 5, seed)
    sub = d.take([4, 1])
    assert np.array_equal(sub.inputs, d.inputs[[4, 1]])
    assert np.array_equal(sub.seeds, d.seeds[[4, 1]])


def test_heat_quadrature_on_observation_grid():
    assert make_quadrature(get_problem("heat").output_grid).weights.sum() == pytest.approx(2.0, abs=1e-12)
