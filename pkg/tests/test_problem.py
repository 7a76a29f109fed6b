import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from illposed.errors import InvalidArgumentError
from illposed.problem import (
    Grid,
    InverseProblem,
    TestFunction,
    build_convolution_operator,
    evaluate_test_function,
    make_problem,
    read_problem_csv,
    save_problem_csv,
    sigma_from_snr,
    synthesize_observations,
)

from oracles import q_exact_f3


def test_grid_points_and_spacing():
    g = Grid(4.0, 8)
    assert np.allclose(g.points, [(i + 1) * 0.5 for i in range(8)])
    assert g.spacing == 0.5
    assert g.points[-1] == pytest.approx(4.0)
    assert np.all(np.diff(g.points) > 0)


@pytest.mark.parametrize("T,n", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
def test_grid_rejects_bad_arguments(T, n):
    with pytest.raises(InvalidArgumentError):
        Grid(T, n)


def test_zero_kernel_gives_zero_matrix():
    Q = build_convolution_operator(lambda x: np.zeros_like(x), Grid(3.0, 10))
    assert np.array_equal(Q, np.zeros((10, 10)))


def test_operator_lower_triangular_positive_diagonal():
    Q = build_convolution_operator("exp", Grid(4.0, 32))
    assert np.all(np.triu(Q, 1) == 0)
    assert np.all(np.diag(Q) > 0)


def test_unknown_kernel():
    with pytest.raises(InvalidArgumentError):
        build_convolution_operator("gauss", Grid(1.0, 4))


def _f3_error(n):
    g = Grid(4.0, n)
    Q = build_convolution_operator("exp", g)
    return np.max(np.abs(Q @ evaluate_test_function("f3", g) - q_exact_f3(g.points)))


def test_quadrature_accuracy_on_f3():
    assert _f3_error(64) <= 5e-3


def test_closed_form_matches_high_resolution_quadrature():
    # the closed form itself, checked independently of the package
    for x in (0.5, 2.0, 4.0):
        val, _ = integrate.quad(lambda t: np.exp(-(x - t)) * np.exp(-t / 2), 0, x)
        assert val == pytest.approx(q_exact_f3(x), rel=1e-12)
    assert _f3_error(4096) < _f3_error(64) / 1000


def test_quadrature_is_second_order():
    errs = [_f3_error(n) for n in (32, 64, 128)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    for r in ratios:
        assert 3.5 < r < 4.5


def test_quadrature_against_adaptive_integration_f1():
    g = Grid(4.0, 256)
    q = build_convolution_operator("exp", g) @ evaluate_test_function("f1", g)
    for i in (10, 100, 255):
        x = g.points[i]
        ref, _ = integrate.quad(lambda t: np.exp(-(x - t)) * t**2 * np.exp(-3 * t), 0, x)
        assert q[i] == pytest.approx(ref, abs=5e-5)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), slope=st.floats(-5, 5), T=st.floats(0.1, 10), n=st.integers(1, 60))
def test_linear_functions_integrate_exactly_up_to_first_cell(a, slope, T, n):
    g = Grid(T, n)
    Q = build_convolution_operator(lambda x: np.ones_like(x), g)
    x = g.points
    f = a + slope * x
    exact = a * x + 0.5 * slope * x**2
    h = g.spacing
    bound = h * abs(slope * h) + 1e-9 * (1 + np.abs(exact))
    assert np.all(np.abs(Q @ f - exact) <= bound)


def test_test_function_values():
    g = Grid(2.0, 2)  # points 1, 2
    assert evaluate_test_function("f3", g)[1] == pytest.approx(np.exp(-1), rel=1e-15)
    assert evaluate_test_function("f1", g)[0] == pytest.approx(0.049787, abs=1e-6)
    assert evaluate_test_function("f2", g)[0] == pytest.approx(0.018316, abs=1e-6)
    tiny = Grid(1e-12, 1)
    assert evaluate_test_function(TestFunction.F3, tiny)[0] == pytest.approx(1.0)


def test_test_functions_nonnegative():
    g = Grid(4.0, 200)
    for fid in TestFunction:
        assert np.all(evaluate_test_function(fid, g) >= 0)


def test_unknown_test_function():
    with pytest.raises(InvalidArgumentError):
        TestFunction.parse("f9")


def test_sigma_from_snr_definition():
    T = 4.0
    q = np.full(16, np.sqrt(T / 16))  # ||q|| = sqrt(T)
    assert sigma_from_snr(q, 1.0, T) == pytest.approx(1.0)
    assert sigma_from_snr(q, 2.0, T) == pytest.approx(0.5 * sigma_from_snr(q, 1.0, T))


def test_sigma_from_snr_sample_convention_ratio():
    q = np.linspace(0.1, 1.0, 32)
    T, snr = 4.0, 3.0
    sigma = sigma_from_snr(q, snr, T, convention="sample")
    rms = np.sqrt(np.mean(q**2))
    assert rms / (sigma * np.sqrt(T / q.size)) == pytest.approx(snr)


def test_sigma_from_snr_continuous_convention():
    q = np.linspace(0.1, 1.0, 32)
    assert sigma_from_snr(q, 3.0, 4.0, convention="continuous") == pytest.approx(
        np.sqrt(np.mean(q**2)) / 3.0)


def test_sigma_from_snr_errors():
    with pytest.raises(InvalidArgumentError):
        sigma_from_snr(np.zeros(4), 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        sigma_from_snr(np.ones(4), 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        sigma_from_snr(np.ones(4), 1.0, 1.0, convention="peak")


def test_noise_scale_matches_empirical_std():
    g = Grid(4.0, 32)
    Q = build_convolution_operator("exp", g)
    f = evaluate_test_function("f1", g)
    sigma = sigma_from_snr(Q @ f, 3.0, g.T)
    prob = InverseProblem(g, Q, Q @ f, sigma, f)
    rng = np.random.default_rng(7)
    resid = np.array([synthesize_observations(Q, f, sigma, g, rng) - Q @ f for _ in range(10_000)])
    assert np.std(resid) == pytest.approx(prob.noise_scale, rel=0.02)


def test_synthesize_noiseless_and_deterministic():
    g = Grid(4.0, 16)
    Q = build_convolution_operator("exp", g)
    f = evaluate_test_function("f2", g)
    assert np.array_equal(synthesize_observations(Q, f, 0.0, g, 1), Q @ f)
    a = synthesize_observations(Q, f, 0.3, g, 123)
    b = synthesize_observations(Q, f, 0.3, g, 123)
    assert np.array_equal(a, b)


def test_synthesize_variance():
    g = Grid(4.0, 16)
    Q = build_convolution_operator("exp", g)
    f = evaluate_test_function("f1", g)
    sigma = 0.2
    d = np.array([synthesize_observations(Q, f, sigma, g, s) - Q @ f for s in range(10_000)])
    assert np.var(d, ddof=1) == pytest.approx(sigma**2 * g.T / g.n, rel=0.03)


def test_synthesize_dimension_mismatch():
    g = Grid(1.0, 4)
    with pytest.raises(InvalidArgumentError):
        synthesize_observations(np.eye(4), np.ones(3), 0.1, g, 0)


def test_make_problem_consistency():
    p = make_problem("f1", 32, 3.0, seed=0)
    assert p.Q.shape == (32, 32)
    assert np.array_equal(p.q, p.Q @ p.f_true)
    p0 = make_problem("f1", 32, 3.0, sigma=0.0)
    assert np.array_equal(p0.y, p0.Q @ p0.f_true)


def test_problem_csv_round_trip(tmp_path):
    p = make_problem("f2", 16, 5.0, seed=3)
    path = tmp_path / "prob.csv"
    save_problem_csv(p, path)
    data = read_problem_csv(path)
    assert np.array_equal(data["x"], p.grid.points)
    assert np.array_equal(data["y"], p.y)
    assert np.array_equal(data["f_true"], p.f_true)
    assert np.array_equal(data["q"], p.q)


def test_problem_csv_requires_x_and_y(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,f_true\n1,2\n")
    with pytest.raises(InvalidArgumentError):
        read_problem_csv(path)
